"""
Integradores del sistema multiescala y de la ecuación límite.

    solve_multiscale   EDO aleatoria lenta/rápida (RK4, paso <= ε/8)
    solve_rde          ecuación rugosa, esquema de Davie con refinamiento por mitades
    solve_young        integración de Young (Euler a izquierda o Heun)
    oracle_1d          solución cerrada 1-D x_t = F^{-1}(X_t), F' = 1/f

Los campos vectoriales se evalúan sobre lotes de estados de forma (n, dim).
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from . import hermite
from .exceptions import Blowup, DimensionMismatch, FieldVanishes, HorizonTooShort, NoConvergence, RegularityTooLow
from .noise import TimeGrid
from .roughpath import holder_exponent

logger = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e8
JACOBIAN_STEP = 1e-6
YOUNG_MIN_EXPONENT = 0.55


# ---------------------------------------------------------------------------
# Campos vectoriales
# ---------------------------------------------------------------------------

class VectorField:
    """Campo f: R^dim -> R^dim. `fn` recibe y devuelve arreglos (n, dim)."""

    def __init__(self, fn, dim, jacobian=None, name=''):
        self.fn = fn
        self.dim = dim
        self._jacobian = jacobian
        self.name = name or getattr(fn, '__name__', 'campo')

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.fn(x), dtype=float).reshape(x.shape)

    def jacobian(self, x):
        """Df(x) con forma (n, dim, dim); diferencias centradas si no hay forma cerrada."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self._jacobian is not None:
            return np.broadcast_to(np.asarray(self._jacobian(x), dtype=float), x.shape + (self.dim,))
        columns = []
        for b in range(self.dim):
            shift = np.zeros(self.dim)
            shift[b] = JACOBIAN_STEP
            columns.append((self(x + shift) - self(x - shift)) / (2 * JACOBIAN_STEP))
        return np.stack(columns, axis=-1)

    def to_json(self):
        return {'type': 'callable', 'name': self.name}


class LinearField(VectorField):
    def __init__(self, matrix, name=''):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatch("La matriz del campo lineal debe ser cuadrada")
        super().__init__(lambda x: x @ self.matrix.T, self.matrix.shape[0], lambda x: self.matrix, name or 'lineal')

    def to_json(self):
        return {'type': 'linear', 'matrix': self.matrix.tolist()}


class ConstantField(VectorField):
    def __init__(self, vector, name=''):
        self.vector = np.atleast_1d(np.asarray(vector, dtype=float))
        dim = len(self.vector)
        super().__init__(
            lambda x: np.broadcast_to(self.vector, x.shape).copy(), dim,
            lambda x: np.zeros((dim, dim)), name or 'constante',
        )

    def to_json(self):
        return {'type': 'constant', 'vector': self.vector.tolist()}


class CallableField(VectorField):
    """Campo escalar 1-D dado por f y, opcionalmente, su derivada."""

    def __init__(self, fn, derivative=None, name=''):
        self.scalar = fn
        self.derivative = derivative
        jacobian = None
        if derivative is not None:
            def jacobian(x):
                return np.asarray(derivative(x[:, 0]), dtype=float).reshape(-1, 1, 1)
        super().__init__(lambda x: np.asarray(fn(x[:, 0]), dtype=float).reshape(-1, 1), 1, jacobian, name)


def as_field(f, dim=1):
    if isinstance(f, VectorField):
        return f
    if callable(f):
        return VectorField(f, dim)
    raise TypeError("Se esperaba un VectorField o un callable")


@dataclass(frozen=True)
class MultiscaleSystem:
    dim: int
    fields: tuple
    observables: tuple
    x0: np.ndarray
    n_split: int = None

    def __post_init__(self):
        fields = tuple(as_field(f, self.dim) for f in self.fields)
        if len(fields) != len(self.observables):
            raise DimensionMismatch("Se necesita un campo por observable")
        if any(f.dim != self.dim for f in fields):
            raise DimensionMismatch("Todos los campos deben tener la dimensión del sistema")
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (self.dim,):
            raise DimensionMismatch("x0 debe tener dimensión dim")
        object.__setattr__(self, 'fields', fields)
        object.__setattr__(self, 'observables', tuple(self.observables))
        object.__setattr__(self, 'x0', x0)
        if self.n_split is None:
            object.__setattr__(self, 'n_split', len(fields))

    def alphas(self, epsilon, h=None):
        """α_k(ε) por canal; observables sin perfil de Hermite usan ε^{-1/2}."""
        values = []
        for observable in self.observables:
            profile = getattr(observable, 'profile', None)
            if h is None or profile is None or profile.is_zero:
                values.append(epsilon**-0.5)
            else:
                values.append(hermite.scaling_rule(profile.rank, h).alpha(epsilon))
        return values


@dataclass(frozen=True)
class SolutionPath:
    grid: TimeGrid
    states: np.ndarray
    scheme: str
    step_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if not np.all(np.isfinite(states)):
            raise Blowup("La solución contiene valores no finitos")
        object.__setattr__(self, 'states', states)

    @property
    def terminal(self):
        return self.states[..., -1, :]


# ---------------------------------------------------------------------------
# Utilidades
# ---------------------------------------------------------------------------

def _check_blowup(x, step, time, window=None):
    size = np.max(np.abs(x)) if x.size else 0.0
    if not np.isfinite(size) or size > BLOWUP_THRESHOLD:
        worst = int(np.argmax(np.where(np.isfinite(x), np.abs(x), np.inf).max(axis=-1)))
        diagnostics = {
            'state': x[worst].tolist(),
            'path': worst,
            'step': int(step),
            'time': float(time),
        }
        if window is not None:
            diagnostics['driver_window'] = np.asarray(window)[..., worst, :].tolist() if np.ndim(window) > 2 else None
        logger.error(f"Explosión de la solución en t={time:.6g} (paso {step}): {diagnostics['state']}")
        raise Blowup(f"La norma del estado supera {BLOWUP_THRESHOLD:g} en t={time:.6g}", diagnostics)


def _as_batch(x0, n):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.ndim == 1:
        return np.broadcast_to(x0, (n, len(x0))).copy()
    return x0.copy()


# ---------------------------------------------------------------------------
# Sistema multiescala
# ---------------------------------------------------------------------------

def solve_multiscale(system, epsilon, fast_path, fast_grid, t_max, h=None, alphas=None, record_every=1):
    """
    RK4 de ẋ = Σ_k α_k(ε) f_k(x) G_k(y_{t/ε}) con el ruido interpolado linealmente
    entre puntos de la grilla rápida y paso lento <= ε/8.

    `fast_path` es una fila (count,) o un lote (n, count). `record_every=None`
    guarda solo el estado inicial y el final.
    """
    fast = np.atleast_2d(np.asarray(fast_path, dtype=float))
    if fast.shape[-1] != fast_grid.count:
        raise DimensionMismatch("La trayectoria rápida no coincide con su grilla")
    n_fast = int(round(t_max / (epsilon * fast_grid.step)))
    if n_fast < 1 or n_fast + 1 > fast_grid.count:
        raise HorizonTooShort(
            f"La trayectoria rápida no cubre [0, {t_max}/ε]",
            {'required': n_fast + 1, 'available': fast_grid.count},
        )
    if record_every is not None and n_fast % record_every:
        raise ValueError("record_every debe dividir el número de pasos")

    alphas = np.asarray(alphas if alphas is not None else system.alphas(epsilon, h), dtype=float)
    drivers = np.stack([alpha * observable(fast[:, : n_fast + 1]) for observable, alpha in zip(system.observables, alphas)], axis=-1)
    slow_step = epsilon * fast_grid.step
    n_sub = max(1, math.ceil(slow_step / (epsilon / 8.0) - 1e-12))
    dt = slow_step / n_sub

    def rhs(x, g):
        total = np.zeros_like(x)
        for k, f in enumerate(system.fields):
            weight = g[:, k:k + 1]
            if np.any(weight):
                total += f(x) * weight
        return total

    x = _as_batch(system.x0, fast.shape[0])
    recorded = [x.copy()]
    max_norm = float(np.max(np.abs(x)))
    for i in range(n_fast):
        g0, g1 = drivers[:, i], drivers[:, i + 1]
        for s in range(n_sub):
            ga = g0 + (s / n_sub) * (g1 - g0)
            gm = g0 + ((s + 0.5) / n_sub) * (g1 - g0)
            gb = g0 + ((s + 1) / n_sub) * (g1 - g0)
            k1 = rhs(x, ga)
            k2 = rhs(x + 0.5 * dt * k1, gm)
            k3 = rhs(x + 0.5 * dt * k2, gm)
            k4 = rhs(x + dt * k3, gb)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_blowup(x, i + 1, (i + 1) * slow_step, drivers[:, max(0, i - 4): i + 2].transpose(1, 0, 2))
        max_norm = max(max_norm, float(np.max(np.abs(x))))
        if record_every is not None and (i + 1) % record_every == 0:
            recorded.append(x.copy())
    if record_every is None:
        recorded.append(x.copy())
        grid = TimeGrid(n_fast * slow_step, 2)
    else:
        grid = TimeGrid(slow_step * record_every, n_fast // record_every + 1)

    states = np.stack(recorded, axis=1)
    if np.ndim(fast_path) == 1:
        states = states[0]
    return SolutionPath(
        grid=grid,
        states=states,
        scheme='rk4',
        step_stats={'step': dt, 'substeps': n_sub, 'epsilon': epsilon, 'alphas': alphas.tolist(), 'max_norm': max_norm},
    )


# ---------------------------------------------------------------------------
# Ecuaciones rugosas y de Young
# ---------------------------------------------------------------------------

def _strides(count, min_steps):
    """Pasos diádicos que dividen count-1, del más grueso al más fino."""
    total = count - 1
    stride = 1
    while total % (stride * 2) == 0 and total // (stride * 2) >= min_steps:
        stride *= 2
    strides = []
    while stride >= 1:
        strides.append(stride)
        stride //= 2
    return strides


def _refine(integrate_at, count, tolerance, refine, min_steps, scheme):
    """
    Sin refinamiento integra una vez en la grilla completa (converged=None: nada
    se comparó). Con refinamiento duplica la resolución hasta que dos niveles
    difieran menos de `tolerance`; si la grilla no admite dos niveles, si el
    refinamiento se estanca o si se agota la grilla, lanza NoConvergence.
    """
    if not refine:
        return integrate_at(1), 1, [], None
    strides = _strides(count, min_steps)
    if len(strides) < 2:
        raise NoConvergence(
            f"La grilla de {count} puntos no admite refinamiento para {scheme} con min_steps={min_steps}",
            {'count': count, 'min_steps': min_steps},
        )
    previous, differences = None, []
    for stride in strides:
        states = integrate_at(stride)
        if previous is not None:
            difference = float(np.max(np.abs(states[..., ::2, :] - previous)))
            differences.append(difference)
            logger.debug(f"{scheme}: paso {stride}, diferencia con el nivel anterior {difference:.3e}")
            if difference < tolerance:
                return states, stride, differences, True
            # estancamiento: dos refinamientos seguidos sin reducir la diferencia
            if len(differences) >= 3 and differences[-1] >= differences[-2] >= differences[-3]:
                raise NoConvergence(
                    f"El refinamiento de {scheme} se estancó (diferencias {differences[-2]:.3e} -> {differences[-1]:.3e})",
                    {'differences': differences},
                )
        previous = states
    raise NoConvergence(
        f"{scheme} no alcanzó la tolerancia {tolerance:.1e} en la grilla más fina (última diferencia {differences[-1]:.3e})",
        {'differences': differences, 'tolerance': tolerance},
    )


def _davie_step(fields, x, dX, dXX):
    values = np.stack([f(x) for f in fields], axis=1)
    update = np.einsum('nk,nka->na', dX, values)
    for j, f in enumerate(fields):
        jac = f.jacobian(x)
        directional = np.einsum('nab,nib->nia', jac, values)
        update += np.einsum('ni,nia->na', dXX[:, :, j], directional)
    return x + update


def solve_rde(fields, lift, x0, drift=None, tolerance=1e-6, refine=True, min_steps=16):
    """
    Esquema de Davie x_{t+h} = x_t + Σ_k f_k X^k + Σ_{i,j} Df_j f_i 𝕏^{ij} (+ b h),
    refinando a la mitad hasta que dos niveles difieran menos de `tolerance`
    (NoConvergence si no lo logra). Con refine=False integra en la grilla completa.
    """
    dim = np.atleast_1d(np.asarray(x0, dtype=float)).shape[-1]
    fields = [as_field(f, dim) for f in fields]
    if len(fields) != lift.d:
        raise DimensionMismatch("Se necesita un campo por canal del lift")
    drift = None if drift is None else as_field(drift, dim)
    batch = lift.batch_shape
    n = int(np.prod(batch)) if batch else 1
    x_all = lift.x.reshape((n, lift.count, lift.d))
    grid = lift.grid
    stats_box = {'max_field_norm': 0.0}

    def integrate_at(stride):
        indices = np.arange(0, lift.count, stride)
        areas = lift.areas(indices[:-1], indices[1:]).reshape((n, len(indices) - 1, lift.d, lift.d))
        increments = np.diff(x_all[:, indices, :], axis=1)
        x = _as_batch(x0, n)
        states = [x.copy()]
        h = stride * grid.step
        for m in range(len(indices) - 1):
            x_next = _davie_step(fields, x, increments[:, m], areas[:, m])
            if drift is not None:
                x_next = x_next + drift(x) * h
            x = x_next
            _check_blowup(x, m + 1, (m + 1) * h)
            states.append(x.copy())
        stats_box['max_field_norm'] = max(
            stats_box['max_field_norm'], max(float(np.max(np.abs(f(x)))) for f in fields),
        )
        return np.stack(states, axis=1)

    states, stride, differences, converged = _refine(integrate_at, lift.count, tolerance, refine, min_steps, 'davie')
    return SolutionPath(
        grid=TimeGrid(grid.step * stride, (lift.count - 1) // stride + 1),
        states=states.reshape(batch + states.shape[1:]) if batch else states[0],
        scheme='davie',
        step_stats={'stride': stride, 'differences': differences, 'converged': converged, 'lift': lift.convention, **stats_box},
    )


def solve_young(fields, driver, grid, x0, tolerance=1e-6, refine=True, scheme='euler', min_steps=16, check_regularity=True):
    """Integral de Young con Euler a izquierda (o Heun) y refinamiento por mitades."""
    arr = np.asarray(driver, dtype=float)
    single = arr.ndim <= 2
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim == 2:
        arr = arr[None]
    n, count, d = arr.shape
    if count != grid.count:
        raise DimensionMismatch("El driver no coincide con la grilla")
    dim = np.atleast_1d(np.asarray(x0, dtype=float)).shape[-1]
    fields = [as_field(f, dim) for f in fields]
    if len(fields) != d:
        raise DimensionMismatch("Se necesita un campo por canal del driver")
    if scheme not in ('euler', 'heun'):
        raise ValueError(f"Esquema de Young desconocido: {scheme}")
    if check_regularity:
        exponent = holder_exponent(arr, grid.step)
        if exponent <= YOUNG_MIN_EXPONENT:
            raise RegularityTooLow(f"Exponente de Hölder estimado {exponent:.3f} <= {YOUNG_MIN_EXPONENT}")

    def velocity(x, dX):
        return sum(f(x) * dX[:, k:k + 1] for k, f in enumerate(fields))

    def integrate_at(stride):
        indices = np.arange(0, count, stride)
        increments = np.diff(arr[:, indices, :], axis=1)
        x = _as_batch(x0, n)
        states = [x.copy()]
        for m in range(len(indices) - 1):
            dX = increments[:, m]
            predictor = x + velocity(x, dX)
            x = predictor if scheme == 'euler' else x + 0.5 * (velocity(x, dX) + velocity(predictor, dX))
            _check_blowup(x, m + 1, (m + 1) * stride * grid.step)
            states.append(x.copy())
        return np.stack(states, axis=1)

    states, stride, differences, converged = _refine(integrate_at, count, tolerance, refine, min_steps, f'young-{scheme}')
    return SolutionPath(
        grid=TimeGrid(grid.step * stride, (count - 1) // stride + 1),
        states=states[0] if single else states,
        scheme=f'young-{scheme}',
        step_stats={'stride': stride, 'differences': differences, 'converged': converged},
    )


# ---------------------------------------------------------------------------
# Oráculo 1-D
# ---------------------------------------------------------------------------

def _antiderivative_table(f, x0, lo, hi, max_panels=20000):
    """
    Nodos x_n y F(x_n) = ∫_{x0}^{x_n} du/f(u), avanzando desde x0 en ambas
    direcciones con paneles de ancho ~0.01·|f| hasta cubrir [lo, hi] en F.
    """
    def scalar(u):
        return float(f(np.array([u]))[0])

    sign = math.copysign(1.0, scalar(x0))

    def _march(direction, goal):
        # F cambia con signo direction*sign al avanzar en `direction`
        trend = direction * sign
        nodes, values, position, value = [], [], x0, 0.0
        for panel in range(max_panels):
            if panel > 0 and trend * value >= trend * goal:
                return nodes, values
            width = min(0.01 * abs(scalar(position)), 0.5 * max(1.0, abs(position)))
            following = position + direction * width
            f_next = scalar(following)
            if abs(f_next) < 1e-12 or math.copysign(1.0, f_next) != sign:
                raise FieldVanishes(f"f se anula cerca de x={following:.6g}", {'x': following})
            piece, _ = integrate.quad(lambda u: 1.0 / scalar(u), position, following, epsabs=1e-14, epsrel=1e-13)
            position, value = following, value + piece
            if abs(position) > BLOWUP_THRESHOLD:
                break
            nodes.append(position)
            values.append(value)
        raise Blowup(
            "El objetivo del oráculo 1-D está fuera del rango alcanzable",
            {'goal': goal, 'reached': value, 'x': position},
        )

    up_nodes, up_values = _march(+1.0, hi if sign > 0 else lo)
    down_nodes, down_values = _march(-1.0, lo if sign > 0 else hi)
    nodes = np.array(down_nodes[::-1] + [x0] + up_nodes)
    values = np.array(down_values[::-1] + [0.0] + up_values)
    return nodes, values


def oracle_1d(f, x0, driver, grid=None, tolerance=1e-12):
    """
    Solución de Stratonovich 1-D x_t = F^{-1}(F(x0) + X_t - X_0) con F' = 1/f.
    F por cuadratura adaptativa en paneles, F^{-1} por bisección sobre el
    interpolante cúbico de Hermite de F.
    """
    arr = np.asarray(driver, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    grid = grid or TimeGrid(1.0 / (arr.shape[-1] - 1), arr.shape[-1])
    targets = arr - arr[:, :1]
    if isinstance(f, CallableField):
        scalar_f = f.scalar
    elif isinstance(f, VectorField):
        def scalar_f(u):
            return f(np.reshape(u, (-1, 1)))[:, 0]
    else:
        scalar_f = f

    def vectorised(u):
        return np.asarray(scalar_f(np.asarray(u, dtype=float)), dtype=float) * np.ones_like(u, dtype=float)

    f0 = float(vectorised(np.array([float(x0)]))[0])
    if f0 == 0.0:
        raise FieldVanishes(f"f se anula en x0={x0}", {'x': float(x0)})
    lo, hi = float(targets.min()), float(targets.max())
    nodes, values = _antiderivative_table(vectorised, float(x0), lo, hi)
    spline = CubicHermiteSpline(nodes, values, 1.0 / vectorised(nodes))

    flat = targets.ravel()
    increasing = f0 > 0
    keys = values if increasing else -values
    wanted = flat if increasing else -flat
    panel = np.clip(np.searchsorted(keys, wanted) - 1, 0, len(nodes) - 2)
    left, right = nodes[panel].copy(), nodes[panel + 1].copy()
    for _ in range(200):
        middle = 0.5 * (left + right)
        below = (spline(middle) < flat) == increasing
        left = np.where(below, middle, left)
        right = np.where(below, right, middle)
        if np.max(right - left) <= tolerance * max(1.0, np.max(np.abs(middle))):
            break
    states = (0.5 * (left + right)).reshape(targets.shape)[..., None]
    return SolutionPath(
        grid=grid,
        states=states[0] if single else states,
        scheme='oracle-1d',
        step_stats={'panels': len(nodes) - 1, 'bisection_tolerance': tolerance},
    )
