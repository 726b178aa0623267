"""
Álgebra de caminos rugosos sobre grillas uniformes.

Un LiftedPath guarda la trayectoria X (con X_0 = 0) y el proceso de segundo
orden 𝕏_{0,t_i}. Los incrementos de dos parámetros se reconstruyen con la
relación de Chen: 𝕏_{s,t} = 𝕏_{0,t} - 𝕏_{0,s} - X_{0,s} ⊗ X_{s,t}.
Todas las operaciones aceptan un eje de lote inicial (una fila por trayectoria).
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from django.conf import settings
from scipy import integrate, stats

from .exceptions import DimensionMismatch, GridMismatch, HorizonTooShort, NotCentred
from .noise import TimeGrid
from .workers import path_generator

logger = logging.getLogger(__name__)

CONVENTION_ITO = 'ito'
CONVENTION_STRATONOVICH = 'stratonovich'


def default_pair_budget():
    if settings.configured:
        return int(getattr(settings, 'HOMOLAB', {}).get('PAIR_BUDGET', 2**16))
    return 2**16


@dataclass(frozen=True)
class LiftedPath:
    grid: TimeGrid
    x: np.ndarray
    xx: np.ndarray
    convention: str = CONVENTION_ITO
    block_split: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        xx = np.asarray(self.xx, dtype=float)
        if x.ndim < 2 or x.shape[-2] != self.grid.count:
            raise DimensionMismatch("x debe tener forma (..., grid.count, d)")
        if xx.shape != x.shape + (x.shape[-1],):
            raise DimensionMismatch("xx debe tener forma (..., grid.count, d, d)")
        x.setflags(write=False)
        xx.setflags(write=False)
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'xx', xx)

    @property
    def d(self):
        return self.x.shape[-1]

    @property
    def count(self):
        return self.grid.count

    @property
    def batch_shape(self):
        return self.x.shape[:-2]

    def __len__(self):
        return self.x.shape[0] if self.batch_shape else 1

    def __getitem__(self, index):
        if not self.batch_shape:
            raise TypeError("El lift no tiene eje de lote")
        return replace(self, x=self.x[index], xx=self.xx[index], meta=dict(self.meta))

    def __iter__(self):
        if not self.batch_shape:
            yield self
            return
        for i in range(len(self)):
            yield self[i]

    def increments(self, i, j):
        return self.x[..., j, :] - self.x[..., i, :]

    def areas(self, i, j):
        """𝕏_{t_i, t_j} para arreglos de índices i, j."""
        start = self.x[..., i, :] - self.x[..., :1, :] if np.ndim(i) else self.x[..., i, :] - self.x[..., 0, :]
        step = self.x[..., j, :] - self.x[..., i, :]
        out = self.xx[..., j, :, :] - self.xx[..., i, :, :] - start[..., :, None] * step[..., None, :]
        if self.block_split is not None:
            n = self.block_split
            out = np.array(out, copy=True)
            out[..., :n, n:] = 0.0
            out[..., n:, :n] = 0.0
        return out

    def restrict(self, stride):
        """Submuestreo cada `stride` puntos conservando el 𝕏 exacto en los puntos retenidos."""
        if stride < 1 or (self.count - 1) % stride:
            raise GridMismatch("stride debe dividir count - 1")
        if stride == 1:
            return self
        keep = np.arange(0, self.count, stride)
        return replace(
            self,
            grid=TimeGrid(self.grid.step * stride, len(keep)),
            x=self.x[..., keep, :],
            xx=self.xx[..., keep, :, :],
            meta=dict(self.meta),
        )


@dataclass(frozen=True)
class HolderReport:
    alpha: float
    first_order_norm: float
    second_order_norm: float
    pair_budget: int
    seed: int = 0

    def to_json(self):
        return {
            'alpha': self.alpha,
            'first_order_norm': self.first_order_norm,
            'second_order_norm': self.second_order_norm,
            'pair_budget': self.pair_budget,
            'seed': self.seed,
        }


# ---------------------------------------------------------------------------
# Construcción de lifts
# ---------------------------------------------------------------------------

def _as_paths(paths):
    arr = np.asarray(paths, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim not in (2, 3):
        raise DimensionMismatch("Se esperaba una matriz (count, d) o un lote (n, count, d)")
    if arr.shape[-2] < 2:
        raise DimensionMismatch("La trayectoria necesita al menos 2 puntos")
    return arr


def _default_grid(count):
    return TimeGrid(1.0 / (count - 1), count)


def _accumulate(x, geometric):
    x = x - x[..., :1, :]
    dx = np.diff(x, axis=-2)
    steps = x[..., :-1, :, None] * dx[..., None, :]
    if geometric:
        steps = steps + 0.5 * dx[..., :, None] * dx[..., None, :]
    xx = np.zeros(x.shape + (x.shape[-1],))
    np.cumsum(steps, axis=-3, out=xx[..., 1:, :, :])
    return x, xx


def canonical_lift(paths, grid=None):
    """Lift por sumas de Riemann a izquierda: 𝕏_{0,t_{i+1}} = 𝕏_{0,t_i} + X_{0,t_i} ⊗ δX_i."""
    arr = _as_paths(paths)
    grid = grid or _default_grid(arr.shape[-2])
    if grid.count != arr.shape[-2]:
        raise DimensionMismatch("La grilla no coincide con el largo de la trayectoria")
    x, xx = _accumulate(arr, geometric=False)
    return LiftedPath(grid=grid, x=x, xx=xx, convention=CONVENTION_ITO)


def geometric_lift(paths, grid=None):
    """Lift de la interpolación lineal: sumas a izquierda más ½ δX ⊗ δX por paso."""
    arr = _as_paths(paths)
    grid = grid or _default_grid(arr.shape[-2])
    if grid.count != arr.shape[-2]:
        raise DimensionMismatch("La grilla no coincide con el largo de la trayectoria")
    x, xx = _accumulate(arr, geometric=True)
    return LiftedPath(grid=grid, x=x, xx=xx, convention=CONVENTION_STRATONOVICH)


def add_area_drift(lift, A):
    """𝕏_{s,t} + (t - s)·A, compatible con Chen."""
    A = np.asarray(A, dtype=float)
    if A.shape != (lift.d, lift.d):
        raise DimensionMismatch(f"A debe ser {lift.d}x{lift.d}")
    times = lift.grid.times - lift.grid.times[0]
    xx = lift.xx + times[:, None, None] * A
    drift = np.asarray(lift.meta.get('area_drift', np.zeros_like(A))) + A
    return replace(lift, xx=xx, meta={**lift.meta, 'area_drift': drift.tolist()})


def combine_blocks(first, second):
    """
    Lift conjunto de dos bloques de canales. Los términos cruzados de segundo
    orden se fijan en 0 en cada incremento.
    """
    if first.grid != second.grid:
        raise GridMismatch("Los bloques deben compartir la grilla")
    if first.batch_shape != second.batch_shape:
        raise DimensionMismatch("Los bloques deben tener el mismo número de trayectorias")
    d1, d2 = first.d, second.d
    x = np.concatenate([first.x, second.x], axis=-1)
    xx = np.zeros(x.shape + (d1 + d2,))
    xx[..., :d1, :d1] = first.xx
    xx[..., d1:, d1:] = second.xx
    return LiftedPath(
        grid=first.grid, x=x, xx=xx,
        convention=f"{first.convention}|{second.convention}",
        block_split=d1,
        meta={'blocks': [first.convention, second.convention]},
    )


def perturb_lift(lift, delta, direction=None):
    """Lift de X + δ·(t - t_0)·e, con la misma convención y deriva de área."""
    direction = np.zeros(lift.d) if direction is None else np.asarray(direction, dtype=float)
    if direction.shape != (lift.d,):
        raise DimensionMismatch("La dirección debe tener dimensión d")
    if not direction.any():
        direction[0] = 1.0
    times = lift.grid.times - lift.grid.times[0]
    moved = lift.x + delta * times[:, None] * direction
    x, xx = _accumulate(moved, geometric=lift.convention == CONVENTION_STRATONOVICH)
    perturbed = replace(lift, x=x, xx=xx, meta={k: v for k, v in lift.meta.items() if k != 'area_drift'})
    if 'area_drift' in lift.meta:
        perturbed = add_area_drift(perturbed, lift.meta['area_drift'])
    return perturbed


# ---------------------------------------------------------------------------
# Normas y métricas
# ---------------------------------------------------------------------------

def chen_defect(lift, sample_triples=1024, seed=0):
    """Máximo de |𝕏_{s,t} - 𝕏_{s,u} - 𝕏_{u,t} - X_{s,u} ⊗ X_{u,t}| sobre ternas muestreadas."""
    if lift.count < 3:
        return 0.0
    rng = path_generator(seed, 0)
    draws = np.sort(rng.integers(0, lift.count, size=(sample_triples, 3)), axis=1)
    draws = np.vstack([draws, [0, lift.count // 2, lift.count - 1]])
    valid = (draws[:, 0] < draws[:, 1]) & (draws[:, 1] < draws[:, 2])
    s, u, t = draws[valid].T
    defect = (
        lift.areas(s, t) - lift.areas(s, u) - lift.areas(u, t)
        - lift.increments(s, u)[..., :, None] * lift.increments(u, t)[..., None, :]
    )
    return float(np.max(np.abs(defect))) if defect.size else 0.0


def pair_schedule(count, pair_budget, seed=0):
    """Pares (i, j), i < j: todos los huecos diádicos, el intervalo completo y pares aleatorios."""
    first, second = [], []
    gaps, gap = [], 1
    while gap < count - 1:
        gaps.append(gap)
        gap *= 2
    gaps.append(count - 1)
    for gap in gaps:
        starts = np.arange(0, count - gap, gap)
        first.append(starts)
        second.append(starts + gap)
    if pair_budget:
        draws = path_generator(seed, 0).integers(0, count, size=(pair_budget, 2))
        lo, hi = draws.min(axis=1), draws.max(axis=1)
        keep = lo < hi
        first.append(lo[keep])
        second.append(hi[keep])
    return np.concatenate(first), np.concatenate(second)


def _norm(values, order):
    if order == 1:
        return np.linalg.norm(values, axis=-1)
    return np.linalg.norm(values, axis=(-2, -1))


def holder_norm(lift, alpha, pair_budget=None, seed=0):
    if not 1.0 / 3.0 < alpha < 1.0:
        raise ValueError("alpha debe estar en (1/3, 1)")
    pair_budget = default_pair_budget() if pair_budget is None else int(pair_budget)
    i, j = pair_schedule(lift.count, pair_budget, seed)
    gaps = (j - i) * lift.grid.step
    first = _norm(lift.increments(i, j), 1) / gaps**alpha
    second = np.sqrt(_norm(lift.areas(i, j), 2)) / gaps**alpha
    return HolderReport(
        alpha=alpha,
        first_order_norm=float(first.max()),
        second_order_norm=float(second.max()),
        pair_budget=pair_budget,
        seed=seed,
    )


def rough_distance_terms(a, b, alpha, pair_budget=None, seed=0):
    """Términos de primer y segundo orden de la métrica α-Hölder inhomogénea."""
    if a.grid != b.grid:
        raise GridMismatch("Los lifts deben compartir la grilla")
    if a.d != b.d or a.batch_shape != b.batch_shape:
        raise GridMismatch("Los lifts deben tener la misma dimensión y número de trayectorias")
    pair_budget = default_pair_budget() if pair_budget is None else int(pair_budget)
    i, j = pair_schedule(a.count, pair_budget, seed)
    gaps = (j - i) * a.grid.step
    first = _norm(a.increments(i, j) - b.increments(i, j), 1) / gaps**alpha
    second = _norm(a.areas(i, j) - b.areas(i, j), 2) / gaps ** (2 * alpha)
    first, second = first.max(axis=-1), second.max(axis=-1)
    if np.ndim(first) == 0:
        return float(first), float(second)
    return first, second


def rough_distance(a, b, alpha, pair_budget=None, seed=0):
    first, second = rough_distance_terms(a, b, alpha, pair_budget, seed)
    return first + second


# ---------------------------------------------------------------------------
# Funcionales escalados X^ε
# ---------------------------------------------------------------------------

def _fast_steps(ensemble, epsilon, t_max):
    if not 0 < epsilon < 1:
        raise ValueError("epsilon debe estar en (0, 1)")
    n_fast = int(round(t_max / (epsilon * ensemble.grid.step)))
    if n_fast < 1:
        raise HorizonTooShort("t_max/ε es menor que un paso de la grilla rápida")
    if n_fast + 1 > ensemble.grid.count:
        raise HorizonTooShort(
            f"El ensamble cubre {ensemble.grid.horizon:g} unidades, se requieren {n_fast * ensemble.grid.step:g}",
            {'required': n_fast + 1, 'available': ensemble.grid.count},
        )
    return n_fast


def _check_centred(observables):
    for observable in observables:
        if not observable.is_centred():
            raise NotCentred(f"El observable {observable.name} tiene c_0 = {observable.profile.coeffs[0]:.3e}")


def _fine_functionals(values, observables, epsilon, alphas, step):
    columns = [
        alpha * epsilon * integrate.cumulative_trapezoid(observable(values), dx=step, axis=-1, initial=0.0)
        for observable, alpha in zip(observables, alphas)
    ]
    return np.stack(columns, axis=-1)


def scaled_functionals(ensemble, observables, epsilon, alphas, t_max, stride=1):
    """
    X^{k,ε}_t = α_k ε ∫_0^{t/ε} G_k(y_u) du (trapecios) en la grilla lenta de paso ε·step,
    submuestreada cada `stride` puntos. Devuelve (grilla, arreglo (n_paths, count, d)).
    """
    if len(observables) != len(alphas):
        raise DimensionMismatch("Se necesita un escalamiento por observable")
    _check_centred(observables)
    n_fast = _fast_steps(ensemble, epsilon, t_max)
    if n_fast % stride:
        raise GridMismatch("stride debe dividir el número de pasos rápidos")
    values = ensemble.values[:, : n_fast + 1]
    x = _fine_functionals(values, observables, epsilon, alphas, ensemble.grid.step)[:, ::stride, :]
    return TimeGrid(epsilon * ensemble.grid.step * stride, n_fast // stride + 1), x


def scaled_functional_lift(ensemble, observables, epsilon, alphas, t_max, stride=1, geometric=False, chunk_size=256):
    """Lift de X^ε calculado a resolución fina y submuestreado cada `stride` puntos."""
    if len(observables) != len(alphas):
        raise DimensionMismatch("Se necesita un escalamiento por observable")
    _check_centred(observables)
    n_fast = _fast_steps(ensemble, epsilon, t_max)
    if n_fast % stride:
        raise GridMismatch("stride debe dividir el número de pasos rápidos")

    xs, xxs = [], []
    for start in range(0, ensemble.n_paths, chunk_size):
        values = ensemble.values[start: start + chunk_size, : n_fast + 1]
        fine = _fine_functionals(values, observables, epsilon, alphas, ensemble.grid.step)
        x, xx = _accumulate(fine, geometric=geometric)
        xs.append(x[:, ::stride])
        xxs.append(xx[:, ::stride])

    grid = TimeGrid(epsilon * ensemble.grid.step * stride, n_fast // stride + 1)
    logger.debug(f"Lift escalado ε={epsilon:g}: {ensemble.n_paths} trayectorias, {grid.count} puntos")
    return LiftedPath(
        grid=grid,
        x=np.concatenate(xs),
        xx=np.concatenate(xxs),
        convention=CONVENTION_STRATONOVICH if geometric else CONVENTION_ITO,
        meta={'epsilon': epsilon, 'alphas': list(alphas), 'observables': [o.name for o in observables]},
    )


# ---------------------------------------------------------------------------
# Regularidad y escalamiento de momentos
# ---------------------------------------------------------------------------

def holder_exponent(paths, step=1.0):
    """
    Exponente de Hölder estimado por regresión log-log de E|X_{t+δ} - X_t| sobre
    huecos diádicos δ. Para varias coordenadas devuelve el mínimo.
    """
    arr = np.asarray(paths, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :, None]
    elif arr.ndim == 2:
        arr = arr[:, :, None]
    count = arr.shape[1]
    lags = [2**j for j in range(int(math.log2(max(count // 8, 1))) + 1)]
    if len(lags) < 2:
        raise DimensionMismatch("La trayectoria es demasiado corta para estimar el exponente")
    exponents = []
    for k in range(arr.shape[2]):
        means = np.array([np.mean(np.abs(arr[:, lag:, k] - arr[:, :-lag, k])) for lag in lags])
        if np.all(means == 0):
            exponents.append(math.inf)
            continue
        fit = stats.linregress(np.log(np.array(lags) * step), np.log(means))
        exponents.append(float(fit.slope))
    return min(exponents)


def moment_exponents(lift, p, gaps):
    """
    Pendientes log-log de ‖X_{s,s+g}‖_{L^p} y ‖𝕏_{s,s+g}‖_{L^{p/2}} frente al hueco g
    (en puntos de grilla), con intervalos de confianza al 95%.
    """
    gaps = sorted(int(g) for g in gaps)
    if len(gaps) < 3 or gaps[0] < 1 or gaps[-1] >= lift.count:
        raise ValueError("Se necesitan al menos 3 huecos dentro de la grilla")
    first, second = [], []
    for gap in gaps:
        starts = np.arange(0, lift.count - gap, gap)
        increments = _norm(lift.increments(starts, starts + gap), 1)
        areas = _norm(lift.areas(starts, starts + gap), 2)
        first.append(np.mean(increments**p) ** (1.0 / p))
        second.append(np.mean(areas ** (p / 2.0)) ** (2.0 / p))
    first, second = np.array(first), np.array(second)
    times = np.array(gaps) * lift.grid.step
    if np.any(first <= 0) or np.any(second <= 0):
        logger.warning("Momentos nulos: trayectorias degeneradas, se omite el ajuste")
        return {'degenerate': True, 'gaps': times.tolist()}

    quantile = stats.t.ppf(0.975, len(gaps) - 2)

    def _fit(norms):
        fit = stats.linregress(np.log(times), np.log(norms))
        return {
            'slope': float(fit.slope),
            'stderr': float(fit.stderr),
            'ci': [float(fit.slope - quantile * fit.stderr), float(fit.slope + quantile * fit.stderr)],
            'norms': norms.tolist(),
        }

    return {'degenerate': False, 'p': p, 'gaps': times.tolist(), 'first': _fit(first), 'second': _fit(second)}
