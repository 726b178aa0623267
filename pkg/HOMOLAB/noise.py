"""
Muestreo de los procesos rápidos estacionarios y su descomposición condicional.

Procesos soportados:
    - incrementos de movimiento browniano fraccionario (fBM), por incrustación
      circulante exacta;
    - Ornstein-Uhlenbeck fraccionario (fOU) estacionario dy = -y dt + dB^H,
      normalizado a varianza 1;
    - cadena de Markov de estados finitos en tiempo continuo.

La parte condicional (ȳ, ỹ) usa la representación de Volterra del fOU respecto
del ruido blanco de Mandelbrot-van Ness.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, linalg, signal, special, stats
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    EmbeddingNotPSD,
    GridTooLarge,
    InvalidGenerator,
    NonStationary,
    NotIrreducible,
    QuadratureFailure,
    RankZero,
)
from .workers import CALIBRATION_INDEX, map_chunks, path_generator

logger = logging.getLogger(__name__)

ENSEMBLE_KINDS = ('fbm_increments', 'fou', 'markov_chain')
FOU_METHODS = ('exact_covariance', 'euler_burnin')

EMBEDDING_TOL = 1e-9
DENSE_LIMIT = 4096
QUADRATURE_TOL = 1e-8
TRUNCATION_LEVEL = 1e-10


# ---------------------------------------------------------------------------
# Tipos
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HurstParameter:
    h: float

    def __post_init__(self):
        h = float(self.h)
        if not 0.0 < h < 1.0:
            raise ValueError(f"El parámetro de Hurst debe estar en (0,1), se recibió {self.h}")
        object.__setattr__(self, 'h', h)

    @property
    def is_half(self):
        return abs(self.h - 0.5) < 1e-12

    def __float__(self):
        return self.h


def as_hurst(h):
    if isinstance(h, HurstParameter):
        return h
    return HurstParameter(h)


@dataclass(frozen=True)
class TimeGrid:
    """Grilla uniforme t_i = i*step, i = 0..count-1, con origen en 0."""
    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError("El paso de la grilla debe ser positivo y finito")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError("La grilla necesita al menos 2 puntos")
        object.__setattr__(self, 'step', float(self.step))
        object.__setattr__(self, 'count', int(self.count))

    @property
    def times(self):
        return np.arange(self.count) * self.step

    @property
    def horizon(self):
        return (self.count - 1) * self.step

    def index_of(self, t):
        """Índice de grilla más cercano a t (debe caer en la grilla)."""
        return int(round(t / self.step))

    def to_json(self):
        return {'step': self.step, 'count': self.count}


@dataclass(frozen=True)
class StationaryEnsemble:
    grid: TimeGrid
    values: np.ndarray
    kind: str
    h: HurstParameter = None
    normalized: bool = False
    seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"Tipo de ensamble desconocido: {self.kind}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != self.grid.count:
            raise ValueError("values debe tener forma (n_paths, grid.count)")
        if (self.kind == 'markov_chain') != (self.h is None):
            raise ValueError("h es obligatorio salvo para cadenas de Markov")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def n_paths(self):
        return self.values.shape[0]

    def header(self):
        """Metadatos serializables (cabecera de los contenedores)."""
        return {
            'grid': self.grid.to_json(),
            'kind': self.kind,
            'h': None if self.h is None else self.h.h,
            'normalized': self.normalized,
            'seed': self.seed,
            'n_paths': self.n_paths,
            'meta': self.meta,
        }


@dataclass(frozen=True)
class ConditionalSplit:
    anchor: int
    times: np.ndarray
    sigma_bar_sq: np.ndarray
    sigma_tilde_sq: np.ndarray


# ---------------------------------------------------------------------------
# Covarianzas cerradas
# ---------------------------------------------------------------------------

def fbm_covariance(s, t, h):
    """Cov(B_s, B_t) = ½(s^{2H} + t^{2H} - |t-s|^{2H})."""
    two_h = 2.0 * as_hurst(h).h
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("Los tiempos deben ser no negativos")
    value = 0.5 * (s**two_h + t**two_h - np.abs(t - s) ** two_h)
    return float(value) if value.ndim == 0 else value


def increment_correlation(t, h):
    """Correlación de incrementos unitarios de fBM a distancia t >= 1 (segunda diferencia exacta)."""
    two_h = 2.0 * as_hurst(h).h
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise ValueError("El desfase debe ser >= 1")
    value = 0.5 * (t + 1) ** two_h + 0.5 * (t - 1) ** two_h - t**two_h
    return float(value) if value.ndim == 0 else value


def _fgn_autocovariance(count, step, h):
    """Autocovarianza de los incrementos de fBM sobre un paso `step`."""
    two_h = 2.0 * h
    k = np.arange(count, dtype=float)
    gamma = 0.5 * (np.abs(k + 1) ** two_h - 2 * k**two_h + np.abs(k - 1) ** two_h)
    return gamma * step**two_h


def fou_variance(h):
    """Varianza estacionaria de dy = -y dt + dB^H sin normalizar: H·Γ(2H)."""
    h = as_hurst(h).h
    return h * special.gamma(2.0 * h)


def _check_quad(value, error, what):
    if not np.isfinite(value) or error > QUADRATURE_TOL:
        raise QuadratureFailure(
            f"Cuadratura de {what} no convergió (error estimado {error:.2e})",
            {'value': float(value), 'error': float(error)},
        )


@lru_cache(maxsize=65536)
def _fou_autocorrelation_cached(t, h):
    exponent = 1.0 - 2.0 * h
    norm = math.pi / (2.0 * math.sin(math.pi * h))
    if t == 0.0:
        return 1.0

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', integrate.IntegrationWarning)
        # [0, 1]: peso algebraico x^{1-2H} para la singularidad en el origen
        cut = 1.0 if t <= 50.0 else 1.0 / t
        low, err_low = integrate.quad(
            lambda x: math.cos(x * t) / (1.0 + x * x), 0.0, cut,
            weight='alg', wvar=(exponent, 0.0), epsabs=1e-13, epsrel=1e-12, limit=500,
        )
        if cut < 1.0:
            mid, err_mid = integrate.quad(
                lambda x: x**exponent / (1.0 + x * x), cut, 1.0,
                weight='cos', wvar=t, epsabs=1e-13, epsrel=1e-12, limit=500,
            )
            low, err_low = low + mid, err_low + err_mid
        # [1, ∞): integral de Fourier (QAWF)
        high, err_high = integrate.quad(
            lambda x: x**exponent / (1.0 + x * x), 1.0, np.inf,
            weight='cos', wvar=t, epsabs=1e-13, limlst=200,
        )

    value = (low + high) / norm
    _check_quad(value, (err_low + err_high) / norm, f"la autocorrelación fOU en t={t}")
    return value


def fou_autocorrelation(t, h):
    """
    Correlación estacionaria normalizada del fOU, ρ(t) = Cov(y_0, y_t)/Var(y_0).

    Se evalúa por cuadratura de la densidad espectral
    ρ(t) ∝ ∫_0^∞ cos(xt) x^{1-2H} / (1+x²) dx, normalizada para que ρ(0) = 1.
    """
    if t < 0:
        raise ValueError("El desfase debe ser no negativo")
    return _fou_autocorrelation_cached(float(t), as_hurst(h).h)


def fou_autocorrelation_table(lags, h):
    h = as_hurst(h).h
    return np.array([_fou_autocorrelation_cached(float(t), h) for t in np.asarray(lags, dtype=float)])


# ---------------------------------------------------------------------------
# Factorización de procesos gaussianos estacionarios
# ---------------------------------------------------------------------------

class _StationaryGaussianFactor:
    """
    Raíz de la covarianza Toeplitz definida por `acov`. Por defecto usa la
    incrustación circulante; si el espectro tiene negativos fuera de tolerancia
    cae a una factorización simétrica densa (solo para grillas pequeñas).
    """

    def __init__(self, acov, label=''):
        acov = np.asarray(acov, dtype=float)
        self.n = len(acov)
        self.label = label
        scale = max(abs(acov[0]), np.finfo(float).tiny)

        row = np.concatenate([acov, acov[-2:0:-1]])
        spectrum = np.fft.fft(row).real
        if spectrum.min() >= -EMBEDDING_TOL * scale:
            self.method = 'circulant'
            self._root = np.sqrt(np.clip(spectrum, 0.0, None) / len(row))
            return

        logger.warning(
            f"Incrustación circulante no semidefinida para {label} "
            f"(mínimo {spectrum.min():.3e}); usando factorización densa"
        )
        if self.n > DENSE_LIMIT:
            raise EmbeddingNotPSD(
                f"Espectro circulante negativo y grilla de {self.n} puntos excede {DENSE_LIMIT}",
                {'min_eigenvalue': float(spectrum.min())},
            )
        eigvals, eigvecs = linalg.eigh(linalg.toeplitz(acov))
        if eigvals.min() < -EMBEDDING_TOL * scale:
            raise EmbeddingNotPSD(
                f"La covarianza de {label} no es semidefinida positiva",
                {'min_eigenvalue': float(eigvals.min())},
            )
        self.method = 'dense'
        self._root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))

    def sample(self, rngs):
        if self.method == 'circulant':
            m = len(self._root)
            z = np.stack([rng.standard_normal(2 * m) for rng in rngs])
            w = self._root * (z[:, :m] + 1j * z[:, m:])
            return np.fft.fft(w, axis=1).real[:, : self.n]
        z = np.stack([rng.standard_normal(self.n) for rng in rngs])
        return z @ self._root.T


# ---------------------------------------------------------------------------
# Muestreadores
# ---------------------------------------------------------------------------

def sample_fbm(grid, h, n_paths, seed):
    """
    Incrementos exactos de fBM: values[:, i] = B_{t_{i+1}} - B_{t_i}.
    Las sumas acumuladas (ver fbm_paths) dan B en los tiempos (i+1)·step.
    """
    h = as_hurst(h)
    if n_paths < 1:
        raise ValueError("n_paths debe ser >= 1")
    factor = _StationaryGaussianFactor(_fgn_autocovariance(grid.count, grid.step, h.h), 'fBM')
    values = map_chunks(factor.sample, n_paths, seed)
    logger.debug(f"fBM H={h.h}: {n_paths} trayectorias, {grid.count} incrementos ({factor.method})")
    return StationaryEnsemble(
        grid=grid, values=values, kind='fbm_increments', h=h, normalized=False,
        seed=seed, meta={'factorization': factor.method},
    )


def fbm_paths(ensemble):
    """Trayectorias B_0 = 0, B_{t_1}, ..., B_{t_count} a partir de un ensamble de incrementos."""
    if ensemble.kind != 'fbm_increments':
        raise ValueError("Se esperaba un ensamble de incrementos de fBM")
    zeros = np.zeros((ensemble.n_paths, 1))
    return np.concatenate([zeros, np.cumsum(ensemble.values, axis=1)], axis=1)


def sample_fou(grid, h, n_paths, seed, method='exact_covariance', check_stationarity=True):
    """fOU estacionario normalizado a varianza unitaria."""
    h = as_hurst(h)
    if n_paths < 1:
        raise ValueError("n_paths debe ser >= 1")
    if method not in FOU_METHODS:
        raise ValueError(f"Método fOU desconocido: {method}")
    if h.is_half:
        logger.info("fOU con H = 1/2: proceso de Ornstein-Uhlenbeck clásico")

    if method == 'exact_covariance':
        if grid.count > DENSE_LIMIT:
            raise GridTooLarge(
                f"El método exacto admite a lo más {DENSE_LIMIT} puntos (se pidieron {grid.count})"
            )
        acov = fou_autocorrelation_table(grid.times, h)
        factor = _StationaryGaussianFactor(acov, 'fOU')
        values = map_chunks(factor.sample, n_paths, seed)
        meta = {'method': method, 'factorization': factor.method}
    else:
        values, meta = _sample_fou_euler(grid, h, n_paths, seed)
        if check_stationarity and n_paths >= 20:
            _check_stationarity(values)

    return StationaryEnsemble(
        grid=grid, values=values, kind='fou', h=h, normalized=True, seed=seed, meta=meta,
    )


def _sample_fou_euler(grid, h, n_paths, seed, max_substep=1.0 / 16, burn_in=10.0):
    """
    Euler exponencial sobre incrementos finos de fBM, partiendo de N(0, HΓ(2H))
    y descartando `burn_in` unidades de tiempo.
    """
    n_sub = max(1, math.ceil(grid.step / max_substep - 1e-12))
    dt = grid.step / n_sub
    n_burn = math.ceil(burn_in / dt)
    n_fine = n_burn + (grid.count - 1) * n_sub
    factor = _StationaryGaussianFactor(_fgn_autocovariance(n_fine, dt, h.h), 'fOU-Euler')
    decay = math.exp(-dt)
    start_sd = math.sqrt(fou_variance(h))
    keep = n_burn - 1 + np.arange(grid.count) * n_sub

    def _run(rngs):
        y0 = np.array([rng.standard_normal() for rng in rngs]) * start_sd
        increments = factor.sample(rngs)
        y, _ = signal.lfilter([1.0], [1.0, -decay], increments, axis=1, zi=(decay * y0)[:, None])
        return y[:, keep]

    calibration = _run([path_generator(seed, CALIBRATION_INDEX - j) for j in range(64)])
    scale = float(np.std(calibration))
    logger.debug(f"fOU Euler: dt={dt:.4g}, burn-in={n_burn} pasos, escala calibrada {scale:.5f}")
    values = map_chunks(_run, n_paths, seed) / scale
    return values, {'method': 'euler_burnin', 'substeps': n_sub, 'burn_in': n_burn * dt, 'scale': scale}


def _check_stationarity(values, level=0.01):
    result = stats.ttest_ind(values[:, 0], values[:, -1], equal_var=False)
    if result.pvalue < level:
        raise NonStationary(
            f"Deriva de la media entre el inicio y el final (p={result.pvalue:.2e})",
            {'pvalue': float(result.pvalue)},
        )


# --- cadenas de Markov ---

def _validate_generator(rate_matrix):
    q = np.asarray(rate_matrix, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 2:
        raise InvalidGenerator("La matriz de tasas debe ser cuadrada con al menos 2 estados")
    off_diagonal = q - np.diag(np.diag(q))
    if np.any(off_diagonal < 0):
        raise InvalidGenerator("Las tasas fuera de la diagonal deben ser no negativas")
    if np.max(np.abs(q.sum(axis=1))) > 1e-10 * max(1.0, np.abs(q).max()):
        raise InvalidGenerator("Las filas de la matriz de tasas deben sumar 0")
    n_components, _ = connected_components(off_diagonal > 0, directed=True, connection='strong')
    if n_components != 1:
        raise NotIrreducible(f"La cadena tiene {n_components} clases comunicantes")
    return q


def stationary_distribution(rate_matrix):
    q = _validate_generator(rate_matrix)
    kernel = linalg.null_space(q.T)
    pi = np.abs(kernel[:, 0])
    return pi / pi.sum()


def sample_markov_chain(grid, rate_matrix, state_values, n_paths, seed, centre=True):
    """Cadena de Markov en tiempo continuo observada en la grilla, con inicio estacionario."""
    q = _validate_generator(rate_matrix)
    state_values = np.asarray(state_values, dtype=float)
    if state_values.shape != (q.shape[0],):
        raise InvalidGenerator("state_values debe tener un valor por estado")
    if n_paths < 1:
        raise ValueError("n_paths debe ser >= 1")

    pi = stationary_distribution(q)
    if centre:
        state_values = state_values - pi @ state_values
    transition = linalg.expm(q * grid.step)
    cum_pi = np.cumsum(pi)
    cum_transition = np.cumsum(transition, axis=1)
    last_state = q.shape[0] - 1

    def _run(rngs):
        u = np.stack([rng.random(grid.count) for rng in rngs])
        states = np.empty(u.shape, dtype=np.intp)
        states[:, 0] = np.minimum(np.searchsorted(cum_pi, u[:, 0], side='right'), last_state)
        for i in range(1, grid.count):
            rows = cum_transition[states[:, i - 1]]
            states[:, i] = np.minimum((u[:, i, None] > rows).sum(axis=1), last_state)
        return state_values[states]

    values = map_chunks(_run, n_paths, seed)
    return StationaryEnsemble(
        grid=grid, values=values, kind='markov_chain', h=None, normalized=False, seed=seed,
        meta={
            'rate_matrix': q.tolist(),
            'state_values': state_values.tolist(),
            'stationary_distribution': pi.tolist(),
        },
    )


def mixing_integral(rate_matrix, r, horizon=None):
    """
    Criterio de mezcla fuerte ∫_0^∞ α(t)^{1/2-1/r} dt < ∞ para una cadena finita.

    α(t) se acota por el coeficiente β(t) = Σ_i π_i·TV(P_t(i,·), π), que decae como
    C·e^{-gap·t} con gap la brecha espectral del generador.
    """
    q = _validate_generator(rate_matrix)
    if r <= 2:
        raise ValueError("El exponente r debe ser > 2")
    pi = stationary_distribution(q)
    eigvals = np.linalg.eigvals(q)
    nonzero = eigvals[np.abs(eigvals) > 1e-12 * max(1.0, np.abs(q).max())]
    gap = float(-np.max(nonzero.real))
    power = 0.5 - 1.0 / r

    def _beta(t):
        distance = np.abs(linalg.expm(q * t) - pi[None, :]).sum(axis=1) * 0.5
        return float(pi @ distance)

    def _integrand(t):
        return _beta(t) ** power

    horizon = horizon or 40.0 / (gap * power)
    body, error = integrate.quad(_integrand, 0.0, horizon, limit=200)
    # cota exponencial de la cola más allá del horizonte
    tail = _integrand(horizon) / (gap * power)
    return {
        'r': r,
        'spectral_gap': gap,
        'exponent': power,
        'integral': body + tail,
        'tail': tail,
        'quadrature_error': error,
        'finite': gap > 0 and np.isfinite(body + tail),
    }


# ---------------------------------------------------------------------------
# Descomposición condicional ȳ + ỹ (representación de Volterra)
# ---------------------------------------------------------------------------

def _mvn_constant_sq(h):
    """c_H² de la representación de Mandelbrot-van Ness con Var(B_1) = 1."""
    return 2.0 * h * special.gamma(1.5 - h) / (special.gamma(h + 0.5) * special.gamma(2.0 - 2.0 * h))


def fou_kernel(u, h):
    """
    Núcleo de Volterra del fOU respecto del ruido blanco:
    g(u) = u^{H-1/2} - ∫_0^u e^{-w}(u-w)^{H-1/2} dw. En H = 1/2 vale e^{-u}.
    """
    h = as_hurst(h).h
    if u <= 0:
        return 0.0
    a = h - 0.5
    convolution, error = integrate.quad(
        lambda w: math.exp(-w), 0.0, u, weight='alg', wvar=(0.0, a), epsabs=1e-14, epsrel=1e-12,
    )
    _check_quad(convolution, error, f"el núcleo fOU en u={u}")
    return u**a - convolution


def _kernel_sq_integral(lo, hi, h):
    value, error = integrate.quad(lambda u: fou_kernel(u, h) ** 2, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
    _check_quad(value, error, f"∫g² en [{lo}, {hi}]")
    return value


@lru_cache(maxsize=256)
def _explained_variance(h, taus):
    """σ̃²(τ) normalizado en los nodos crecientes `taus` (tupla, taus[0] = 0)."""
    total = fou_variance(h) / _mvn_constant_sq(h)
    pieces = [0.0] + [_kernel_sq_integral(a, b, h) for a, b in zip(taus[:-1], taus[1:])]
    explained = np.clip(np.cumsum(pieces) / total, 0.0, 1.0)
    explained.setflags(write=False)
    return explained


def explained_variance(taus, h):
    """σ̃²(τ) = Var(ỹ) tras un tiempo τ desde el anclaje, en nodos crecientes con taus[0] = 0."""
    taus = tuple(float(t) for t in taus)
    if taus[0] != 0.0 or any(b <= a for a, b in zip(taus[:-1], taus[1:])):
        raise ValueError("Los nodos deben empezar en 0 y ser estrictamente crecientes")
    return _explained_variance(as_hurst(h).h, taus)


def conditional_split(h, grid, anchor):
    """Varianzas de la parte F_k-medible (σ̄²) y de la parte independiente (σ̃²) en toda la grilla."""
    h = as_hurst(h)
    if not 0 <= anchor < grid.count:
        raise ValueError("El anclaje debe estar dentro de la grilla")
    times = grid.times
    sigma_tilde_sq = np.zeros(grid.count)
    ahead = times[anchor:] - times[anchor]
    sigma_tilde_sq[anchor:] = explained_variance(ahead, h)
    return ConditionalSplit(
        anchor=anchor,
        times=times,
        sigma_bar_sq=1.0 - sigma_tilde_sq,
        sigma_tilde_sq=sigma_tilde_sq,
    )


def conditional_hermite_expectation(l, sigma_bar_sq, a):
    """
    E[H_l(a + ỹ)] con Var(ỹ) = 1 - σ̄², igual a σ̄^l H_l(a/σ̄).

    Se evalúa con la recurrencia escalada P_{n+1} = a P_n - n σ̄² P_{n-1}, que no
    divide por σ̄. Para σ̄² = 0 se usa el límite: 1 si l = 0 y 0 si l >= 1.
    """
    if l < 0:
        raise ValueError("El grado debe ser >= 0")
    a = np.asarray(a, dtype=float)
    sigma_bar_sq = np.asarray(sigma_bar_sq, dtype=float)
    shape = np.broadcast(a, sigma_bar_sq).shape
    if l == 0:
        result = np.ones(shape)
    else:
        previous, current = np.ones(shape), a * np.ones(shape)
        for n in range(1, l):
            previous, current = current, a * current - n * sigma_bar_sq * previous
        result = np.where(sigma_bar_sq > 0, current, 0.0)
    return float(result) if result.ndim == 0 else result


def conditional_observable_expectation(coeffs, sigma_bar_sq, a):
    """E[G(y_s)|F_k] = Σ_l c_l σ̄^l H_l(ȳ/σ̄) para G = Σ c_l H_l."""
    a = np.asarray(a, dtype=float)
    sigma_bar_sq = np.asarray(sigma_bar_sq, dtype=float)
    shape = np.broadcast(a, sigma_bar_sq).shape
    total = np.zeros(shape)
    previous, current = np.ones(shape), a * np.ones(shape)
    for l, c in enumerate(coeffs):
        if l == 0:
            term = np.ones(shape)
        elif l == 1:
            term = current
        else:
            previous, current = current, a * current - (l - 1) * sigma_bar_sq * previous
            term = current
        if c != 0.0:
            total = total + c * (term if l == 0 else np.where(sigma_bar_sq > 0, term, 0.0))
    return total


@dataclass(frozen=True)
class ConditionalPredictor:
    """
    Predictor gaussiano de y_{k+j} (j = 0..n_ahead) dado la ventana pasada
    y_{k-window+1..k}. weights[j] da ȳ^k y sigma_bar_sq[j] su varianza.
    """
    h: float
    step: float
    window: int
    n_ahead: int
    weights: np.ndarray
    sigma_bar_sq: np.ndarray

    def predict(self, windows):
        return np.asarray(windows) @ self.weights.T


@lru_cache(maxsize=32)
def _conditional_predictor(h, step, window, n_ahead):
    rho = fou_autocorrelation_table(np.arange(window + n_ahead + 1) * step, h)
    covariance = linalg.toeplitz(rho[:window]) + 1e-12 * np.eye(window)
    cross = np.array([[rho[j + window - 1 - m] for m in range(window)] for j in range(n_ahead + 1)])
    factor = linalg.cho_factor(covariance, lower=True)
    weights = linalg.cho_solve(factor, cross.T).T
    weights[0] = 0.0
    weights[0, -1] = 1.0
    sigma_bar_sq = np.clip(np.einsum('jm,jm->j', weights, cross), 0.0, 1.0)
    sigma_bar_sq[0] = 1.0
    weights.setflags(write=False)
    sigma_bar_sq.setflags(write=False)
    return ConditionalPredictor(h, step, window, n_ahead, weights, sigma_bar_sq)


def conditional_predictor(h, step, window, n_ahead):
    if window < 1 or n_ahead < 0:
        raise ValueError("window >= 1 y n_ahead >= 0")
    return _conditional_predictor(as_hurst(h).h, float(step), int(window), int(n_ahead))


def realized_conditional_mean(ensemble, anchor, n_ahead, window):
    """
    Parte medible realizada ȳ^k_{t_k + j·step}, j = 0..n_ahead, para cada
    trayectoria del ensamble, condicionando en la ventana pasada de largo `window`.
    """
    if ensemble.kind != 'fou':
        raise ValueError("La descomposición condicional requiere ruido fOU")
    if anchor + 1 < window:
        raise ValueError("La ventana de condicionamiento excede el inicio de la trayectoria")
    predictor = conditional_predictor(ensemble.h, ensemble.grid.step, window, n_ahead)
    past = ensemble.values[:, anchor - window + 1: anchor + 1]
    return predictor.predict(past), predictor.sigma_bar_sq


def memory_loss_integral(profile, h, horizon=200.0):
    """
    ∫_0^∞ ‖E[G(y_s)|F_0]‖_{L²} ds = ∫ sqrt(Σ_l c_l² l! σ̄(s)^{2l}) ds.

    El tramo [0, horizon] se integra sobre nodos tabulados; la cola se estima con
    un ajuste de ley de potencia sobre la última década.
    """
    h = as_hurst(h)
    coeffs = np.asarray(profile.coeffs, dtype=float)
    if profile.rank < 1:
        raise RankZero("El observable debe estar centrado (rango de Hermite >= 1)")
    if profile.rank > len(coeffs) - 1:
        return {
            'integral': 0.0, 'tail': 0.0, 'tail_exponent': None, 'finite': True,
            'horizon': horizon, 'h_star_sufficient': True,
        }

    taus = np.unique(np.concatenate([np.linspace(0.0, 1.0, 33), np.geomspace(1.0, horizon, 160)]))
    sigma_bar_sq = 1.0 - explained_variance(taus, h)
    weights = np.array([c * c * math.factorial(l) for l, c in enumerate(coeffs)])
    weights[0] = 0.0
    powers = sigma_bar_sq[:, None] ** np.arange(len(coeffs))[None, :]
    integrand = np.sqrt(np.clip(powers @ weights, 0.0, None))

    below = np.nonzero(integrand < TRUNCATION_LEVEL)[0]
    if len(below):
        stop = max(int(below[0]), 2)
        body = integrate.trapezoid(integrand[: stop + 1], taus[: stop + 1])
        logger.debug(f"Integral de pérdida de memoria truncada en s={taus[stop]:.3g}")
        return {
            'integral': float(body), 'tail': 0.0, 'tail_exponent': None, 'finite': True,
            'horizon': float(taus[stop]), 'h_star_sufficient': profile.rank * (h.h - 1) + 1 < 0,
        }

    body = integrate.trapezoid(integrand, taus)
    decade = taus >= horizon / 10.0
    slope = stats.linregress(np.log(taus[decade]), np.log(integrand[decade])).slope
    finite = slope < -1.0
    tail = integrand[-1] * horizon / (-slope - 1.0) if finite else math.inf
    logger.debug(f"Cola de pérdida de memoria: exponente {slope:.3f}, finita={finite}")
    return {
        'integral': float(body + tail),
        'tail': float(tail),
        'tail_exponent': float(slope),
        'finite': bool(finite),
        'horizon': float(horizon),
        'h_star_sufficient': profile.rank * (h.h - 1) + 1 < 0,
    }


# ---------------------------------------------------------------------------
# Diagnósticos
# ---------------------------------------------------------------------------

def ensemble_autocorrelation(ensemble, max_lag):
    """
    Autocovarianza empírica c(L) = E[y_t y_{t+L}] para L = 0..max_lag, promediada
    en el tiempo dentro de cada trayectoria y luego entre trayectorias.
    Devuelve (tiempos, estimación, error estándar).
    """
    values = ensemble.values
    if max_lag >= ensemble.grid.count:
        raise ValueError("max_lag debe ser menor que el largo de la grilla")
    estimates, errors = [], []
    for lag in range(max_lag + 1):
        per_path = np.mean(values[:, : values.shape[1] - lag] * values[:, lag:], axis=1)
        estimates.append(per_path.mean())
        errors.append(per_path.std(ddof=1) / math.sqrt(len(per_path)) if len(per_path) > 1 else math.nan)
    return np.arange(max_lag + 1) * ensemble.grid.step, np.array(estimates), np.array(errors)
