"""
Análisis de caos de Hermite de observables gaussianos.

Convención: polinomios de Hermite probabilistas sin normalizar,
H_0 = 1, H_1 = x, H_{l+1} = x H_l - l H_{l-1}, con E[H_k(Z) H_j(Z)] = δ_kj k!.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e
from scipy.interpolate import PchipInterpolator

from .exceptions import DegreeTooLarge, NotCentred, OrderingViolation, QuadratureDivergence

logger = logging.getLogger(__name__)

CONVENTION = 'probabilist-unnormalized'
MAX_DEGREE = 64
RANK_TOL = 1e-10
DIVERGENCE_TOL = 1e-3

REGIME_WIENER = 'wiener'
REGIME_BORDERLINE = 'borderline'
REGIME_HERMITE = 'hermite'


def hermite_eval(l, x):
    """H_l(x) por recurrencia de tres términos."""
    if l < 0:
        raise ValueError("El grado debe ser >= 0")
    if l > MAX_DEGREE:
        raise DegreeTooLarge(f"Grado {l} excede el máximo {MAX_DEGREE}")
    x = np.asarray(x, dtype=float)
    previous, current = np.ones_like(x), x.copy()
    if l == 0:
        current = previous
    for n in range(1, l):
        previous, current = current, x * current - n * previous
    return float(current) if current.ndim == 0 else current


def _normalized_hermite_table(l_max, x):
    """h_l(x) = H_l(x)/sqrt(l!) para l = 0..l_max, filas por grado."""
    table = np.empty((l_max + 1,) + np.shape(x))
    table[0] = 1.0
    if l_max >= 1:
        table[1] = x
    for n in range(1, l_max):
        table[n + 1] = (x * table[n] - math.sqrt(n) * table[n - 1]) / math.sqrt(n + 1)
    return table


def _gauss_nodes(n):
    nodes, weights = hermite_e.hermegauss(n)
    return nodes, weights / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class HermiteProfile:
    coeffs: tuple
    rank: int
    l_max: int
    residual: float = 0.0
    norm_sq: float = None
    name: str = ''
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_coefficients(cls, coeffs, rank_tol=RANK_TOL, name=''):
        coeffs = tuple(float(c) for c in coeffs)
        norm_sq = sum(c * c * math.factorial(l) for l, c in enumerate(coeffs))
        return cls(
            coeffs=coeffs,
            rank=_rank(coeffs, norm_sq, rank_tol),
            l_max=len(coeffs) - 1,
            residual=0.0,
            norm_sq=norm_sq,
            name=name,
        )

    @property
    def is_zero(self):
        return self.rank > self.l_max

    @property
    def variance(self):
        """Var(G(Z)) capturada por los coeficientes de grado >= 1."""
        return sum(c * c * math.factorial(l) for l, c in enumerate(self.coeffs) if l >= 1)

    def centred(self):
        coeffs = (0.0,) + tuple(self.coeffs[1:])
        return HermiteProfile(
            coeffs=coeffs,
            rank=_rank(coeffs, self.norm_sq or 0.0, RANK_TOL) if self.rank == 0 else self.rank,
            l_max=self.l_max,
            residual=self.residual,
            norm_sq=None if self.norm_sq is None else self.norm_sq - self.coeffs[0] ** 2,
            name=self.name,
            meta=self.meta,
        )

    def __call__(self, x):
        """Síntesis Σ c_l H_l(x)."""
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        previous, current = np.ones_like(x), x.copy()
        for l, c in enumerate(self.coeffs):
            if l == 0:
                term = previous
            elif l == 1:
                term = current
            else:
                previous, current = current, x * current - (l - 1) * previous
                term = current
            if c:
                total = total + c * term
        return total

    def covariance(self, other, rho):
        """E[G(y_s) G'(y_r)] para y gaussiano estándar con correlación rho (grados >= 1)."""
        rho = np.asarray(rho, dtype=float)
        total = np.zeros_like(rho)
        for l in range(1, min(len(self.coeffs), len(other.coeffs))):
            total = total + math.factorial(l) * self.coeffs[l] * other.coeffs[l] * rho**l
        return total

    def to_json(self):
        return {
            'coefficients': list(self.coeffs),
            'rank': self.rank,
            'l_max': self.l_max,
            'residual': self.residual,
            'norm_sq': self.norm_sq,
            'name': self.name,
            'convention': CONVENTION,
        }


def _rank(coeffs, norm_sq, rank_tol):
    threshold = rank_tol * math.sqrt(max(norm_sq, 0.0))
    for l, c in enumerate(coeffs):
        if abs(c) > threshold and c != 0.0:
            return l
    # observable nulo: ningún caos presente
    return len(coeffs)


def _as_callable(G):
    if callable(G):
        return G
    xs, ys = G
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs)
    interpolant = PchipInterpolator(xs[order], np.asarray(ys, dtype=float)[order], extrapolate=True)
    return interpolant


def expand(G, l_max=16, n_nodes=None, rank_tol=RANK_TOL, centred=False, name=''):
    """
    Coeficientes c_l = E[G(Z) H_l(Z)]/l! por cuadratura de Gauss-Hermite.

    G puede ser un callable vectorizado o una tabla (xs, ys) que se interpola con
    un spline monótono por tramos.
    """
    if l_max < 0:
        raise ValueError("l_max debe ser >= 0")
    if l_max > MAX_DEGREE:
        raise DegreeTooLarge(f"l_max {l_max} excede el máximo {MAX_DEGREE}")
    fn = _as_callable(G)
    n = max(2 * l_max + 8, n_nodes or 0, 100)
    if n % 2:
        n += 1

    nodes, weights = _gauss_nodes(n)
    values = np.asarray(fn(nodes), dtype=float)
    fine_nodes, fine_weights = _gauss_nodes(2 * n)
    fine_values = np.asarray(fn(fine_nodes), dtype=float)
    norm_sq = float(weights @ values**2)
    fine_norm_sq = float(fine_weights @ fine_values**2)
    if not (np.isfinite(norm_sq) and np.isfinite(fine_norm_sq)) or (
        abs(fine_norm_sq - norm_sq) > DIVERGENCE_TOL * max(fine_norm_sq, 1.0)
    ):
        raise QuadratureDivergence(
            "E[G(Z)²] no se estabiliza al refinar la cuadratura",
            {'nodes': n, 'coarse': norm_sq, 'fine': fine_norm_sq},
        )

    table = _normalized_hermite_table(l_max, fine_nodes)
    projections = table @ (fine_weights * fine_values)
    coeffs = tuple(
        float(projections[l] / math.sqrt(math.factorial(l))) for l in range(l_max + 1)
    )
    captured = sum(c * c * math.factorial(l) for l, c in enumerate(coeffs))
    residual = max(fine_norm_sq - captured, 0.0)

    if centred and abs(coeffs[0]) > rank_tol * math.sqrt(max(fine_norm_sq, 0.0)):
        raise NotCentred(f"El observable no está centrado: c_0 = {coeffs[0]:.3e}")
    rank = _rank(coeffs, fine_norm_sq, rank_tol)
    logger.debug(f"Expansión de Hermite {name or ''}: rango {rank}, residuo {residual:.2e}, {2 * n} nodos")
    return HermiteProfile(
        coeffs=coeffs, rank=rank, l_max=l_max, residual=residual, norm_sq=fine_norm_sq, name=name,
    )


def correlation_of_chaos(k, rho):
    """E[H_k(Y) H_k(Y')] = k! ρ^k para (Y, Y') gaussianos estándar con correlación ρ."""
    if k < 0:
        raise ValueError("k debe ser >= 0")
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) > 1):
        raise ValueError("|rho| debe ser <= 1")
    value = math.factorial(k) * rho**k
    return float(value) if value.ndim == 0 else value


def h_star(m, h):
    """H*(m) = m(H-1) + 1."""
    if m < 1:
        raise ValueError("El rango de Hermite debe ser >= 1")
    return m * (float(h) - 1.0) + 1.0


def regime_of(h_star_value, tol=1e-12):
    if abs(h_star_value - 0.5) <= tol:
        return REGIME_BORDERLINE
    return REGIME_WIENER if h_star_value < 0.5 else REGIME_HERMITE


def channel_regime(m, h):
    """Con H <= 1/2 la correlación del fOU es integrable: el canal es de Wiener para todo m."""
    if float(h) <= 0.5:
        return REGIME_WIENER
    return regime_of(h_star(m, h))


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon debe estar en (0, 1)")


def scaling_alpha(epsilon, h_star_value):
    """Escalamiento α(ε, H*): ε^{-1/2}, 1/sqrt(ε|ln ε|) o ε^{H*-1} según el régimen."""
    _check_epsilon(epsilon)
    regime = regime_of(h_star_value)
    if regime == REGIME_WIENER:
        return epsilon**-0.5
    if regime == REGIME_BORDERLINE:
        return 1.0 / math.sqrt(epsilon * abs(math.log(epsilon)))
    return epsilon ** (h_star_value - 1.0)


def unified_alpha(epsilon, h_star_value):
    """Forma unificada ε^{max(H*, 1/2) - 1}; no aplica en el caso límite H* = 1/2."""
    if regime_of(h_star_value) == REGIME_BORDERLINE:
        raise ValueError("La forma unificada no cubre H* = 1/2")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon debe estar en (0, 1)")
    return epsilon ** (max(h_star_value, 0.5) - 1.0)


@dataclass(frozen=True)
class ScalingRule:
    h_star: float
    regime: str

    def alpha(self, epsilon):
        if self.regime == REGIME_WIENER:
            _check_epsilon(epsilon)
            return epsilon**-0.5
        return scaling_alpha(epsilon, self.h_star)


def scaling_rule(m, h):
    return ScalingRule(h_star=h_star(m, h), regime=channel_regime(m, h))


def fast_chaos_decay(profile, q):
    """
    Suma parcial Σ |c_l| sqrt(l!) (2q-1)^{l/2} y veredicto de razón sobre la cola:
    'converging', 'diverging' o 'inconclusive'.
    """
    if q < 1:
        raise ValueError("q debe ser >= 1")
    base = math.sqrt(2 * q - 1)
    terms = np.array([abs(c) * math.sqrt(math.factorial(l)) * base**l for l, c in enumerate(profile.coeffs)])
    total = float(terms.sum())
    nonzero = np.nonzero(terms > RANK_TOL * max(terms.max(initial=0.0), 1e-300))[0]
    if len(nonzero) < 8 or nonzero[-1] < len(terms) - 4:
        # polinomio: la cola es nula y la suma es finita
        return {'sum': total, 'verdict': 'converging', 'ratio': 0.0}

    tail = terms[-8:]
    tail = tail[tail > 0]
    if len(tail) < 2:
        return {'sum': total, 'verdict': 'inconclusive', 'ratio': None}
    ratios = tail[1:] / tail[:-1]
    ratio = float(np.median(ratios))
    if ratio >= 1.0:
        verdict = 'diverging'
    elif ratio < 0.95:
        verdict = 'converging'
    else:
        verdict = 'inconclusive'
    return {'sum': total, 'verdict': verdict, 'ratio': ratio}


def assumption_gate(profiles, p, h, n_split, q=None):
    """
    Verifica las condiciones de momentos del sistema multiescala.

    Canales k < n_split (en orden) pertenecen al bloque de Wiener, el resto al
    bloque de Hermite. Devuelve el primer criterio violado o None.
    """
    profiles = list(profiles)
    p = list(p)
    if len(p) != len(profiles):
        raise ValueError("Se necesita un exponente p por canal")
    if not 0 <= n_split <= len(profiles):
        raise ValueError("n_split fuera de rango")
    ranks = [profile.rank for profile in profiles]
    if any(b > a for a, b in zip(ranks[:-1], ranks[1:])):
        raise OrderingViolation(f"Los rangos de Hermite deben ser no crecientes: {ranks}")

    checks = []

    def _check(name, value, bound, passed, channel=None):
        checks.append({'name': name, 'channel': channel, 'value': value, 'bound': bound, 'passed': bool(passed)})

    wiener = range(n_split)
    hermite_block = range(n_split, len(profiles))
    stars = [h_star(m, h) for m in ranks]

    for k in wiener:
        _check('wiener_regime', stars[k], 0.5, channel_regime(ranks[k], h) == REGIME_WIENER, k)
    for k in hermite_block:
        _check('hermite_regime', stars[k], 0.5, channel_regime(ranks[k], h) == REGIME_HERMITE, k)
    for k in wiener:
        margin = 0.5 - 1.0 / p[k]
        _check('wiener_moment', margin, 1.0 / 3.0, margin > 1.0 / 3.0, k)
    for k in hermite_block:
        margin = stars[k] - 1.0 / p[k]
        _check('hermite_moment', margin, 0.5, margin > 0.5, k)
    if len(wiener) and len(hermite_block):
        total = min(0.5 - 1.0 / p[k] for k in wiener) + min(stars[k] - 1.0 / p[k] for k in hermite_block)
        _check('hoelder_sum', total, 1.0, total > 1.0)
    if q is not None:
        for k, profile in enumerate(profiles):
            decay = fast_chaos_decay(profile, q)
            _check('fast_chaos_decay', decay['sum'], None, decay['verdict'] != 'diverging', k)

    violated = next((c for c in checks if not c['passed']), None)
    if violated:
        logger.info(f"Condición violada: {violated['name']} (canal {violated['channel']})")
    return {
        'passed': violated is None,
        'violated': None if violated is None else violated['name'],
        'h_star': stars,
        'checks': checks,
    }
