"""
Funcionales discretos de la aproximación martingala-coborde.

Sobre bloques unitarios del tiempo rápido, a partir de un anclaje inicial:
    I(k)   = ∫_{k-1}^{k} U(y_s) ds
    Û(k)   = ∫_{k-1}^{∞} E[U(y_s)|F_k] ds
    M_k    = Σ_{l=1}^{k} (Û(l) - E[Û(l)|F_{l-1}])

con E[Û(l)|F_{l-1}] = ∫_{l-1}^{∞} E[U(y_s)|F_{l-1}] ds. Así
    Û(k) = I(k) + E[Û(k+1)|F_k]
    Σ_{j=1}^{k} I(j) = M_{k+1} - M_1 - Û(k+1) + Û(1).

Las integrales hasta ∞ se cuadran hasta `horizon` y se completan con la cola de
ley de potencia ajustada por memory_loss_integral. Si esa integral diverge las
colas no existen y se lanza TailDivergent.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate, linalg

from .exceptions import HorizonTooShort, TailDivergent
from .hermite import hermite_eval
from .noise import (
    as_hurst,
    conditional_observable_expectation,
    conditional_predictor,
    fou_autocorrelation,
    fou_autocorrelation_table,
    memory_loss_integral,
    stationary_distribution,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteFunctionals:
    epsilon: float
    n_blocks: int
    I: np.ndarray
    J: np.ndarray
    U_hat: np.ndarray
    V_hat: np.ndarray
    tails_U: np.ndarray
    tails_V: np.ndarray
    M: np.ndarray
    N: np.ndarray
    lhs: np.ndarray
    witnesses: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def martingale_increments(self):
        """Estadísticos de martingala de M y N frente a cada testigo F_k-medible."""
        rows = []
        for name, sequence in (('M', self.M), ('N', self.N)):
            for row in martingale_increment_statistics(sequence, self.witnesses):
                rows.append({'martingale': name, **row})
        return rows

    def identity_violations(self):
        """Máximas violaciones de las dos identidades por trayectoria."""
        conditional = np.max(np.abs(self.U_hat - (self.I + self.tails_U[:, 1:])))
        k = self.n_blocks
        partial = np.cumsum(self.I[:, :k], axis=1)
        telescoping = self.M[:, 1: k + 1] - self.M[:, :1] - self.U_hat[:, 1: k + 1] + self.U_hat[:, :1]
        return {
            'conditional': float(conditional),
            'telescoping': float(np.max(np.abs(partial - telescoping))),
        }


def _points_per_unit(step):
    ppu = int(round(1.0 / step))
    if abs(ppu * step - 1.0) > 1e-9:
        raise ValueError("El paso de la grilla debe dividir la unidad de tiempo")
    return ppu


def block_integrals(path, step, G, n_blocks, offset=0):
    """
    Integrales por bloques unitarios I(k), k = 1..n_blocks, empezando en el
    índice de grilla `offset`. `path` es (count,) o (n, count).
    """
    values = np.asarray(path, dtype=float)
    ppu = _points_per_unit(step)
    stop = offset + n_blocks * ppu
    if stop + 1 > values.shape[-1]:
        raise HorizonTooShort(
            f"La trayectoria no cubre {n_blocks} bloques desde el índice {offset}",
            {'required': stop + 1, 'available': values.shape[-1]},
        )
    g = np.asarray(G(values[..., offset: stop + 1]), dtype=float)
    blocks = np.stack([g[..., k * ppu: (k + 1) * ppu + 1] for k in range(n_blocks)], axis=-2)
    return integrate.trapezoid(blocks, dx=step, axis=-1)


def _tail_window(h, step, horizon, window):
    n_ahead = int(round(horizon / step))
    n_window = max(1, int(round(window / step)))
    return conditional_predictor(h, step, n_window, n_ahead)


def _conditional_rows(values, predictor, coeffs, anchors):
    """E[U(y_{a+j})|F_a] para los anclajes dados, forma (..., len(anchors), n_ahead+1)."""
    windows = sliding_window_view(values, predictor.window, axis=-1)
    past = windows[..., np.asarray(anchors) - predictor.window + 1, :]
    ybar = predictor.predict(past)
    return conditional_observable_expectation(coeffs, predictor.sigma_bar_sq, ybar)


def memory_verdict(profile, h):
    """Veredicto de memory_loss_integral; TailDivergent si la integral no converge."""
    verdict = memory_loss_integral(profile, h)
    if not verdict['finite']:
        raise TailDivergent(
            f"La pérdida de memoria condicional de {profile.name or 'G'} no es integrable "
            f"(exponente de cola {verdict['tail_exponent']:.3f} >= -1)",
            verdict,
        )
    return verdict


def _tail_beyond(last, horizon, verdict):
    """∫_{horizon}^∞ de un integrando que decae como last·(s/horizon)^β, con β del ajuste de cola."""
    last = np.asarray(last, dtype=float)
    exponent = verdict['tail_exponent']
    if exponent is None or horizon <= 0.0:
        # decaimiento exponencial: la cola ya está bajo el nivel de truncamiento
        return np.zeros_like(last)
    return last * horizon / (-exponent - 1.0)


def conditional_tail(path, step, h, profile, anchor, horizon, window=16.0):
    """
    Û para el bloque que termina en el índice `anchor`:
    ∫_{t_a - 1}^{∞} E[U(y_s)|F_a] ds, donde en [t_a - 1, t_a] la esperanza
    condicional es U(y_s) misma. Se cuadra hasta t_a + horizon y se agrega la
    cola ajustada. Con horizon = 0 solo queda la integral del bloque.
    """
    verdict = memory_verdict(profile, h)
    values = np.asarray(path, dtype=float)
    ppu = _points_per_unit(step)
    predictor = _tail_window(h, step, horizon, window)
    if anchor - ppu < 0 or anchor + 1 < predictor.window or anchor + predictor.n_ahead >= values.shape[-1]:
        raise HorizonTooShort("El anclaje no deja espacio para la ventana y el horizonte")
    block = profile(values[..., anchor - ppu: anchor + 1])
    ahead = _conditional_rows(values, predictor, profile.coeffs, [anchor])[..., 0, :]
    integrand = np.concatenate([block, ahead[..., 1:]], axis=-1)
    beyond = _tail_beyond(ahead[..., -1], predictor.n_ahead * step, verdict)
    return integrate.trapezoid(integrand, dx=step, axis=-1) + beyond


def martingale_sequence(U_hat, conditional_means):
    """
    M_k = Σ_{l=1}^{k} (Û(l) - E[Û(l)|F_{l-1}]), con conditional_means[..., l-1] = E[Û(l)|F_{l-1}].
    """
    U_hat = np.asarray(U_hat, dtype=float)
    conditional_means = np.asarray(conditional_means, dtype=float)
    if U_hat.shape != conditional_means.shape:
        raise ValueError("Û y sus esperanzas condicionales deben tener la misma forma")
    return np.cumsum(U_hat - conditional_means, axis=-1)


def martingale_increment_statistics(M, witnesses):
    """
    Para cada testigo w (columna k F_k-medible) promedia (M_{k+1} - M_k)·w_k
    sobre k en cada trayectoria, con M_0 = 0, y devuelve la media entre
    trayectorias, su error estándar y z = media/SE. Para una martingala z ~ N(0, 1).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    increments = np.diff(M, axis=-1, prepend=0.0)
    rows = []
    for name, witness in witnesses.items():
        witness = np.atleast_2d(np.asarray(witness, dtype=float))
        if witness.shape != increments.shape:
            raise ValueError(f"El testigo {name} no tiene la forma de los incrementos {increments.shape}")
        per_path = np.mean(increments * witness, axis=-1)
        estimate = float(per_path.mean())
        se = float(per_path.std(ddof=1) / math.sqrt(len(per_path))) if len(per_path) > 1 else math.inf
        if se > 0.0:
            z = estimate / se
        else:
            z = 0.0 if estimate == 0.0 else math.copysign(math.inf, estimate)
        rows.append({'witness': name, 'estimate': estimate, 'se': se, 'z': float(z)})
    return rows


def _functionals_for(values, step, profile, predictor, n_blocks, offset, verdict):
    """I, Û y colas para anclajes 0..n_blocks+1 (bloques k = 1..n_blocks+1)."""
    ppu = _points_per_unit(step)
    anchors = offset + ppu * np.arange(n_blocks + 2)
    I = block_integrals(values, step, profile, n_blocks + 1, offset)
    rows = _conditional_rows(values, predictor, profile.coeffs, anchors)
    beyond = _tail_beyond(rows[..., -1], predictor.n_ahead * step, verdict)
    tails = integrate.trapezoid(rows, dx=step, axis=-1) + beyond

    u = profile(values[..., offset: anchors[-1] + 1])
    blocks = np.stack([u[..., k * ppu: (k + 1) * ppu + 1] for k in range(n_blocks + 1)], axis=-2)
    integrand = np.concatenate([blocks, rows[..., 1:, 1:]], axis=-1)
    U_hat = integrate.trapezoid(integrand, dx=step, axis=-1) + beyond[..., 1:]
    return I, U_hat, tails


def _witnesses(values, anchors, window, ranks):
    """Variables F_k-medibles en cada anclaje: H_m(y_k) y el punto justo antes de la ventana."""
    at_anchor = values[:, anchors]
    witnesses = {f"H{m}(y_k)": hermite_eval(m, at_anchor) for m in ranks}
    witnesses['y_antes_de_ventana'] = values[:, anchors - window]
    return witnesses


def discrete_functionals(ensemble, U, V, epsilon, t=1.0, horizon=32.0, window=16.0, chunk_size=64):
    """
    Funcionales I, J, Û, V̂, M, N para L = floor(t/ε) bloques, más el lado
    izquierdo ε ∫_0^{L} ∫_0^s U(y_s) V(y_r) dr ds del lema de área.
    U y V son perfiles de Hermite (se evalúan por síntesis). Los testigos de
    martingala se guardan en `witnesses`.
    """
    if ensemble.kind != 'fou':
        raise ValueError("Los funcionales discretos requieren ruido fOU")
    verdict_U = memory_verdict(U, ensemble.h)
    verdict_V = memory_verdict(V, ensemble.h)
    step = ensemble.grid.step
    ppu = _points_per_unit(step)
    n_blocks = int(math.floor(t / epsilon + 1e-9))
    predictor = _tail_window(ensemble.h, step, horizon, window)
    offset = predictor.window
    required = offset + (n_blocks + 1) * ppu + predictor.n_ahead + 1
    if required > ensemble.grid.count:
        raise HorizonTooShort(
            f"Se requieren {required} puntos de grilla (disponibles {ensemble.grid.count})",
            {'required': required, 'available': ensemble.grid.count},
        )

    anchors = offset + ppu * np.arange(n_blocks + 1)
    ranks = sorted({p.rank for p in (U, V) if not p.is_zero} | {1})

    parts = {name: [] for name in ('I', 'U_hat', 'tails_U', 'J', 'V_hat', 'tails_V', 'lhs')}
    witness_parts = []
    for start in range(0, ensemble.n_paths, chunk_size):
        values = ensemble.values[start: start + chunk_size]
        I, U_hat, tails_U = _functionals_for(values, step, U, predictor, n_blocks, offset, verdict_U)
        J, V_hat, tails_V = _functionals_for(values, step, V, predictor, n_blocks, offset, verdict_V)
        segment = values[:, offset: offset + n_blocks * ppu + 1]
        inner = integrate.cumulative_trapezoid(V(segment), dx=step, axis=-1, initial=0.0)
        lhs = epsilon * integrate.trapezoid(U(segment) * inner, dx=step, axis=-1)
        for name, value in zip(parts, (I, U_hat, tails_U, J, V_hat, tails_V, lhs)):
            parts[name].append(value)
        witness_parts.append(_witnesses(values, anchors, predictor.window, ranks))
    arrays = {name: np.concatenate(chunks) for name, chunks in parts.items()}
    witnesses = {name: np.concatenate([w[name] for w in witness_parts]) for name in witness_parts[0]}

    M = martingale_sequence(arrays['U_hat'], arrays['tails_U'][:, :-1])
    N = martingale_sequence(arrays['V_hat'], arrays['tails_V'][:, :-1])
    logger.debug(f"Funcionales discretos ε={epsilon:g}: {n_blocks} bloques, {ensemble.n_paths} trayectorias")
    return DiscreteFunctionals(
        epsilon=epsilon,
        n_blocks=n_blocks,
        M=M,
        N=N,
        witnesses=witnesses,
        meta={
            'horizon': horizon,
            'window': window,
            'offset_index': offset,
            't': n_blocks * epsilon,
            'tail_exponent_U': verdict_U['tail_exponent'],
            'tail_exponent_V': verdict_V['tail_exponent'],
        },
        **arrays,
    )


def lemma_residual(functionals, A_ij):
    """
    err(ε) = ε ∫∫ U V - ε Σ_{k=1}^{L} (M_{k+1} - M_k) N_k - t·A^{ij}, por trayectoria,
    con t = ε·L.
    """
    L = functionals.n_blocks
    eps = functionals.epsilon
    M, N = functionals.M, functionals.N
    martingale_sum = eps * np.sum((M[:, 1: L + 1] - M[:, :L]) * N[:, :L], axis=1)
    return functionals.lhs - martingale_sum - eps * L * A_ij


def block_double_sum(I, J, epsilon):
    """ε Σ_k I(k) Σ_{l<k} J(l), la versión discreta a izquierda de ε∫∫ U V."""
    I = np.asarray(I, dtype=float)
    J = np.asarray(J, dtype=float)
    previous = np.cumsum(J, axis=-1) - J
    return epsilon * np.sum(I * previous, axis=-1)


def area_constant(profile_i, profile_j, h, horizon=400.0):
    """
    A^{ij} = ∫_0^∞ E[G_i(y_s) G_j(y_0)] ds = Σ_l l! c^i_l c^j_l ∫_0^∞ ρ(s)^l ds,
    con cola de ley de potencia ρ(s) ≈ C s^{2H-2} más allá de `horizon`.
    """
    h = as_hurst(h)
    beta = 2.0 * h.h - 2.0
    degrees = [
        l for l in range(1, min(len(profile_i.coeffs), len(profile_j.coeffs)))
        if profile_i.coeffs[l] * profile_j.coeffs[l] != 0.0
    ]
    total = 0.0
    for l in degrees:
        if not h.is_half and l * beta >= -1.0:
            raise TailDivergent(
                f"∫ρ^{l} diverge para H={h.h} (grado {l})", {'degree': l, 'h': h.h},
            )
        body, error = integrate.quad(
            lambda s: fou_autocorrelation(s, h) ** l, 0.0, horizon, limit=400, points=[1.0, 10.0, 100.0],
        )
        if h.is_half:
            tail = 0.0
        else:
            scale = fou_autocorrelation(horizon, h) / horizon**beta
            tail = scale**l * horizon ** (1.0 + l * beta) / (-1.0 - l * beta)
        logger.debug(f"∫ρ^{l}: cuerpo {body:.6g} (error {error:.1e}), cola {tail:.3e}")
        total += math.factorial(l) * profile_i.coeffs[l] * profile_j.coeffs[l] * (body + tail)
    return total


def area_matrix(profiles, h, horizon=400.0):
    d = len(profiles)
    A = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            A[i, j] = A[j, i] = area_constant(profiles[i], profiles[j], h, horizon)
    return A


def chain_area_matrix(rate_matrix, functions):
    """
    A^{ij} = ∫_0^∞ E[g_i(Y_s) g_j(Y_0)] ds para una cadena de Markov estacionaria,
    usando la matriz fundamental Z = (Π - Q)^{-1} - Π. No es simétrica en general.
    """
    q = np.asarray(rate_matrix, dtype=float)
    pi = stationary_distribution(q)
    projector = np.outer(np.ones(len(pi)), pi)
    fundamental = linalg.inv(projector - q) - projector
    g = np.asarray(functions, dtype=float)
    g = g - g @ pi[:, None]
    # E[g_i(Y_s) g_j(Y_0)] = Σ_a π_a g_j(a) (P_s g_i)(a)
    return g @ fundamental.T @ np.diag(pi) @ g.T


def coboundary_variance(ensemble, profile, epsilons, t=1.0, horizon=32.0, window=16.0):
    """
    Varianza empírica de sqrt(ε)·(Z_{t/ε} - Z_0), con Z_a = ∫_a^{∞} E[U(y_r)|F_a] dr,
    para cada ε del schedule.
    """
    verdict = memory_verdict(profile, ensemble.h)
    step = ensemble.grid.step
    predictor = _tail_window(ensemble.h, step, horizon, window)
    offset = predictor.window
    reach = predictor.n_ahead * step

    def _z(anchor):
        rows = _conditional_rows(ensemble.values, predictor, profile.coeffs, [anchor])[:, 0, :]
        return integrate.trapezoid(rows, dx=step, axis=-1) + _tail_beyond(rows[:, -1], reach, verdict)

    rows = []
    z0 = _z(offset)
    for epsilon in epsilons:
        anchor = offset + int(round(t / (epsilon * step)))
        if anchor + predictor.n_ahead >= ensemble.grid.count:
            raise HorizonTooShort(f"El ensamble no cubre t/ε = {t / epsilon:g}")
        z = _z(anchor)
        scaled = math.sqrt(epsilon) * (z - z0)
        variance = float(np.var(scaled, ddof=1))
        fourth = float(np.mean((scaled - scaled.mean()) ** 4))
        rows.append({
            'epsilon': epsilon,
            'variance': variance,
            'se': math.sqrt(max(fourth - variance**2, 0.0) / len(scaled)),
        })
    return rows


# ---------------------------------------------------------------------------
# Covarianza pre-límite del funcional discretizado
# ---------------------------------------------------------------------------

def chaos_correlation(profile_i, profile_j, h):
    """C(r) = E[G_i(y_r) G_j(y_0)] = Σ_l l! c^i_l c^j_l ρ(|r|)^l para el fOU normalizado."""
    h = as_hurst(h)
    degrees = [
        l for l in range(1, min(len(profile_i.coeffs), len(profile_j.coeffs)))
        if profile_i.coeffs[l] * profile_j.coeffs[l] != 0.0
    ]
    weights = [math.factorial(l) * profile_i.coeffs[l] * profile_j.coeffs[l] for l in degrees]

    def correlation(r):
        rho = fou_autocorrelation_table(np.abs(np.asarray(r, dtype=float)), h)
        return sum(w * rho**l for w, l in zip(weights, degrees)) + 0.0 * rho

    return correlation


def chain_correlation(rate_matrix, g_i, g_j):
    """C(r) = E[g_i(Y_r) g_j(Y_0)] para una cadena estacionaria; C(-r) = E[g_j(Y_r) g_i(Y_0)]."""
    q = np.asarray(rate_matrix, dtype=float)
    pi = stationary_distribution(q)
    g_i = np.asarray(g_i, dtype=float) - pi @ np.asarray(g_i, dtype=float)
    g_j = np.asarray(g_j, dtype=float) - pi @ np.asarray(g_j, dtype=float)

    def correlation(r):
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        for index, lag in np.ndenumerate(r):
            transition = linalg.expm(q * abs(lag))
            if lag >= 0:
                out[index] = pi @ (g_j * (transition @ g_i))
            else:
                out[index] = pi @ (g_i * (transition @ g_j))
        return out

    return correlation


def _trapezoid_weights(n):
    weights = np.ones(n + 1)
    if n == 0:
        return np.zeros(1)
    weights[[0, -1]] = 0.5
    return weights


def prelimit_covariance(correlation, n_t, n_s, step):
    """
    Σ_a Σ_b w_a w_b C((a - b)·step) para las reglas de trapecios de n_t y n_s
    pasos: E[∫_0^{T} G_i ∫_0^{S} G_j] tal como lo calcula el simulador, sin el
    factor (α ε step)².
    """
    a = _trapezoid_weights(int(n_t))
    b = _trapezoid_weights(int(n_s))
    lag_weights = np.convolve(a, b[::-1])
    lags = np.arange(-(len(b) - 1), len(a)) * step
    return float(np.sum(lag_weights * correlation(lags)))
