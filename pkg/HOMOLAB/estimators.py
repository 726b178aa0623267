"""
Estimadores estadísticos compartidos por los experimentos.
"""
import math

import numpy as np
from scipy import stats

from .workers import path_generator


def wasserstein_1(a, b):
    """W1 empírico en 1-D. Con muestras del mismo tamaño usa el acoplamiento ordenado exacto."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) == len(b):
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    return float(stats.wasserstein_distance(a, b))


def sliced_wasserstein(a, b, n_projections=64, seed=0):
    """Promedio de W1 sobre proyecciones aleatorias sembradas (muestras (n, d))."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError("Las muestras deben tener la misma dimensión")
    directions = path_generator(seed, 0).standard_normal((n_projections, a.shape[1]))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return float(np.mean([wasserstein_1(a @ theta, b @ theta) for theta in directions]))


def law_distance(a, b, n_projections=64, seed=0):
    """W1 exacto en 1-D; en d >= 2, W1 por coordenada y estimación proyectada."""
    a = np.atleast_2d(np.asarray(a, dtype=float).T).T
    b = np.atleast_2d(np.asarray(b, dtype=float).T).T
    if a.ndim == 1 or a.shape[1] == 1:
        return {'w1': wasserstein_1(a, b)}
    per_coordinate = [wasserstein_1(a[:, k], b[:, k]) for k in range(a.shape[1])]
    return {
        'w1': sliced_wasserstein(a, b, n_projections, seed),
        'w1_coordinates': per_coordinate,
    }


def ks_normality(sample, scale=1.0, alpha=0.01, n_tests=1):
    """KS de sample/scale contra N(0,1), con corrección de Bonferroni sobre n_tests."""
    result = stats.kstest(np.asarray(sample, dtype=float) / scale, 'norm')
    threshold = alpha / n_tests
    return {
        'statistic': float(result.statistic),
        'pvalue': float(result.pvalue),
        'threshold': threshold,
        'passed': bool(result.pvalue > threshold),
    }


def variance_check(sample, expected, n_se=3.0):
    sample = np.asarray(sample, dtype=float)
    n = len(sample)
    variance = float(np.var(sample, ddof=1))
    fourth = float(np.mean((sample - sample.mean()) ** 4))
    se = math.sqrt(max(fourth - variance**2, 0.0) / n)
    return {
        'estimate': variance,
        'expected': float(expected),
        'se': se,
        'tolerance': n_se * se,
        'passed': bool(abs(variance - expected) <= n_se * se),
    }


def mean_check(sample, expected, n_se=3.0):
    sample = np.asarray(sample, dtype=float)
    mean = float(sample.mean())
    se = float(sample.std(ddof=1) / math.sqrt(len(sample)))
    return {
        'estimate': mean,
        'expected': float(expected),
        'se': se,
        'tolerance': n_se * se,
        'passed': bool(abs(mean - expected) <= n_se * se),
    }


def correlation_check(a, b, n_se=3.0):
    """Prueba de incorrelación: |r| <= n_se/sqrt(n)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = float(stats.pearsonr(a, b).statistic)
    bound = n_se / math.sqrt(len(a))
    return {'estimate': r, 'expected': 0.0, 'tolerance': bound, 'passed': bool(abs(r) <= bound)}


def fit_power_law(x, y):
    """Ajuste log-log y ≈ C x^k con intervalo de confianza al 95% para k."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("El ajuste de ley de potencia requiere valores positivos")
    fit = stats.linregress(np.log(x), np.log(y))
    half = stats.t.ppf(0.975, len(x) - 2) * fit.stderr if len(x) > 2 else math.inf
    return {
        'exponent': float(fit.slope),
        'prefactor': float(math.exp(fit.intercept)),
        'stderr': float(fit.stderr),
        'ci': [float(fit.slope - half), float(fit.slope + half)],
    }


def largest_increase(values, se=None, n_se=0.0):
    """
    max_i (v_{i+1} - v_i - n_se·sqrt(se_i² + se_{i+1}²)): <= 0 cuando la secuencia
    no crece más allá del ruido declarado.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise ValueError("Se necesitan al menos dos valores")
    slack = 0.0
    if se is not None:
        se = np.asarray(se, dtype=float)
        slack = n_se * np.hypot(se[:-1], se[1:])
    return float(np.max(np.diff(values) - slack))
