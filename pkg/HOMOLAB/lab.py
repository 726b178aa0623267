"""
Experimentos de certificación estadística y su persistencia.

Cada experimento recibe un ExperimentConfig validado y devuelve un
ConvergenceReport con métricas, tablas y veredictos. `run` escribe en el
directorio de salida, bajo `<kind>-<seed>-<hash>/`:

    report.json      reporte completo (sin marcas de tiempo: reproducible byte a byte)
    verdicts.csv     name, value, tolerance, comparison, target, passed, channel, epsilon, t, s
    metrics.csv      name, value
    <tabla>.csv      datos para gráficos, una fila por punto:
        ks               epsilon, channel, t, statistic, pvalue, variance_formula, limit_variance
        ks_by_epsilon    epsilon, median_statistic
        covariance       epsilon, j, l, t, s, estimate, expected, limit
        limit_gap        epsilon, channel, prelimit, limit, estimate, exact, empirical, se (CLT)
                         epsilon, max_relative_gap (grilla de covarianza)
        moments          gap, first_order_norm, second_order_norm
        variance_scaling t, variance
        w1_by_epsilon    epsilon, w1 (+ w1_x<k> por coordenada en d >= 2)
        quantiles        level, epsilon_<ε>..., limit
        lemma_residual   epsilon, median_abs_error, conditional, telescoping, median_block_sum_gap
        martingale_increments epsilon, martingale, witness, estimate, se, z
        memory_loss      channel, integral, tail_exponent, finite, ...
        coboundary       epsilon, variance, se
"""
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import django
import numpy as np
import scipy
import yaml
from django.conf import settings
from scipy import stats

from . import __version__, decomp, hermite, noise, roughpath, solver
from .estimators import (
    correlation_check,
    fit_power_law,
    ks_normality,
    largest_increase,
    law_distance,
    mean_check,
    sliced_wasserstein,
    variance_check,
    wasserstein_1,
)
from .exceptions import ConfigInvalid, FieldVanishes, GateFailed, HomolabError, HorizonTooShort, RegimeMismatch
from .models import Artifact, ExperimentRun
from .observables import Observable, hermite_observable, parse_observables
from .serializer import ExperimentConfigSerializer
from .storages import get_artifact_storage, save_json, save_table
from .workers import derive_seed, map_chunks

logger = logging.getLogger(__name__)

__all__ = [
    'ExperimentConfig', 'ConvergenceReport', 'Verdict',
    'verify_clt', 'verify_covariance', 'verify_moments', 'verify_hermite_regime',
    'homogenize', 'decomp_residual', 'run',
    'wasserstein_1', 'sliced_wasserstein', 'ks_normality', 'fit_power_law',
]

REPORT_SCHEMA_VERSION = 1
CLT_TIMES = (0.25, 0.5, 1.0)
LIMIT_STEPS = 1024
CHUNK_SIZE = 1024

DEFAULT_TOLERANCES = {
    'n_se': 3.0,
    'ks_trend_slack': 0.02,
    'moment_first': 0.05,
    'moment_second': 0.1,
    'hermite_exponent': 0.05,
    'hoelder_min': 0.5,
    'young_relative': 1e-3,
    'w1_1d': 0.05,
    'w1_nd': 0.1,
    'w1_trend_slack': 0.01,
    'identity': 1e-8,
    'limit_discretisation': 0.01,
}


def _lab_setting(name, default):
    return getattr(settings, 'HOMOLAB', {}).get(name, default)


# ---------------------------------------------------------------------------
# Configuración
# ---------------------------------------------------------------------------

def _first_error(errors, prefix=''):
    """Primer (campo, mensaje) de los errores anidados de un serializer."""
    if isinstance(errors, dict):
        key, value = next(iter(errors.items()))
        if key == 'non_field_errors':
            name = prefix or 'config'
        else:
            name = f"{prefix}.{key}" if prefix else str(key)
        return _first_error(value, name)
    if isinstance(errors, (list, tuple)):
        return _first_error(errors[0], prefix)
    return prefix or 'config', str(errors)


def _canonical(data):
    return json.loads(json.dumps(data, sort_keys=True, default=str))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    observables: tuple
    noise: dict
    epsilons: tuple
    n_paths: int
    t_max: float = 1.0
    vector_fields: tuple = ()
    x0: tuple = (1.0,)
    p: float = 8.0
    q: float = None
    r: float = 4.0
    n_split: int = None
    l_max: int = 16
    horizon: float = 32.0
    window: float = 8.0
    tolerances: dict = field(default_factory=dict)
    output_dir: str = ''
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigInvalid('config', "se esperaba un documento clave-valor")
        serializer = ExperimentConfigSerializer(data=data)
        if not serializer.is_valid():
            raise ConfigInvalid(*_first_error(serializer.errors))
        values = dict(serializer.validated_data)
        tolerances = {
            **DEFAULT_TOLERANCES,
            'ks_alpha': float(_lab_setting('KS_ALPHA', 0.01)),
            **values.get('tolerances', {}),
        }
        return cls(
            kind=values['kind'],
            seed=values['seed'],
            observables=tuple(values['observables']),
            noise=dict(values['noise']),
            epsilons=tuple(values['epsilons']),
            n_paths=values['n_paths'],
            t_max=values['t_max'],
            vector_fields=tuple(values.get('vector_fields') or ()),
            x0=tuple(values.get('x0') or (1.0,)),
            p=values['p'],
            q=values.get('q'),
            r=values['r'],
            n_split=values.get('n_split'),
            l_max=values['l_max'],
            horizon=values['horizon'],
            window=values['window'],
            tolerances=tolerances,
            output_dir=values.get('output_dir') or '',
            raw=_canonical(data),
        )

    @classmethod
    def from_yaml(cls, text):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigInvalid('config', f"YAML inválido: {e}")
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding='utf-8') as handle:
            return cls.from_yaml(handle.read())

    def with_overrides(self, **overrides):
        """Nueva configuración con los valores dados (los None se ignoran)."""
        data = dict(self.raw)
        data.update({key: value for key, value in overrides.items() if value is not None})
        return type(self).from_dict(data)

    @property
    def config_hash(self):
        hashed = {key: value for key, value in self.raw.items() if key != 'output_dir'}
        return hashlib.sha256(json.dumps(hashed, sort_keys=True).encode('utf-8')).hexdigest()

    @property
    def is_markov(self):
        return self.noise['kind'] == 'markov_chain'

    @property
    def h(self):
        return None if self.is_markov else self.noise['h']

    def tolerance(self, name):
        return self.tolerances[name]


# ---------------------------------------------------------------------------
# Reportes
# ---------------------------------------------------------------------------

def _jsonable(value):
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


_COMPARISONS = {
    '<=': lambda value, tolerance, target: value <= tolerance,
    '<': lambda value, tolerance, target: value < tolerance,
    '>=': lambda value, tolerance, target: value >= tolerance,
    '>': lambda value, tolerance, target: value > tolerance,
    'within': lambda value, tolerance, target: abs(value - target) <= tolerance,
}


@dataclass
class Verdict:
    name: str
    value: float
    tolerance: float
    comparison: str
    passed: bool
    target: float = None
    channel: object = None
    epsilon: float = None
    t: float = None
    s: float = None

    def to_json(self):
        return _jsonable(asdict(self))


@dataclass
class ConvergenceReport:
    kind: str
    seed: int
    config_hash: str
    provenance: dict
    metrics: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @classmethod
    def for_config(cls, config):
        return cls(
            kind=config.kind,
            seed=config.seed,
            config_hash=config.config_hash,
            provenance={
                'schema_version': REPORT_SCHEMA_VERSION,
                'versions': {
                    'homolab': __version__,
                    'numpy': np.__version__,
                    'scipy': scipy.__version__,
                    'django': django.get_version(),
                },
                'config': {key: value for key, value in config.raw.items() if key != 'output_dir'},
                'tolerances': dict(sorted(config.tolerances.items())),
            },
        )

    def check(self, name, value, tolerance, comparison, target=None, **where):
        passed = bool(_COMPARISONS[comparison](value, tolerance, target))
        verdict = Verdict(
            name=name, value=float(value), tolerance=float(tolerance), comparison=comparison,
            passed=passed, target=None if target is None else float(target), **where,
        )
        self.verdicts.append(verdict)
        if not passed:
            logger.warning(f"Veredicto fallido {name}: {value:.6g} {comparison} {tolerance:.6g} ({where})")
        return verdict

    def note(self, name, value):
        self.metrics[name] = _jsonable(value)

    def add_row(self, table, **row):
        self.tables.setdefault(table, []).append(_jsonable(row))

    @property
    def passed(self):
        return all(verdict.passed for verdict in self.verdicts)

    def to_json(self):
        return {
            'schema_version': REPORT_SCHEMA_VERSION,
            'kind': self.kind,
            'seed': self.seed,
            'config_hash': self.config_hash,
            'provenance': self.provenance,
            'metrics': self.metrics,
            'tables': self.tables,
            'verdicts': [verdict.to_json() for verdict in self.verdicts],
            'passed': self.passed,
        }


# ---------------------------------------------------------------------------
# Ruido, observables y escalamientos
# ---------------------------------------------------------------------------

def _n_fast(config, epsilon, t=None):
    return int(round((config.t_max if t is None else t) / (epsilon * config.noise['step'])))


def _stride_for(n_fast, parts):
    """Submuestreo que deja `parts` intervalos, o 1 si no divide."""
    if n_fast >= parts and n_fast % parts == 0:
        return n_fast // parts
    return 1


def _limit_stride(n_fast, target=LIMIT_STEPS):
    stride = max(1, n_fast // target)
    while n_fast % stride:
        stride -= 1
    return stride


def sample_fast_noise(config, span, tag, n_paths=None):
    """Ensamble del proceso rápido que cubre `span` unidades de tiempo rápido."""
    step = config.noise['step']
    grid = noise.TimeGrid(step, max(int(math.ceil(span / step - 1e-9)) + 1, 2))
    seed = derive_seed(config.seed, *tag)
    n_paths = n_paths or config.n_paths
    if config.is_markov:
        return noise.sample_markov_chain(
            grid, config.noise['rate_matrix'], config.noise['state_values'], n_paths, seed,
        )
    method = config.noise['method']
    if method == 'auto':
        method = 'exact_covariance' if grid.count <= noise.DENSE_LIMIT else 'euler_burnin'
    logger.info(f"Muestreando fOU H={config.h}: {n_paths} trayectorias, {grid.count} puntos ({method})")
    return noise.sample_fou(grid, config.h, n_paths, seed, method=method)


def _chain_states(config):
    rate = np.asarray(config.noise['rate_matrix'], dtype=float)
    states = np.asarray(config.noise['state_values'], dtype=float)
    pi = noise.stationary_distribution(rate)
    return pi, states - pi @ states


def build_observables(config):
    """Observables de la configuración; sobre una cadena se centran en la ley estacionaria."""
    observables = parse_observables(config.observables, l_max=config.l_max)
    if not config.is_markov:
        # Sobre fOU normalizado, 'state' es H_1
        return [hermite_observable([0.0, 1.0], o.name) if o.profile is None else o for o in observables]
    pi, states = _chain_states(config)
    centred = []
    for observable in observables:
        mean = float(pi @ observable(states))
        centred.append(Observable(
            name=observable.name,
            fn=lambda x, fn=observable.fn, mean=mean: np.asarray(fn(x), dtype=float) - mean,
            profile=None,
        ))
    return centred


def channel_regimes(observables, h):
    rows = []
    for k, observable in enumerate(observables):
        if h is None or observable.profile is None:
            rows.append({'channel': k, 'name': observable.name, 'rank': None, 'h_star': None,
                         'regime': hermite.REGIME_WIENER})
            continue
        rank = observable.profile.rank
        rows.append({
            'channel': k,
            'name': observable.name,
            'rank': rank,
            'h_star': hermite.h_star(rank, h),
            'regime': hermite.channel_regime(rank, h),
        })
    return rows


def channel_alphas(regimes, epsilon, h):
    return [
        epsilon**-0.5 if row['rank'] is None else hermite.scaling_rule(row['rank'], h).alpha(epsilon)
        for row in regimes
    ]


def _require_regime(regimes, regime):
    for row in regimes:
        if row['regime'] != regime:
            h_star = 'n/a' if row['h_star'] is None else f"{row['h_star']:.3f}"
            raise RegimeMismatch(
                f"El canal {row['channel']} ({row['name']}) no está en el régimen {regime} (H* = {h_star})",
                {'channel': row},
            )


def channel_correlation(config, observables, j, l):
    """C(r) = E[G_j(y_r) G_l(y_0)] del proceso rápido configurado."""
    if config.is_markov:
        _, states = _chain_states(config)
        return decomp.chain_correlation(config.noise['rate_matrix'], observables[j](states), observables[l](states))
    return decomp.chaos_correlation(observables[j].profile, observables[l].profile, config.h)


def channel_area_matrix(config, observables):
    if not observables:
        return np.zeros((0, 0))
    if config.is_markov:
        _, states = _chain_states(config)
        return decomp.chain_area_matrix(config.noise['rate_matrix'], [o(states) for o in observables])
    return decomp.area_matrix([o.profile for o in observables], config.h)


def _prelimit(config, observables, alphas, epsilon, j, l, t, s):
    """E[X^{j,ε}_t X^{l,ε}_s] exacto para el funcional discretizado."""
    step = config.noise['step']
    correlation = channel_correlation(config, observables, j, l)
    total = decomp.prelimit_covariance(correlation, _n_fast(config, epsilon, t), _n_fast(config, epsilon, s), step)
    return alphas[j] * alphas[l] * (epsilon * step) ** 2 * total


def scaled_paths(ensemble, observables, epsilon, alphas, t_max, stride=1, n_paths=None):
    """X^ε por bloques de trayectorias; devuelve (grilla, (n, count, d))."""
    n_paths = ensemble.n_paths if n_paths is None else min(n_paths, ensemble.n_paths)
    grid, pieces = None, []
    for start in range(0, n_paths, CHUNK_SIZE):
        part = replace(ensemble, values=ensemble.values[start: min(start + CHUNK_SIZE, n_paths)])
        grid, x = roughpath.scaled_functionals(part, observables, epsilon, alphas, t_max, stride=stride)
        pieces.append(x)
    return grid, np.concatenate(pieces)


def _note_memory(report, config, observables):
    if config.is_markov:
        mixing = noise.mixing_integral(config.noise['rate_matrix'], config.r)
        report.note('mixing', mixing)
        report.check('mixing_integral', mixing['integral'], math.inf, '<')
        return
    for k, observable in enumerate(observables):
        memory = noise.memory_loss_integral(observable.profile, config.h)
        report.add_row('memory_loss', channel=k, **memory)


# ---------------------------------------------------------------------------
# Experimentos
# ---------------------------------------------------------------------------

def _limit_covariance(A, j, l, t, s):
    """Covarianza del Wiener límite: (t∧s)(A^{jl} + A^{lj})."""
    return min(t, s) * (A[j, l] + A[l, j])


def verify_clt(config):
    """
    Normalidad de X^ε_t en t ∈ {0.25, 0.5, 1}·t_max con KS (Bonferroni sobre los
    tiempos), varianza frente a la fórmula pre-límite, prueba de incrementos,
    tendencia del estadístico KS y decrecimiento de la brecha |Var/(2tA) - 1|
    respecto de la varianza límite a lo largo del schedule.
    """
    report = ConvergenceReport.for_config(config)
    observables = build_observables(config)
    regimes = channel_regimes(observables, config.h)
    report.note('channels', regimes)
    _require_regime(regimes, hermite.REGIME_WIENER)

    A = channel_area_matrix(config, observables)
    report.note('area_matrix', A)
    _note_memory(report, config, observables)

    n_se = config.tolerance('n_se')
    times = [t * config.t_max for t in CLT_TIMES]
    d = len(observables)
    medians = []
    gaps = {k: {'exact': [], 'empirical': [], 'se': []} for k in range(d)}
    for epsilon in config.epsilons:
        last = epsilon == config.epsilons[-1]
        ensemble = sample_fast_noise(config, config.t_max / epsilon, ('clt', epsilon))
        alphas = channel_alphas(regimes, epsilon, config.h)
        grid, X = scaled_paths(
            ensemble, observables, epsilon, alphas, config.t_max, stride=_stride_for(_n_fast(config, epsilon), 4),
        )
        statistics = []
        for k in range(d):
            for t in times:
                variance = _prelimit(config, observables, alphas, epsilon, k, k, t, t)
                ks = ks_normality(X[:, grid.index_of(t), k], math.sqrt(variance), config.tolerance('ks_alpha'), len(times))
                statistics.append(ks['statistic'])
                report.add_row(
                    'ks', epsilon=epsilon, channel=k, t=t, statistic=ks['statistic'], pvalue=ks['pvalue'],
                    variance_formula=variance, limit_variance=_limit_covariance(A, k, k, t, t),
                )
                if last:
                    report.check('ks_normality', ks['pvalue'], ks['threshold'], '>', channel=k, epsilon=epsilon, t=t)

            terminal = X[:, grid.index_of(config.t_max), k]
            expected = _prelimit(config, observables, alphas, epsilon, k, k, config.t_max, config.t_max)
            variance = variance_check(terminal, expected, n_se)
            limit = _limit_covariance(A, k, k, config.t_max, config.t_max)
            if limit > 0:
                gap = {
                    'exact': abs(expected / limit - 1.0),
                    'empirical': abs(variance['estimate'] / limit - 1.0),
                    'se': variance['se'] / limit,
                }
                for name, value in gap.items():
                    gaps[k][name].append(value)
                report.add_row('limit_gap', epsilon=epsilon, channel=k, prelimit=expected, limit=limit,
                               estimate=variance['estimate'], **gap)
            if not last:
                continue

            report.check('variance', variance['estimate'], variance['tolerance'], 'within',
                         target=expected, channel=k, epsilon=epsilon, t=config.t_max)

            # X_{t/2} frente a X_t - X_{t/2}: covarianza pre-límite C(t, t/2) - C(t/2, t/2)
            half = 0.5 * config.t_max
            first = X[:, grid.index_of(half), k]
            increment = terminal - first
            expected_cross = (
                _prelimit(config, observables, alphas, epsilon, k, k, config.t_max, half)
                - _prelimit(config, observables, alphas, epsilon, k, k, half, half)
            )
            cross = mean_check(first * increment, expected_cross, n_se)
            report.check('increment_covariance', cross['estimate'], cross['tolerance'], 'within',
                         target=expected_cross, channel=k, epsilon=epsilon)
            report.note(f'increment_correlation_{k}', correlation_check(first, increment, n_se))

        medians.append(float(np.median(statistics)))
        report.add_row('ks_by_epsilon', epsilon=epsilon, median_statistic=medians[-1])
        logger.info(f"CLT ε={epsilon:g}: mediana KS {medians[-1]:.4f}")

    if len(medians) > 1:
        report.check('ks_trend', largest_increase(medians), config.tolerance('ks_trend_slack'), '<=')
        for k, gap in gaps.items():
            if len(gap['exact']) < 2:
                continue
            # La brecha exacta decrece estrictamente; la empírica, salvo ruido de n_se errores estándar
            report.check('limit_gap_trend', largest_increase(gap['exact']), 0.0, '<', channel=k)
            report.check('limit_gap_empirical_trend', largest_increase(gap['empirical'], gap['se'], n_se), 0.0, '<=',
                         channel=k)
    return report


def _covariance_limit_gap(config, observables, A, epsilon, regimes, times):
    """max |E[X^j_t X^l_s] - (t∧s)(A^{jl}+A^{lj})| / (2(t∧s)·sqrt(A^{jj}A^{ll})) sobre la grilla de tiempos."""
    alphas = channel_alphas(regimes, epsilon, config.h)
    worst = 0.0
    d = len(observables)
    for j in range(d):
        for l in range(j, d):
            scale_jl = math.sqrt(max(A[j, j] * A[l, l], 0.0))
            if scale_jl == 0.0:
                continue
            for t in times:
                for s in times:
                    prelimit = _prelimit(config, observables, alphas, epsilon, j, l, t, s)
                    gap = abs(prelimit - _limit_covariance(A, j, l, t, s)) / (2.0 * min(t, s) * scale_jl)
                    worst = max(worst, gap)
    return worst


def verify_covariance(config):
    """
    E[X^j_t X^l_s] en una grilla 3x3 de tiempos frente al valor pre-límite al ε
    más chico, y decrecimiento de la brecha con el límite (t∧s)(A^{jl}+A^{lj})
    a lo largo del schedule.
    """
    report = ConvergenceReport.for_config(config)
    observables = build_observables(config)
    regimes = channel_regimes(observables, config.h)
    report.note('channels', regimes)
    _require_regime(regimes, hermite.REGIME_WIENER)
    A = channel_area_matrix(config, observables)
    report.note('area_matrix', A)
    times = [t * config.t_max for t in CLT_TIMES]

    gaps = []
    for epsilon in config.epsilons:
        gaps.append(_covariance_limit_gap(config, observables, A, epsilon, regimes, times))
        report.add_row('limit_gap', epsilon=epsilon, max_relative_gap=gaps[-1])
    if len(gaps) > 1:
        report.check('limit_gap_trend', largest_increase(gaps), 0.0, '<')

    epsilon = config.epsilons[-1]
    ensemble = sample_fast_noise(config, config.t_max / epsilon, ('covariance', epsilon))
    alphas = channel_alphas(regimes, epsilon, config.h)
    grid, X = scaled_paths(
        ensemble, observables, epsilon, alphas, config.t_max, stride=_stride_for(_n_fast(config, epsilon), 4),
    )
    d = len(observables)
    for j in range(d):
        for l in range(j, d):
            for t in times:
                for s in times:
                    expected = _prelimit(config, observables, alphas, epsilon, j, l, t, s)
                    products = X[:, grid.index_of(t), j] * X[:, grid.index_of(s), l]
                    check = mean_check(products, expected, config.tolerance('n_se'))
                    report.check('covariance', check['estimate'], check['tolerance'], 'within',
                                 target=expected, channel=[j, l], epsilon=epsilon, t=t, s=s)
                    report.add_row(
                        'covariance', epsilon=epsilon, j=j, l=l, t=t, s=s, estimate=check['estimate'],
                        expected=expected, limit=_limit_covariance(A, j, l, t, s),
                    )
    report.check('zero_at_origin', float(np.max(np.abs(X[:, 0, :]))), 0.0, '<=', epsilon=epsilon)
    return report


def verify_moments(config):
    """Pendientes log-log de ‖X_{s,t}‖_{L^p} y ‖𝕏_{s,t}‖_{L^{p/2}} sobre huecos diádicos >= 16ε."""
    report = ConvergenceReport.for_config(config)
    observables = build_observables(config)
    regimes = channel_regimes(observables, config.h)
    _require_regime(regimes, hermite.REGIME_WIENER)

    epsilon = config.epsilons[-1]
    ensemble = sample_fast_noise(config, config.t_max / epsilon, ('moments', epsilon))
    alphas = channel_alphas(regimes, epsilon, config.h)
    n_fast = _n_fast(config, epsilon)
    per_unit = int(round(1.0 / config.noise['step']))
    stride = per_unit if n_fast % per_unit == 0 else 1
    lift = roughpath.scaled_functional_lift(ensemble, observables, epsilon, alphas, config.t_max, stride=stride)

    min_gap = math.ceil(16.0 * epsilon / lift.grid.step - 1e-9)
    gaps = [2**j for j in range(0, 32) if 2**j >= min_gap and 2 * 2**j < lift.count]
    if len(gaps) < 3:
        raise HorizonTooShort(
            f"Se necesitan al menos 3 huecos diádicos >= 16ε (hay {len(gaps)})", {'gaps': gaps},
        )
    fit = roughpath.moment_exponents(lift, config.p, gaps)
    report.note('moment_fit', fit)
    if fit['degenerate']:
        logger.warning("Trayectorias degeneradas: se omite el ajuste de momentos")
        report.note('degenerate', True)
        return report

    for gap, first, second in zip(fit['gaps'], fit['first']['norms'], fit['second']['norms']):
        report.add_row('moments', gap=gap, first_order_norm=first, second_order_norm=second)
    report.check('first_order_exponent', fit['first']['slope'], config.tolerance('moment_first'), 'within',
                 target=0.5, epsilon=epsilon)
    report.check('second_order_exponent', fit['second']['slope'], config.tolerance('moment_second'), 'within',
                 target=1.0, epsilon=epsilon)
    return report


def verify_hermite_regime(config):
    """
    Régimen de Hermite (un canal, H* > 1/2): Var(X^ε_t) ∝ t^{2H*}, exponente de
    Hölder > 1/2 y solución de Young de dx = x dX frente a x0·exp(X).
    """
    report = ConvergenceReport.for_config(config)
    if config.is_markov:
        raise RegimeMismatch("El régimen de Hermite requiere ruido fOU")
    observables = build_observables(config)
    if len(observables) != 1:
        raise ConfigInvalid('observables', "el régimen de Hermite se verifica con un solo canal")
    regimes = channel_regimes(observables, config.h)
    report.note('channels', regimes)
    _require_regime(regimes, hermite.REGIME_HERMITE)
    target = regimes[0]['h_star']

    epsilon = config.epsilons[-1]
    ensemble = sample_fast_noise(config, config.t_max / epsilon, ('hermite', epsilon))
    alphas = channel_alphas(regimes, epsilon, config.h)
    grid, X = scaled_paths(
        ensemble, observables, epsilon, alphas, config.t_max, stride=_stride_for(_n_fast(config, epsilon), 64),
    )
    times = config.t_max * np.geomspace(1.0 / 16.0, 1.0, 5)
    variances = np.array([np.var(X[:, grid.index_of(t), 0], ddof=1) for t in times])
    for t, variance in zip(times, variances):
        report.add_row('variance_scaling', t=t, variance=variance)
    fit = fit_power_law(times, variances)
    report.note('variance_fit', fit)
    report.check('self_similarity_exponent', 0.5 * fit['exponent'], config.tolerance('hermite_exponent'), 'within',
                 target=target, epsilon=epsilon)

    fine_grid, fine = scaled_paths(ensemble, observables, epsilon, alphas, config.t_max, n_paths=100)
    exponent = roughpath.holder_exponent(fine, fine_grid.step)
    report.check('hoelder_exponent', exponent, config.tolerance('hoelder_min'), '>', epsilon=epsilon)

    solution = solver.solve_young(
        [solver.LinearField([[1.0]])], fine, fine_grid, [1.0], refine=False, scheme='heun',
    )
    oracle = np.exp(fine)
    relative = float(np.max(np.abs(solution.states - oracle) / np.abs(oracle)))
    report.check('young_oracle_relative_error', relative, config.tolerance('young_relative'), '<=', epsilon=epsilon)
    return report


NAMED_FIELDS = {
    'linear': lambda dim: solver.LinearField(np.eye(dim), name='linear'),
    'zero': lambda dim: solver.ConstantField(np.zeros(dim), name='zero'),
    'one': lambda dim: solver.ConstantField(np.ones(dim), name='one'),
    'sin': lambda dim: solver.CallableField(np.sin, np.cos, name='sin'),
}


def build_fields(config):
    dim = len(config.x0)
    fields = []
    for spec in config.vector_fields:
        if isinstance(spec, str):
            if spec not in NAMED_FIELDS or (spec == 'sin' and dim != 1):
                raise ConfigInvalid('vector_fields', f"campo desconocido para dimensión {dim}: {spec!r}")
            fields.append(NAMED_FIELDS[spec](dim))
        elif 'matrix' in spec:
            fields.append(solver.LinearField(spec['matrix']))
        else:
            fields.append(solver.ConstantField(spec['vector']))
    return fields


def _multiscale_terminal(config, system, ensemble, epsilon):
    rows = []
    for start in range(0, ensemble.n_paths, CHUNK_SIZE):
        solution = solver.solve_multiscale(
            system, epsilon, ensemble.values[start: start + CHUNK_SIZE], ensemble.grid, config.t_max,
            h=config.h, record_every=None,
        )
        rows.append(solution.terminal)
    return np.concatenate(rows)


def _wiener_increments(config, grid, covariance):
    """Incrementos de un Wiener con covarianza `covariance`·dt (raíz por eigh)."""
    values, vectors = np.linalg.eigh(covariance)
    root = vectors * np.sqrt(np.clip(values, 0.0, None))
    scale = math.sqrt(grid.step)

    def _draw(rngs):
        z = np.stack([rng.standard_normal((grid.count - 1, len(covariance))) for rng in rngs])
        return scale * z @ root.T

    return map_chunks(_draw, config.n_paths, derive_seed(config.seed, 'limit-wiener'))


def _limit_terminal(config, report, fields, observables, regimes, n_split):
    """
    Ley de x_{t_max} para la ecuación límite: bloque de Wiener con covarianza 2A,
    lift de Stratonovich más la parte antisimétrica de A; bloque de Hermite desde
    los funcionales escalados al ε más chico, con 𝕏 cruzado nulo.
    """
    d = len(observables)
    x0 = np.asarray(config.x0, dtype=float)
    hermite_driver = None
    if n_split < d:
        epsilon = config.epsilons[-1]
        ensemble = sample_fast_noise(config, config.t_max / epsilon, ('limit-hermite', epsilon))
        alphas = channel_alphas(regimes[n_split:], epsilon, config.h)
        n_fast = _n_fast(config, epsilon)
        grid, hermite_driver = scaled_paths(
            ensemble, observables[n_split:], epsilon, alphas, config.t_max, stride=_limit_stride(n_fast),
        )
    else:
        grid = noise.TimeGrid(config.t_max / LIMIT_STEPS, LIMIT_STEPS + 1)

    wiener = None
    A = np.zeros((n_split, n_split))
    if n_split:
        A = channel_area_matrix(config, observables[:n_split])
        increments = _wiener_increments(config, grid, A + A.T)
        wiener = np.concatenate([np.zeros((config.n_paths, 1, n_split)), np.cumsum(increments, axis=1)], axis=1)
    antisymmetric = 0.5 * (A - A.T)
    report.note('limit', {
        'grid': grid.to_json(),
        'wiener_channels': n_split,
        'wiener_covariance': A + A.T,
        'area_drift': antisymmetric,
        'lift': 'stratonovich+area_drift' if n_split else 'young',
    })

    if n_split == 1 == d and len(x0) == 1:
        try:
            driver = np.stack([np.zeros(config.n_paths), wiener[:, -1, 0]], axis=1)
            solution = solver.oracle_1d(fields[0], x0[0], driver, noise.TimeGrid(config.t_max, 2))
            report.note('limit_solver', 'oracle_1d')
            return solution.terminal
        except FieldVanishes:
            logger.info("f se anula: se usa el esquema de Davie para el límite")

    def _solve(start, stop, stride=1):
        if n_split == 0:
            driver = hermite_driver[start:stop, ::stride]
            coarse = noise.TimeGrid(grid.step * stride, driver.shape[1])
            return solver.solve_young(fields, driver, coarse, x0, refine=False, scheme='heun')
        lift = roughpath.add_area_drift(roughpath.geometric_lift(wiener[start:stop], grid), antisymmetric)
        if hermite_driver is not None:
            lift = roughpath.combine_blocks(lift, roughpath.geometric_lift(hermite_driver[start:stop], grid))
        return solver.solve_rde(fields, lift.restrict(stride), x0, refine=False)

    rows = [_solve(start, start + CHUNK_SIZE).terminal for start in range(0, config.n_paths, CHUNK_SIZE)]
    report.note('limit_solver', 'young-heun' if n_split == 0 else 'davie')
    # error de discretización del límite: mitad de resolución sobre el primer bloque
    if (grid.count - 1) % 2 == 0:
        coarse = _solve(0, CHUNK_SIZE, stride=2).terminal
        gap = wasserstein_1(coarse[:, 0], rows[0][:, 0])
        report.check('limit_discretisation', gap, config.tolerance('limit_discretisation'), '<=')
    return np.concatenate(rows)


def homogenize(config):
    """Distancia W1 entre la ley de x^ε_{t_max} y la de la ecuación límite, a lo largo del schedule."""
    report = ConvergenceReport.for_config(config)
    observables = build_observables(config)
    regimes = channel_regimes(observables, config.h)
    report.note('channels', regimes)
    fields = build_fields(config)
    d = len(observables)
    n_split = config.n_split
    if n_split is None:
        n_split = sum(row['regime'] == hermite.REGIME_WIENER for row in regimes)

    if not config.is_markov:
        p = [config.p] * d
        gate = hermite.assumption_gate([o.profile for o in observables], p, config.h, n_split, q=config.q)
        report.note('gate', gate)
        if not gate['passed']:
            raise GateFailed(f"Condición violada: {gate['violated']}", gate)

    system = solver.MultiscaleSystem(len(config.x0), fields, observables, config.x0, n_split)
    limit = _limit_terminal(config, report, system.fields, observables, regimes, n_split)

    levels = np.linspace(0.05, 0.95, 19)
    quantiles = {'limit': np.quantile(limit[:, 0], levels)}
    distances = []
    projections = int(_lab_setting('SLICED_PROJECTIONS', 64))
    for epsilon in config.epsilons:
        ensemble = sample_fast_noise(config, config.t_max / epsilon, ('homogenize', epsilon))
        terminal = _multiscale_terminal(config, system, ensemble, epsilon)
        distance = law_distance(terminal, limit, projections, seed=derive_seed(config.seed, 'sliced'))
        distances.append(distance['w1'])
        row = {'epsilon': epsilon, 'w1': distance['w1']}
        for k, value in enumerate(distance.get('w1_coordinates', [])):
            row[f'w1_x{k + 1}'] = value
        report.add_row('w1_by_epsilon', **row)
        quantiles[f'epsilon_{epsilon:g}'] = np.quantile(terminal[:, 0], levels)
        logger.info(f"Homogeneización ε={epsilon:g}: W1 = {distance['w1']:.4f}")

    for i, level in enumerate(levels):
        report.add_row('quantiles', level=level, **{name: values[i] for name, values in quantiles.items()})

    tolerance = config.tolerance('w1_1d') if len(config.x0) == 1 else config.tolerance('w1_nd')
    report.check('w1_limit', distances[-1], tolerance, '<=', epsilon=config.epsilons[-1])
    if len(distances) > 1:
        report.check('w1_trend', largest_increase(distances), config.tolerance('w1_trend_slack'), '<=')
    return report


def decomp_residual(config):
    """
    Identidades de la descomposición martingala-coborde, propiedad de martingala
    de M y N y residuo del lema de área para el par (U, V) = (G_1, G_2) a lo largo
    del schedule. Sin pérdida de memoria integrable lanza TailDivergent.
    """
    report = ConvergenceReport.for_config(config)
    if config.is_markov:
        raise ConfigInvalid('noise', "la descomposición condicional requiere ruido fOU")
    observables = build_observables(config)
    if len(observables) < 2:
        raise ConfigInvalid('observables', "se necesitan dos observables (U, V)")
    U, V = observables[0].profile, observables[1].profile
    h = config.h

    for k, profile in enumerate((U, V)):
        report.add_row('memory_loss', channel=k, **noise.memory_loss_integral(profile, h))
    # Antes de muestrear: sin cola integrable Û y M no están definidos
    decomp.memory_verdict(U, h)
    decomp.memory_verdict(V, h)

    A_uv = decomp.area_constant(U, V, h)
    A_uu = decomp.area_constant(U, U, h)
    A_vv = decomp.area_constant(V, V, h)
    report.note('area', {'uv': A_uv, 'uu': A_uu, 'vv': A_vv})
    report.check('area_positive_U', A_uu, 0.0, '>')
    report.check('area_positive_V', A_vv, 0.0, '>')
    # Caos disjuntos: A^{UV} = 0 por ortogonalidad
    shared = set(np.flatnonzero(U.coeffs)) & set(np.flatnonzero(V.coeffs))
    if not shared:
        report.check('area_cross_orthogonal', abs(A_uv), config.tolerance('identity'), '<=')

    identity = config.tolerance('identity')
    medians = []
    ensemble = None
    for epsilon in config.epsilons:
        n_blocks = int(math.floor(config.t_max / epsilon + 1e-9))
        span = config.window + n_blocks + 1 + config.horizon + 2
        ensemble = sample_fast_noise(config, span, ('decomp', epsilon))
        functionals = decomp.discrete_functionals(
            ensemble, U, V, epsilon, t=config.t_max, horizon=config.horizon, window=config.window,
        )
        violations = functionals.identity_violations()
        report.check('conditional_identity', violations['conditional'], identity, '<=', epsilon=epsilon)
        report.check('telescoping_identity', violations['telescoping'], identity, '<=', epsilon=epsilon)

        # Las identidades valen por construcción; la martingala se prueba contra testigos F_k-medibles
        increments = functionals.martingale_increments()
        bound = float(stats.norm.isf(config.tolerance('ks_alpha') / (2 * len(increments) * len(config.epsilons))))
        for row in increments:
            report.check('martingale_increment', abs(row['z']), bound, '<=',
                         channel=f"{row['martingale']}:{row['witness']}", epsilon=epsilon)
            report.add_row('martingale_increments', epsilon=epsilon, **row)

        residual = decomp.lemma_residual(functionals, A_uv)
        medians.append(float(np.median(np.abs(residual))))
        L = functionals.n_blocks
        left_sum = decomp.block_double_sum(functionals.I[:, :L], functionals.J[:, :L], epsilon)
        report.add_row(
            'lemma_residual', epsilon=epsilon, median_abs_error=medians[-1],
            median_block_sum_gap=float(np.median(np.abs(functionals.lhs - left_sum))), **violations,
        )
        logger.info(f"Lema de área ε={epsilon:g}: mediana |err| = {medians[-1]:.4g}")

    if len(medians) > 1:
        report.check('lemma_residual_trend', largest_increase(medians), 0.0, '<')

    for row in decomp.coboundary_variance(
        ensemble, U, config.epsilons, t=config.t_max, horizon=config.horizon, window=config.window,
    ):
        report.add_row('coboundary', **row)
    return report


EXPERIMENTS = {
    'clt': verify_clt,
    'mixing': verify_clt,
    'covariance': verify_covariance,
    'moment_fit': verify_moments,
    'hermite_regime': verify_hermite_regime,
    'homogenize_1d': homogenize,
    'homogenize_nd': homogenize,
    'decomp_residual': decomp_residual,
}


def run_experiment(config):
    logger.info(f"Experimento {config.kind} (semilla {config.seed}, {config.n_paths} trayectorias)")
    return EXPERIMENTS[config.kind](config)


# ---------------------------------------------------------------------------
# Artefactos
# ---------------------------------------------------------------------------

def scaled_lift(config, ensemble, epsilon=None):
    """Lift de X^ε en la grilla de paso ε (comando `lift`)."""
    epsilon = epsilon or config.epsilons[-1]
    observables = build_observables(config)
    regimes = channel_regimes(observables, config.h)
    alphas = channel_alphas(regimes, epsilon, config.h)
    per_unit = int(round(1.0 / config.noise['step']))
    stride = per_unit if _n_fast(config, epsilon) % per_unit == 0 else 1
    return roughpath.scaled_functional_lift(ensemble, observables, epsilon, alphas, config.t_max, stride=stride)


def run_prefix(config):
    return f"{config.kind}-{config.seed}-{config.config_hash[:8]}"


def write_artifacts(storage, prefix, report):
    """Escribe reporte, veredictos, métricas y tablas. Devuelve [(tipo, nombre)]."""
    written = [('report', save_json(storage, f"{prefix}/report.json", report.to_json()))]
    written.append(('table', save_table(storage, f"{prefix}/verdicts.csv", [v.to_json() for v in report.verdicts])))
    metrics = [{'name': name, 'value': value} for name, value in sorted(report.metrics.items())]
    written.append(('table', save_table(storage, f"{prefix}/metrics.csv", metrics)))
    for name, rows in sorted(report.tables.items()):
        written.append(('plot_data', save_table(storage, f"{prefix}/{name}.csv", rows)))
    return written


def run(config, out=None, record=True):
    """
    Ejecuta el experimento de `config` (ruta YAML o ExperimentConfig), escribe los
    artefactos y devuelve (reporte, código de salida): 0 si todos los veredictos pasan.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_file(config)
    out_dir = out or config.output_dir or _lab_setting('OUTPUT_DIR', 'resultados')
    storage = get_artifact_storage(out_dir)
    prefix = run_prefix(config)

    record_run = None
    if record:
        record_run = ExperimentRun.objects.create(
            kind=config.kind, seed=config.seed, config=config.raw, config_hash=config.config_hash,
            output_dir=str(out_dir),
        )
    try:
        report = run_experiment(config)
    except HomolabError as e:
        logger.error(f"Experimento {config.kind} fallido: {e}")
        if record_run is not None:
            record_run.status = 'fallido'
            record_run.passed = False
            record_run.error = str(e)
            record_run.save()
        raise

    written = write_artifacts(storage, prefix, report)
    if record_run is not None:
        record_run.status = 'completado'
        record_run.passed = report.passed
        record_run.report = report.to_json()
        record_run.save()
        Artifact.objects.bulk_create([
            Artifact(run=record_run, kind=kind, path=name, size=storage.size(name)) for kind, name in written
        ])
    logger.info(f"Experimento {config.kind}: {'aprobado' if report.passed else 'con veredictos fallidos'}")
    return report, 0 if report.passed else 1
