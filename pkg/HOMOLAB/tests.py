import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import yaml
from django.contrib.auth.models import User
from django.core.files.storage import FileSystemStorage
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import Client, SimpleTestCase, TestCase

from . import decomp, hermite, lab, noise, roughpath, solver, storages
from .estimators import largest_increase, mean_check, variance_check
from .exceptions import (
    Blowup, ConfigInvalid, DegreeTooLarge, DimensionMismatch, EmbeddingNotPSD, FieldVanishes, GridMismatch,
    GridTooLarge, HorizonTooShort, InvalidGenerator, NoConvergence, NotCentred, NotIrreducible,
    OrderingViolation, RankZero, RegimeMismatch, RegularityTooLow, TailDivergent,
)
from .hermite import HermiteProfile
from .management.commands._base import parse_epsilons
from .models import Artifact, ExperimentRun
from .noise import StationaryEnsemble, TimeGrid, as_hurst, fbm_paths, sample_fbm, sample_fou
from .observables import hermite_observable
from .roughpath import geometric_lift
from .storages import load_ensemble
from .workers import path_generator


class TimeGridTest(SimpleTestCase):
    """Pruebas para la grilla uniforme"""

    def test_grilla_degenerada_rechazada(self):
        print("\n[TEST] Iniciando prueba: grillas inválidas")
        with self.assertRaises(ValueError):
            noise.TimeGrid(0.1, 1)
        with self.assertRaises(ValueError):
            noise.TimeGrid(0.0, 10)
        print("[TEST] ✓ count < 2 y paso nulo rechazados")

    def test_tiempos_e_indices(self):
        grid = noise.TimeGrid(0.25, 5)
        np.testing.assert_allclose(grid.times, [0.0, 0.25, 0.5, 0.75, 1.0])
        self.assertEqual(grid.horizon, 1.0)
        self.assertEqual(grid.index_of(0.5), 2)
        self.assertEqual(grid.to_json(), {'step': 0.25, 'count': 5})
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: tiempos, horizonte e índices")

    def test_hurst_fuera_de_rango(self):
        for h in (0.0, 1.0, -0.2):
            with self.assertRaises(ValueError):
                noise.HurstParameter(h)


class FbmTest(SimpleTestCase):
    """Pruebas para el muestreador exacto de fBM"""

    def test_covarianza_cerrada(self):
        self.assertAlmostEqual(noise.fbm_covariance(1.0, 1.0, 0.7), 1.0)
        # H = 1/2: movimiento browniano, Cov = min(s, t)
        self.assertAlmostEqual(noise.fbm_covariance(0.3, 0.8, 0.5), 0.3)

    def test_covarianza_empirica(self):
        """Cov(B_s, B_t) empírica contra la forma cerrada (±4·SE)"""
        print("\n[TEST] Iniciando prueba: covarianza empírica de fBM")
        grid = noise.TimeGrid(1.0 / 64, 64)
        for h in (0.3, 0.5, 0.7, 0.9):
            ensemble = noise.sample_fbm(grid, h, 4000, seed=11)
            paths = noise.fbm_paths(ensemble)
            b_half, b_one = paths[:, 32], paths[:, 64]
            check = variance_check(b_one, noise.fbm_covariance(1.0, 1.0, h), n_se=4.0)
            self.assertTrue(check['passed'], check)
            cross = mean_check(b_half * b_one, noise.fbm_covariance(0.5, 1.0, h), n_se=4.0)
            self.assertTrue(cross['passed'], cross)
            print(f"[TEST] ✓ H={h}: Var(B_1)={check['estimate']:.4f}, Cov(B_.5, B_1)={cross['estimate']:.4f}")

    def test_reproducible_por_semilla(self):
        grid = noise.TimeGrid(0.1, 32)
        a = noise.sample_fbm(grid, 0.7, 10, seed=3)
        b = noise.sample_fbm(grid, 0.7, 10, seed=3)
        np.testing.assert_array_equal(a.values, b.values)
        self.assertFalse(a.values.flags.writeable)

    def test_correlacion_de_incrementos(self):
        """Incrementos unitarios: ½(t+1)^{2H} + ½(t-1)^{2H} - t^{2H}, nula en H = 1/2"""
        print("\n[TEST] Iniciando prueba: correlación de incrementos de fBM")
        self.assertAlmostEqual(noise.increment_correlation(3.0, 0.5), 0.0, places=12)
        self.assertAlmostEqual(noise.increment_correlation(1.0, 0.7), 0.5 * 2.0**1.4 - 1.0, places=12)
        np.testing.assert_allclose(noise.increment_correlation([1.0, 2.0], 0.3), [0.5 * 2.0**0.6 - 1.0,
                                   0.5 * 3.0**0.6 + 0.5 - 2.0**0.6])
        with self.assertRaises(ValueError):
            noise.increment_correlation(0.5, 0.7)

        ensemble = noise.sample_fbm(noise.TimeGrid(1.0, 16), 0.7, 4000, seed=13)
        for lag in (1, 3):
            expected = noise.increment_correlation(float(lag), 0.7)
            check = mean_check(ensemble.values[:, 0] * ensemble.values[:, lag], expected, n_se=4.0)
            self.assertTrue(check['passed'], check)
            print(f"[TEST] ✓ Desfase {lag}: {check['estimate']:.4f} (exacto {expected:.4f})")
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: correlación de incrementos")


class StationaryFactorTest(SimpleTestCase):
    """Pruebas para la raíz de la covarianza Toeplitz"""

    def test_respaldo_denso(self):
        # el espectro circulante de (1, 0.8, 0.5, 0.8) tiene el valor -0.1; la Toeplitz es definida positiva
        acov = [1.0, 0.8, 0.5]
        with self.assertLogs('HOMOLAB.noise', level='WARNING'):
            factor = noise._StationaryGaussianFactor(acov, 'prueba')
        self.assertEqual(factor.method, 'dense')
        toeplitz = np.array([[1.0, 0.8, 0.5], [0.8, 1.0, 0.8], [0.5, 0.8, 1.0]])
        np.testing.assert_allclose(factor._root @ factor._root.T, toeplitz, atol=1e-12)
        sample = factor.sample([path_generator(4, i) for i in range(3)])
        self.assertEqual(sample.shape, (3, 3))

    def test_circulante(self):
        factor = noise._StationaryGaussianFactor(noise.fou_autocorrelation_table(np.arange(32) * 0.5, 0.5), 'ou')
        self.assertEqual(factor.method, 'circulant')

    def test_covarianza_no_definida(self):
        with self.assertRaises(EmbeddingNotPSD):
            noise._StationaryGaussianFactor([1.0, 0.9, 0.5], 'prueba')


class FouTest(SimpleTestCase):
    """Pruebas para el proceso de Ornstein-Uhlenbeck fraccionario"""

    def test_autocorrelacion_ou(self):
        """En H = 1/2 la autocorrelación es e^{-t}"""
        print("\n[TEST] Iniciando prueba: oráculo OU")
        for t in (0.0, 0.5, 1.0, 2.0):
            self.assertAlmostEqual(noise.fou_autocorrelation(t, 0.5), math.exp(-t), places=7)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: ρ(t) = e^{-t} en H = 1/2")

    def test_autocorrelacion_decreciente(self):
        rho = noise.fou_autocorrelation_table([0.0, 0.5, 1.0, 2.0, 4.0, 8.0], 0.7)
        self.assertEqual(rho[0], 1.0)
        self.assertTrue(np.all(np.diff(rho) < 0))
        self.assertTrue(np.all(rho > 0))

    def test_muestreo_exacto_estacionario(self):
        print("\n[TEST] Iniciando prueba: fOU exacto normalizado")
        grid = noise.TimeGrid(0.25, 65)
        ensemble = noise.sample_fou(grid, 0.7, 4000, seed=5)
        self.assertTrue(ensemble.normalized)
        self.assertEqual(ensemble.values.shape, (4000, 65))
        for column in (0, 32, 64):
            check = variance_check(ensemble.values[:, column], 1.0, n_se=4.0)
            self.assertTrue(check['passed'], check)
        rho = noise.fou_autocorrelation(1.0, 0.7)
        lag = mean_check(ensemble.values[:, 0] * ensemble.values[:, 4], rho, n_se=4.0)
        self.assertTrue(lag['passed'], lag)
        print(f"[TEST] ✓ E[y_0 y_1] = {lag['estimate']:.4f} (exacto {rho:.4f})")

    def test_grilla_demasiado_grande(self):
        grid = noise.TimeGrid(0.25, noise.DENSE_LIMIT + 1)
        with self.assertRaises(GridTooLarge):
            noise.sample_fou(grid, 0.7, 2, seed=0)

    def test_nucleo_ou(self):
        """En H = 1/2 el núcleo de Volterra es e^{-u}"""
        for u in (0.1, 1.0, 3.0):
            self.assertAlmostEqual(noise.fou_kernel(u, 0.5), math.exp(-u), places=8)

    def test_division_condicional_ou(self):
        grid = noise.TimeGrid(0.5, 5)
        split = noise.conditional_split(0.5, grid, anchor=1)
        np.testing.assert_allclose(split.sigma_bar_sq[1:], np.exp(-2.0 * (grid.times[1:] - 0.5)), atol=1e-6)
        np.testing.assert_allclose(split.sigma_bar_sq + split.sigma_tilde_sq, 1.0)

    def test_division_condicional_fraccionaria(self):
        """H = 0.7: σ̃² crece hacia 1 y σ̄²(τ) decae como τ^{2H-2}"""
        print("\n[TEST] Iniciando prueba: división condicional con H = 0.7")
        grid = noise.TimeGrid(25.0, 9)
        split = noise.conditional_split(0.7, grid, anchor=0)
        self.assertEqual(split.sigma_tilde_sq[0], 0.0)
        self.assertTrue(np.all(np.diff(split.sigma_tilde_sq) >= 0.0))
        self.assertGreater(split.sigma_tilde_sq[-1], 0.98)
        print(f"[TEST] ✓ σ̃²(200) = {split.sigma_tilde_sq[-1]:.4f}")
        ratio = split.sigma_bar_sq[4] / split.sigma_bar_sq[8]
        self.assertAlmostEqual(ratio, 2.0**0.6, delta=0.05)
        print(f"[TEST] ✓✓✓ PRUEBA EXITOSA: σ̄²(100)/σ̄²(200) = {ratio:.3f}")


class MarkovChainTest(SimpleTestCase):
    """Pruebas para el ruido de cadena de Markov"""

    def setUp(self):
        self.rate = [[-1.0, 1.0], [1.0, -1.0]]

    def test_distribucion_estacionaria(self):
        pi = noise.stationary_distribution([[-1.0, 1.0], [2.0, -2.0]])
        np.testing.assert_allclose(pi, [2.0 / 3.0, 1.0 / 3.0])

    def test_generadores_invalidos(self):
        with self.assertRaises(NotIrreducible):
            noise.stationary_distribution([[0.0, 0.0], [1.0, -1.0]])
        with self.assertRaises(InvalidGenerator):
            noise.stationary_distribution([[-1.0, 2.0], [1.0, -1.0]])

    def test_muestreo_centrado(self):
        print("\n[TEST] Iniciando prueba: cadena de dos estados")
        grid = noise.TimeGrid(0.25, 41)
        ensemble = noise.sample_markov_chain(grid, self.rate, [0.0, 2.0], 4000, seed=8)
        self.assertEqual(ensemble.kind, 'markov_chain')
        self.assertTrue(set(np.unique(ensemble.values)) <= {-1.0, 1.0})
        check = mean_check(ensemble.values[:, 20], 0.0, n_se=4.0)
        self.assertTrue(check['passed'], check)
        # Correlación e^{-2t} a t = 0.5
        lag = mean_check(ensemble.values[:, 0] * ensemble.values[:, 2], math.exp(-1.0), n_se=4.0)
        self.assertTrue(lag['passed'], lag)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: valores centrados y correlación exponencial")

    def test_integral_de_mezcla(self):
        result = noise.mixing_integral(self.rate, 4.0)
        self.assertAlmostEqual(result['spectral_gap'], 2.0)
        self.assertAlmostEqual(result['exponent'], 0.25)
        self.assertTrue(result['finite'])
        self.assertTrue(math.isfinite(result['integral']))
        with self.assertRaises(ValueError):
            noise.mixing_integral(self.rate, 2.0)


class ConditionalExpectationTest(SimpleTestCase):
    """Pruebas para E[H_l(a + ỹ)] y la integral de pérdida de memoria"""

    def test_sin_ruido_independiente(self):
        # σ̄² = 1: ỹ = 0 y la esperanza es H_l(a)
        self.assertAlmostEqual(noise.conditional_hermite_expectation(2, 1.0, 2.0), 3.0)
        self.assertAlmostEqual(noise.conditional_hermite_expectation(3, 1.0, 2.0), 2.0)

    def test_limite_sigma_nula(self):
        self.assertEqual(noise.conditional_hermite_expectation(0, 0.0, 1.5), 1.0)
        self.assertEqual(noise.conditional_hermite_expectation(2, 0.0, 1.5), 0.0)

    def test_escalamiento(self):
        # σ̄^l H_l(a/σ̄) con σ̄² = 0.25, a = 1, l = 2: 0.25·(4 - 1)
        self.assertAlmostEqual(noise.conditional_hermite_expectation(2, 0.25, 1.0), 0.75)

    def test_perdida_de_memoria_ou(self):
        """Para G = H_1 en H = 1/2, ‖E[y_s|F_0]‖ = e^{-s} y la integral vale 1"""
        profile = HermiteProfile.from_coefficients([0.0, 1.0])
        result = noise.memory_loss_integral(profile, 0.5)
        self.assertTrue(result['finite'])
        self.assertAlmostEqual(result['integral'], 1.0, delta=2e-2)

    def test_observable_no_centrado(self):
        with self.assertRaises(RankZero):
            noise.memory_loss_integral(HermiteProfile.from_coefficients([1.0]), 0.7)


class HermiteEvalTest(SimpleTestCase):

    def test_polinomios(self):
        self.assertEqual(hermite.hermite_eval(0, 3.0), 1.0)
        self.assertEqual(hermite.hermite_eval(2, 3.0), 8.0)
        self.assertEqual(hermite.hermite_eval(3, 2.0), 2.0)
        with self.assertRaises(DegreeTooLarge):
            hermite.hermite_eval(65, 1.0)


class ExpandTest(SimpleTestCase):
    """Pruebas para la expansión de Hermite por cuadratura"""

    def test_polinomio_exacto(self):
        print("\n[TEST] Iniciando prueba: expansión de x² - 1")
        profile = hermite.expand(lambda x: x**2 - 1.0, l_max=6)
        np.testing.assert_allclose(profile.coeffs, [0, 0, 1, 0, 0, 0, 0], atol=1e-10)
        self.assertEqual(profile.rank, 2)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: coeficientes y rango 2")

    def test_coseno_centrado(self):
        """cos(x) - e^{-1/2}: c_{2k} = (-1)^k e^{-1/2}/(2k)!, rango 2"""
        profile = hermite.expand(lambda x: np.cos(x) - math.exp(-0.5), l_max=8)
        self.assertEqual(profile.rank, 2)
        self.assertAlmostEqual(profile.coeffs[2], -math.exp(-0.5) / 2.0, places=8)
        self.assertAlmostEqual(profile.coeffs[4], math.exp(-0.5) / 24.0, places=8)
        self.assertAlmostEqual(profile.coeffs[3], 0.0, places=10)

    def test_sintesis(self):
        profile = hermite.HermiteProfile.from_coefficients([0.0, 1.0, 0.5])
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_allclose(profile(x), x + 0.5 * (x**2 - 1.0))
        self.assertAlmostEqual(profile.variance, 1.0 + 0.25 * 2.0)

    def test_observable_nulo(self):
        profile = hermite.HermiteProfile.from_coefficients([0.0, 0.0])
        self.assertTrue(profile.is_zero)


class ScalingTest(SimpleTestCase):
    """Pruebas para H*(m), el régimen y α(ε)"""

    def test_h_star(self):
        self.assertAlmostEqual(hermite.h_star(2, 0.7), 0.4)
        self.assertAlmostEqual(hermite.h_star(1, 0.8), 0.8)
        self.assertEqual(hermite.regime_of(0.4), hermite.REGIME_WIENER)
        self.assertEqual(hermite.regime_of(0.5), hermite.REGIME_BORDERLINE)
        self.assertEqual(hermite.regime_of(0.8), hermite.REGIME_HERMITE)

    def test_regimen_por_canal(self):
        # Con H <= 1/2 todo canal es de Wiener, aunque H*(1) = 1/2
        self.assertEqual(hermite.channel_regime(1, 0.5), hermite.REGIME_WIENER)
        self.assertEqual(hermite.channel_regime(1, 0.3), hermite.REGIME_WIENER)
        self.assertEqual(hermite.channel_regime(2, 0.75), hermite.REGIME_BORDERLINE)
        self.assertEqual(hermite.channel_regime(1, 0.8), hermite.REGIME_HERMITE)

    def test_tres_casos(self):
        eps = 0.01
        self.assertAlmostEqual(hermite.scaling_alpha(eps, 0.4), 10.0)
        self.assertAlmostEqual(hermite.scaling_alpha(eps, 0.5), 1.0 / math.sqrt(eps * abs(math.log(eps))))
        self.assertAlmostEqual(hermite.scaling_alpha(eps, 0.8), eps**-0.2)
        self.assertAlmostEqual(hermite.unified_alpha(eps, 0.8), eps**-0.2)
        with self.assertRaises(ValueError):
            hermite.unified_alpha(eps, 0.5)
        with self.assertRaises(ValueError):
            hermite.scaling_alpha(1.0, 0.4)

    def test_regla_de_escalamiento(self):
        rule = hermite.scaling_rule(1, 0.5)
        self.assertEqual(rule.regime, hermite.REGIME_WIENER)
        self.assertAlmostEqual(rule.alpha(0.01), 10.0)


class AssumptionGateTest(SimpleTestCase):
    """Pruebas para las condiciones del sistema multiescala"""

    def setUp(self):
        self.h2 = hermite.HermiteProfile.from_coefficients([0.0, 0.0, 1.0])
        self.h1 = hermite.HermiteProfile.from_coefficients([0.0, 1.0])

    def test_wiener_aprobado(self):
        gate = hermite.assumption_gate([self.h2], [8.0], 0.7, n_split=1)
        self.assertTrue(gate['passed'])
        self.assertIsNone(gate['violated'])

    def test_momento_insuficiente(self):
        # 1/2 - 1/p <= 1/3 con p = 4
        gate = hermite.assumption_gate([self.h2], [4.0], 0.7, n_split=1)
        self.assertFalse(gate['passed'])
        self.assertEqual(gate['violated'], 'wiener_moment')

    def test_bloque_equivocado(self):
        gate = hermite.assumption_gate([self.h1], [8.0], 0.8, n_split=1)
        self.assertEqual(gate['violated'], 'wiener_regime')

    def test_rangos_crecientes(self):
        with self.assertRaises(OrderingViolation):
            hermite.assumption_gate([self.h1, self.h2], [8.0, 8.0], 0.7, n_split=1)

    def test_decaimiento_rapido(self):
        decay = hermite.fast_chaos_decay(self.h2, 4)
        self.assertEqual(decay['verdict'], 'converging')
        self.assertAlmostEqual(decay['sum'], math.sqrt(2.0) * 7.0)

    def test_decaimiento_divergente(self):
        # c_l = 1/sqrt(l!): términos (2q-1)^{l/2} con razón sqrt(3) > 1
        profile = HermiteProfile.from_coefficients([0.0] + [1.0 / math.sqrt(math.factorial(l)) for l in range(1, 17)])
        decay = hermite.fast_chaos_decay(profile, 2)
        self.assertEqual(decay['verdict'], 'diverging')
        self.assertAlmostEqual(decay['ratio'], math.sqrt(3.0), places=10)
        gate = hermite.assumption_gate([profile], [8.0], 0.4, n_split=1, q=2)
        self.assertEqual(gate['violated'], 'fast_chaos_decay')

    def test_suma_de_hoelder(self):
        """H = 0.8: canal H3 (H* = 0.4) de Wiener y H1 (H* = 0.8) de Hermite"""
        print("\n[TEST] Iniciando prueba: condición de suma de exponentes")
        h3 = hermite.HermiteProfile.from_coefficients([0.0, 0.0, 0.0, 1.0])
        # márgenes 0.375 y 0.55 aprueban por separado; la suma 0.925 no supera 1
        gate = hermite.assumption_gate([h3, self.h1], [8.0, 4.0], 0.8, n_split=1)
        self.assertFalse(gate['passed'])
        self.assertEqual(gate['violated'], 'hoelder_sum')
        failing = [check['name'] for check in gate['checks'] if not check['passed']]
        self.assertEqual(failing, ['hoelder_sum'])
        print("[TEST] ✓ Suma 0.925 <= 1 rechazada")
        gate = hermite.assumption_gate([h3, self.h1], [8.0, 100.0], 0.8, n_split=1)
        self.assertTrue(gate['passed'])
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: con p = 100 la suma supera 1")


class ChaosCorrelationTest(SimpleTestCase):
    """Pruebas para E[H_k(Y) H_k(Y')] = k! ρ^k"""

    def test_contra_monte_carlo(self):
        print("\n[TEST] Iniciando prueba: correlación de caos por Monte Carlo")
        rng = path_generator(17, 0)
        x = rng.standard_normal(200_000)
        z = rng.standard_normal(200_000)
        for rho in (0.1, 0.5, 0.9):
            y = rho * x + math.sqrt(1.0 - rho**2) * z
            for k in range(7):
                expected = hermite.correlation_of_chaos(k, rho)
                check = mean_check(hermite.hermite_eval(k, x) * hermite.hermite_eval(k, y), expected, n_se=4.0)
                self.assertTrue(check['passed'], (k, rho, check))
            print(f"[TEST] ✓ ρ={rho}: k = 0..6 dentro de 4·SE")
        with self.assertRaises(ValueError):
            hermite.correlation_of_chaos(2, 1.5)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: k! ρ^k confirmado")


def _random_paths(n, count, d, seed=1):
    rng = path_generator(seed, 0)
    return np.cumsum(rng.standard_normal((n, count, d)) * 0.1, axis=1)


class LiftAlgebraTest(SimpleTestCase):
    """Pruebas para la construcción de lifts y la relación de Chen"""

    def setUp(self):
        self.grid = TimeGrid(1.0 / 64, 65)
        self.paths = _random_paths(4, 65, 2)

    def test_chen_en_todas_las_construcciones(self):
        print("\n[TEST] Iniciando prueba: defecto de Chen")
        canonical = roughpath.canonical_lift(self.paths, self.grid)
        geometric = roughpath.geometric_lift(self.paths, self.grid)
        drifted = roughpath.add_area_drift(geometric, [[0.0, 0.3], [-0.3, 0.0]])
        for name, lift in (('ito', canonical), ('geométrico', geometric), ('con deriva', drifted)):
            defect = roughpath.chen_defect(lift, sample_triples=512)
            self.assertLess(defect, 1e-12)
            print(f"[TEST] ✓ Lift {name}: defecto {defect:.2e}")
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: relación de Chen exacta")

    def test_lift_incoherente_detectado(self):
        lift = roughpath.canonical_lift(self.paths[0], self.grid)
        noisy = np.array(lift.xx) + path_generator(2, 0).standard_normal(lift.xx.shape)
        broken = roughpath.LiftedPath(grid=self.grid, x=lift.x, xx=noisy)
        self.assertGreater(roughpath.chen_defect(broken), 1e-3)

    def test_parte_simetrica_geometrica(self):
        """Sym(𝕏_{s,t}) = ½ X_{s,t} ⊗ X_{s,t} para el lift geométrico"""
        lift = roughpath.geometric_lift(self.paths, self.grid)
        i, j = np.array([0, 3, 10, 40]), np.array([64, 9, 11, 50])
        areas = lift.areas(i, j)
        sym = 0.5 * (areas + np.swapaxes(areas, -1, -2))
        inc = lift.increments(i, j)
        np.testing.assert_allclose(sym, 0.5 * inc[..., :, None] * inc[..., None, :], atol=1e-12)

    def test_ito_unidimensional(self):
        path = self.paths[0, :, :1]
        lift = roughpath.canonical_lift(path, self.grid)
        x = lift.x[:, 0]
        expected = 0.5 * (x[-1] ** 2 - np.sum(np.diff(x) ** 2))
        self.assertAlmostEqual(float(lift.xx[-1, 0, 0]), expected, places=12)

    def test_deriva_de_area(self):
        geometric = roughpath.geometric_lift(self.paths, self.grid)
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        drifted = roughpath.add_area_drift(geometric, A)
        np.testing.assert_allclose(
            drifted.areas(10, 30) - geometric.areas(10, 30), 20 * self.grid.step * A, atol=1e-12,
        )
        with self.assertRaises(DimensionMismatch):
            roughpath.add_area_drift(geometric, np.eye(3))

    def test_bloques_sin_terminos_cruzados(self):
        first = roughpath.geometric_lift(self.paths[..., :1], self.grid)
        second = roughpath.canonical_lift(self.paths[..., 1:], self.grid)
        joint = roughpath.combine_blocks(first, second)
        areas = joint.areas(np.array([0, 5]), np.array([64, 40]))
        self.assertTrue(np.all(areas[..., 0, 1] == 0.0))
        self.assertTrue(np.all(areas[..., 1, 0] == 0.0))
        self.assertEqual(joint.block_split, 1)

    def test_submuestreo(self):
        lift = roughpath.canonical_lift(self.paths, self.grid)
        coarse = lift.restrict(4)
        self.assertEqual(coarse.count, 17)
        np.testing.assert_allclose(coarse.areas(2, 10), lift.areas(8, 40), atol=1e-13)
        with self.assertRaises(GridMismatch):
            lift.restrict(3)


class HolderNormTest(SimpleTestCase):
    """Pruebas para las normas de Hölder y la métrica rugosa"""

    def setUp(self):
        self.grid = TimeGrid(1.0 / 32, 33)
        self.linear = roughpath.geometric_lift(self.grid.times, self.grid)

    def test_camino_lineal(self):
        # X_{s,t} = t - s y 𝕏_{s,t} = (t - s)²/2
        report = roughpath.holder_norm(self.linear, 0.5, pair_budget=256)
        self.assertAlmostEqual(report.first_order_norm, 1.0, places=12)
        self.assertAlmostEqual(report.second_order_norm, 1.0 / np.sqrt(2.0), places=12)

    def test_alpha_fuera_de_rango(self):
        with self.assertRaises(ValueError):
            roughpath.holder_norm(self.linear, 0.3)

    def test_distancia(self):
        self.assertEqual(roughpath.rough_distance(self.linear, self.linear, 0.4, pair_budget=64), 0.0)
        moved = roughpath.perturb_lift(self.linear, 0.5)
        first, second = roughpath.rough_distance_terms(self.linear, moved, 0.4, pair_budget=64)
        self.assertGreater(first, 0.0)
        self.assertGreater(second, 0.0)
        other = roughpath.geometric_lift(np.linspace(0, 1, 17), TimeGrid(1.0 / 16, 17))
        with self.assertRaises(GridMismatch):
            roughpath.rough_distance(self.linear, other, 0.4)

    def test_exponente_de_holder(self):
        self.assertAlmostEqual(roughpath.holder_exponent(self.linear.x[:, 0], self.grid.step), 1.0, places=8)

    def test_desigualdad_triangular(self):
        grid = TimeGrid(1.0 / 64, 65)
        a, b, c = (roughpath.geometric_lift(_random_paths(1, 65, 2, seed=s)[0], grid) for s in (3, 4, 5))
        for alpha in (0.35, 0.5, 0.9):
            direct = roughpath.rough_distance(a, c, alpha, pair_budget=128)
            detour = (
                roughpath.rough_distance(a, b, alpha, pair_budget=128)
                + roughpath.rough_distance(b, c, alpha, pair_budget=128)
            )
            self.assertLessEqual(direct, detour + 1e-12)
            self.assertEqual(roughpath.rough_distance(a, c, alpha, pair_budget=128),
                             roughpath.rough_distance(c, a, alpha, pair_budget=128))


class ScaledFunctionalTest(SimpleTestCase):
    """Pruebas para los funcionales escalados X^ε"""

    def setUp(self):
        self.fast = TimeGrid(1.0, 101)
        self.ensemble = StationaryEnsemble(
            grid=self.fast, values=np.ones((3, 101)), kind='fou', h=as_hurst(0.7), normalized=True,
        )
        self.h1 = hermite_observable([0.0, 1.0], 'H1')

    def test_ruido_constante(self):
        """Con y ≡ 1 y G = H_1, X^ε_t = α t"""
        print("\n[TEST] Iniciando prueba: funcional con ruido constante")
        lift = roughpath.scaled_functional_lift(self.ensemble, [self.h1], 0.01, [2.0], 1.0, stride=10)
        self.assertEqual(lift.count, 11)
        self.assertAlmostEqual(lift.grid.step, 0.1)
        np.testing.assert_allclose(lift.x[0, :, 0], 2.0 * lift.grid.times, atol=1e-12)
        self.assertEqual(lift.meta['epsilon'], 0.01)
        self.assertEqual(lift.meta['observables'], ['H1'])
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: X^ε lineal en t")

    def test_horizonte_insuficiente(self):
        with self.assertRaises(HorizonTooShort):
            roughpath.scaled_functionals(self.ensemble, [self.h1], 0.001, [1.0], 1.0)

    def test_observable_no_centrado(self):
        with self.assertRaises(NotCentred):
            roughpath.scaled_functionals(self.ensemble, [hermite_observable([1.0, 1.0])], 0.01, [1.0], 1.0)


class MomentExponentTest(SimpleTestCase):

    def test_browniano(self):
        """‖X_{s,t}‖_p ~ |t-s|^{1/2} y ‖𝕏_{s,t}‖_{p/2} ~ |t-s| para el movimiento browniano"""
        print("\n[TEST] Iniciando prueba: exponentes de momentos")
        grid = TimeGrid(1.0 / 256, 257)
        paths = fbm_paths(sample_fbm(grid, 0.5, 400, seed=21))
        lift = roughpath.canonical_lift(paths[..., None], grid)
        fit = roughpath.moment_exponents(lift, 4, [1, 2, 4, 8, 16])
        self.assertFalse(fit['degenerate'])
        self.assertAlmostEqual(fit['first']['slope'], 0.5, delta=0.05)
        self.assertAlmostEqual(fit['second']['slope'], 1.0, delta=0.1)
        print(f"[TEST] ✓ Pendientes {fit['first']['slope']:.3f} y {fit['second']['slope']:.3f}")
        with self.assertRaises(ValueError):
            roughpath.moment_exponents(lift, 4, [1, 2])


class AreaConstantTest(SimpleTestCase):
    """Pruebas para las constantes de área"""

    def test_ou_lineal(self):
        h1 = HermiteProfile.from_coefficients([0.0, 1.0])
        self.assertAlmostEqual(decomp.area_constant(h1, h1, 0.5), 1.0, places=6)

    def test_caos_disjuntos(self):
        h2 = HermiteProfile.from_coefficients([0.0, 0.0, 1.0])
        h3 = HermiteProfile.from_coefficients([0.0, 0.0, 0.0, 1.0])
        self.assertEqual(decomp.area_constant(h2, h3, 0.7), 0.0)
        A = decomp.area_matrix([h2, h3], 0.7)
        self.assertGreater(A[0, 0], 0.0)
        self.assertEqual(A[0, 1], 0.0)

    def test_cadena_de_dos_estados(self):
        """E[g(Y_s) g(Y_0)] = e^{-2s} y la integral vale 1/2"""
        A = decomp.chain_area_matrix([[-1.0, 1.0], [1.0, -1.0]], [[-1.0, 1.0]])
        self.assertAlmostEqual(float(A[0, 0]), 0.5, places=10)
        correlation = decomp.chain_correlation([[-1.0, 1.0], [1.0, -1.0]], [-1.0, 1.0], [-1.0, 1.0])
        np.testing.assert_allclose(correlation([0.0, 0.5]), [1.0, math.exp(-1.0)], atol=1e-10)

    def test_correlacion_de_caos(self):
        h2 = HermiteProfile.from_coefficients([0.0, 0.0, 1.0])
        correlation = decomp.chaos_correlation(h2, h2, 0.7)
        self.assertAlmostEqual(float(correlation(np.array([0.0]))[0]), 2.0)

    def test_covarianza_prelimite(self):
        # C ≡ 1: la suma de pesos de trapecios es n_t·n_s
        value = decomp.prelimit_covariance(lambda lags: np.ones_like(lags), 8, 4, 0.5)
        self.assertAlmostEqual(value, 32.0)


class BlockFunctionalTest(SimpleTestCase):
    """Pruebas para I(k), Û(k), M_k y el residuo del lema de área"""

    def setUp(self):
        self.grid = TimeGrid(0.5, 64)
        self.ensemble = sample_fou(self.grid, 0.5, 40, seed=31)
        self.U = HermiteProfile.from_coefficients([0.0, 0.0, 1.0])
        self.V = HermiteProfile.from_coefficients([0.0, 0.0, 0.0, 1.0])

    def test_integrales_por_bloque(self):
        blocks = decomp.block_integrals(np.ones((2, 9)), 0.5, lambda y: y, 4)
        np.testing.assert_allclose(blocks, np.ones((2, 4)))
        with self.assertRaises(HorizonTooShort):
            decomp.block_integrals(np.ones(5), 0.5, lambda y: y, 4)

    def test_identidades(self):
        print("\n[TEST] Iniciando prueba: identidades martingala-coborde")
        functionals = decomp.discrete_functionals(self.ensemble, self.U, self.V, 0.25, horizon=8.0, window=4.0)
        self.assertEqual(functionals.n_blocks, 4)
        violations = functionals.identity_violations()
        self.assertLess(violations['conditional'], 1e-8)
        print(f"[TEST] ✓ Identidad condicional: {violations['conditional']:.2e}")
        self.assertLess(violations['telescoping'], 1e-8)
        print(f"[TEST] ✓ Identidad telescópica: {violations['telescoping']:.2e}")
        residual = decomp.lemma_residual(functionals, 0.0)
        self.assertEqual(residual.shape, (40,))
        self.assertTrue(np.all(np.isfinite(residual)))
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: identidades exactas")

    def test_horizonte_insuficiente(self):
        with self.assertRaises(HorizonTooShort):
            decomp.discrete_functionals(self.ensemble, self.U, self.V, 0.01, horizon=8.0, window=4.0)

    def test_suma_doble_y_martingala(self):
        self.assertAlmostEqual(float(decomp.block_double_sum([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 1.0)), 3.0)
        M = decomp.martingale_sequence([[1.0, 2.0, 3.0]], [[0.5, 0.5, 0.5]])
        np.testing.assert_allclose(M, [[0.5, 2.0, 4.5]])
        with self.assertRaises(ValueError):
            decomp.martingale_sequence([1.0, 2.0], [1.0])

    def test_incrementos_de_martingala(self):
        """En H = 1/2 los incrementos de M y N no correlacionan con variables F_k-medibles"""
        print("\n[TEST] Iniciando prueba: propiedad de martingala")
        ensemble = sample_fou(self.grid, 0.5, 400, seed=37)
        functionals = decomp.discrete_functionals(ensemble, self.U, self.V, 0.25, horizon=8.0, window=4.0)
        self.assertEqual(
            sorted(functionals.witnesses), ['H1(y_k)', 'H2(y_k)', 'H3(y_k)', 'y_antes_de_ventana'],
        )
        self.assertEqual(functionals.witnesses['H2(y_k)'].shape, functionals.M.shape)
        rows = functionals.martingale_increments()
        self.assertEqual(len(rows), 8)
        for row in rows:
            self.assertLess(abs(row['z']), 4.0, row)
            print(f"[TEST] ✓ {row['martingale']} frente a {row['witness']}: z = {row['z']:.2f}")
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: incrementos centrados condicionalmente")

    def test_testigo_detecta_defecto(self):
        # M_k = Σ w_l: el incremento es el propio testigo y E[dM·w] = E[w²] = 1
        witness = path_generator(41, 0).standard_normal((400, 6))
        rows = decomp.martingale_increment_statistics(np.cumsum(witness, axis=1), {'w': witness})
        self.assertGreater(rows[0]['z'], 10.0)
        self.assertAlmostEqual(rows[0]['estimate'], 1.0, delta=0.1)
        with self.assertRaises(ValueError):
            decomp.martingale_increment_statistics(np.zeros((4, 3)), {'w': np.zeros((4, 2))})

    def test_observable_nulo(self):
        zero = HermiteProfile.from_coefficients([0.0, 0.0])
        functionals = decomp.discrete_functionals(self.ensemble, zero, self.V, 0.25, horizon=8.0, window=4.0)
        np.testing.assert_array_equal(functionals.M, 0.0)
        np.testing.assert_array_equal(functionals.U_hat, 0.0)
        for row in functionals.martingale_increments():
            if row['martingale'] == 'M':
                self.assertEqual(row['z'], 0.0)

    def test_u_hat_acotado(self):
        """‖Û(k)‖_{L²} no depende de k (proceso estacionario)"""
        ensemble = sample_fou(self.grid, 0.5, 400, seed=43)
        functionals = decomp.discrete_functionals(ensemble, self.U, self.V, 0.25, horizon=8.0, window=4.0)
        norms = np.sqrt(np.mean(functionals.U_hat**2, axis=0))
        self.assertEqual(len(norms), functionals.n_blocks + 1)
        self.assertTrue(np.all(np.isfinite(norms)))
        self.assertLess(norms.max() / norms.min(), 1.5)

    def test_cola_divergente(self):
        """H1 con H = 0.7: ‖E[y_s|F_0]‖ ~ s^{H-1} no es integrable"""
        h1 = HermiteProfile.from_coefficients([0.0, 1.0])
        ensemble = sample_fou(self.grid, 0.7, 4, seed=47)
        with self.assertRaises(TailDivergent):
            decomp.conditional_tail(ensemble.values, 0.5, 0.7, h1, anchor=20, horizon=8.0, window=4.0)
        with self.assertRaises(TailDivergent):
            decomp.discrete_functionals(ensemble, h1, self.V, 0.25, horizon=8.0, window=4.0)
        with self.assertRaises(TailDivergent):
            decomp.coboundary_variance(ensemble, self.U, [0.25], horizon=8.0, window=4.0)

    def test_cola_ajustada(self):
        """H3 con H = 0.6: cola integrable con exponente cercano a 3(H-1) = -1.2"""
        verdict = decomp.memory_verdict(self.V, 0.6)
        self.assertTrue(verdict['finite'])
        self.assertLess(verdict['tail_exponent'], -1.0)
        self.assertGreater(verdict['tail_exponent'], -1.5)
        ensemble = sample_fou(self.grid, 0.6, 4, seed=53)
        tail = decomp.conditional_tail(ensemble.values, 0.5, 0.6, self.V, anchor=20, horizon=8.0, window=4.0)
        self.assertEqual(tail.shape, (4,))
        self.assertTrue(np.all(np.isfinite(tail)))
        # en H = 1/2 el decaimiento es exponencial y no se agrega cola
        self.assertIsNone(decomp.memory_verdict(self.U, 0.5)['tail_exponent'])


class FieldTest(SimpleTestCase):

    def test_jacobianos(self):
        linear = solver.LinearField([[0.0, -1.0], [1.0, 0.0]])
        np.testing.assert_allclose(linear([1.0, 2.0]), [[-2.0, 1.0]])
        np.testing.assert_allclose(linear.jacobian([[1.0, 2.0]])[0], linear.matrix)
        numeric = solver.VectorField(lambda x: np.sin(x), 1)
        self.assertAlmostEqual(float(numeric.jacobian([[0.3]])[0, 0, 0]), math.cos(0.3), places=6)
        with self.assertRaises(DimensionMismatch):
            solver.LinearField([[1.0, 2.0]])

    def test_sistema_inconsistente(self):
        h1 = hermite_observable([0.0, 1.0])
        with self.assertRaises(DimensionMismatch):
            solver.MultiscaleSystem(dim=1, fields=(solver.LinearField([[1.0]]),), observables=(h1, h1), x0=[1.0])
        with self.assertRaises(DimensionMismatch):
            solver.MultiscaleSystem(dim=1, fields=(solver.LinearField([[1.0]]),), observables=(h1,), x0=[1.0, 0.0])

    def test_explosion(self):
        with self.assertRaises(Blowup):
            solver.SolutionPath(grid=TimeGrid(1.0, 2), states=[[1.0], [np.nan]], scheme='rk4')


class MultiscaleSolverTest(SimpleTestCase):
    """Pruebas para el integrador RK4 del sistema lento/rápido"""

    def setUp(self):
        self.h1 = hermite_observable([0.0, 1.0])
        self.system = solver.MultiscaleSystem(
            dim=1, fields=(solver.ConstantField([1.0]),), observables=(self.h1,), x0=[1.0],
        )

    def test_ruido_constante(self):
        print("\n[TEST] Iniciando prueba: RK4 con ruido constante")
        grid = TimeGrid(1.0, 101)
        solution = solver.solve_multiscale(self.system, 0.01, np.ones(101), grid, 1.0, alphas=[2.0])
        self.assertAlmostEqual(float(solution.terminal[0]), 3.0, places=10)
        self.assertLessEqual(solution.step_stats['step'], 0.01 / 8 + 1e-15)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: x_1 = x_0 + α")

    def test_horizonte_insuficiente(self):
        grid = TimeGrid(1.0, 11)
        with self.assertRaises(HorizonTooShort):
            solver.solve_multiscale(self.system, 0.01, np.ones(11), grid, 1.0, alphas=[1.0])

    def test_oraculo_multiescala(self):
        """f(x) = x, G = H2 con H = 0.7: log x_t - log x0 = X^ε_t"""
        print("\n[TEST] Iniciando prueba: oráculo 1-D del sistema multiescala")
        h2 = hermite_observable([0.0, 0.0, 1.0])
        system = solver.MultiscaleSystem(dim=1, fields=(solver.LinearField([[1.0]]),), observables=(h2,), x0=[1.0])
        ensemble = sample_fou(TimeGrid(0.5, 201), 0.7, 4, seed=19)
        solution = solver.solve_multiscale(system, 0.01, ensemble.values, ensemble.grid, 1.0, alphas=[10.0],
                                           record_every=None)
        _, X = roughpath.scaled_functionals(ensemble, [h2], 0.01, [10.0], 1.0)
        np.testing.assert_allclose(np.log(solution.terminal[:, 0]), X[:, -1, 0], atol=1e-4)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: log x_1 coincide con X^ε_1")


class RoughSolverTest(SimpleTestCase):
    """Pruebas para Davie, Young y el oráculo 1-D"""

    def setUp(self):
        self.grid = TimeGrid(1.0 / 1024, 1025)
        self.linear = solver.CallableField(lambda x: x, lambda x: np.ones_like(x), name='lineal')

    def test_oraculo_exponencial(self):
        """f(x) = x: x_t = x_0 exp(X_t)"""
        driver = np.sin(2 * np.pi * self.grid.times)
        solution = solver.oracle_1d(self.linear, 1.0, driver, self.grid)
        self.assertEqual(solution.states.shape, (1025, 1))
        np.testing.assert_allclose(solution.states[:, 0], np.exp(driver), rtol=1e-8)

    def test_oraculo_campo_nulo(self):
        with self.assertRaises(FieldVanishes):
            solver.oracle_1d(self.linear, 0.0, self.grid.times, self.grid)

    def test_davie_contra_oraculo(self):
        print("\n[TEST] Iniciando prueba: Davie contra solución cerrada")
        driver = fbm_paths(sample_fbm(self.grid, 0.5, 3, seed=4))
        lift = geometric_lift(driver[..., None], self.grid)
        rough = solver.solve_rde([self.linear], lift, [1.0], refine=False)
        for k in range(3):
            exact = solver.oracle_1d(self.linear, 1.0, driver[k], self.grid)
            error = abs(float(rough.terminal[k, 0]) - float(exact.terminal[0])) / abs(float(exact.terminal[0]))
            self.assertLess(error, 1e-3)
            print(f"[TEST] ✓ Trayectoria {k}: error relativo {error:.2e}")
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: Davie coincide con el oráculo")

    def test_young_con_driver_suave(self):
        solution = solver.solve_young([self.linear], self.grid.times, self.grid, [1.0], tolerance=1e-5, scheme='heun')
        self.assertAlmostEqual(float(solution.terminal[0]), math.e, places=5)

    def test_young_rechaza_browniano(self):
        driver = fbm_paths(sample_fbm(self.grid, 0.5, 8, seed=6))[..., None]
        with self.assertRaises(RegularityTooLow):
            solver.solve_young([self.linear], driver, self.grid, [1.0])

    def test_davie_primer_orden(self):
        """
        Lift canónico de un camino C¹: el área de cada paso es nula, el esquema es
        Euler y el error frente a la EDO baja a la mitad al duplicar la grilla.
        """
        print("\n[TEST] Iniciando prueba: orden de Davie con camino suave")
        errors = []
        for n in (256, 512):
            grid = TimeGrid(1.0 / n, n + 1)
            lift = roughpath.canonical_lift(np.sin(2 * np.pi * grid.times), grid)
            solution = solver.solve_rde([self.linear], lift, [1.0], refine=False)
            self.assertIsNone(solution.step_stats['converged'])
            # X_1 = sin(2π) = 0: la EDO vuelve a x0
            errors.append(abs(float(np.ravel(solution.terminal)[0]) - 1.0))
            print(f"[TEST] ✓ n={n}: error {errors[-1]:.3e}")
        self.assertLess(errors[0], 0.05)
        self.assertGreater(errors[0] / errors[1], 1.8)
        self.assertLess(errors[0] / errors[1], 2.2)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: convergencia de primer orden")

    def test_young_con_fbm(self):
        """H = 0.8, f(x) = x: x_T = x0·exp(X_T) (regla de la cadena de Young)"""
        driver = fbm_paths(sample_fbm(TimeGrid(1.0 / 1024, 1024), 0.8, 4, seed=9))
        solution = solver.solve_young([self.linear], driver[..., None], self.grid, [1.0], refine=False, scheme='heun')
        relative = np.abs(solution.terminal[:, 0] - np.exp(driver[:, -1])) / np.exp(driver[:, -1])
        self.assertLess(float(relative.max()), 1e-3)

    def test_refinamiento_sin_convergencia(self):
        with self.assertRaises(NoConvergence):
            solver.solve_young([self.linear], self.grid.times, self.grid, [1.0], tolerance=1e-14, scheme='heun')
        # 16 pasos con min_steps = 16: un único nivel, nada que comparar
        short = TimeGrid(1.0 / 16, 17)
        with self.assertRaises(NoConvergence):
            solver.solve_young([self.linear], short.times, short, [1.0])
        solution = solver.solve_young([self.linear], short.times, short, [1.0], refine=False)
        self.assertIsNone(solution.step_stats['converged'])
        self.assertEqual(solution.step_stats['differences'], [])


class EstimatorTest(SimpleTestCase):
    """Pruebas para los estimadores de tendencia"""

    def test_mayor_aumento(self):
        self.assertLess(largest_increase([0.3, 0.2, 0.1]), 0.0)
        self.assertAlmostEqual(largest_increase([0.3, 0.2, 0.25]), 0.05)
        # un aumento de 0.05 con errores estándar 0.02 cabe en 3·SE combinados
        self.assertLessEqual(largest_increase([0.3, 0.2, 0.25], se=[0.02, 0.02, 0.02], n_se=3.0), 0.0)
        with self.assertRaises(ValueError):
            largest_increase([0.1])


class ContainerTest(SimpleTestCase):
    """Pruebas para el contenedor binario HOMOLAB1"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.storage = FileSystemStorage(location=self.tmp.name)

    def test_cabecera_y_bloques(self):
        data = storages.encode_container({'kind': 'prueba'}, {'a': np.arange(6.0).reshape(2, 3)})
        self.assertTrue(data.startswith(storages.MAGIC))
        header, blocks = storages.decode_container(data)
        self.assertEqual(header['blocks'], [{'name': 'a', 'shape': [2, 3]}])
        np.testing.assert_array_equal(blocks['a'], np.arange(6.0).reshape(2, 3))

    def test_contenedor_corrupto(self):
        data = storages.encode_container({}, {'a': np.ones(3)})
        with self.assertRaises(ValueError):
            storages.decode_container(b'OTRO' + data[4:])
        with self.assertRaises(ValueError):
            storages.decode_container(data + b'\x00')

    def test_ensamble_en_disco(self):
        print("\n[TEST] Iniciando prueba: guardar y leer un ensamble")
        ensemble = sample_fou(TimeGrid(0.5, 17), 0.7, 5, seed=2)
        name = storages.save_ensemble(self.storage, 'run/ensemble.bin', ensemble)
        loaded = storages.load_ensemble(self.storage, name)
        np.testing.assert_array_equal(loaded.values, ensemble.values)
        self.assertEqual(loaded.h, ensemble.h)
        self.assertEqual(loaded.grid, ensemble.grid)
        # sobrescritura con el mismo nombre
        self.assertEqual(storages.save_ensemble(self.storage, 'run/ensemble.bin', ensemble), name)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: ensamble recuperado")

    def test_lift_en_disco(self):
        grid = TimeGrid(0.25, 5)
        lift = geometric_lift(np.arange(10.0).reshape(5, 2), grid)
        name = storages.save_lift(self.storage, 'lift.bin', lift, extra={'epsilon': 0.1})
        header, _ = storages.load_container(self.storage, name)
        self.assertEqual(header['epsilon'], 0.1)
        loaded = storages.load_lift(self.storage, name)
        np.testing.assert_array_equal(loaded.xx, lift.xx)
        self.assertEqual(loaded.convention, lift.convention)


class CsvTest(SimpleTestCase):

    def test_tabla(self):
        content = storages.csv_bytes(['a', 'b'], [[0.1, [1, 2]], [2, 'x']]).decode('utf-8')
        self.assertEqual(content, 'a,b\n0.1,"[1, 2]"\n2,x\n')


def _covariance_config(**changes):
    data = {
        'kind': 'covariance',
        'seed': 7,
        'observables': ['H1'],
        'noise': {'kind': 'fou', 'h': 0.5, 'step': 0.5},
        'epsilons': [0.1],
        'n_paths': 400,
    }
    data.update(changes)
    return data


def _chain_noise():
    return {'kind': 'markov_chain', 'rate_matrix': [[-1.0, 1.0], [1.0, -1.0]], 'state_values': [-1.0, 1.0]}


class ExperimentConfigTest(SimpleTestCase):
    """Pruebas para la validación de configuraciones"""

    def assertInvalid(self, data, field):
        with self.assertRaises(ConfigInvalid) as ctx:
            lab.ExperimentConfig.from_dict(data)
        self.assertEqual(ctx.exception.field, field)
        print(f"[TEST] ✓ Campo rechazado: {field}")

    def test_configuracion_valida(self):
        print("\n[TEST] Iniciando prueba: configuración válida")
        config = lab.ExperimentConfig.from_dict(_covariance_config())
        self.assertEqual(config.kind, 'covariance')
        self.assertEqual(config.epsilons, (0.1,))
        self.assertEqual(config.h, 0.5)
        self.assertFalse(config.is_markov)
        self.assertEqual(config.tolerance('n_se'), 3.0)
        self.assertIn('ks_alpha', config.tolerances)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: valores y tolerancias por defecto")

    def test_campos_invalidos(self):
        print("\n[TEST] Iniciando prueba: configuraciones inválidas")
        self.assertInvalid(_covariance_config(epsilons=[0.01, 0.1]), 'epsilons')
        self.assertInvalid(_covariance_config(epsilons=[1.5]), 'epsilons')
        self.assertInvalid(_covariance_config(noise={'kind': 'fou', 'step': 0.5}), 'noise.h')
        self.assertInvalid(_covariance_config(noise={'kind': 'fou', 'h': 1.2}), 'noise.h')
        self.assertInvalid(_covariance_config(kind='mixing'), 'noise')
        self.assertInvalid(_covariance_config(kind='homogenize_1d'), 'vector_fields')
        self.assertInvalid(_covariance_config(tolerances={'n_se': -1.0}), 'tolerances')
        self.assertInvalid(_covariance_config(kind='unknown'), 'kind')

    def test_yaml_invalido(self):
        with self.assertRaises(ConfigInvalid):
            lab.ExperimentConfig.from_yaml("kind: [clt")
        with self.assertRaises(ConfigInvalid):
            lab.ExperimentConfig.from_yaml("- solo\n- una lista\n")

    def test_hash_ignora_directorio_de_salida(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config())
        moved = config.with_overrides(output_dir='/tmp/otro', seed=None)
        self.assertEqual(config.config_hash, moved.config_hash)
        reseeded = config.with_overrides(seed=8)
        self.assertNotEqual(config.config_hash, reseeded.config_hash)
        self.assertEqual(lab.run_prefix(config), f"covariance-7-{config.config_hash[:8]}")


class ConvergenceReportTest(SimpleTestCase):
    """Pruebas para los veredictos del reporte"""

    def setUp(self):
        self.report = lab.ConvergenceReport.for_config(lab.ExperimentConfig.from_dict(_covariance_config()))

    def test_comparaciones(self):
        self.assertTrue(self.report.check('a', 0.1, 0.2, '<=').passed)
        self.assertFalse(self.report.check('b', 0.3, 0.2, '<').passed)
        self.assertTrue(self.report.check('c', 1.04, 0.05, 'within', target=1.0).passed)
        self.assertFalse(self.report.check('d', 1.06, 0.05, 'within', target=1.0).passed)
        self.assertFalse(self.report.passed)

    def test_serializacion(self):
        self.report.note('sin_cota', math.inf)
        self.report.check('e', 0.5, 1.0, '<', channel=0, epsilon=0.1)
        document = self.report.to_json()
        self.assertEqual(document['metrics']['sin_cota'], 'inf')
        self.assertEqual(document['verdicts'][0]['channel'], 0)
        self.assertTrue(document['passed'])
        self.assertEqual(document['provenance']['schema_version'], lab.REPORT_SCHEMA_VERSION)
        self.assertNotIn('output_dir', document['provenance']['config'])
        json.dumps(document, allow_nan=False)


class ChannelTest(SimpleTestCase):
    """Pruebas para observables y escalamientos por canal"""

    def test_estado_sobre_fou_es_h1(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config(observables=['state']))
        observables = lab.build_observables(config)
        self.assertEqual(observables[0].rank, 1)

    def test_observables_centrados_en_la_cadena(self):
        # π = (2/3, 1/3); estados centrados (-1, 2); H_2 vale (0, 3) con media 1
        config = lab.ExperimentConfig.from_dict(_covariance_config(
            kind='mixing', observables=['H2'],
            noise={**_chain_noise(), 'rate_matrix': [[-1.0, 1.0], [2.0, -2.0]], 'state_values': [0.0, 3.0]},
        ))
        observable = lab.build_observables(config)[0]
        self.assertAlmostEqual(float(observable(-1.0)), -1.0)
        self.assertAlmostEqual(float(observable(2.0)), 2.0)

    def test_regimenes(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config(
            observables=['H1', 'H3'], noise={'kind': 'fou', 'h': 0.7, 'step': 0.5},
        ))
        regimes = lab.channel_regimes(lab.build_observables(config), config.h)
        self.assertEqual([row['regime'] for row in regimes], ['hermite', 'wiener'])
        alphas = lab.channel_alphas(regimes, 0.01, config.h)
        self.assertAlmostEqual(alphas[0], 0.01 ** (0.7 - 1.0))
        self.assertAlmostEqual(alphas[1], 10.0)


class ExperimentErrorTest(SimpleTestCase):

    def test_clt_en_regimen_de_hermite(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config(
            kind='clt', noise={'kind': 'fou', 'h': 0.8, 'step': 0.5},
        ))
        with self.assertRaises(RegimeMismatch):
            lab.run_experiment(config)

    def test_hermite_con_cadena(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config(
            kind='hermite_regime', observables=['state'], noise=_chain_noise(),
        ))
        with self.assertRaises(RegimeMismatch):
            lab.run_experiment(config)

    def test_descomposicion_con_cadena(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config(
            kind='decomp_residual', observables=['state', 'state'], noise=_chain_noise(),
        ))
        with self.assertRaises(ConfigInvalid):
            lab.run_experiment(config)


def _fou(h, step=0.25):
    return {'kind': 'fou', 'h': h, 'step': step}


class ExperimentVerdictTest(SimpleTestCase):
    """Pruebas del contenido de los reportes por experimento"""

    def run_config(self, **changes):
        report = lab.run_experiment(lab.ExperimentConfig.from_dict(_covariance_config(**changes)))
        names = {v.name for v in report.verdicts}
        print(f"[TEST] ✓ {report.kind}: {sorted(names)}")
        return report, names

    def verdicts(self, report, name):
        return [v for v in report.verdicts if v.name == name]

    def test_clt(self):
        print("\n[TEST] Iniciando prueba: veredictos del TCL")
        report, names = self.run_config(kind='clt', noise=_fou(0.5), epsilons=[0.1, 0.05])
        self.assertTrue({'ks_normality', 'variance', 'increment_covariance', 'ks_trend', 'limit_gap_trend',
                         'limit_gap_empirical_trend'} <= names)
        self.assertEqual(len(self.verdicts(report, 'ks_normality')), 3)
        self.assertTrue(all(v.epsilon == 0.05 for v in self.verdicts(report, 'variance')))
        self.assertIn('increment_correlation_0', report.metrics)
        gaps = report.tables['limit_gap']
        self.assertEqual([row['epsilon'] for row in gaps], [0.1, 0.05])
        # pre-límite exacto frente a 2tA con A = 1: la brecha baja al achicar ε
        self.assertAlmostEqual(gaps[0]['limit'], 2.0, places=5)
        self.assertLess(gaps[1]['exact'], gaps[0]['exact'])
        self.assertTrue(self.verdicts(report, 'limit_gap_trend')[0].passed)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: brecha con el límite decreciente")

    def test_covarianza_a_lo_largo_del_schedule(self):
        report, names = self.run_config(epsilons=[0.1, 0.05], n_paths=100)
        self.assertEqual(len(report.tables['limit_gap']), 2)
        trend = self.verdicts(report, 'limit_gap_trend')
        self.assertEqual(len(trend), 1)
        self.assertTrue(trend[0].passed)
        self.assertTrue(all(v.epsilon == 0.05 for v in self.verdicts(report, 'covariance')))

    def test_momentos(self):
        report, names = self.run_config(kind='moment_fit', epsilons=[0.002], n_paths=100)
        self.assertEqual(names, {'first_order_exponent', 'second_order_exponent'})
        self.assertEqual([row['gap'] for row in report.tables['moments']], [16, 32, 64, 128])
        self.assertEqual(self.verdicts(report, 'first_order_exponent')[0].target, 0.5)
        with self.assertRaises(HorizonTooShort):
            self.run_config(kind='moment_fit', epsilons=[0.01], n_paths=20)

    def test_regimen_de_hermite(self):
        report, names = self.run_config(kind='hermite_regime', noise=_fou(0.8), epsilons=[0.01], n_paths=100)
        self.assertEqual(names, {'self_similarity_exponent', 'hoelder_exponent', 'young_oracle_relative_error'})
        self.assertAlmostEqual(self.verdicts(report, 'self_similarity_exponent')[0].target, 0.8)
        self.assertEqual(len(report.tables['variance_scaling']), 5)
        self.assertTrue(self.verdicts(report, 'hoelder_exponent')[0].passed)

    def test_homogeneizacion_con_oraculo(self):
        print("\n[TEST] Iniciando prueba: homogeneización 1-D")
        report, names = self.run_config(
            kind='homogenize_1d', noise=_fou(0.5), vector_fields=['linear'], x0=[1.0],
            epsilons=[0.1, 0.05], n_paths=200,
        )
        self.assertEqual(names, {'w1_limit', 'w1_trend'})
        self.assertEqual(report.metrics['limit_solver'], 'oracle_1d')
        self.assertEqual([row['epsilon'] for row in report.tables['w1_by_epsilon']], [0.1, 0.05])
        self.assertEqual(len(report.tables['quantiles']), 19)
        self.assertTrue(report.metrics['gate']['passed'])
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: límite por el oráculo cerrado")

    def test_homogeneizacion_de_young(self):
        report, names = self.run_config(
            kind='homogenize_1d', observables=['H1'], noise=_fou(0.8), vector_fields=['linear'], x0=[1.0],
            epsilons=[0.1, 0.05], n_paths=200,
        )
        self.assertEqual(report.metrics['limit_solver'], 'young-heun')
        self.assertEqual(report.metrics['limit']['wiener_channels'], 0)
        self.assertEqual(names, {'w1_limit', 'w1_trend', 'limit_discretisation'})

    def test_descomposicion(self):
        print("\n[TEST] Iniciando prueba: veredictos de la descomposición")
        report, names = self.run_config(
            kind='decomp_residual', observables=['H2', 'H3'], noise=_fou(0.5, step=0.5),
            epsilons=[0.25, 0.125], n_paths=100, horizon=8.0, window=4.0,
        )
        for name in ('conditional_identity', 'telescoping_identity', 'area_cross_orthogonal'):
            self.assertTrue(all(v.passed for v in self.verdicts(report, name)), name)
        self.assertEqual(len(self.verdicts(report, 'martingale_increment')), 16)
        self.assertEqual(len(report.tables['martingale_increments']), 16)
        self.assertEqual(len(report.tables['memory_loss']), 2)
        self.assertTrue(all(row['finite'] for row in report.tables['memory_loss']))
        self.assertIn('lemma_residual_trend', names)
        self.assertEqual(len(report.tables['coboundary']), 2)
        self.assertIn('median_block_sum_gap', report.tables['lemma_residual'][0])
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: identidades, martingalas y lema de área")

    def test_descomposicion_sin_memoria_integrable(self):
        with self.assertRaises(TailDivergent):
            self.run_config(
                kind='decomp_residual', observables=['H2', 'H3'], noise=_fou(0.7, step=0.5),
                epsilons=[0.25], n_paths=20, horizon=8.0, window=4.0,
            )


class RunTest(TestCase):
    """Pruebas de ejecución completa con registro y artefactos"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_ejecucion_registrada(self):
        print("\n[TEST] Iniciando prueba: ejecución de covarianza")
        config = lab.ExperimentConfig.from_dict(_covariance_config())
        report, code = lab.run(config, out=self.tmp.name)
        print(f"[TEST] ✓ {len(report.verdicts)} veredictos, código {code}")

        origin = [v for v in report.verdicts if v.name == 'zero_at_origin']
        self.assertTrue(origin[0].passed)
        covariance = [v for v in report.verdicts if v.name == 'covariance']
        self.assertEqual(len(covariance), 9)
        self.assertEqual({(v.t, v.s) for v in covariance}, {(t, s) for t in (0.25, 0.5, 1.0) for s in (0.25, 0.5, 1.0)})
        # H1 sobre OU: A = 1 y el límite es 2(t∧s)
        for row in report.tables['covariance']:
            self.assertAlmostEqual(row['limit'], 2.0 * min(row['t'], row['s']), places=5)
            self.assertLess(row['expected'], row['limit'])

        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'completado')
        self.assertEqual(run.passed, report.passed)
        self.assertEqual(run.report['config_hash'], config.config_hash)
        print("[TEST] ✓ ExperimentRun completado")

        prefix = Path(self.tmp.name) / lab.run_prefix(config)
        for name in ('report.json', 'verdicts.csv', 'metrics.csv', 'covariance.csv', 'limit_gap.csv'):
            self.assertTrue((prefix / name).exists(), name)
        self.assertEqual(Artifact.objects.filter(run=run).count(), 5)
        # el código de salida sale de los veredictos escritos en disco
        written = json.loads((prefix / 'report.json').read_text(encoding='utf-8'))['verdicts']
        self.assertEqual(len(written), len(report.verdicts))
        failing = [v['name'] for v in written if not v['passed']]
        self.assertEqual(code, 1 if failing else 0)
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: artefactos escritos y registrados")

    def test_veredicto_fallido(self):
        """Con n_se ínfimo las covarianzas empíricas no pueden coincidir: código 1"""
        config = lab.ExperimentConfig.from_dict(_covariance_config(n_paths=50, tolerances={'n_se': 1e-9}))
        report, code = lab.run(config, out=self.tmp.name)
        self.assertEqual(code, 1)
        self.assertFalse(report.passed)
        failing = {v.name for v in report.verdicts if not v.passed}
        self.assertEqual(failing, {'covariance'})
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'completado')
        self.assertFalse(run.passed)

    def test_reproducible(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config(n_paths=50))
        lab.run(config, out=self.tmp.name, record=False)
        first = (Path(self.tmp.name) / lab.run_prefix(config) / 'report.json').read_bytes()
        lab.run(config, out=self.tmp.name, record=False)
        second = (Path(self.tmp.name) / lab.run_prefix(config) / 'report.json').read_bytes()
        self.assertEqual(first, second)
        self.assertEqual(ExperimentRun.objects.count(), 0)

    def test_fallo_registrado(self):
        config = lab.ExperimentConfig.from_dict(_covariance_config(
            kind='clt', noise={'kind': 'fou', 'h': 0.8, 'step': 0.5},
        ))
        with self.assertRaises(RegimeMismatch):
            lab.run(config, out=self.tmp.name)
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'fallido')
        self.assertFalse(run.passed)
        self.assertIn('wiener', run.error)


COMMAND_CONFIG = {
    'kind': 'covariance',
    'seed': 11,
    'observables': ['H1'],
    'noise': {'kind': 'fou', 'h': 0.5, 'step': 0.5},
    'epsilons': [0.1],
    'n_paths': 200,
}


class ParseEpsilonsTest(SimpleTestCase):

    def test_formatos(self):
        self.assertEqual(parse_epsilons(['0.1,0.01', '0.001']), [0.1, 0.01, 0.001])
        self.assertIsNone(parse_epsilons(None))
        with self.assertRaises(CommandError):
            parse_epsilons(['uno'])


class LabCommandTest(TestCase):
    """Pruebas para los comandos de gestión del laboratorio"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)
        self.config_path = self.out / 'covariance.yaml'
        self.config_path.write_text(yaml.safe_dump(COMMAND_CONFIG), encoding='utf-8')

    def test_run(self):
        print("\n[TEST] Iniciando prueba: manage.py run")
        stdout = StringIO()
        try:
            call_command('run', str(self.config_path), out=str(self.out), stdout=stdout)
        except CommandError as e:
            # veredictos estadísticos fallidos: código de salida 1
            self.assertEqual(e.returncode, 1)
        self.assertIn('zero_at_origin', stdout.getvalue())
        self.assertEqual(ExperimentRun.objects.get().status, 'completado')
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: ejecución registrada desde el comando")

    def test_sobrescritura_de_opciones(self):
        stdout = StringIO()
        try:
            call_command(
                'verify_cov', config=str(self.config_path), seed=12, paths=100, eps=['0.1'],
                out=str(self.out), stdout=stdout,
            )
        except CommandError as e:
            self.assertEqual(e.returncode, 1)
        run = ExperimentRun.objects.get()
        self.assertEqual(run.seed, 12)
        self.assertEqual(run.config['n_paths'], 100)

    def test_archivo_inexistente(self):
        with self.assertRaises(CommandError):
            call_command('run', str(self.out / 'no-existe.yaml'), stdout=StringIO())

    def test_configuracion_invalida(self):
        self.config_path.write_text(yaml.safe_dump({**COMMAND_CONFIG, 'epsilons': [0.1, 0.5]}), encoding='utf-8')
        with self.assertRaises(CommandError) as ctx:
            call_command('run', str(self.config_path), stdout=StringIO())
        self.assertIn('epsilons', str(ctx.exception))

    def test_simulate(self):
        stdout = StringIO()
        call_command('simulate', config=str(self.config_path), out=str(self.out), span=8.0, csv=True, stdout=stdout)
        folders = list(self.out.glob('simulate-11-*'))
        self.assertEqual(len(folders), 1)
        self.assertTrue((folders[0] / 'ensemble.csv').exists())
        ensemble = load_ensemble(FileSystemStorage(location=str(self.out)), f"{folders[0].name}/ensemble.bin")
        self.assertEqual(ensemble.grid.count, 17)
        self.assertEqual(ensemble.n_paths, 200)
        self.assertIn('ρ(', stdout.getvalue())

    def test_lift(self):
        stdout = StringIO()
        call_command('lift', config=str(self.config_path), out=str(self.out), stdout=stdout)
        self.assertEqual(len(list(self.out.glob('lift-11-*/lift_eps0.1.bin'))), 1)
        self.assertIn('defecto de Chen', stdout.getvalue())


class ExperimentRunApiTest(TestCase):
    """Pruebas para la API de solo lectura de ejecuciones"""

    def setUp(self):
        self.client = Client()
        self.user = User.objects.create_user(username='analista', password='clave-segura-123')
        self.done = ExperimentRun.objects.create(
            kind='clt', seed=1, config={'kind': 'clt'}, config_hash='a' * 64,
            status='completado', passed=True, report={'passed': True, 'verdicts': []},
        )
        self.pending = ExperimentRun.objects.create(
            kind='covariance', seed=2, config={'kind': 'covariance'}, config_hash='b' * 64,
        )
        Artifact.objects.create(run=self.done, kind='report', path='clt-1-aaaaaaaa/report.json', size=10)

    def test_requiere_sesion(self):
        response = self.client.get('/api/runs/')
        self.assertEqual(response.status_code, 403)

    def test_listado_y_filtros(self):
        print("\n[TEST] Iniciando prueba: listado de ejecuciones")
        self.client.login(username='analista', password='clave-segura-123')
        response = self.client.get('/api/runs/')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(len(response.json()), 2)
        print("[TEST] ✓ Dos ejecuciones listadas")

        response = self.client.get('/api/runs/', {'kind': 'clt'})
        self.assertEqual([run['id'] for run in response.json()], [self.done.id])
        response = self.client.get('/api/runs/', {'passed': 'true'})
        self.assertEqual(len(response.json()), 1)
        self.assertEqual(response.json()[0]['artifacts'][0]['kind'], 'report')
        print("[TEST] ✓✓✓ PRUEBA EXITOSA: filtros por tipo y resultado")

    def test_reporte(self):
        self.client.login(username='analista', password='clave-segura-123')
        response = self.client.get(f'/api/runs/{self.done.id}/report/')
        self.assertEqual(response.status_code, 200)
        self.assertTrue(response.json()['passed'])

        response = self.client.get(f'/api/runs/{self.pending.id}/report/')
        self.assertEqual(response.status_code, 404)
        self.assertEqual(response.json()['status'], 'en_curso')

    def test_solo_lectura(self):
        """Las ejecuciones solo se registran desde los comandos; la API no las crea"""
        self.client.login(username='analista', password='clave-segura-123')
        response = self.client.post('/api/runs/', {'kind': 'clt'})
        self.assertEqual(response.status_code, 405)
        response = self.client.post('/api/artifacts/', {'run': self.done.id, 'kind': 'report'})
        self.assertEqual(response.status_code, 405)
        self.assertEqual(ExperimentRun.objects.count(), 2)
        self.assertEqual(Artifact.objects.count(), 1)

    def test_artefactos_por_ejecucion(self):
        self.client.login(username='analista', password='clave-segura-123')
        response = self.client.get('/api/artifacts/', {'run': self.pending.id})
        self.assertEqual(response.json(), [])
        response = self.client.get('/api/artifacts/', {'run': self.done.id})
        self.assertEqual(response.json()[0]['path'], 'clt-1-aaaaaaaa/report.json')
