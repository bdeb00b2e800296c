"""
Testes das distâncias empíricas, dos erros de interpolação e do ajuste de taxas
"""
import math

import numpy as np
import pytest
from scipy import stats

from app.services.distance_lab import (
    SamplePathEnsemble,
    brownian_interp_error,
    finite_rank_envelope,
    finite_rank_gap,
    fit_rate,
    interp_error_stat,
    interp_errors,
    ks_two_sample,
    marginal_w1,
    scaled_poisson_interp_error,
    variance_interval,
)
from app.services.measures import RngStream
from app.services.paths import Partition, RcllPath
from app.utils.exceptions import DomainError, ParameterError, StatisticsError


class TestMarginalW1:
    """Testes da Wasserstein-1 empírica"""

    def test_identical_samples(self):
        """Teste: amostras iguais têm distância zero"""
        xs = np.random.default_rng(1).normal(size=100)
        assert marginal_w1(xs, xs[::-1]) == 0.0

    def test_point_masses(self):
        """Teste: δ_0 contra δ_1"""
        assert marginal_w1([0.0], [1.0]) == pytest.approx(1.0)

    def test_translation(self):
        """Teste: W1(X, X + c) = |c| e invariância por translação comum"""
        gen = np.random.default_rng(2)
        xs, ys = gen.normal(size=200), gen.exponential(size=200)
        assert marginal_w1(xs, xs + 0.7) == pytest.approx(0.7)
        assert marginal_w1(xs + 3.0, ys + 3.0) == pytest.approx(marginal_w1(xs, ys))

    def test_triangle_inequality(self):
        """Teste: desigualdade triangular"""
        gen = np.random.default_rng(3)
        xs, ys, zs = gen.normal(size=150), gen.uniform(size=150), gen.exponential(size=150)
        assert marginal_w1(xs, zs) <= marginal_w1(xs, ys) + marginal_w1(ys, zs) + 1e-12

    def test_unequal_sizes(self):
        """Teste: tamanhos distintos usam o acoplamento de quantis"""
        gen = np.random.default_rng(4)
        xs, ys = gen.normal(size=100), gen.normal(size=70)
        assert marginal_w1(xs, ys) == pytest.approx(stats.wasserstein_distance(xs, ys))

    def test_empty(self):
        """Teste: amostra vazia"""
        with pytest.raises(ParameterError):
            marginal_w1([], [1.0])


class TestSampleStatistics:
    """Testes do KS e do intervalo de variância"""

    def test_ks_identical(self):
        """Teste: KS de uma amostra contra ela mesma"""
        xs = np.linspace(0.0, 1.0, 50)
        statistic, pvalue = ks_two_sample(xs, xs)
        assert statistic == 0.0
        assert pvalue == pytest.approx(1.0)

    def test_variance_interval(self):
        """Teste: intervalo contém a variância amostral"""
        xs = np.random.default_rng(5).normal(scale=2.0, size=1000)
        interval = variance_interval(xs)
        assert interval["low"] <= interval["variance"] <= interval["high"]
        assert interval["low"] <= 4.0 <= interval["high"]

    def test_variance_needs_two_samples(self):
        """Teste: uma amostra só"""
        with pytest.raises(StatisticsError):
            variance_interval([1.0])


class TestFiniteRankGap:
    """Testes da cota inferior por funcionais de posto finito"""

    @pytest.fixture
    def ensemble(self, unit_partition):
        nodes = np.random.default_rng(6).normal(size=(200, unit_partition.times.size))
        return SamplePathEnsemble(nodes, unit_partition)

    def test_equal_ensembles(self, ensemble, unit_partition, rng):
        """Teste: conjuntos iguais têm lacuna zero"""
        assert finite_rank_gap(ensemble, ensemble, unit_partition, 32, rng) == 0.0

    def test_constant_shift(self, ensemble, unit_partition, rng):
        """Teste: deslocamento constante c dá lacuna c"""
        shifted = SamplePathEnsemble(ensemble.nodes + 0.3, unit_partition)
        gap = finite_rank_gap(ensemble, shifted, unit_partition, 64, rng)
        assert gap == pytest.approx(0.3, rel=1e-9)
        assert gap <= finite_rank_envelope(ensemble, shifted) + 1e-12

    def test_monotone_in_trials(self, ensemble, unit_partition):
        """Teste: mais tentativas nunca diminuem a cota"""
        other = SamplePathEnsemble(ensemble.nodes ** 2, unit_partition)
        few = finite_rank_gap(ensemble, other, unit_partition, 8, RngStream(7))
        many = finite_rank_gap(ensemble, other, unit_partition, 32, RngStream(7))
        assert many >= few

    def test_partition_mismatch(self, ensemble):
        """Teste: partição diferente da usada na redução"""
        with pytest.raises(ParameterError):
            finite_rank_gap(ensemble, ensemble, Partition.uniform(1.0, 4), 4, RngStream(8))

    def test_invalid_ensemble(self, unit_partition):
        """Teste: número de nós incompatível ou valores não finitos"""
        with pytest.raises(ParameterError):
            SamplePathEnsemble(np.zeros((3, 4)), unit_partition)
        with pytest.raises(ParameterError):
            SamplePathEnsemble(np.full((3, 9), np.nan), unit_partition)

    def test_from_paths(self, step_path, unit_partition):
        """Teste: redução de caminhos aos nós"""
        ensemble = SamplePathEnsemble.from_paths([step_path, step_path], unit_partition, source="step")
        assert ensemble.nodes.shape == (2, 9, 1)
        assert ensemble.provenance == {"source": "step"}


class TestInterpolationError:
    """Testes das estatísticas de erro de interpolação"""

    @pytest.mark.parametrize("jump", [0.1, 0.3, 0.35, 0.5, 0.74])
    def test_single_jump(self, jump):
        """Teste: um salto unitário dá erro em [1/2, 1]"""
        path = RcllPath(0.0, np.array([jump]), np.array([1.0]), 1.0)
        error = interp_errors([path], Partition.uniform(1.0, 4))[0]
        assert 0.5 - 1e-12 <= error <= 1.0

    def test_smooth_path(self, sine_path):
        """Teste: erro O(|π|²) para caminho suave"""
        coarse = interp_error_stat([sine_path], Partition.uniform(1.0, 16))
        fine = interp_error_stat([sine_path], Partition.uniform(1.0, 64))
        assert fine < coarse / 8

    def test_empty(self, unit_partition):
        """Teste: conjunto vazio"""
        with pytest.raises(ParameterError):
            interp_error_stat([], unit_partition)

    def test_scaled_poisson(self):
        """Teste: erro positivo e reprodutível"""
        a = scaled_poisson_interp_error(100, RngStream(9))
        assert a == scaled_poisson_interp_error(100, RngStream(9))
        assert a > 0

    def test_brownian_grid_divisibility(self):
        """Teste: n deve dividir a grade de referência"""
        with pytest.raises(ParameterError):
            brownian_interp_error(3, RngStream(10), 1024)
        assert brownian_interp_error(16, RngStream(10), 1024) > 0


class TestFitRate:
    """Testes da regressão log-log"""

    def test_exact_power_law(self):
        """Teste: médias 3 n^{-1/2} dão inclinação -1/2"""
        fit = fit_rate({n: 3.0 / math.sqrt(n) for n in (10, 100, 1000, 10000)}, RngStream(10))
        assert fit.slope == pytest.approx(-0.5)
        assert fit.intercept == pytest.approx(math.log(3.0))
        assert fit.r2 == pytest.approx(1.0)
        assert fit.ci_low == fit.ci_high == fit.slope

    def test_constant(self):
        """Teste: médias constantes dão inclinação zero"""
        fit = fit_rate({n: 2.0 for n in (1, 2, 4, 8)}, RngStream(10))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)
        assert fit.r2 == 1.0

    def test_scale_equivariance(self):
        """Teste: multiplicar as médias só move o intercepto"""
        base = {n: n ** -0.3 * (1.0 + 0.1 * (-1) ** n) for n in (10, 20, 40, 80, 160)}
        scaled = {n: 5.0 * v for n, v in base.items()}
        a, b = fit_rate(base, RngStream(10)), fit_rate(scaled, RngStream(10))
        assert b.slope == pytest.approx(a.slope)
        assert b.intercept == pytest.approx(a.intercept + math.log(5.0))

    def test_bootstrap_interval(self):
        """Teste: intervalo bootstrap contém a inclinação e é reprodutível"""
        gen = np.random.default_rng(11)
        data = {n: n ** -0.5 * gen.exponential(size=50) for n in (100, 400, 1600, 6400)}
        fit = fit_rate(data, bootstrap=200, rng=RngStream(12))
        assert fit.ci_low <= fit.slope <= fit.ci_high
        assert fit == fit_rate(data, bootstrap=200, rng=RngStream(12))
        assert len(fit.points) == 4

    def test_too_few_scales(self):
        """Teste: menos de quatro valores de n"""
        with pytest.raises(ParameterError):
            fit_rate({1: 1.0, 2: 0.5, 4: 0.25}, RngStream(10))

    def test_nonpositive_mean(self):
        """Teste: média não positiva"""
        with pytest.raises(DomainError):
            fit_rate({1: 1.0, 2: 0.5, 4: 0.0, 8: 0.1}, RngStream(10))

    def test_requires_stream(self):
        """Teste: sem fluxo aleatório explícito a chamada falha"""
        with pytest.raises(TypeError):
            fit_rate({n: 1.0 / n for n in (1, 2, 4, 8)}, bootstrap=10)
