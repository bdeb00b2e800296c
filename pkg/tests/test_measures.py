"""
Testes de medidas de Poisson, Ψ, W de Lambert e da cota do máximo de Poisson
"""
import math

import mpmath
import numpy as np
import pytest
from scipy import special, stats

from app.services.measures import (
    RngStream,
    lambert_w0,
    poisson_max_bound,
    poisson_max_bound_exp,
    poisson_max_bound_loglog,
    poisson_max_bound_loglog_upper,
    poisson_max_loglog_threshold,
    poisson_max_mean_exact,
    psi_bound,
    sample_poisson_max,
    sample_poisson_measure,
)
from app.utils.exceptions import DomainError, ParameterError


class TestRngStream:
    """Testes dos fluxos aleatórios reprodutíveis"""

    def test_same_ids_same_draws(self):
        """Teste: mesmos identificadores produzem a mesma sequência"""
        a = RngStream(42, 3, (5,)).generator.random(10)
        b = RngStream(42, 3, (5,)).generator.random(10)
        assert np.array_equal(a, b)

    def test_children_are_distinct(self):
        """Teste: fluxos filhos com chaves diferentes não coincidem"""
        parent = RngStream(42, 3)
        a = parent.spawn(0).generator.random(10)
        b = parent.spawn(1).generator.random(10)
        assert not np.array_equal(a, b)
        assert parent.spawn(1).keys == (1,)

    def test_invalid_seed(self):
        """Teste: semente negativa é rejeitada"""
        with pytest.raises(ParameterError):
            RngStream(-1)


class TestPoissonMeasure:
    """Testes da amostragem da medida de Poisson marcada"""

    def test_support_and_order(self, rng):
        """Teste: tempos ordenados em [0, T] e marcas em [0, z_max]"""
        sample = sample_poisson_measure(rng, T=2.0, n_rate=50.0, z_max=3.0)
        assert np.all(np.diff(sample.times) >= 0)
        assert sample.times.min() >= 0 and sample.times.max() <= 2.0
        assert sample.marks.min() >= 0 and sample.marks.max() <= 3.0
        assert len(sample) == sample.marks.size

    def test_arrays_are_read_only(self, rng):
        """Teste: a realização é imutável"""
        sample = sample_poisson_measure(rng, 1.0, 10.0, 1.0)
        with pytest.raises(ValueError):
            sample.times[...] = 0.0

    def test_count_distribution(self):
        """Teste: contagem total segue Poisson(n z_max T) (qui-quadrado)"""
        mean = 2.0 * 1.5 * 1.0
        counts = np.array([len(sample_poisson_measure(RngStream(9, 0, (i,)), 1.0, 2.0, 1.5))
                           for i in range(3000)])
        edges = np.arange(0, 9)
        observed = np.array([np.sum(counts == k) for k in edges[:-1]] + [np.sum(counts >= edges[-1])])
        probs = np.append(stats.poisson.pmf(edges[:-1], mean), stats.poisson.sf(edges[-1] - 1, mean))
        _, p = stats.chisquare(observed, probs * counts.size)
        assert p > 1e-3

    @pytest.mark.parametrize("T,n_rate,z_max", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, math.inf)])
    def test_invalid_parameters(self, rng, T, n_rate, z_max):
        """Teste: horizonte, taxa ou marca inválidos"""
        with pytest.raises(ParameterError):
            sample_poisson_measure(rng, T, n_rate, z_max)


class TestPsiBound:
    """Testes da função Ψ"""

    @pytest.mark.parametrize("n,x", [(2, 0.1), (10, 1.0), (1000, 3.0), (10 ** 6, 1e-4), (50, 500.0)])
    def test_matches_high_precision(self, n, x):
        """Teste: Ψ coincide com a avaliação em alta precisão"""
        mpmath.mp.dps = 50
        n_mp, x_mp = mpmath.mpf(n), mpmath.mpf(x)
        head = mpmath.log(n_mp * mpmath.exp(x_mp / n_mp))
        expected = head / mpmath.log(n_mp / x_mp * mpmath.log(n_mp) + 1)
        assert psi_bound(n, x) == pytest.approx(float(expected), rel=1e-12)

    def test_domain(self):
        """Teste: n < 2 ou x <= 0 fora do domínio"""
        with pytest.raises(DomainError):
            psi_bound(1, 1.0)
        with pytest.raises(DomainError):
            psi_bound(10, 0.0)

    @pytest.mark.parametrize("n", [2, 10, 1000, 10 ** 6])
    def test_increasing_in_x(self, n):
        """Teste: Ψ(n, ·) é estritamente crescente"""
        values = [psi_bound(n, x) for x in np.geomspace(1e-3, 1e3, 50)]
        assert np.all(np.diff(values) > 0)

    @pytest.mark.parametrize("n", [10.0, 2.5, True, np.float64(100.0)])
    def test_rejects_non_integer_n(self, n):
        """Teste: n precisa ser inteiro"""
        with pytest.raises(DomainError):
            psi_bound(n, 1.0)

    def test_accepts_numpy_integer(self):
        """Teste: inteiros numpy são aceitos"""
        assert psi_bound(np.int64(100), 2.0) == psi_bound(100, 2.0)


class TestLambertW:
    """Testes do ramo principal de W"""

    @pytest.mark.parametrize("z", [-0.3, -0.1, 1e-12, 0.5, 1.0, 10.0, 1e5, 1e100, 1e300])
    def test_matches_scipy(self, z):
        """Teste: W0 contra scipy.special.lambertw"""
        assert lambert_w0(z) == pytest.approx(special.lambertw(z).real, rel=1e-13, abs=1e-15)

    @pytest.mark.parametrize("z", [-0.36787, -0.367879441, 2.5, 1e20])
    def test_matches_mpmath(self, z):
        """Teste: W0 contra mpmath perto da ramificação e para argumentos grandes"""
        mpmath.mp.dps = 40
        assert lambert_w0(z) == pytest.approx(float(mpmath.lambertw(z)), rel=1e-6)

    def test_special_values(self):
        """Teste: W(0) = 0, W(e) = 1, W(-1/e) = -1"""
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, rel=1e-14)
        assert lambert_w0(-math.exp(-1.0)) == -1.0

    def test_defining_identity(self):
        """Teste: w e^w = z"""
        for z in np.geomspace(1e-8, 1e8, 33):
            w = lambert_w0(z)
            assert w * math.exp(w) == pytest.approx(z, rel=1e-13)

    def test_residual_on_full_domain(self):
        """Teste: |w e^w - z| <= 1e-12 max(1, |z|) de -1/e + 1e-9 até 1e8"""
        near_branch = -math.exp(-1.0) + np.geomspace(1e-9, 0.3, 40)
        grid = np.concatenate([near_branch, np.geomspace(1e-8, 1e8, 60)])
        for z in grid:
            w = lambert_w0(z)
            assert w >= -1.0
            assert abs(w * math.exp(w) - z) <= 1e-12 * max(1.0, abs(z))

    def test_domain(self):
        """Teste: z < -1/e fora do domínio"""
        with pytest.raises(DomainError):
            lambert_w0(-0.5)


class TestPoissonMaxBound:
    """Testes da cota do máximo de variáveis de Poisson"""

    @pytest.mark.parametrize("n,nu", [(10, 0.5), (1000, 1.0), (10 ** 6, 2.0), (10 ** 9, 5.0)])
    def test_closed_forms_agree(self, n, nu):
        """Teste: as duas formas fechadas concordam a 1e-10"""
        assert poisson_max_bound(n, nu) == pytest.approx(poisson_max_bound_exp(n, nu), rel=1e-10)

    @pytest.mark.parametrize("n,nu", [(10, 0.5), (100, 1.0), (1000, 2.0), (10 ** 5, 5.0)])
    def test_exact_mean_below_bound(self, n, nu):
        """Teste: E[max] exato nunca excede a cota"""
        assert poisson_max_mean_exact(n, nu) <= poisson_max_bound(n, nu)

    def test_exact_mean_single_variable(self):
        """Teste: com n = 1 a média do máximo é ν"""
        assert poisson_max_mean_exact(1, 3.5) == pytest.approx(3.5, rel=1e-12)

    def test_monte_carlo_matches_exact(self, rng):
        """Teste: média Monte Carlo dentro de 4 erros padrão do valor exato"""
        draws = sample_poisson_max(rng, 50, 2.0, 4000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - poisson_max_mean_exact(50, 2.0)) < 4 * se

    @pytest.mark.slow
    @pytest.mark.parametrize("n", [10 ** 2, 10 ** 3, 10 ** 4])
    @pytest.mark.parametrize("nu", [0.5, 1.0, 2.0, 5.0])
    def test_monte_carlo_below_bound(self, n, nu):
        """Teste: média Monte Carlo menos 3 erros padrão não excede a cota"""
        if math.log(n) <= nu:
            pytest.skip("fora do domínio log n > ν")
        draws = sample_poisson_max(RngStream(21, 0, (n, int(nu * 10))), n, nu, 2000)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert draws.mean() - 3 * se <= poisson_max_bound(n, nu)

    def test_loglog_threshold(self):
        """Teste: limiar exp(e^{ν+1} + ν)"""
        assert poisson_max_loglog_threshold(0.5) == pytest.approx(math.exp(math.exp(1.5) + 0.5))
        assert poisson_max_loglog_threshold(10.0) == math.inf

    @pytest.mark.parametrize("n,nu", [(10 ** 4, 0.5), (10 ** 8, 0.5), (10 ** 12, 1.0)])
    def test_loglog_brackets_bound(self, n, nu):
        """Teste: forma log-log abaixo da cota de Lambert-W e a superior acima"""
        assert n >= poisson_max_loglog_threshold(nu)
        bound = poisson_max_bound(n, nu)
        assert poisson_max_bound_loglog(n, nu) <= bound <= poisson_max_bound_loglog_upper(n, nu)

    def test_loglog_below_threshold(self):
        """Teste: forma log-log exige n acima do limiar"""
        with pytest.raises(DomainError):
            poisson_max_bound_loglog(100, 0.5)

    def test_domain(self):
        """Teste: log n <= ν fora do domínio"""
        with pytest.raises(DomainError):
            poisson_max_bound(5, 2.0)
        with pytest.raises(DomainError):
            poisson_max_bound(1, 0.1)
