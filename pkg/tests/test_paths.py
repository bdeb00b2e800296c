"""
Testes de caminhos, interpolação afim e operadores lipschitzianos
"""
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from app.services.measures import RngStream
from app.services.paths import (
    GridPath,
    Partition,
    RcllPath,
    cumulative_rate,
    from_csv,
    hat_coefficients,
    interpolate,
    invert_time_change,
    local_time,
    modulus,
    running_max,
    sko_reflect,
    stack_nodes,
    sup_distance,
    sup_norm,
    theta_lipschitz_constant,
    theta_ode,
    theta_ode_batch,
    time_change,
    to_csv,
)
from app.utils.exceptions import ParameterError, UnsupportedDimensionError


def _random_rcll(gen, T=1.0, d=1):
    times = np.sort(gen.uniform(0.0, T, size=int(gen.integers(0, 25))))
    times = times[times > 0]
    values = np.cumsum(gen.normal(size=(times.size, d)), axis=0)
    return RcllPath(gen.normal(size=d), times, values, T)


class TestPartition:
    """Testes de partições"""

    def test_uniform(self):
        """Teste: partição uniforme com l intervalos"""
        pi = Partition.uniform(2.0, 4)
        assert pi.size == 4
        assert pi.T == 2.0
        assert pi.mesh == pytest.approx(0.5)

    def test_non_uniform_mesh(self):
        """Teste: |π| é o maior passo"""
        assert Partition(np.array([0.0, 0.1, 0.5, 1.0])).mesh == pytest.approx(0.5)

    @pytest.mark.parametrize("times", [[0.0], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0, 0.7, 0.3]])
    def test_invalid(self, times):
        """Teste: partições degeneradas são rejeitadas"""
        with pytest.raises(ParameterError):
            Partition(np.array(times))


class TestPaths:
    """Testes dos contêineres de caminho"""

    def test_rcll_is_right_continuous(self, step_path):
        """Teste: valor no salto é o novo estado; limite à esquerda é o anterior"""
        assert step_path.evaluate(0.25)[0, 0] == 1.0
        assert step_path.left_limit(0.25)[0, 0] == 0.0
        assert step_path.evaluate(1.0)[0, 0] == -0.5
        assert len(step_path) == 2

    def test_rcll_invalid_jumps(self):
        """Teste: saltos fora de (0, T] ou fora de ordem"""
        with pytest.raises(ParameterError):
            RcllPath(0.0, [0.0], [1.0], 1.0)
        with pytest.raises(ParameterError):
            RcllPath(0.0, [0.5, 0.4], [1.0, 2.0], 1.0)
        with pytest.raises(ParameterError):
            RcllPath(0.0, [1.5], [1.0], 1.0)

    def test_from_increments(self):
        """Teste: construção por incrementos acumula os saltos"""
        path = RcllPath.from_increments([1.0, 0.0], [0.2, 0.4], [[1.0, 0.0], [0.0, -1.0]], 1.0)
        assert np.array_equal(path.evaluate(0.5)[0], [2.0, -1.0])

    def test_grid_evaluate_between_nodes(self):
        """Teste: GridPath é afim entre nós"""
        path = GridPath.uniform(1.0, [0.0, 2.0, 0.0])
        assert path.evaluate(0.25)[0, 0] == pytest.approx(1.0)

    def test_time_outside_horizon(self, sine_path):
        """Teste: tempo fora de [0, T]"""
        with pytest.raises(ParameterError):
            sine_path.evaluate(1.5)

    def test_grid_arithmetic(self, sine_path):
        """Teste: soma e produto por escalar na mesma grade"""
        doubled = sine_path + sine_path
        assert sup_distance(doubled, 2.0 * sine_path) == 0.0


class TestSupDistance:
    """Testes da distância do sup exata"""

    def test_step_against_zero(self, step_path):
        """Teste: ‖f‖ de um caminho em degraus é o maior estado"""
        zero = RcllPath.constant(0.0, 1.0)
        assert sup_distance(step_path, zero) == 1.0
        assert sup_norm(step_path) == 1.0

    def test_grid_against_rcll(self, sine_path):
        """Teste: combinação GridPath x RcllPath"""
        assert sup_distance(sine_path, RcllPath.constant(0.0, 1.0)) == pytest.approx(1.0)

    def test_left_limits_count(self):
        """Teste: o supremo pode ser atingido por um limite à esquerda"""
        ramp = GridPath.uniform(1.0, [0.0, 1.0])
        drop = RcllPath(0.0, [0.5], [0.5], 1.0)
        # logo antes de 0.5: rampa 0.5 contra 0; em 1: 1 contra 0.5
        assert sup_distance(ramp, drop) == pytest.approx(0.5)

    def test_symmetry_and_triangle(self):
        """Teste: simetria e desigualdade triangular"""
        gen = RngStream(3).generator
        for _ in range(50):
            f, g, h = (_random_rcll(gen) for _ in range(3))
            assert sup_distance(f, g) == sup_distance(g, f)
            assert sup_distance(f, h) <= sup_distance(f, g) + sup_distance(g, h) + 1e-12

    def test_horizon_mismatch(self):
        """Teste: caminhos em horizontes distintos"""
        with pytest.raises(ParameterError):
            sup_distance(RcllPath.constant(0.0, 1.0), RcllPath.constant(0.0, 2.0))


class TestInterpolation:
    """Testes da interpolação afim Ξ_π"""

    def test_agrees_at_nodes(self, step_path, unit_partition):
        """Teste: Ξ_π f coincide com f nos nós"""
        xi = interpolate(step_path, unit_partition)
        assert np.allclose(xi.values, step_path.evaluate(unit_partition.times))

    def test_no_jumps_no_error(self, unit_partition):
        """Teste: caminho sem saltos é reproduzido exatamente"""
        path = RcllPath.constant(3.0, 1.0)
        assert sup_distance(path, interpolate(path, unit_partition)) == 0.0

    @pytest.mark.parametrize("jump", [0.33, 0.35, 0.71, 0.999])
    def test_single_unit_jump(self, jump):
        """Teste: um salto unitário dá erro em [1/2, 1]"""
        path = RcllPath(0.0, [jump], [1.0], 1.0)
        error = sup_distance(path, interpolate(path, Partition.uniform(1.0, 10)))
        assert 0.5 - 1e-12 <= error <= 1.0

    def test_mid_cell_jump_is_half(self):
        """Teste: salto no meio de uma célula dá erro exatamente 1/2"""
        path = RcllPath(0.0, [0.35], [1.0], 1.0)
        assert sup_distance(path, interpolate(path, Partition.uniform(1.0, 10))) == pytest.approx(0.5)

    def test_affine_path_reproduced(self):
        """Teste: caminho afim é fixo por Ξ_π"""
        line = GridPath.from_function(lambda t: 3 * t - 1, 1.0, 64)
        assert sup_distance(line, interpolate(line, Partition.uniform(1.0, 8))) < 1e-14

    def test_hat_coefficients(self):
        """Teste: coeficientes na base de chapéus de f(t) = t"""
        line = GridPath.from_function(lambda t: t, 1.0, 16)
        assert np.allclose(hat_coefficients(line, Partition.uniform(1.0, 4)), 0.5)

    def test_partition_horizon_mismatch(self, step_path):
        """Teste: partição e caminho com horizontes distintos"""
        with pytest.raises(ParameterError):
            interpolate(step_path, Partition.uniform(2.0, 4))

    def test_stack_nodes(self, step_path, sine_path, unit_partition):
        """Teste: valores nos nós empilhados em (S, l+1, d)"""
        assert stack_nodes([step_path, sine_path], unit_partition).shape == (2, 9, 1)


class TestReflectionOperators:
    """Testes de máximo corrente, tempo local e Skorokhod"""

    def test_on_step_path(self, step_path):
        """Teste: valores exatos no caminho 0 -> 1 -> -0.5"""
        assert np.allclose(running_max(step_path).states[:, 0], [0.0, 1.0, 1.0])
        assert np.allclose(local_time(step_path).states[:, 0], [0.0, 0.0, 0.5])
        assert np.allclose(sko_reflect(step_path).states[:, 0], [0.0, 1.0, 0.0])

    def test_reflection_is_nonnegative(self, sine_path):
        """Teste: Sko(f) >= 0 e Sko(f) = f enquanto f >= 0"""
        reflected = sko_reflect(sine_path)
        assert reflected.values.min() >= -1e-15
        half = sine_path.times <= 0.5
        assert np.allclose(reflected.values[half], sine_path.values[half])

    def test_sko_requires_dimension_one(self):
        """Teste: Skorokhod em d = 2"""
        with pytest.raises(UnsupportedDimensionError):
            sko_reflect(RcllPath.constant([0.0, 0.0], 1.0))

    def test_lipschitz_constants(self):
        """Teste: constantes 1 (máximo, tempo local) e 2 (Skorokhod) em pares aleatórios"""
        gen = RngStream(11).generator
        for _ in range(200):
            f, g = _random_rcll(gen), _random_rcll(gen)
            dist = sup_distance(f, g)
            assert sup_distance(running_max(f), running_max(g)) <= dist + 1e-9
            assert sup_distance(local_time(f), local_time(g)) <= dist + 1e-9
            assert sup_distance(sko_reflect(f), sko_reflect(g)) <= 2 * dist + 1e-9


class TestModulus:
    """Testes do módulo de continuidade"""

    def test_rcll_exact(self):
        """Teste: saltos combinados quando cabem numa janela de tamanho ε"""
        path = RcllPath(0.0, [0.3, 0.5], [1.0, 2.0], 1.0)
        assert modulus(path, 0.1) == 1.0
        assert modulus(path, 0.3) == 2.0

    def test_grid_line(self):
        """Teste: α_ε(t ↦ t) = ε quando ε é múltiplo do passo"""
        line = GridPath.from_function(lambda t: t, 1.0, 1024)
        assert modulus(line, 0.25) == pytest.approx(0.25, abs=1e-12)

    def test_lipschitz(self):
        """Teste: |α_ε(f) - α_ε(g)| <= 2 ‖f - g‖"""
        gen = RngStream(5).generator
        for _ in range(200):
            f, g = _random_rcll(gen), _random_rcll(gen)
            eps = gen.uniform(0.01, 0.6)
            assert abs(modulus(f, eps) - modulus(g, eps)) <= 2 * sup_distance(f, g) + 1e-9

    def test_invalid_eps(self, step_path):
        """Teste: ε não positivo"""
        with pytest.raises(ParameterError):
            modulus(step_path, 0.0)


class TestTimeChange:
    """Testes da mudança de tempo Γ"""

    def test_constant_rate(self):
        """Teste: taxa 2 transforma t ↦ t em t ↦ 2t"""
        f = GridPath.from_function(lambda t: t, 2.0, 256)
        out = time_change(f, 2.0, 1.0, 128)
        assert np.allclose(out.values[:, 0], 2 * out.times, atol=1e-12)

    def test_cumulative_rate_linear(self):
        """Teste: trapézio exato para taxa afim"""
        times = np.linspace(0.0, 1.0, 11)
        assert np.allclose(cumulative_rate(lambda t: 1 + t, times), times + times ** 2 / 2)

    def test_rate_exceeds_horizon(self):
        """Teste: γ(T) além do horizonte do caminho"""
        f = GridPath.from_function(lambda t: t, 1.0, 16)
        with pytest.raises(ParameterError):
            time_change(f, 3.0, 1.0, 16)

    def test_negative_rate(self):
        """Teste: taxa negativa"""
        with pytest.raises(ParameterError):
            cumulative_rate(-1.0, np.linspace(0.0, 1.0, 5))

    def test_inverse(self):
        """Teste: γ⁻¹ por inversão linear"""
        times = np.linspace(0.0, 1.0, 1001)
        gamma = times ** 2 + times
        assert invert_time_change(times, gamma, 0.75) == pytest.approx(0.5, abs=1e-6)

    def test_lipschitz_constant_one(self):
        """Teste: ‖Γf - Γg‖ <= ‖f - g‖ para taxa limitada por 1"""
        gen = RngStream(8).generator
        for _ in range(50):
            f = GridPath.uniform(1.0, np.cumsum(gen.normal(size=257)) / 16)
            g = GridPath.uniform(1.0, np.cumsum(gen.normal(size=257)) / 16)
            phase = gen.uniform(0, 6.0)

            def rate(t):
                return 0.5 + 0.5 * np.sin(7 * t + phase) ** 2

            out = sup_distance(time_change(f, rate, 1.0, 200), time_change(g, rate, 1.0, 200))
            assert out <= sup_distance(f, g) + 1e-9


class TestThetaOde:
    """Testes da aplicação Θ_A"""

    def test_exponential_solution(self):
        """Teste: f = 1 e A = a dão y = e^{at}"""
        f = GridPath.from_function(lambda t: np.ones_like(t), 1.0, 2048)
        y = theta_ode(f, np.array([[-1.5]]))
        assert np.allclose(y.values[:, 0], np.exp(-1.5 * f.times), rtol=1e-6)

    def test_time_dependent_matrix(self):
        """Teste: A(t) = t dá y = exp(t²/2)"""
        f = GridPath.from_function(lambda t: np.ones_like(t), 1.0, 2048)
        y = theta_ode(f, lambda t: np.array([[t]]))
        assert np.allclose(y.values[:, 0], np.exp(f.times ** 2 / 2), rtol=1e-6)

    def test_zero_matrix_is_identity(self, sine_path):
        """Teste: Θ_0 = identidade"""
        assert sup_distance(theta_ode(sine_path, np.zeros((1, 1))), sine_path) == 0.0

    def test_batch_matches_single(self):
        """Teste: lote e caminho isolado coincidem"""
        gen = RngStream(2).generator
        values = np.cumsum(gen.normal(size=(3, 65, 2)), axis=1)
        A = np.array([[0.0, 1.0], [-1.0, -0.5]])
        times = np.linspace(0.0, 1.0, 65)
        batch = theta_ode_batch(times, values, A)
        single = theta_ode(GridPath(times, values[1]), A)
        assert np.allclose(batch[1], single.values)

    def test_lipschitz_constant(self):
        """Teste: ‖Θf - Θg‖ <= (1 + ‖A‖T e^{T‖A‖}) ‖f - g‖"""
        gen = RngStream(4).generator
        times = np.linspace(0.0, 1.0, 257)
        for _ in range(50):
            A = gen.normal(size=(2, 2))
            f = GridPath(times, np.cumsum(gen.normal(size=(257, 2)), axis=0) / 16)
            g = GridPath(times, np.cumsum(gen.normal(size=(257, 2)), axis=0) / 16)
            lhs = sup_distance(theta_ode(f, A), theta_ode(g, A))
            assert lhs <= theta_lipschitz_constant(A, 1.0) * sup_distance(f, g) + 1e-9

    def test_linearity(self):
        """Teste: Θ(af + bg) = aΘf + bΘg"""
        gen = RngStream(6).generator
        times = np.linspace(0.0, 2.0, 257)

        def A(t):
            return np.array([[0.0, 1.0 + t], [-2.0, -0.3]])

        f = GridPath(times, np.cumsum(gen.normal(size=(257, 2)), axis=0) / 16)
        g = GridPath(times, np.cumsum(gen.normal(size=(257, 2)), axis=0) / 16)
        combined = theta_ode(GridPath(times, 2.0 * f.values - 3.0 * g.values), A)
        expected = 2.0 * theta_ode(f, A).values - 3.0 * theta_ode(g, A).values
        assert np.allclose(combined.values, expected, rtol=1e-10, atol=1e-12)

    def test_matches_refined_integrator(self):
        """Teste: Θ_A f contra y' = f' + Ay resolvida por solve_ivp; erro cai com a grade"""
        A = np.array([[0.0, 1.0], [-2.0, -0.3]])

        def f(t):
            return np.column_stack([np.sin(3 * t), np.cos(t)])

        def rhs(t, y):
            return np.array([3 * np.cos(3 * t), -np.sin(t)]) + A @ y

        errors = []
        for G in (256, 512, 2048):
            path = GridPath.from_function(f, 2.0, G)
            reference = solve_ivp(rhs, (0.0, 2.0), f(np.array([0.0]))[0], t_eval=path.times,
                                  rtol=1e-11, atol=1e-12, method="DOP853")
            errors.append(np.max(np.abs(theta_ode(path, A).values - reference.y.T)))
        assert errors[-1] < 5e-5
        assert errors[1] < errors[0] / 3


class TestCsv:
    """Testes de exportação CSV"""

    def test_grid_round_trip(self, tmp_path, sine_path):
        """Teste: GridPath ida e volta a 1e-12"""
        filename = str(tmp_path / "grid.csv")
        to_csv(sine_path, filename)
        assert sup_distance(from_csv(filename, "grid"), sine_path) < 1e-12

    def test_rcll_round_trip(self, tmp_path, step_path):
        """Teste: RcllPath ida e volta preserva saltos"""
        filename = str(tmp_path / "rcll.csv")
        to_csv(step_path, filename)
        back = from_csv(filename, "rcll")
        assert np.array_equal(back.jump_times, step_path.jump_times)
        assert sup_distance(back, step_path) == 0.0

    def test_unknown_kind(self, tmp_path, step_path):
        """Teste: tipo de caminho desconhecido"""
        filename = str(tmp_path / "rcll.csv")
        to_csv(step_path, filename)
        with pytest.raises(ParameterError):
            from_csv(filename, "spline")
