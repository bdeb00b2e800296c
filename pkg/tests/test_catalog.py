"""
Testes do catálogo de modelos
"""
import pytest

from app.services.catalog import build_kernel, build_model, builtin_specs, get_entry, list_models, validate_params
from app.utils.exceptions import ParameterError, StabilityError


class TestCatalog:
    """Testes das entradas e da validação de parâmetros"""

    def test_six_entries(self):
        """Teste: cinco modelos de salto e Hawkes"""
        ids = [entry.model_id for entry in list_models()]
        assert ids == ["telegraph", "mm-infty", "mm1", "sir", "moran", "hawkes"]

    def test_telegraph_parameters(self):
        """Teste: telegráfico lista σ_0, σ_1 e Λ(0)"""
        names = [p.name for p in get_entry("telegraph").parameters]
        assert names == ["sigma0", "sigma1", "x0"]
        assert all(entry.provenance for entry in list_models())

    def test_defaults_are_merged(self):
        """Teste: parâmetros ausentes recebem o padrão"""
        params = validate_params("mm-infty", {"lam": 5.0})
        assert params == {"lam": 5.0, "mu": 1.0, "x0": 1.0}

    def test_hawkes_rejects_unstable_kernel(self):
        """Teste: κ >= 1 rejeitado na validação"""
        with pytest.raises(StabilityError):
            validate_params("hawkes", {"a": [1.5], "b": [1.0]})

    def test_hawkes_kernel(self):
        """Teste: núcleo padrão com κ = 1/2"""
        mu, kernel = build_kernel()
        assert mu == 1.0
        assert kernel.kappa == pytest.approx(0.5)

    @pytest.mark.parametrize("model_id,params", [
        ("telegraph", {"sigma0": 0.0}),
        ("telegraph", {"x0": 1.5}),
        ("sir", {"s0": 0.8, "i0": 0.3}),
        ("moran", {"unknown": 1.0}),
        ("hawkes", {"a": [0.1, 0.2], "b": [1.0]}),
        ("nope", {}),
    ])
    def test_invalid_parameters(self, model_id, params):
        """Teste: parâmetros fora do domínio ou desconhecidos"""
        with pytest.raises(ParameterError):
            validate_params(model_id, params)

    def test_hawkes_is_not_a_jump_model(self):
        """Teste: build_model aceita apenas os modelos de salto"""
        with pytest.raises(ParameterError):
            build_model("hawkes")

    def test_builtin_specs(self):
        """Teste: cinco especificações com dimensões corretas"""
        specs = builtin_specs()
        assert sorted(specs) == ["mm-infty", "mm1", "moran", "sir", "telegraph"]
        assert specs["sir"].d == 2
        assert specs["moran"].m == 4
