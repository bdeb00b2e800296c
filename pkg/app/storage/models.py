# Modelos Pydantic da configuração de experimentos e do manifesto de saída

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationInfo, field_validator

from app.services.catalog import validate_params
from app.services.distance_lab import RateFit
from app.utils.exceptions import LabError

SCHEMA_VERSION = 1

ExperimentKind = Literal[
    "lln-rate",
    "fclt-marginal",
    "interp-bound",
    "coupling-rate",
    "hawkes-limit",
    "poisson-max-bound",
    "operator-lipschitz",
    "brownian-interp",
]

JUMP_MODELS = ("telegraph", "mm-infty", "mm1", "sir", "moran")
_NEEDS_JUMP_MODEL = ("lln-rate", "fclt-marginal", "coupling-rate")
_NO_MODEL = ("poisson-max-bound", "operator-lipschitz", "brownian-interp")


class ExperimentConfig(BaseModel):
    """Configuração de um experimento (arquivo JSON com versão de esquema)"""
    schema_version: Literal[1] = Field(..., description="Versão do esquema da configuração")
    kind: ExperimentKind = Field(..., description="Tipo de experimento")
    model: Optional[str] = Field(None, validate_default=True, description="Identificador do modelo no catálogo")
    params: Dict[str, Any] = Field(default_factory=dict, validate_default=True, description="Parâmetros do modelo")
    n: List[int] = Field(..., min_length=1, description="Escalas n, estritamente crescentes")
    T: float = Field(default=1.0, gt=0, description="Horizonte")
    replications: int = Field(default=200, ge=1, description="Replicações por escala")
    grid: Optional[int] = Field(default=None, ge=16, description="Passos da grade (padrão das configurações)")
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="Semente mestre")
    output_dir: Optional[str] = Field(default=None, description="Diretório de saída")

    # opções por tipo
    limit_samples: Optional[int] = Field(default=None, ge=2, description="Amostras do limite (fclt-marginal)")
    trials: int = Field(default=64, ge=1, description="Funcionais aleatórios por comparação de posto finito")
    partition_size: int = Field(default=16, ge=1, description="Intervalos da partição dos funcionais de posto finito")
    nu: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0], description="Parâmetros ν (poisson-max-bound)")
    pairs: int = Field(default=1000, ge=1, description="Pares de caminhos aleatórios (operator-lipschitz)")
    epsilon: float = Field(default=0.5, gt=0, lt=1, description="Expoente ε da condição de cauda de ψ")
    bootstrap: Optional[int] = Field(default=None, ge=0, description="Reamostragens bootstrap (padrão das configurações)")

    @field_validator("n")
    @classmethod
    def validate_n(cls, v):
        if any(value < 1 for value in v):
            raise ValueError("todas as escalas n devem ser >= 1")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("lista n deve ser estritamente crescente")
        return v

    @field_validator("nu")
    @classmethod
    def validate_nu(cls, v):
        if not v or any(value <= 0 for value in v):
            raise ValueError("ν deve ser uma lista não vazia de valores positivos")
        return v

    @field_validator("model")
    @classmethod
    def check_model(cls, v, info: ValidationInfo):
        kind = info.data.get("kind")
        if kind in _NEEDS_JUMP_MODEL and v not in JUMP_MODELS:
            raise ValueError(f"experimento {kind} exige model em {list(JUMP_MODELS)}")
        if kind == "interp-bound" and v not in (None, "poisson") + JUMP_MODELS:
            raise ValueError("interp-bound aceita model ausente, 'poisson' ou um modelo de salto")
        if kind == "hawkes-limit":
            if v not in (None, "hawkes"):
                raise ValueError("hawkes-limit exige model 'hawkes'")
            v = "hawkes"
        if kind in _NO_MODEL and v is not None:
            raise ValueError(f"experimento {kind} não usa model")
        return v

    @field_validator("params")
    @classmethod
    def check_params(cls, v, info: ValidationInfo):
        model = info.data.get("model")
        if model is None or model == "poisson":
            if v:
                raise ValueError("params exige um model do catálogo")
            return v
        try:
            return validate_params(model, v)
        except LabError as e:
            raise ValueError(str(e)) from e


class OutputFile(BaseModel):
    name: str
    sha256: str


class Manifest(BaseModel):
    """Manifesto de uma execução: semente, hash da configuração e ambiente numérico"""
    schema_version: int = SCHEMA_VERSION
    kind: str
    model: Optional[str] = None
    seed: int
    config_sha256: str
    code_version: str
    python: str
    numpy: str
    scipy: str
    pandas: str
    platform: str
    caveat: str = Field(
        default="resultados idênticos bit a bit exigem o mesmo ambiente de ponto flutuante "
                "(versões acima e arquitetura)",
    )
    files: List[OutputFile] = Field(default_factory=list)


class RateFitRecord(BaseModel):
    """Ajuste de taxa gravado em ratefit.json, com a inclinação esperada e a faixa de aceitação"""
    schema_version: int = SCHEMA_VERSION
    statistic: str
    expected_slope: Optional[float] = None
    band: Optional[Tuple[float, float]] = None
    in_band: Optional[bool] = None
    fit: RateFit
