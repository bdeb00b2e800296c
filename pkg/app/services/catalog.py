"""
Catálogo dos modelos embutidos e seus esquemas de parâmetros

Telegráfico, M/M/∞, M/M/1 (processo livre), SIR e Moran como ModelSpec, mais a
entrada de Hawkes. As taxas são dadas na forma fluida r_k(t, x); o simulador
usa a intensidade n · r_k.
"""

import logging
from typing import Dict, List, Mapping, Optional, Union

import numpy as np
from pydantic import BaseModel, Field

from app.config import settings
from app.services.hawkes import HawkesKernel
from app.services.models import Channel, ModelSpec
from app.utils.exceptions import ParameterError

logger = logging.getLogger(__name__)

ParamValue = Union[float, List[float]]


class ParameterSchema(BaseModel):
    """Parâmetro de um modelo do catálogo"""
    name: str
    default: ParamValue
    description: str
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    exclusive_minimum: bool = False


class CatalogEntry(BaseModel):
    """Entrada do catálogo: identificador, título, procedência e parâmetros"""
    model_id: str
    title: str
    provenance: str
    parameters: List[ParameterSchema] = Field(default_factory=list)

    def defaults(self) -> Dict[str, ParamValue]:
        return {p.name: p.default for p in self.parameters}


def _positive(name: str, default: float, description: str) -> ParameterSchema:
    return ParameterSchema(name=name, default=default, description=description, minimum=0.0, exclusive_minimum=True)


def _unit(name: str, default: float, description: str) -> ParameterSchema:
    return ParameterSchema(name=name, default=default, description=description, minimum=0.0, maximum=1.0)


CATALOG: List[CatalogEntry] = [
    CatalogEntry(
        model_id="telegraph",
        title="Processo telegráfico (n cópias de uma cadeia de dois estados)",
        provenance="processos telegráficos: canais σ_0(1-x) e σ_1 x",
        parameters=[
            _positive("sigma0", 1.0, "σ_0: taxa de 0 para 1"),
            _positive("sigma1", 2.0, "σ_1: taxa de 1 para 0"),
            _unit("x0", 0.5, "Λ(0): fração inicial no estado 1"),
        ],
    ),
    CatalogEntry(
        model_id="mm-infty",
        title="Fila M/M/∞",
        provenance="fila com número ilimitado de servidores: canais λ e μx",
        parameters=[
            _positive("lam", 2.0, "λ: taxa de chegada"),
            _positive("mu", 1.0, "μ: taxa de serviço por cliente"),
            ParameterSchema(name="x0", default=1.0, description="Λ(0): ocupação inicial escalada", minimum=0.0),
        ],
    ),
    CatalogEntry(
        model_id="mm1",
        title="Fila M/M/1 (processo livre, refletido por Sko)",
        provenance="servidor único sem férias: canais λ e μ, reflexão de Skorokhod a posteriori",
        parameters=[
            _positive("lam", 1.0, "λ: taxa de chegada"),
            _positive("mu", 1.0, "μ: taxa de serviço"),
            ParameterSchema(name="x0", default=0.0, description="Λ(0): fila inicial escalada", minimum=0.0),
        ],
    ),
    CatalogEntry(
        model_id="sir",
        title="Epidemia SIR",
        provenance="modelo SIR: s' = -λ s i, canais λ s i e γ i",
        parameters=[
            _positive("lam", 2.0, "λ: taxa de infecção"),
            _positive("gamma", 1.0, "γ: taxa de recuperação"),
            _unit("s0", 0.9, "s(0): fração suscetível inicial"),
            _unit("i0", 0.1, "i(0): fração infectada inicial"),
        ],
    ),
    CatalogEntry(
        model_id="moran",
        title="Modelo de Moran com mutação",
        provenance="cada indivíduo carrega um gene sujeito a mutação: canais x(1-x), x(1-x), ν_2(1-x), ν_1 x",
        parameters=[
            _positive("nu1", 1.0, "ν_1: mutação do alelo 1 para o 2"),
            _positive("nu2", 1.0, "ν_2: mutação do alelo 2 para o 1"),
            _unit("x0", 0.3, "Λ(0): frequência inicial do alelo 1"),
        ],
    ),
    CatalogEntry(
        model_id="hawkes",
        title="Processo de Hawkes com núcleo soma de exponenciais",
        provenance="processo autoexcitante com intensidade μ + Σ φ(t - s_i), κ < 1",
        parameters=[
            _positive("mu", 1.0, "μ: intensidade de base"),
            ParameterSchema(name="a", default=[0.5], description="a_j: amplitudes do núcleo", minimum=0.0),
            ParameterSchema(name="b", default=[1.0], description="b_j: taxas de decaimento do núcleo",
                            minimum=0.0, exclusive_minimum=True),
        ],
    ),
]


def list_models() -> List[CatalogEntry]:
    """Catálogo com os cinco modelos de salto e o de Hawkes"""
    return list(CATALOG)


def get_entry(model_id: str) -> CatalogEntry:
    for entry in CATALOG:
        if entry.model_id == model_id:
            return entry
    raise ParameterError(f"modelo desconhecido: {model_id!r} (disponíveis: {[e.model_id for e in CATALOG]})")


def _check_value(schema: ParameterSchema, value: float):
    if not np.isfinite(value):
        raise ParameterError(f"parâmetro {schema.name} não finito: {value!r}")
    if schema.minimum is not None:
        if value < schema.minimum or (schema.exclusive_minimum and value == schema.minimum):
            op = ">" if schema.exclusive_minimum else ">="
            raise ParameterError(f"parâmetro {schema.name} deve ser {op} {schema.minimum}: {value!r}")
    if schema.maximum is not None and value > schema.maximum:
        raise ParameterError(f"parâmetro {schema.name} deve ser <= {schema.maximum}: {value!r}")


def validate_params(model_id: str, params: Optional[Mapping[str, ParamValue]] = None) -> Dict[str, ParamValue]:
    """
    Completa os parâmetros com os padrões e valida domínios

    Raises:
        ParameterError: parâmetro desconhecido ou fora do domínio
        StabilityError: núcleo de Hawkes com κ >= 1
    """
    entry = get_entry(model_id)
    merged = entry.defaults()
    for name, value in (params or {}).items():
        if name not in merged:
            raise ParameterError(f"parâmetro desconhecido para {model_id}: {name!r}")
        merged[name] = value
    schemas = {p.name: p for p in entry.parameters}
    for name, value in merged.items():
        if isinstance(schemas[name].default, list):
            values = [float(v) for v in np.atleast_1d(value)]
            for v in values:
                _check_value(schemas[name], v)
            merged[name] = values
        else:
            if isinstance(value, (list, tuple)):
                raise ParameterError(f"parâmetro {name} deve ser escalar")
            merged[name] = float(value)
            _check_value(schemas[name], merged[name])

    if model_id == "sir" and merged["s0"] + merged["i0"] > 1.0:
        raise ParameterError("SIR exige s(0) + i(0) <= 1")
    if model_id == "hawkes":
        if len(merged["a"]) != len(merged["b"]):
            raise ParameterError("núcleo de Hawkes exige listas a e b de mesmo tamanho")
        HawkesKernel(np.array(merged["a"]), np.array(merged["b"])).check_stable()
    return merged


def _telegraph(p: Dict[str, float]) -> ModelSpec:
    s0, s1, x0 = p["sigma0"], p["sigma1"], p["x0"]
    pi1 = s0 / (s0 + s1)
    channels = (
        Channel("0->1", np.array([1.0]), lambda t, x: s0 * (1.0 - x[..., 0]),
                lambda t, x: np.array([-s0]), bound=s0, lipschitz=s0, alpha=0.0),
        Channel("1->0", np.array([-1.0]), lambda t, x: s1 * x[..., 0],
                lambda t, x: np.array([s1]), bound=s1, lipschitz=s1, alpha=0.0),
    )

    def closed_form(times):
        return (pi1 + (x0 - pi1) * np.exp(-(s0 + s1) * np.asarray(times)))[:, None]

    return ModelSpec("telegraph", 1, channels, np.array([x0]), lower=0.0, upper=1.0, params=p,
                     provenance=get_entry("telegraph").provenance, fluid_closed_form=closed_form)


def _mm_infty(p: Dict[str, float]) -> ModelSpec:
    lam, mu, x0 = p["lam"], p["mu"], p["x0"]
    cap = settings.MMINF_STATE_CAP_FACTOR * max(x0, lam / mu, 1.0)
    channels = (
        Channel("arrival", np.array([1.0]), lambda t, x: np.full(np.shape(x)[:-1], lam),
                lambda t, x: np.array([0.0]), bound=lam, lipschitz=0.0),
        Channel("departure", np.array([-1.0]), lambda t, x: mu * x[..., 0],
                lambda t, x: np.array([mu]), bound=mu * cap, lipschitz=mu),
    )

    def closed_form(times):
        return (lam / mu + (x0 - lam / mu) * np.exp(-mu * np.asarray(times)))[:, None]

    return ModelSpec("mm-infty", 1, channels, np.array([x0]), lower=0.0, upper=cap, params=p,
                     provenance=get_entry("mm-infty").provenance, fluid_closed_form=closed_form,
                     state_cap=cap)


def _mm1(p: Dict[str, float]) -> ModelSpec:
    lam, mu, x0 = p["lam"], p["mu"], p["x0"]
    channels = (
        Channel("arrival", np.array([1.0]), lambda t, x: np.full(np.shape(x)[:-1], lam),
                lambda t, x: np.array([0.0]), bound=lam, lipschitz=0.0),
        Channel("service", np.array([-1.0]), lambda t, x: np.full(np.shape(x)[:-1], mu),
                lambda t, x: np.array([0.0]), bound=mu, lipschitz=0.0),
    )

    def closed_form(times):
        return (x0 + (lam - mu) * np.asarray(times))[:, None]

    return ModelSpec("mm1", 1, channels, np.array([x0]), lower=-np.inf, upper=np.inf, params=p,
                     provenance=get_entry("mm1").provenance, fluid_closed_form=closed_form)


def _sir(p: Dict[str, float]) -> ModelSpec:
    lam, gamma = p["lam"], p["gamma"]
    channels = (
        Channel("infection", np.array([-1.0, 1.0]), lambda t, x: lam * x[..., 0] * x[..., 1],
                lambda t, x: lam * np.array([x[1], x[0]]), bound=lam / 4.0, lipschitz=lam, linear=False,
                remainder=lambda t, y, x: lam * (y[..., 0] - x[..., 0]) * (y[..., 1] - x[..., 1])),
        Channel("recovery", np.array([0.0, -1.0]), lambda t, x: gamma * x[..., 1],
                lambda t, x: np.array([0.0, gamma]), bound=gamma, lipschitz=gamma),
    )
    return ModelSpec("sir", 2, channels, np.array([p["s0"], p["i0"]]), lower=0.0, upper=1.0, params=p,
                     provenance=get_entry("sir").provenance)


def _moran(p: Dict[str, float]) -> ModelSpec:
    nu1, nu2, x0 = p["nu1"], p["nu2"], p["x0"]

    def selection(t, x):
        return x[..., 0] * (1.0 - x[..., 0])

    def selection_gradient(t, x):
        return np.array([1.0 - 2.0 * x[0]])

    def selection_remainder(t, y, x):
        return -(y[..., 0] - x[..., 0]) ** 2

    channels = (
        Channel("birth", np.array([1.0]), selection, selection_gradient, bound=0.25, lipschitz=1.0,
                alpha=-1.0, linear=False, remainder=selection_remainder),
        Channel("death", np.array([-1.0]), selection, selection_gradient, bound=0.25, lipschitz=1.0,
                alpha=-1.0, linear=False, remainder=selection_remainder),
        Channel("mutation 2->1", np.array([1.0]), lambda t, x: nu2 * (1.0 - x[..., 0]),
                lambda t, x: np.array([-nu2]), bound=nu2, lipschitz=nu2),
        Channel("mutation 1->2", np.array([-1.0]), lambda t, x: nu1 * x[..., 0],
                lambda t, x: np.array([nu1]), bound=nu1, lipschitz=nu1),
    )
    return ModelSpec("moran", 1, channels, np.array([x0]), lower=0.0, upper=1.0, params=p,
                     provenance=get_entry("moran").provenance)


_BUILDERS = {
    "telegraph": _telegraph,
    "mm-infty": _mm_infty,
    "mm1": _mm1,
    "sir": _sir,
    "moran": _moran,
}


def build_model(model_id: str, params: Optional[Mapping[str, ParamValue]] = None) -> ModelSpec:
    """Constrói o ModelSpec de um modelo de salto do catálogo"""
    if model_id not in _BUILDERS:
        raise ParameterError(f"{model_id!r} não é um modelo de salto (disponíveis: {sorted(_BUILDERS)})")
    return _BUILDERS[model_id](validate_params(model_id, params))


def build_kernel(params: Optional[Mapping[str, ParamValue]] = None):
    """(μ, núcleo) do processo de Hawkes a partir dos parâmetros do catálogo"""
    merged = validate_params("hawkes", params)
    return float(merged["mu"]), HawkesKernel(np.array(merged["a"]), np.array(merged["b"]))


def builtin_specs() -> Dict[str, ModelSpec]:
    """Os cinco modelos de salto com parâmetros padrão"""
    return {model_id: build_model(model_id) for model_id in _BUILDERS}
