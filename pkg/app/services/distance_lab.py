"""
Substitutos empíricos das distâncias entre leis de caminhos e ajuste de taxas

Wasserstein-1 marginal exata por estatísticas de ordem, cotas inferiores por
funcionais lipschitzianos de posto finito, estatísticas de erro de
interpolação e regressão log-log com intervalo bootstrap.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from app.services.measures import RngStream
from app.services.paths import GridPath, Partition, Path, RcllPath, interpolate, stack_nodes, sup_distance
from app.utils.exceptions import DomainError, ParameterError, StatisticsError

logger = logging.getLogger(__name__)

_MAX_PIECES = 3


def marginal_w1(xs, ys) -> float:
    """
    W1 empírica entre duas amostras reais

    Tamanhos iguais: média de |x_(i) - y_(i)|; tamanhos distintos: integral do
    acoplamento de quantis.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ParameterError("W1 exige amostras não vazias")
    if xs.size == ys.size:
        return float(np.mean(np.abs(np.sort(xs) - np.sort(ys))))
    return float(stats.wasserstein_distance(xs, ys))


def ks_two_sample(xs, ys) -> Tuple[float, float]:
    """Estatística e p-valor do teste de Kolmogorov-Smirnov de duas amostras"""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ParameterError("teste KS exige amostras não vazias")
    result = stats.ks_2samp(xs, ys)
    return float(result.statistic), float(result.pvalue)


def variance_interval(samples, width: float = 3.0) -> Dict[str, float]:
    """Variância amostral com intervalo de ±width erros padrão (via quarto momento central)"""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise StatisticsError("variância exige ao menos duas amostras")
    centered = samples - samples.mean()
    var = float(np.var(samples, ddof=1))
    m4 = float(np.mean(centered ** 4))
    se = math.sqrt(max(m4 - var ** 2, 0.0) / samples.size)
    return {"variance": var, "se": se, "low": var - width * se, "high": var + width * se}


@dataclass(frozen=True)
class SamplePathEnsemble:
    """Conjunto de caminhos reduzidos aos nós de uma partição comum, forma (S, l+1, d)"""
    nodes: np.ndarray
    partition: Partition
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 2:
            nodes = nodes[:, :, None]
        if nodes.ndim != 3 or nodes.shape[0] == 0:
            raise ParameterError(f"conjunto de caminhos com forma inválida: {nodes.shape}")
        if nodes.shape[1] != self.partition.times.size:
            raise ParameterError(
                f"conjunto com {nodes.shape[1]} nós, partição com {self.partition.times.size}"
            )
        if not np.all(np.isfinite(nodes)):
            raise ParameterError("conjunto de caminhos com valores não finitos")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_paths(cls, paths: Sequence[Path], pi: Partition, **provenance) -> "SamplePathEnsemble":
        return cls(stack_nodes(paths, pi), pi, dict(provenance))

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def flat(self) -> np.ndarray:
        return self.nodes.reshape(self.size, -1)


def _check_pair(ens_a: SamplePathEnsemble, ens_b: SamplePathEnsemble, pi: Partition):
    for ens in (ens_a, ens_b):
        if ens.partition.times.shape != pi.times.shape or not np.allclose(ens.partition.times, pi.times,
                                                                          rtol=1e-12, atol=0.0):
            raise ParameterError("conjunto reduzido a uma partição diferente da pedida")
    if ens_a.nodes.shape[1:] != ens_b.nodes.shape[1:]:
        raise ParameterError("conjuntos com dimensões diferentes")


def _random_functional(rng: RngStream, dim: int, scale: float):
    gen = rng.generator
    pieces = int(gen.integers(1, _MAX_PIECES + 1))
    same_sign = bool(gen.random() < 0.5)
    weights = gen.exponential(1.0, size=(pieces, dim))
    # pesos esparsos concentram a massa em poucos nós
    weights *= gen.random((pieces, dim)) < max(0.05, 4.0 / dim)
    empty = weights.sum(axis=1) == 0
    if np.any(empty):
        weights[empty, gen.integers(0, dim, size=int(np.sum(empty)))] = 1.0
    if same_sign:
        signs = np.where(gen.random((pieces, 1)) < 0.5, -1.0, 1.0)
    else:
        signs = np.where(gen.random((pieces, dim)) < 0.5, -1.0, 1.0)
    slopes = signs * weights / weights.sum(axis=1, keepdims=True)
    offsets = gen.uniform(-scale, scale, size=pieces)
    return slopes, offsets


def finite_rank_gap(ens_a: SamplePathEnsemble, ens_b: SamplePathEnsemble, pi: Partition,
                    trials: int, rng: RngStream) -> float:
    """
    Cota inferior aleatória da distância de posto finito entre dois conjuntos

    Cada tentativa sorteia F(v) = max_j(⟨a_j, v⟩ + b_j) com ‖a_j‖₁ = 1, que é
    1-lipschitziana na norma do sup dos nós, e mede |E_a F - E_b F|. Cada
    tentativa usa seu próprio fluxo filho, então o resultado é não decrescente
    no número de tentativas.
    """
    if trials < 1:
        raise ParameterError(f"número de tentativas deve ser >= 1: {trials!r}")
    _check_pair(ens_a, ens_b, pi)
    flat_a, flat_b = ens_a.flat(), ens_b.flat()
    scale = max(float(np.mean(np.max(np.abs(flat_a), axis=1))),
                float(np.mean(np.max(np.abs(flat_b), axis=1))), 1e-12)
    best = 0.0
    for trial in range(trials):
        slopes, offsets = _random_functional(rng.spawn(trial), flat_a.shape[1], scale)
        value_a = np.max(flat_a @ slopes.T + offsets, axis=1).mean()
        value_b = np.max(flat_b @ slopes.T + offsets, axis=1).mean()
        best = max(best, abs(float(value_a - value_b)))
    return best


def finite_rank_envelope(ens_a: SamplePathEnsemble, ens_b: SamplePathEnsemble) -> float:
    """
    Cota superior grosseira de finite_rank_gap:
    ‖m_a - m_b‖ + E‖X - m_a‖ + E‖Y - m_b‖, com m_* os caminhos médios nos nós
    """
    flat_a, flat_b = ens_a.flat(), ens_b.flat()
    mean_a, mean_b = flat_a.mean(axis=0), flat_b.mean(axis=0)
    spread_a = np.max(np.abs(flat_a - mean_a), axis=1).mean()
    spread_b = np.max(np.abs(flat_b - mean_b), axis=1).mean()
    return float(np.max(np.abs(mean_a - mean_b)) + spread_a + spread_b)


def interp_errors(paths: Sequence[Path], pi: Partition) -> np.ndarray:
    """‖X - Ξ_π X‖_{∞,T} exato por caminho"""
    return np.array([sup_distance(p, interpolate(p, pi)) for p in paths])


def interp_error_stat(paths: Sequence[Path], pi: Partition) -> float:
    """Média sobre o conjunto de ‖X - Ξ_π X‖_{∞,T}"""
    if not paths:
        raise ParameterError("conjunto de caminhos vazio")
    return float(np.mean(interp_errors(paths, pi)))


def scaled_poisson_interp_error(n: int, rng: RngStream, T: float = 1.0) -> float:
    """
    ‖P̄_n - Ξ_n P̄_n‖ para P̄_n(t) = (N(nt) - nt)/√n na partição uniforme de n intervalos

    A deriva linear é reproduzida exatamente pela interpolação, então basta a
    contagem escalada N(nt)/√n.
    """
    if n < 1:
        raise ParameterError(f"n deve ser >= 1: {n!r}")
    gen = rng.generator
    count = gen.poisson(n * T)
    times = np.sort(gen.uniform(0.0, T, size=count))
    times = times[times > 0]
    path = RcllPath(0.0, times, np.arange(1, times.size + 1) / math.sqrt(n), T)
    return sup_distance(path, interpolate(path, Partition.uniform(T, n)))


def brownian_interp_error(n: int, rng: RngStream, reference_grid: int, T: float = 1.0) -> float:
    """
    ‖Ξ_n B - B‖ com B amostrado numa grade fina de reference_grid passos

    n deve dividir reference_grid para que os nós de π pertençam à grade fina.
    """
    if reference_grid % n != 0:
        raise ParameterError(f"n = {n} deve dividir a grade de referência {reference_grid}")
    gen = rng.generator
    steps = gen.standard_normal(reference_grid) * math.sqrt(T / reference_grid)
    brownian = GridPath.uniform(T, np.concatenate([[0.0], np.cumsum(steps)]))
    return sup_distance(brownian, interpolate(brownian, Partition.uniform(T, n)))


class RateFit(BaseModel):
    """Ajuste log-log de uma estatística média contra n"""
    slope: float = Field(..., description="Inclinação em eixos log-log")
    intercept: float = Field(..., description="Intercepto em eixos log-log")
    r2: float = Field(..., description="Coeficiente de determinação")
    ci_low: float = Field(..., description="Limite inferior do intervalo bootstrap de 90%")
    ci_high: float = Field(..., description="Limite superior do intervalo bootstrap de 90%")
    points: List[Tuple[float, float]] = Field(default_factory=list, description="Pares (log n, log média)")


def _regress(log_n: np.ndarray, log_mean: np.ndarray) -> Tuple[float, float, float]:
    result = stats.linregress(log_n, log_mean)
    r2 = float(result.rvalue ** 2) if np.ptp(log_mean) > 0 else 1.0
    return float(result.slope), float(result.intercept), r2


def fit_rate(statistics: Mapping[float, object], rng: RngStream, bootstrap: int = 0) -> RateFit:
    """
    Regressão por mínimos quadrados de log(média) contra log(n)

    Args:
        statistics: n ↦ média (escalar) ou n ↦ replicações (array)
        rng: fluxo para o bootstrap
        bootstrap: número de reamostragens das replicações (0 desliga)

    Raises:
        ParameterError: com menos de 4 valores distintos de n
        DomainError: se alguma média não é positiva
    """
    ns = sorted(float(n) for n in statistics)
    if len(set(ns)) < 4:
        raise ParameterError(f"ajuste de taxa exige ao menos 4 valores de n, recebido {len(ns)}")
    samples = [np.atleast_1d(np.asarray(statistics[key], dtype=float)) for key in sorted(statistics)]
    means = np.array([s.mean() for s in samples])
    if not np.all(np.isfinite(means)) or np.any(means <= 0):
        raise DomainError(f"médias devem ser positivas para o ajuste log-log: {means.tolist()}")
    log_n = np.log(np.array(ns))
    log_mean = np.log(means)
    slope, intercept, r2 = _regress(log_n, log_mean)

    ci_low, ci_high = slope, slope
    if bootstrap > 0 and any(s.size > 1 for s in samples):
        gen = rng.generator
        slopes = np.empty(bootstrap)
        for b in range(bootstrap):
            resampled = np.array([s[gen.integers(0, s.size, size=s.size)].mean() for s in samples])
            if np.any(resampled <= 0):
                slopes[b] = np.nan
                continue
            slopes[b] = _regress(log_n, np.log(resampled))[0]
        slopes = slopes[np.isfinite(slopes)]
        if slopes.size:
            ci_low, ci_high = (float(q) for q in np.quantile(slopes, [0.05, 0.95]))
    ci_low, ci_high = min(ci_low, slope), max(ci_high, slope)

    return RateFit(
        slope=slope, intercept=intercept, r2=r2, ci_low=ci_low, ci_high=ci_high,
        points=[(float(x), float(y)) for x, y in zip(log_n, log_mean)],
    )
