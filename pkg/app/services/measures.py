"""
Infraestrutura de números aleatórios, amostragem de medidas de Poisson marcadas
e as duas funções analíticas de cota (Ψ e a cota de Lambert-W para o máximo de
variáveis de Poisson)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import stats

from app.utils.exceptions import DomainError, ParameterError

logger = logging.getLogger(__name__)

_SEED_LIMIT = 2 ** 64
_INV_E = math.exp(-1.0)


class RngStream:
    """
    Fluxo aleatório reprodutível identificado por (master_seed, stream_id)

    Usa o gerador baseado em contador Philox semeado por SeedSequence; o mesmo
    par de identificadores produz sempre a mesma sequência de sorteios.
    Um fluxo pertence a um único worker por vez.
    """

    def __init__(self, master_seed: int, stream_id: int = 0, keys: Tuple[int, ...] = ()):
        for name, value in (("master_seed", master_seed), ("stream_id", stream_id)) + tuple(
            ("key", k) for k in keys
        ):
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) < _SEED_LIMIT:
                raise ParameterError(f"{name} deve ser inteiro em [0, 2^64): {value!r}")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.keys = tuple(int(k) for k in keys)
        sequence = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,) + self.keys)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def spawn(self, *keys: int) -> "RngStream":
        """Cria um fluxo filho independente identificado por chaves adicionais"""
        return RngStream(self.master_seed, self.stream_id, self.keys + tuple(keys))

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, keys={self.keys})"


@dataclass(frozen=True)
class MarkedPoissonSample:
    """Realização de uma medida de Poisson marcada em [0, T] x [0, z_max]"""
    T: float
    n_rate: float
    z_max: float
    times: np.ndarray = field(repr=False)
    marks: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.times.size)


def _check_positive(name: str, value: float):
    if not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} deve ser finito e positivo: {value!r}")


def sample_poisson_measure(rng: RngStream, T: float, n_rate: float, z_max: float) -> MarkedPoissonSample:
    """
    Amostra um processo de Poisson homogêneo de intensidade n_rate * z_max em
    [0, T], cada evento com marca uniforme independente em [0, z_max]
    """
    _check_positive("T", T)
    _check_positive("n_rate", n_rate)
    _check_positive("z_max", z_max)

    gen = rng.generator
    count = gen.poisson(n_rate * z_max * T)
    times = np.sort(gen.uniform(0.0, T, size=count))
    marks = gen.uniform(0.0, z_max, size=count)
    times.setflags(write=False)
    marks.setflags(write=False)
    return MarkedPoissonSample(T=float(T), n_rate=float(n_rate), z_max=float(z_max), times=times, marks=marks)


def psi_bound(n: int, x: float) -> float:
    """
    Ψ(n, x) = log(n e^{x/n}) / log(n x^{-1} log(n e^{x/n}))

    O argumento do logaritmo interno é 1 + n log(n) / x > 1, avaliado com log1p.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise DomainError(f"Ψ exige n inteiro: {n!r}")
    if n < 2:
        raise DomainError(f"Ψ exige n >= 2: {n!r}")
    if not np.isfinite(x) or x <= 0:
        raise DomainError(f"Ψ exige x > 0: {x!r}")
    n = int(n)
    return (math.log(n) + x / n) / math.log1p(n * math.log(n) / x)


def _lambert_initial_guess(z: float) -> float:
    if z < -0.25:
        # série no ponto de ramificação -1/e
        p = math.sqrt(max(2.0 * (math.e * z + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if z < 3.0:
        return math.log1p(z) * (1.0 - math.log1p(math.log1p(z)) / (2.0 + math.log1p(z)))
    lz = math.log(z)
    return lz - math.log(lz)


def lambert_w0(z: float) -> float:
    """
    Ramo principal da função W de Lambert (w e^w = z, w >= -1) por iteração de Halley

    Raises:
        DomainError: se z < -1/e
    """
    z = float(z)
    if not np.isfinite(z):
        raise DomainError(f"W exige argumento finito: {z!r}")
    if z < -_INV_E:
        # tolerância de arredondamento na fronteira
        if z < -_INV_E * (1.0 + 1e-15):
            raise DomainError(f"W0 definida apenas para z >= -1/e: {z!r}")
        return -1.0
    if z == 0.0:
        return 0.0
    if z == -_INV_E:
        return -1.0

    w = _lambert_initial_guess(z)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_next = w - step
        if w_next < -1.0:
            w_next = -1.0 + 0.5 * (w + 1.0)
        if abs(w_next - w) <= 4e-16 * (1.0 + abs(w_next)):
            w = w_next
            break
        w = w_next
    return w


def _poisson_max_argument(n: float, nu: float) -> Tuple[float, float]:
    if not np.isfinite(n) or n < 2:
        raise DomainError(f"cota do máximo exige n >= 2: {n!r}")
    if not np.isfinite(nu) or nu <= 0:
        raise DomainError(f"cota do máximo exige ν > 0: {nu!r}")
    head = math.log(n) - nu
    if head <= 0:
        raise DomainError(f"cota do máximo exige log(n) > ν: n={n}, ν={nu}")
    return head, head / (nu * math.e)


def poisson_max_bound(n: float, nu: float) -> float:
    """Cota log(n e^{-ν}) / W(log(n e^{-ν}) / (ν e)) para E[max de n Poisson(ν)]"""
    head, a = _poisson_max_argument(n, nu)
    return head / lambert_w0(a)


def poisson_max_bound_exp(n: float, nu: float) -> float:
    """Segunda forma fechada da mesma cota: ν e exp(W(log(n e^{-ν}) / (ν e)))"""
    _, a = _poisson_max_argument(n, nu)
    return nu * math.e * math.exp(lambert_w0(a))


def poisson_max_loglog_threshold(nu: float) -> float:
    """Menor n a partir do qual a forma log-log é aplicável: exp(e^{ν+1} + ν)"""
    exponent = math.exp(nu + 1.0) + nu
    if exponent > 700.0:
        return math.inf
    return math.exp(exponent)


def poisson_max_bound_loglog(n: float, nu: float) -> float:
    """
    Forma simplificada log(n e^{-ν}) / log(log(n e^{-ν}) / (ν e))

    Como W(a) <= log(a) para a >= e, este valor fica abaixo da cota de
    Lambert-W; a cota superior garantida pela desigualdade
    W(a) >= log(a) - log(log(a)) é poisson_max_bound_loglog_upper.
    """
    head, a = _poisson_max_argument(n, nu)
    if n < poisson_max_loglog_threshold(nu):
        raise DomainError(f"forma log-log exige n >= exp(e^(ν+1)+ν): n={n}, ν={nu}")
    return head / math.log(a)


def poisson_max_bound_loglog_upper(n: float, nu: float) -> float:
    """log(n e^{-ν}) / (log a - log log a), com a = log(n e^{-ν}) / (ν e) > e"""
    head, a = _poisson_max_argument(n, nu)
    if a <= math.e:
        raise DomainError(f"forma log-log exige a > e: a={a}")
    return head / (math.log(a) - math.log(math.log(a)))


def poisson_max_mean_exact(n: int, nu: float) -> float:
    """
    E[max de n variáveis Poisson(ν) independentes] = Σ_k (1 - F(k)^n)
    """
    if n < 1:
        raise ParameterError(f"n deve ser >= 1: {n!r}")
    _check_positive("nu", nu)
    upper = int(nu + 50.0 * math.sqrt(nu) + 50.0 + math.log(n))
    k = np.arange(upper + 1)
    log_cdf = stats.poisson.logcdf(k, nu)
    terms = -np.expm1(n * log_cdf)
    return float(np.sum(terms))


def sample_poisson_max(rng: RngStream, n: int, nu: float, replications: int) -> np.ndarray:
    """Amostras Monte Carlo de max_{i<=n} X_i com X_i ~ Poisson(ν)"""
    if n < 1 or replications < 1:
        raise ParameterError("n e replications devem ser >= 1")
    _check_positive("nu", nu)
    gen = rng.generator
    out = np.empty(replications, dtype=float)
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, replications, chunk):
        stop = min(replications, start + chunk)
        out[start:stop] = gen.poisson(nu, size=(stop - start, n)).max(axis=1)
    return out
