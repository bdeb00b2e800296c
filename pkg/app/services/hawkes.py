"""
Processos de Hawkes com núcleo soma de exponenciais

Simulação por afinamento de Ogata com recursão de estado O(#exponenciais) por
evento, álgebra do núcleo (κ, Φ, φ^(k), ψ), processos escalados Ñ, W̄, X̄, a
identidade de representação X̄ = W̄ + ∫ nψ(ns) W̄(t-s) ds e os diagnósticos do
limite de difusão.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import cumulative_trapezoid
from scipy.signal import fftconvolve

from app.config import settings
from app.services.distance_lab import marginal_w1, variance_interval
from app.services.measures import RngStream
from app.services.paths import GridPath, RcllPath
from app.utils.exceptions import ParameterError, StabilityError, StatisticsError

logger = logging.getLogger(__name__)

_PSI_SERIES_TOL = 1e-8
_DRAW_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class HawkesKernel:
    """
    Núcleo φ(t) = Σ_j a_j e^{-b_j t}, a_j >= 0, b_j > 0

    Taxas b_j repetidas são fundidas na construção.
    """
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise ParameterError("núcleo exige listas a e b não vazias de mesmo tamanho")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ParameterError("núcleo com coeficientes não finitos")
        if np.any(a < 0):
            raise ParameterError(f"coeficientes a_j devem ser >= 0: {a.tolist()}")
        if np.any(b <= 0):
            raise ParameterError(f"taxas b_j devem ser > 0: {b.tolist()}")
        rates, inverse = np.unique(b, return_inverse=True)
        weights = np.zeros(rates.size)
        np.add.at(weights, inverse, a)
        for name, value in (("a", weights), ("b", rates)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def exponential(cls, a: float, b: float) -> "HawkesKernel":
        return cls(np.array([a]), np.array([b]))

    @property
    def kappa(self) -> float:
        """κ = ∫_0^∞ φ = Σ a_j / b_j"""
        return float(np.sum(self.a / self.b))

    @property
    def sup_phi(self) -> float:
        return float(np.sum(self.a))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.a)

    def check_stable(self):
        if self.kappa >= 1.0:
            raise StabilityError(f"processo de Hawkes instável: κ = {self.kappa:.6g} >= 1")

    def stationary_rate(self, mu: float) -> float:
        """ρ = μ / (1 - κ)"""
        self.check_stable()
        return mu / (1.0 - self.kappa)

    def to_dict(self) -> Dict[str, List[float]]:
        return {"a": self.a.tolist(), "b": self.b.tolist()}


def phi(kernel: HawkesKernel, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.sum(kernel.a * np.exp(-np.multiply.outer(t, kernel.b)), axis=-1)


def Phi(kernel: HawkesKernel, t) -> np.ndarray:
    """Φ(t) = ∫_0^t φ = Σ (a_j/b_j)(1 - e^{-b_j t})"""
    t = np.asarray(t, dtype=float)
    return np.sum(kernel.a / kernel.b * -np.expm1(-np.multiply.outer(t, kernel.b)), axis=-1)


def _psi_modes(kernel: HawkesKernel):
    # ψ(t) = aᵀ exp(Q t) 1 com Q = 1 aᵀ - diag(b); autovalores reais e negativos se κ < 1
    kernel.check_stable()
    J = kernel.a.size
    Q = np.outer(np.ones(J), kernel.a) - np.diag(kernel.b)
    eigenvalues, vectors = np.linalg.eig(Q)
    left = kernel.a @ vectors
    right = np.linalg.solve(vectors, np.ones(J))
    return np.real(eigenvalues), np.real(left * right)


def psi_kernel(kernel: HawkesKernel):
    """
    ψ = Σ_{k>=1} φ^(k) em forma fechada para somas de exponenciais

    Para uma única exponencial, ψ(t) = a e^{-(b-a)t}.

    Returns:
        Função vetorizada t ↦ ψ(t)

    Raises:
        StabilityError: se κ >= 1
    """
    if kernel.is_zero:
        kernel.check_stable()
        return lambda t: np.zeros_like(np.asarray(t, dtype=float))
    rates, weights = _psi_modes(kernel)

    def psi(t):
        t = np.asarray(t, dtype=float)
        return np.sum(weights * np.exp(np.multiply.outer(t, rates)), axis=-1)

    return psi


def psi_tail(kernel: HawkesKernel, x: float) -> float:
    """∫_x^∞ ψ(t) dt em forma fechada"""
    if x < 0:
        raise ParameterError(f"x deve ser >= 0: {x!r}")
    if kernel.is_zero:
        return 0.0
    rates, weights = _psi_modes(kernel)
    return float(np.sum(weights * np.exp(rates * x) / -rates))


def trapezoid_convolution(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """(f * g)(t_j) = ∫_0^{t_j} f(t_j - s) g(s) ds pela regra do trapézio numa grade uniforme"""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    size = f.size
    full = fftconvolve(f, g)[:size]
    correction = 0.5 * (f * g[0] + f[0] * g)
    out = h * (full - correction)
    out[0] = 0.0
    return out


def series_truncation(kappa: float, tol: float = _PSI_SERIES_TOL) -> int:
    """Menor K com κ^{K+1} / (1 - κ) <= tol"""
    if kappa >= 1.0:
        raise StabilityError(f"série de ψ diverge: κ = {kappa:.6g} >= 1")
    if kappa <= 0.0:
        return 1
    K = math.ceil(math.log(tol * (1.0 - kappa)) / math.log(kappa)) - 1
    return max(K, 1)


def phi_power(kernel: HawkesKernel, k: int, times: np.ndarray) -> np.ndarray:
    """φ^(k) (k-ésima autoconvolução) por convolução de trapézio numa grade uniforme"""
    if k < 1:
        raise ParameterError(f"ordem de convolução deve ser >= 1: {k!r}")
    times = np.asarray(times, dtype=float)
    h = times[1] - times[0]
    base = phi(kernel, times)
    out = base
    for _ in range(k - 1):
        out = trapezoid_convolution(base, out, h)
    return out


def psi_series(kernel: HawkesKernel, times: np.ndarray, K: Optional[int] = None) -> np.ndarray:
    """Série Σ_{k<=K} φ^(k) na grade, com K escolhido pela cota de cauda κ^{K+1}/(1-κ) <= 1e-8"""
    times = np.asarray(times, dtype=float)
    K = K or series_truncation(kernel.kappa)
    h = times[1] - times[0]
    base = phi(kernel, times)
    term = base
    total = base.copy()
    for _ in range(K - 1):
        term = trapezoid_convolution(base, term, h)
        total += term
    return total


def simulate_hawkes(mu: float, kernel: HawkesKernel, horizon: float, rng: RngStream,
                    return_intensity: bool = False):
    """
    Simulação exata por afinamento de Ogata em [0, horizon]

    A intensidade μ + Σ_j a_j S_j(t), com S_j(t) = Σ_{s_i<t} e^{-b_j(t-s_i)}, é não
    crescente entre eventos, então seu valor logo após o tempo corrente domina o
    próximo trecho.

    Returns:
        Tempos dos eventos, e (se pedido) a intensidade λ(s_i-) em cada evento

    Raises:
        StabilityError: se κ >= 1
    """
    if not np.isfinite(mu) or mu <= 0:
        raise ParameterError(f"μ deve ser positivo: {mu!r}")
    if not np.isfinite(horizon) or horizon <= 0:
        raise ParameterError(f"horizonte deve ser positivo: {horizon!r}")
    kernel.check_stable()

    gen = rng.generator
    a = kernel.a.tolist()
    b = kernel.b.tolist()
    J = len(a)
    state = [0.0] * J
    events: List[float] = []
    intensities: List[float] = []
    exps = gen.standard_exponential(_DRAW_CHUNK)
    unis = gen.random(_DRAW_CHUNK)
    cursor = 0
    t = 0.0
    while True:
        if cursor == _DRAW_CHUNK:
            exps = gen.standard_exponential(_DRAW_CHUNK)
            unis = gen.random(_DRAW_CHUNK)
            cursor = 0
        bound = mu + sum(a[j] * state[j] for j in range(J))
        wait = exps[cursor] / bound
        u = unis[cursor]
        cursor += 1
        t += wait
        if t > horizon:
            break
        for j in range(J):
            state[j] *= math.exp(-b[j] * wait)
        intensity = mu + sum(a[j] * state[j] for j in range(J))
        if u * bound <= intensity:
            events.append(t)
            intensities.append(intensity)
            for j in range(J):
                state[j] += 1.0

    times = np.array(events, dtype=float)
    if return_intensity:
        return times, np.array(intensities, dtype=float)
    return times


def brute_force_intensity(mu: float, kernel: HawkesKernel, events: np.ndarray) -> np.ndarray:
    """λ(s_i-) = μ + Σ_{k<i} φ(s_i - s_k), em O(N²)"""
    events = np.asarray(events, dtype=float)
    out = np.full(events.size, float(mu))
    for i in range(1, events.size):
        out[i] += float(np.sum(phi(kernel, events[i] - events[:i])))
    return out


@dataclass(frozen=True)
class HawkesRun:
    """Uma trajetória de Hawkes em [0, nT] e os parâmetros que a geraram"""
    mu: float
    kernel: HawkesKernel
    n: int
    T: float
    events: np.ndarray = field(repr=False)

    @property
    def horizon(self) -> float:
        return self.n * self.T

    @property
    def rho(self) -> float:
        return self.kernel.stationary_rate(self.mu)


def run_hawkes(mu: float, kernel: HawkesKernel, n: int, T: float, rng: RngStream) -> HawkesRun:
    """Simula N em [0, nT] para a escala n"""
    if n < 1:
        raise ParameterError(f"escala n deve ser >= 1: {n!r}")
    events = simulate_hawkes(mu, kernel, n * T, rng)
    return HawkesRun(mu=float(mu), kernel=kernel, n=int(n), T=float(T), events=events)


def events_to_csv(events: np.ndarray, filename: str):
    """Exporta os tempos de evento numa coluna `t`, com precisão completa"""
    events = np.asarray(events, dtype=float).reshape(-1)
    pd.DataFrame({"t": events}).to_csv(filename, index=False, float_format="%.17g", lineterminator="\n")


def events_from_csv(filename: str) -> np.ndarray:
    """Lê tempos gravados por events_to_csv; exige ordem estritamente crescente"""
    frame = pd.read_csv(filename)
    if list(frame.columns) != ["t"]:
        raise ParameterError(f"esperada uma única coluna t em {filename}, encontrado {list(frame.columns)}")
    events = frame["t"].to_numpy(dtype=float)
    if np.any(np.diff(events) <= 0):
        raise ParameterError(f"tempos de evento fora de ordem em {filename}")
    return events


def _event_states(events: np.ndarray, b: np.ndarray) -> np.ndarray:
    # S_j(s_i+) = Σ_{k<=i} e^{-b_j (s_i - s_k)}
    states = np.empty((events.size, b.size))
    current = np.zeros(b.size)
    previous = 0.0
    for i, s in enumerate(events):
        current = current * np.exp(-b * (s - previous)) + 1.0
        states[i] = current
        previous = s
    return states


def compensator_at(run: HawkesRun, u) -> np.ndarray:
    """
    Compensador C(u) = μu + Σ_{s_i<=u} Φ(u - s_i), exato, para u ordenado em [0, nT]
    """
    u = np.asarray(u, dtype=float)
    kernel = run.kernel
    counts = np.searchsorted(run.events, u, side="right")
    out = run.mu * u
    if run.events.size == 0 or kernel.is_zero:
        return out
    states = _event_states(run.events, kernel.b)
    last = counts - 1
    has_event = last >= 0
    decayed = np.zeros((u.size, kernel.b.size))
    idx = last[has_event]
    lag = u[has_event] - run.events[idx]
    decayed[has_event] = states[idx] * np.exp(-np.multiply.outer(lag, kernel.b))
    out = out + np.sum(kernel.a / kernel.b * (counts[:, None] - decayed), axis=1)
    return out


def mean_count(mu: float, kernel: HawkesKernel, u: np.ndarray) -> np.ndarray:
    """
    E N(u) = μu + μ ∫_0^u (u - s) ψ(s) ds por trapézio duplo na grade u (uniforme, u_0 = 0)
    """
    u = np.asarray(u, dtype=float)
    psi = psi_kernel(kernel)(u)
    once = cumulative_trapezoid(psi, u, initial=0.0)
    twice = cumulative_trapezoid(once, u, initial=0.0)
    return mu * u + mu * twice


def mean_count_exact(mu: float, kernel: HawkesKernel, u) -> np.ndarray:
    """E N(u) em forma fechada: μu + μ Σ_i w_i (e^{λ_i u} - 1 - λ_i u) / λ_i²"""
    u = np.asarray(u, dtype=float)
    if kernel.is_zero:
        return mu * u
    rates, weights = _psi_modes(kernel)
    lu = np.multiply.outer(u, rates)
    return mu * u + mu * np.sum(weights * (np.expm1(lu) - lu) / rates ** 2, axis=-1)


@dataclass(frozen=True)
class ScaledHawkesPaths:
    """Ñ(t) = N(nt)/n exato; W̄ e X̄ nos nós da grade de [0, T]"""
    ntilde: RcllPath
    wbar: GridPath
    xbar: GridPath


def scaled_paths(run: HawkesRun, G: Optional[int] = None) -> ScaledHawkesPaths:
    """
    Processos escalados na grade uniforme de [0, T] com G passos

    W̄(t) = n^{-1/2}(N(nt) - C(nt)) com o compensador em forma fechada;
    X̄(t) = n^{-1/2}(N(nt) - E N(nt)) com a média por quadratura de ψ.
    """
    G = G or settings.HAWKES_GRID_SIZE
    times = np.linspace(0.0, run.T, G + 1)
    u = run.n * times
    counts = np.searchsorted(run.events, u, side="right").astype(float)
    scale = 1.0 / math.sqrt(run.n)
    wbar = scale * (counts - compensator_at(run, u))
    xbar = scale * (counts - mean_count(run.mu, run.kernel, u))
    jumps = run.events / run.n
    ntilde = RcllPath(0.0, jumps, np.arange(1, jumps.size + 1) / run.n, run.T)
    return ScaledHawkesPaths(ntilde=ntilde, wbar=GridPath(times, wbar), xbar=GridPath(times, xbar))


def representation_residual(run: HawkesRun, G: Optional[int] = None,
                            paths: Optional[ScaledHawkesPaths] = None) -> float:
    """
    sup_t |X̄(t) - W̄(t) - ∫_0^t nψ(ns) W̄(t-s) ds| na grade

    A identidade vale trajetória a trajetória; o resíduo mede só a quadratura.
    """
    paths = paths or scaled_paths(run, G)
    times = paths.wbar.times
    h = times[1] - times[0]
    kernel_values = run.n * psi_kernel(run.kernel)(run.n * times)
    wbar = paths.wbar.values[:, 0]
    convolution = trapezoid_convolution(kernel_values, wbar, h)
    return float(np.max(np.abs(paths.xbar.values[:, 0] - wbar - convolution)))


def lln_sup_error(run: HawkesRun) -> float:
    """sup_{v<=T} |Ñ(v) - ρv|, exato: extremos nos eventos (dos dois lados) e nas pontas"""
    rho = run.rho
    v = run.events / run.n
    right = np.arange(1, v.size + 1) / run.n - rho * v
    left = right - 1.0 / run.n
    candidates = [0.0, abs(v.size / run.n - rho * run.T)]
    if v.size:
        candidates += [float(np.max(np.abs(right))), float(np.max(np.abs(left)))]
    return max(candidates)


def window_rate(events: np.ndarray, start: float, stop: float) -> float:
    """Eventos por unidade de tempo em (start, stop]"""
    if stop <= start:
        raise ParameterError("janela vazia")
    count = np.searchsorted(events, stop, side="right") - np.searchsorted(events, start, side="right")
    return float(count) / (stop - start)


def time_change_residuals(run: HawkesRun) -> np.ndarray:
    """Incrementos C(s_{i+1}) - C(s_i) do compensador; Exp(1) independentes sob o modelo"""
    if run.events.size < 2:
        raise StatisticsError("eventos insuficientes para o teste de mudança de tempo")
    values = compensator_at(run, run.events)
    return np.diff(np.concatenate([[0.0], values]))


def hawkes_limit_check(runs: Sequence[HawkesRun], rng: RngStream, epsilon: float = 0.5,
                       marginal_times: Sequence[float] = (0.25, 0.5, 0.75, 1.0)) -> Dict[str, object]:
    """
    Diagnósticos do limite de difusão para várias trajetórias na mesma escala n

    Compara W̄(t_j) com N(0, ρ t_j) e X̄(t_j) com a gaussiana centrada de
    variância ρ t_j/(1-κ)², discrimina as duas escalas candidatas da variância de
    X̄(T) e avalia a condição de cauda ∫_{n^ε}^∞ ψ contra n^{-1/2}.

    Raises:
        StatisticsError: com menos de MIN_HAWKES_REPLICATIONS trajetórias
    """
    if len(runs) < settings.MIN_HAWKES_REPLICATIONS:
        raise StatisticsError(
            f"diagnóstico de Hawkes exige ao menos {settings.MIN_HAWKES_REPLICATIONS} replicações, "
            f"recebido {len(runs)}"
        )
    first = runs[0]
    n, T, mu, kernel = first.n, first.T, first.mu, first.kernel
    if any(r.n != n or r.T != T for r in runs):
        raise ParameterError("todas as trajetórias devem ter a mesma escala e horizonte")
    rho = kernel.stationary_rate(mu)
    kappa = kernel.kappa
    gen = rng.generator
    times = [t for t in marginal_times if 0 < t <= T]

    u = n * np.asarray(times)
    scale = 1.0 / math.sqrt(n)
    mean_at = mean_count_exact(mu, kernel, u)
    w_samples = np.empty((len(runs), len(times)))
    x_samples = np.empty((len(runs), len(times)))
    for i, run in enumerate(runs):
        counts = np.searchsorted(run.events, u, side="right")
        w_samples[i] = scale * (counts - compensator_at(run, u))
        x_samples[i] = scale * (counts - mean_at)

    records = []
    for j, t in enumerate(times):
        w_ref = gen.normal(0.0, math.sqrt(rho * t), size=len(runs))
        x_ref = gen.normal(0.0, math.sqrt(rho * t) / (1.0 - kappa), size=len(runs))
        records.append({
            "t": float(t),
            "w1_wbar": marginal_w1(w_samples[:, j], w_ref),
            "w1_xbar": marginal_w1(x_samples[:, j], x_ref),
            "var_wbar": float(np.var(w_samples[:, j], ddof=1)),
            "var_xbar": float(np.var(x_samples[:, j], ddof=1)),
        })

    last = x_samples[:, -1]
    interval = variance_interval(last)
    candidates = {
        "rho_over_one_minus_kappa_squared": rho * times[-1] / (1.0 - kappa) ** 2,
        "rho_over_sqrt_one_minus_kappa": rho * times[-1] / math.sqrt(1.0 - kappa),
    }
    matches = [name for name, value in candidates.items() if interval["low"] <= value <= interval["high"]]
    ks = stats.kstest(w_samples[:, -1], "norm", args=(0.0, math.sqrt(rho * times[-1])))
    tail = psi_tail(kernel, n ** epsilon)

    return {
        "n": int(n),
        "replications": len(runs),
        "rho": rho,
        "kappa": kappa,
        "marginals": records,
        "ks_wbar_statistic": float(ks.statistic),
        "ks_wbar_pvalue": float(ks.pvalue),
        "xbar_variance": interval,
        "variance_candidates": candidates,
        "variance_matches": matches,
        "psi_tail": tail,
        "psi_tail_ratio": tail * math.sqrt(n),
        "epsilon": epsilon,
    }
