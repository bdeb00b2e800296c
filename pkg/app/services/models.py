"""
Cadeias de Markov dirigidas por medidas de Poisson no regime de escala n

Descritores ModelSpec, simulação exata por afinamento de X̄_n, limite fluido Λ,
amostrador do limite de difusão Θ_A(Σ (B_k ∘ γ_k) ζ_k), desvio escalado U_n e o
par acoplado de martingais compensados.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from app.config import settings
from app.services.measures import RngStream, psi_bound, sample_poisson_measure
from app.services.paths import (
    GridPath,
    RcllPath,
    path_table,
    sko_reflect,
    sup_distance,
    theta_ode_batch,
)
from app.utils.exceptions import DomainEscapeError, ModelError, ParameterError, UnsupportedDimensionError

logger = logging.getLogger(__name__)

# r_k(t, x) com x de forma (..., d), vetorizada em t e x
RateFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
# ∇_x r_k(t, x) para x de forma (d,)
GradientFunction = Callable[[float, np.ndarray], np.ndarray]
# resto de segunda ordem r_k(t, y) - r_k(t, x) - ∇r_k(t, x)·(y - x)
RemainderFunction = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_BOUND_SLACK = 1e-12
_DOMAIN_SLACK = 1e-9
_LIMIT_CHUNK = 256


@dataclass(frozen=True)
class Channel:
    """Canal de salto k: vetor ζ_k, expoente α_k, taxa r_k e sua cota de dominação"""
    name: str
    zeta: np.ndarray
    rate: RateFunction
    gradient: GradientFunction
    bound: float
    lipschitz: float
    alpha: float = 1.0
    linear: bool = True
    remainder: Optional[RemainderFunction] = None


@dataclass(frozen=True)
class ModelSpec:
    """Descrição de um modelo: dimensão, canais, Λ(0), domínio e lei inicial"""
    model_id: str
    d: int
    channels: Tuple[Channel, ...]
    x0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    params: Dict[str, float] = field(default_factory=dict)
    provenance: str = ""
    fluid_closed_form: Optional[Callable[[np.ndarray], np.ndarray]] = None
    initial_law: Optional[Callable[[int, RngStream], np.ndarray]] = None
    state_cap: Optional[float] = None

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.size != self.d:
            raise ParameterError(f"Λ(0) com dimensão {x0.size}, modelo com d = {self.d}")
        for channel in self.channels:
            if np.asarray(channel.zeta).shape != (self.d,):
                raise ParameterError(f"canal {channel.name}: ζ deve ter dimensão {self.d}")
            if not np.isfinite(channel.bound) or channel.bound < 0:
                raise ParameterError(f"canal {channel.name}: cota de taxa inválida {channel.bound!r}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "lower", np.broadcast_to(np.asarray(self.lower, dtype=float), (self.d,)))
        object.__setattr__(self, "upper", np.broadcast_to(np.asarray(self.upper, dtype=float), (self.d,)))

    @property
    def m(self) -> int:
        return len(self.channels)

    @property
    def zetas(self) -> np.ndarray:
        return np.array([c.zeta for c in self.channels], dtype=float)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([c.alpha for c in self.channels], dtype=float)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([c.bound for c in self.channels], dtype=float)

    def rates(self, t, x) -> np.ndarray:
        """Matriz (..., m) de taxas r_k(t, x)"""
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(c.rate(t, x), x.shape[:-1]) for c in self.channels], axis=-1)

    def velocity(self, t, x) -> np.ndarray:
        """Campo do limite fluido: Σ_k r_k(t, x) ζ_k"""
        return self.rates(t, x) @ self.zetas

    def initial_state(self, n: int, rng: Optional[RngStream] = None) -> np.ndarray:
        if self.initial_law is not None:
            return np.asarray(self.initial_law(n, rng), dtype=float)
        return np.round(n * self.x0) / n

    def in_domain(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - _DOMAIN_SLACK) & (x <= self.upper + _DOMAIN_SLACK), axis=-1)


def drift_matrix(model: ModelSpec, t: float, lam: np.ndarray) -> np.ndarray:
    """A(t) = Σ_k ζ_k L_k(t)ᵀ com L_k(t) = ∇_x r_k(t, Λ(t))"""
    A = np.zeros((model.d, model.d))
    for channel in model.channels:
        A += np.outer(channel.zeta, np.asarray(channel.gradient(t, lam), dtype=float))
    return A


def _fluid_drift(model: ModelSpec, fluid: GridPath) -> Callable[[float], np.ndarray]:
    def A(t: float) -> np.ndarray:
        return drift_matrix(model, t, fluid.evaluate(t)[0])
    return A


def fluid_limit(model: ModelSpec, T: float, G: Optional[int] = None) -> GridPath:
    """
    Λ(t) = Λ(0) + Σ_k ∫_0^t r_k(s, Λ(s)) ds ζ_k por Runge-Kutta de quarta ordem com passo T/G

    Raises:
        DomainEscapeError: se a solução deixa o domínio declarado do modelo
    """
    G = G or settings.DEFAULT_GRID_SIZE
    if not np.isfinite(T) or T <= 0:
        raise ParameterError(f"horizonte deve ser positivo: {T!r}")
    times = np.linspace(0.0, T, G + 1)
    h = T / G
    values = np.empty((G + 1, model.d))
    x = model.x0.copy()
    values[0] = x
    for j in range(G):
        t = times[j]
        k1 = model.velocity(t, x)
        k2 = model.velocity(t + h / 2, x + h / 2 * k1)
        k3 = model.velocity(t + h / 2, x + h / 2 * k2)
        k4 = model.velocity(t + h, x + h * k3)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or not model.in_domain(x):
            raise DomainEscapeError(
                f"limite fluido de {model.model_id} saiu do domínio em t={times[j + 1]:.6g}: {x}"
            )
        values[j + 1] = x
    return GridPath(times, values)


@dataclass(frozen=True)
class CoupledMartingales:
    """
    Integrais compensadas por canal, avaliadas na união da grade fluida com os
    tempos candidatos

    count_*: contagens aceitas (valor à direita) e seus limites à esquerda;
    comp_*: compensadores n ∫ r_k, contínuos. Índice [k, e].
    """
    times: np.ndarray
    count_x: np.ndarray
    count_x_left: np.ndarray
    count_lam: np.ndarray
    count_lam_left: np.ndarray
    comp_x: np.ndarray
    comp_lam: np.ndarray
    disagreements: np.ndarray

    def m_x(self, k: int) -> np.ndarray:
        return self.count_x[k] - self.comp_x[k]

    def m_lam(self, k: int) -> np.ndarray:
        return self.count_lam[k] - self.comp_lam[k]


@dataclass(frozen=True)
class ScaledRun:
    """Uma replicação de X̄_n com seu limite fluido, U_n e os martingais acoplados"""
    model_id: str
    n: int
    T: float
    xbar: RcllPath
    fluid: GridPath
    u: RcllPath
    martingales: CoupledMartingales
    jump_channels: np.ndarray
    candidates: np.ndarray
    zeta_norms: np.ndarray
    limit: Optional[GridPath] = None

    def u_at(self, t) -> np.ndarray:
        """U_n(t) = √n (X̄_n(t) - Λ(t)) exato"""
        return np.sqrt(self.n) * (self.xbar.evaluate(t) - self.fluid.evaluate(t))

    def accepted_counts(self) -> np.ndarray:
        return self.martingales.count_x[:, -1]

    def compensators(self) -> np.ndarray:
        return self.martingales.comp_x[:, -1]


def _deviation_path(n: int, xbar: RcllPath, fluid: GridPath, times: np.ndarray) -> RcllPath:
    # U_n constante por partes na união dos saltos com a grade
    values = np.sqrt(n) * (xbar.evaluate(times) - fluid.evaluate(times))
    return RcllPath(values[0], times[1:], values[1:], xbar.T)


def _thinning_pass(model: ModelSpec, n: int, x_init: np.ndarray, times: np.ndarray,
                   marks: np.ndarray, channels: np.ndarray) -> np.ndarray:
    """Aceitação sequencial z <= r_k(s, X̄(s-)); devolve a máscara de eventos aceitos"""
    zetas = model.zetas
    bounds = model.bounds
    rate_fns = [c.rate for c in model.channels]
    displacement = np.zeros(model.d)
    x = x_init.copy()
    accepted = np.zeros(times.size, dtype=bool)
    for i in range(times.size):
        k = channels[i]
        rate = float(rate_fns[k](times[i], x))
        if not rate >= 0.0:
            raise ModelError(
                f"taxa inválida no canal {k} ({model.channels[k].name}) em t={times[i]:.6g}, "
                f"estado {x.tolist()}: {rate!r}",
                channel=int(k), state=x.copy(),
            )
        if rate > bounds[k] * (1.0 + _BOUND_SLACK):
            logger.warning(f"cota de dominação excedida no canal {k} de {model.model_id}: estado {x.tolist()}")
            raise DomainEscapeError(
                f"estado {x.tolist()} excede o teto declarado de {model.model_id} "
                f"(taxa {rate:.6g} > cota {bounds[k]:.6g} no canal {k})"
            )
        if marks[i] <= rate:
            accepted[i] = True
            displacement += zetas[k]
            x = x_init + displacement / n
    return accepted


def _midpoint_compensator(rate: RateFunction, times: np.ndarray, states: np.ndarray, n: int) -> np.ndarray:
    mids = 0.5 * (times[:-1] + times[1:])
    increments = n * np.broadcast_to(rate(mids, states), mids.shape) * np.diff(times)
    return np.concatenate([[0.0], np.cumsum(increments)])


def simulate_scaled(model: ModelSpec, n: int, T: float, rng: RngStream,
                    fluid: Optional[GridPath] = None, G: Optional[int] = None) -> ScaledRun:
    """
    Simulação exata de X̄_n por afinamento

    Cada canal k recebe um fluxo dominante de intensidade n · sup r_k com marcas
    uniformes; um evento é aceito se a marca está abaixo de r_k(s, X̄_n(s-)).
    As mesmas marcas, comparadas com r_k(s, Λ(s)), definem o martingal acoplado.

    Args:
        model: descritor do modelo
        n: escala (>= 1)
        T: horizonte
        rng: fluxo aleatório desta replicação; cada canal usa um fluxo filho
        fluid: limite fluido já calculado em [0, T] (opcional)
        G: tamanho da grade do limite fluido
    """
    if n < 1:
        raise ParameterError(f"escala n deve ser >= 1: {n!r}")
    if fluid is None:
        fluid = fluid_limit(model, T, G)
    elif abs(fluid.T - T) > 1e-12 * max(1.0, T):
        raise ParameterError(f"limite fluido em [0, {fluid.T}] para horizonte {T}")

    x_init = model.initial_state(n, rng.spawn(model.m))
    all_times, all_marks, all_channels = [], [], []
    for k, channel in enumerate(model.channels):
        if channel.bound <= 0:
            continue
        sample = sample_poisson_measure(rng.spawn(k), T, float(n), channel.bound)
        all_times.append(sample.times)
        all_marks.append(sample.marks)
        all_channels.append(np.full(len(sample), k, dtype=np.int64))

    if all_times:
        times = np.concatenate(all_times)
        order = np.argsort(times, kind="stable")
        times = times[order]
        marks = np.concatenate(all_marks)[order]
        channels = np.concatenate(all_channels)[order]
    else:
        times, marks, channels = np.empty(0), np.empty(0), np.empty(0, dtype=np.int64)
    # times fora de (0, T] têm probabilidade nula, mas o caminho rcll os rejeitaria
    keep = times > 0
    times, marks, channels = times[keep], marks[keep], channels[keep]

    accepted = _thinning_pass(model, n, x_init, times, marks, channels)
    jump_times = times[accepted]
    jump_channels = channels[accepted]
    xbar = RcllPath.from_increments(x_init, jump_times, model.zetas[jump_channels] / n, T)

    eval_times = np.unique(np.concatenate([fluid.times, times]))
    states = xbar.evaluate(eval_times)
    lam_mid = fluid.evaluate(0.5 * (eval_times[:-1] + eval_times[1:]))
    lam_at_candidates = fluid.evaluate(times) if times.size else np.empty((0, model.d))

    m = model.m
    shape = (m, eval_times.size)
    count_x, count_x_left = np.zeros(shape), np.zeros(shape)
    count_lam, count_lam_left = np.zeros(shape), np.zeros(shape)
    comp_x, comp_lam = np.zeros(shape), np.zeros(shape)
    disagreements = np.zeros(m, dtype=np.int64)
    candidates = np.zeros(m, dtype=np.int64)

    for k, channel in enumerate(model.channels):
        own = channels == k
        candidates[k] = int(np.sum(own))
        if np.any(own):
            lam_rates = np.broadcast_to(channel.rate(times[own], lam_at_candidates[own]), (int(np.sum(own)),))
            accepted_lam = marks[own] <= lam_rates
        else:
            accepted_lam = np.zeros(0, dtype=bool)
        t_x = times[own][accepted[own]]
        t_lam = times[own][accepted_lam]
        count_x[k] = np.searchsorted(t_x, eval_times, side="right")
        count_x_left[k] = np.searchsorted(t_x, eval_times, side="left")
        count_lam[k] = np.searchsorted(t_lam, eval_times, side="right")
        count_lam_left[k] = np.searchsorted(t_lam, eval_times, side="left")
        comp_x[k] = _midpoint_compensator(channel.rate, eval_times, states[:-1], n)
        comp_lam[k] = _midpoint_compensator(channel.rate, eval_times, lam_mid, n)
        disagreements[k] = int(np.sum(accepted[own] != accepted_lam))

    martingales = CoupledMartingales(
        times=eval_times, count_x=count_x, count_x_left=count_x_left,
        count_lam=count_lam, count_lam_left=count_lam_left,
        comp_x=comp_x, comp_lam=comp_lam, disagreements=disagreements,
    )
    u = _deviation_path(n, xbar, fluid, np.unique(np.concatenate([[0.0], fluid.times, jump_times])))
    return ScaledRun(
        model_id=model.model_id, n=int(n), T=float(T), xbar=xbar, fluid=fluid, u=u,
        martingales=martingales, jump_channels=jump_channels, candidates=candidates,
        zeta_norms=np.linalg.norm(model.zetas, axis=1),
    )


def lln_error(run: ScaledRun) -> float:
    """sup_{t<=T} ‖X̄_n(t) - Λ(t)‖, exato"""
    return sup_distance(run.xbar, run.fluid)


def coupling_gap(run: ScaledRun) -> float:
    """
    Σ_k ‖ζ_k‖ sup_t |M_{n,k,X̄}(t) - M_{n,k,Λ}(t)| / √n

    O supremo é tomado nos valores à direita e limites à esquerda da grade de
    avaliação do par acoplado.
    """
    mart = run.martingales
    weights = run.zeta_norms
    total = 0.0
    for k in range(mart.count_x.shape[0]):
        comp = mart.comp_x[k] - mart.comp_lam[k]
        right = mart.count_x[k] - mart.count_lam[k] - comp
        left = mart.count_x_left[k] - mart.count_lam_left[k] - comp
        total += weights[k] * max(float(np.max(np.abs(right))), float(np.max(np.abs(left))))
    return total / np.sqrt(run.n)


def coupling_jump_gap(run: ScaledRun) -> Tuple[float, float]:
    """
    Parte de saltos do acoplamento e sua cota pela contagem de discordâncias

    Returns:
        (Σ_k ‖ζ_k‖ sup_t |N_{k,X̄} - N_{k,Λ}| / √n, (#discordâncias) max‖ζ_k‖ / √n)
    """
    mart = run.martingales
    weights = run.zeta_norms
    gap = sum(weights[k] * float(np.max(np.abs(mart.count_x[k] - mart.count_lam[k])))
              for k in range(mart.count_x.shape[0]))
    bound = float(np.sum(mart.disagreements)) * float(np.max(weights))
    return gap / np.sqrt(run.n), bound / np.sqrt(run.n)


def martingale_terminal(run: ScaledRun) -> np.ndarray:
    """n^{-1/2} M_{n,k,Λ}(T) por canal"""
    mart = run.martingales
    return (mart.count_lam[:, -1] - mart.comp_lam[:, -1]) / np.sqrt(run.n)


def channel_time_changes(model: ModelSpec, fluid: GridPath) -> np.ndarray:
    """γ_k(t) = ∫_0^t r_k(s, Λ(s)) ds na grade do limite fluido, forma (m, G+1)"""
    rates = model.rates(fluid.times, fluid.values)
    return cumulative_trapezoid(rates, fluid.times, axis=0, initial=0.0).T


def sample_pre_theta(model: ModelSpec, fluid: GridPath, rng: RngStream, samples: int) -> np.ndarray:
    """Σ_k B_k(γ_k(t)) ζ_k para um lote de amostras, forma (S, G+1, d)"""
    gammas = channel_time_changes(model, fluid)
    increments = np.sqrt(np.maximum(np.diff(gammas, axis=1), 0.0))
    gen = rng.generator
    out = np.zeros((samples, fluid.times.size, model.d))
    for k, channel in enumerate(model.channels):
        noise = gen.standard_normal((samples, increments.shape[1])) * increments[k]
        brownian = np.concatenate([np.zeros((samples, 1)), np.cumsum(noise, axis=1)], axis=1)
        out += brownian[:, :, None] * channel.zeta[None, None, :]
    return out


def sample_limit_batch(model: ModelSpec, fluid: GridPath, rng: RngStream, samples: int) -> np.ndarray:
    """Amostras do limite de difusão Θ_A(Σ (B_k ∘ γ_k) ζ_k), forma (S, G+1, d)"""
    if samples < 1:
        raise ParameterError(f"número de amostras deve ser >= 1: {samples!r}")
    pre = sample_pre_theta(model, fluid, rng, samples)
    return theta_ode_batch(fluid.times, pre, _fluid_drift(model, fluid))


def sample_limit(model: ModelSpec, T: float, G: Optional[int], rng: RngStream,
                 fluid: Optional[GridPath] = None) -> GridPath:
    """Uma trajetória do limite de difusão na grade do limite fluido"""
    if fluid is None:
        fluid = fluid_limit(model, T, G)
    return GridPath(fluid.times, sample_limit_batch(model, fluid, rng, 1)[0])


def _values_at(times: np.ndarray, batch: np.ndarray, at: np.ndarray) -> np.ndarray:
    # interpolação linear de um lote (S, G+1, d) nos instantes dados, forma (S, len(at), d)
    j = np.clip(np.searchsorted(times, at, side="right") - 1, 0, times.size - 2)
    w = ((at - times[j]) / (times[j + 1] - times[j]))[None, :, None]
    return (1.0 - w) * batch[:, j] + w * batch[:, j + 1]


def sample_limit_at(model: ModelSpec, fluid: GridPath, rng: RngStream, samples: int,
                    at: Sequence[float], reflected: bool = False) -> np.ndarray:
    """
    Valores do limite nos instantes dados, forma (S, len(at), d), em lotes com fluxos filhos

    Com reflected=True cada trajetória passa por Sko antes da interpolação (só d = 1).
    """
    if reflected and model.d != 1:
        raise UnsupportedDimensionError("limite refletido exige d = 1")
    at = np.asarray(at, dtype=float)
    if at.ndim != 1 or at.size == 0 or at.min() < 0 or at.max() > fluid.T * (1 + 1e-12):
        raise ParameterError(f"instantes fora de [0, {fluid.T}]")
    out = np.empty((samples, at.size, model.d))
    for index, start in enumerate(range(0, samples, _LIMIT_CHUNK)):
        stop = min(samples, start + _LIMIT_CHUNK)
        batch = sample_limit_batch(model, fluid, rng.spawn(index), stop - start)
        if reflected:
            batch = batch + np.maximum.accumulate(np.maximum(-batch, 0.0), axis=1)
        out[start:stop] = _values_at(fluid.times, batch, at)
    return out


def sample_limit_marginals(model: ModelSpec, fluid: GridPath, rng: RngStream, samples: int,
                           t: Optional[float] = None) -> np.ndarray:
    """Marginais do limite no tempo t (padrão T), forma (S, d)"""
    t = fluid.T if t is None else t
    return sample_limit_at(model, fluid, rng, samples, [t])[:, 0]


def residual_E(model: ModelSpec, run: ScaledRun) -> np.ndarray:
    """
    Resíduos E_{n,k}(t) = √n (r_k(t, X̄) - r_k(t, Λ) - ⟨L_k(t), X̄ - Λ⟩) na grade de avaliação

    Returns:
        Matriz (m, E) alinhada com run.martingales.times
    """
    times = run.martingales.times
    xbar = run.xbar.evaluate(times)
    lam = run.fluid.evaluate(times)
    out = np.zeros((model.m, times.size))
    for k, channel in enumerate(model.channels):
        if channel.linear:
            continue
        grads = np.array([channel.gradient(t, x) for t, x in zip(times, lam)])
        linear_part = np.sum(grads * (xbar - lam), axis=1)
        out[k] = np.sqrt(run.n) * (channel.rate(times, xbar) - channel.rate(times, lam) - linear_part)
    return out


def event_count_check(model: ModelSpec, runs: Sequence[ScaledRun]) -> pd.DataFrame:
    """
    Contagens aceitas por canal contra os compensadores n ∫ r_k(s, X̄(s)) ds

    A diferença tem média zero; o z-score usa o erro padrão das replicações.
    """
    if len(runs) < 2:
        raise ParameterError("verificação de contagem exige ao menos duas replicações")
    counts = np.array([run.accepted_counts() for run in runs])
    comps = np.array([run.compensators() for run in runs])
    diff = counts - comps
    se = diff.std(axis=0, ddof=1) / np.sqrt(len(runs))
    z = np.divide(diff.mean(axis=0), se, out=np.zeros(model.m), where=se > 0)
    return pd.DataFrame({
        "channel": [c.name for c in model.channels],
        "mean_count": counts.mean(axis=0),
        "mean_compensator": comps.mean(axis=0),
        "se": se,
        "z": z,
    })


def mm1_reflected(run: ScaledRun, limit: Optional[GridPath] = None) -> ScaledRun:
    """
    Reflete a replicação livre do M/M/1: X̄ ↦ Sko(X̄), Γ ↦ Sko(Γ) e, se dado, o limite

    U_n é recalculado contra o limite fluido refletido.
    """
    if run.xbar.d != 1:
        raise UnsupportedDimensionError("reflexão do M/M/1 exige d = 1")
    xbar = sko_reflect(run.xbar)
    fluid = sko_reflect(run.fluid)
    times = np.unique(np.concatenate([[0.0], fluid.times, xbar.jump_times]))
    u = _deviation_path(run.n, xbar, fluid, times)
    return replace(run, xbar=xbar, fluid=fluid, u=u,
                   limit=sko_reflect(limit) if limit is not None else None)


def run_table(run: ScaledRun) -> pd.DataFrame:
    """
    Tabela de uma replicação nos tempos de quebra de U_n

    Colunas t, xbar_j, fluid_j, u_j (e limit_j quando há limite acoplado).
    """
    frame = path_table(run.u)
    times = frame["t"].to_numpy()
    d = run.u.d
    frame = frame.rename(columns={f"x_{j + 1}": f"u_{j + 1}" for j in range(d)})
    columns = {"t": times}
    sources = [("xbar", run.xbar), ("fluid", run.fluid)]
    if run.limit is not None:
        sources.append(("limit", run.limit))
    for name, path in sources:
        values = path.evaluate(times)
        columns.update({f"{name}_{j + 1}": values[:, j] for j in range(d)})
    columns.update({f"u_{j + 1}": frame[f"u_{j + 1}"].to_numpy() for j in range(d)})
    return pd.DataFrame(columns)


def run_to_csv(run: ScaledRun, filename: str):
    """Exporta a replicação em CSV com precisão completa (%.17g)"""
    run_table(run).to_csv(filename, index=False, float_format="%.17g", lineterminator="\n")


def run_from_csv(filename: str) -> pd.DataFrame:
    """Lê uma tabela gravada por run_to_csv"""
    frame = pd.read_csv(filename, dtype=float)
    if "t" not in frame.columns or not any(c.startswith("u_") for c in frame.columns):
        raise ParameterError(f"tabela de replicação sem colunas t e u_j: {filename}")
    return frame


def interpolation_bound_terms(model: ModelSpec, n: int, l: int, mesh: float) -> float:
    """
    Σ_k ‖ζ_k/n‖ Ψ(l, n sup r_k |π|) para X̄_n (saltos ζ_k/n, intensidade n sup r_k)
    """
    total = 0.0
    for channel in model.channels:
        if channel.bound <= 0:
            continue
        total += np.linalg.norm(channel.zeta) / n * psi_bound(l, n * channel.bound * mesh)
    return total


def discrete_chisquare(values: np.ndarray, probabilities: np.ndarray) -> Tuple[float, float]:
    """
    Qui-quadrado de contagens inteiras 0, 1, ..., K contra uma lei discreta

    Células com esperado < 5 são agrupadas com as vizinhas; a massa fora do
    suporte listado vai para a última célula.
    """
    values = np.asarray(values, dtype=np.int64)
    probabilities = np.asarray(probabilities, dtype=float)
    total = values.size
    observed = np.bincount(np.clip(values, 0, probabilities.size - 1), minlength=probabilities.size).astype(float)
    expected = probabilities * total
    expected[-1] += total - expected.sum()
    obs_bins: List[float] = []
    exp_bins: List[float] = []
    acc_o, acc_e = 0.0, 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
            acc_o, acc_e = 0.0, 0.0
    if not obs_bins:
        raise ParameterError("amostra pequena demais para o teste qui-quadrado")
    obs_bins[-1] += acc_o
    exp_bins[-1] += acc_e
    result = stats.chisquare(np.array(obs_bins), np.array(exp_bins))
    return float(result.statistic), float(result.pvalue)
