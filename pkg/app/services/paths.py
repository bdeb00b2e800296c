"""
Contêineres de caminhos e a álgebra de operadores lipschitzianos

Partições, interpolação afim Ξ_π, norma do sup, módulo de continuidade,
máximo corrente, tempo local, reflexão de Skorokhod, mudança de tempo Γ e a
aplicação de EDO linear Θ_A.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

from app.config import settings
from app.utils.exceptions import ParameterError, UnsupportedDimensionError

logger = logging.getLogger(__name__)

# folga relativa ao comparar horizontes e diferenças de tempo
_TIME_RTOL = 1e-12

MatrixLike = Union[np.ndarray, Callable[[float], np.ndarray]]
RateLike = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


def _as_values(values, d: Optional[int] = None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise ParameterError(f"valores devem ter forma (k, d): {values.shape}")
    if d is not None and values.shape[1] != d:
        raise ParameterError(f"dimensão incompatível: esperado {d}, recebido {values.shape[1]}")
    return values


def _same_horizon(a: float, b: float) -> bool:
    return abs(a - b) <= _TIME_RTOL * max(1.0, abs(a), abs(b))


@dataclass(frozen=True, eq=False)
class Partition:
    """Malha estritamente crescente 0 = t_0 < t_1 < ... < t_l = T"""
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ParameterError("partição exige ao menos dois pontos")
        if not np.all(np.isfinite(times)):
            raise ParameterError("partição com pontos não finitos")
        if times[0] != 0.0:
            raise ParameterError(f"partição deve começar em 0: {times[0]!r}")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("partição deve ser estritamente crescente")
        object.__setattr__(self, "times", _frozen(times))

    @classmethod
    def uniform(cls, T: float, l: int) -> "Partition":
        if l < 1:
            raise ParameterError(f"número de intervalos deve ser >= 1: {l!r}")
        if not np.isfinite(T) or T <= 0:
            raise ParameterError(f"horizonte deve ser positivo: {T!r}")
        return cls(np.linspace(0.0, T, l + 1))

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def size(self) -> int:
        """l(π): número de intervalos"""
        return int(self.times.size - 1)

    @property
    def mesh(self) -> float:
        """|π| = max(t_{i+1} - t_i)"""
        return float(np.max(np.diff(self.times)))


class Path:
    """Caminho em R^d sobre [0, T]"""

    T: float
    d: int

    def __call__(self, t) -> np.ndarray:
        return self.evaluate(t)

    def evaluate(self, t) -> np.ndarray:
        raise NotImplementedError

    def left_limit(self, t) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Tempos entre os quais o caminho é afim (contendo 0 e T)"""
        raise NotImplementedError

    def _check_times(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        slack = _TIME_RTOL * max(1.0, self.T)
        if np.any(t < -slack) or np.any(t > self.T + slack):
            raise ParameterError(f"tempo fora de [0, {self.T}]")
        return np.clip(t, 0.0, self.T)


class GridPath(Path):
    """
    Caminho contínuo amostrado numa grade, afim entre os nós

    Os valores têm forma (G+1, d); a grade uniforme é a padrão.
    """

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = _as_values(values)
        if times.ndim != 1 or times.size < 2:
            raise ParameterError("grade exige ao menos dois nós")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ParameterError("grade deve começar em 0 e ser estritamente crescente")
        if values.shape[0] != times.size:
            raise ParameterError(f"grade com {times.size} nós e {values.shape[0]} valores")
        if not np.all(np.isfinite(values)):
            raise ParameterError("caminho em grade com valores não finitos")
        self.times = _frozen(times)
        self.values = _frozen(values)
        self.T = float(times[-1])
        self.d = int(values.shape[1])

    @classmethod
    def uniform(cls, T: float, values) -> "GridPath":
        values = _as_values(values)
        return cls(np.linspace(0.0, T, values.shape[0]), values)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], T: float, G: int) -> "GridPath":
        times = np.linspace(0.0, T, G + 1)
        return cls(times, func(times))

    @property
    def G(self) -> int:
        return int(self.times.size - 1)

    def evaluate(self, t) -> np.ndarray:
        t = self._check_times(t)
        return np.column_stack([np.interp(t, self.times, self.values[:, j]) for j in range(self.d)])

    def left_limit(self, t) -> np.ndarray:
        return self.evaluate(t)

    def breakpoints(self) -> np.ndarray:
        return self.times

    def component(self, j: int) -> "GridPath":
        return GridPath(self.times, self.values[:, j])

    def with_values(self, values) -> "GridPath":
        return GridPath(self.times, values)

    def _combine(self, other, op) -> "GridPath":
        if isinstance(other, GridPath):
            if other.times.shape != self.times.shape or not np.array_equal(other.times, self.times):
                raise ParameterError("operação entre caminhos em grades distintas")
            return GridPath(self.times, op(self.values, other.values))
        return GridPath(self.times, op(self.values, float(other)))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return GridPath(self.times, self.values * float(scalar))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"GridPath(d={self.d}, G={self.G}, T={self.T})"


class RcllPath(Path):
    """
    Caminho constante por partes, contínuo à direita com limites à esquerda

    Guardado como valor inicial x0 e lista ordenada de saltos (tempo, novo valor).
    """

    def __init__(self, x0, jump_times, jump_values, T: float):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        jump_times = np.asarray(jump_times, dtype=float).reshape(-1)
        jump_values = _as_values(np.asarray(jump_values, dtype=float).reshape(jump_times.size, -1)
                                 if jump_times.size else np.empty((0, x0.size)), x0.size)
        if not np.isfinite(T) or T <= 0:
            raise ParameterError(f"horizonte deve ser positivo: {T!r}")
        if jump_times.size:
            if np.any(np.diff(jump_times) <= 0):
                raise ParameterError("tempos de salto devem ser estritamente crescentes")
            if jump_times[0] <= 0 or jump_times[-1] > T * (1 + _TIME_RTOL):
                raise ParameterError("tempos de salto devem estar em (0, T]")
        states = np.vstack([x0[None, :], jump_values])
        if not np.all(np.isfinite(states)):
            raise ParameterError("caminho rcll com valores não finitos")
        self.T = float(T)
        self.d = int(x0.size)
        self.x0 = _frozen(x0)
        self.jump_times = _frozen(jump_times)
        self.states = _frozen(states)

    @classmethod
    def from_increments(cls, x0, jump_times, increments, T: float) -> "RcllPath":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        increments = _as_values(np.asarray(increments, dtype=float).reshape(len(jump_times), -1)
                                if len(jump_times) else np.empty((0, x0.size)), x0.size)
        return cls(x0, jump_times, x0[None, :] + np.cumsum(increments, axis=0), T)

    @classmethod
    def constant(cls, x0, T: float) -> "RcllPath":
        return cls(x0, [], [], T)

    @property
    def jump_values(self) -> np.ndarray:
        return self.states[1:]

    def _index(self, t, side: str) -> np.ndarray:
        t = self._check_times(t)
        return np.searchsorted(self.jump_times, t, side=side)

    def evaluate(self, t) -> np.ndarray:
        return self.states[self._index(t, "right")]

    def left_limit(self, t) -> np.ndarray:
        return self.states[self._index(t, "left")]

    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([[0.0], self.jump_times, [self.T]]))

    def __len__(self) -> int:
        return int(self.jump_times.size)

    def __repr__(self) -> str:
        return f"RcllPath(d={self.d}, jumps={len(self)}, T={self.T})"


def _norms(values: np.ndarray) -> np.ndarray:
    if values.shape[-1] == 1:
        return np.abs(values[..., 0])
    return np.linalg.norm(values, axis=-1)


def sup_norm(f: Path) -> float:
    """‖f‖_{∞,T}, exato: atingido em saltos, nós ou extremos"""
    if isinstance(f, RcllPath):
        return float(np.max(_norms(f.states)))
    if isinstance(f, GridPath):
        return float(np.max(_norms(f.values)))
    raise ParameterError(f"tipo de caminho não suportado: {type(f).__name__}")


def sup_distance(f: Path, g: Path) -> float:
    """
    ‖f - g‖_{∞,T} exato para quaisquer combinações de RcllPath e GridPath

    Entre pontos de quebra consecutivos a diferença é afim, então o supremo é
    atingido no valor à direita ou no limite à esquerda de algum ponto de quebra.
    """
    if not _same_horizon(f.T, g.T):
        raise ParameterError(f"horizontes distintos: {f.T} e {g.T}")
    if f.d != g.d:
        raise ParameterError(f"dimensões distintas: {f.d} e {g.d}")
    points = np.unique(np.concatenate([f.breakpoints(), np.minimum(g.breakpoints(), f.T)]))
    right = _norms(f.evaluate(points) - g.evaluate(points))
    left = _norms(f.left_limit(points[1:]) - g.left_limit(points[1:]))
    return float(max(np.max(right), np.max(left) if left.size else 0.0))


def interpolate(f: Path, pi: Partition) -> GridPath:
    """
    Ξ_π f: caminho afim por partes que coincide com f em todos os nós de π
    """
    if not _same_horizon(pi.T, f.T):
        raise ParameterError(f"partição termina em {pi.T}, caminho em {f.T}")
    return GridPath(pi.times, f.evaluate(pi.times))


def hat_coefficients(f: Path, pi: Partition) -> np.ndarray:
    """Coeficientes de Ξ_π f na base de chapéus: (f(t_{i+1}) - f(t_i)) / √(t_{i+1} - t_i)"""
    nodes = interpolate(f, pi).values
    return np.diff(nodes, axis=0) / np.sqrt(np.diff(pi.times))[:, None]


def running_max(f: Path) -> Path:
    """
    s ↦ sup_{u<=s} ‖f(u)‖

    Exato para RcllPath; para GridPath é exato nos nós (a norma é convexa em
    cada segmento afim) e afim entre eles.
    """
    if isinstance(f, RcllPath):
        return RcllPath(np.maximum.accumulate(_norms(f.states))[0], f.jump_times,
                        np.maximum.accumulate(_norms(f.states))[1:], f.T)
    return GridPath(f.times, np.maximum.accumulate(_norms(f.values)))


def local_time(f: Path) -> Path:
    """ℓ⁰(f)(s) = sup_{u<=s} max(-f(u), 0), coordenada a coordenada"""
    if isinstance(f, RcllPath):
        acc = np.maximum.accumulate(np.maximum(-f.states, 0.0), axis=0)
        return RcllPath(acc[0], f.jump_times, acc[1:], f.T)
    return GridPath(f.times, np.maximum.accumulate(np.maximum(-f.values, 0.0), axis=0))


def sko_reflect(f: Path) -> Path:
    """Sko(f) = f + ℓ⁰(f), definida apenas para d = 1"""
    if f.d != 1:
        raise UnsupportedDimensionError(f"reflexão de Skorokhod exige d = 1, recebido d = {f.d}")
    lt = local_time(f)
    if isinstance(f, RcllPath):
        return RcllPath(f.states[0] + lt.states[0], f.jump_times, f.states[1:] + lt.states[1:], f.T)
    return GridPath(f.times, f.values + lt.values)


def modulus(f: Path, eps: float) -> float:
    """
    α_ε(f) = sup_{|s-s'|<=ε} ‖f(s) - f(s')‖

    RcllPath: exato a partir da lista de saltos. GridPath: restrito aos pares
    de nós; igual ao módulo verdadeiro quando ε é múltiplo do passo da grade,
    caso contrário uma cota inferior a menos de um passo.
    """
    if not np.isfinite(eps) or eps <= 0:
        raise ParameterError(f"ε deve ser positivo: {eps!r}")
    if isinstance(f, GridPath):
        times, values = f.times, f.values
        slack = _TIME_RTOL * max(1.0, f.T)
        best = 0.0
        for lag in range(1, times.size):
            dt = times[lag:] - times[:-lag]
            valid = dt <= eps + slack
            if not np.any(valid):
                break
            gaps = _norms(values[lag:][valid] - values[:-lag][valid])
            best = max(best, float(np.max(gaps)))
        return best
    if isinstance(f, RcllPath):
        # estado a vale em [τ_a, τ_{a+1}); o par (a, b) é alcançável se τ_b - τ_{a+1} < ε
        jt, states = f.jump_times, f.states
        k = jt.size
        best = 0.0
        for lag in range(1, k + 1):
            gap_time = jt[lag - 1:] - jt[: k - lag + 1]
            valid = gap_time < eps
            if not np.any(valid):
                break
            a = np.nonzero(valid)[0]
            best = max(best, float(np.max(_norms(states[a + lag] - states[a]))))
        return best
    raise ParameterError(f"tipo de caminho não suportado: {type(f).__name__}")


def cumulative_rate(r: RateLike, times: np.ndarray) -> np.ndarray:
    """γ(t) = ∫_0^t r(s) ds pela regra do trapézio na grade dada"""
    times = np.asarray(times, dtype=float)
    if callable(r):
        rates = np.asarray(r(times), dtype=float)
    elif np.ndim(r) == 0:
        rates = np.full(times.shape, float(r))
    else:
        rates = np.asarray(r, dtype=float)
    if rates.shape != times.shape:
        raise ParameterError(f"taxa com forma {rates.shape}, grade com {times.shape}")
    if not np.all(np.isfinite(rates)):
        raise ParameterError("taxa com valores não finitos")
    if np.any(rates < 0):
        raise ParameterError(f"taxa negativa na grade: min = {rates.min()!r}")
    return cumulative_trapezoid(rates, times, initial=0.0)


def time_change(f: Path, r: RateLike, T: float, G: Optional[int] = None) -> GridPath:
    """
    Γ(f) = f ∘ γ na grade uniforme de [0, T], com γ(t) = ∫_0^t r(s) ds

    f deve estar definido em [0, γ(T)].
    """
    G = G or settings.DEFAULT_GRID_SIZE
    times = np.linspace(0.0, T, G + 1)
    gamma = cumulative_rate(r, times)
    if gamma[-1] > f.T * (1 + 1e-9) + 1e-12:
        raise ParameterError(f"γ(T) = {gamma[-1]} excede o horizonte do caminho {f.T}")
    return GridPath(times, f.evaluate(np.minimum(gamma, f.T)))


def invert_time_change(times: np.ndarray, gamma: np.ndarray, y) -> np.ndarray:
    """γ⁻¹(y) por inversão linear por partes de γ estritamente crescente"""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(np.diff(gamma) <= 0):
        raise ParameterError("γ deve ser estritamente crescente para ser invertida")
    y = np.asarray(y, dtype=float)
    if np.any(y < gamma[0]) or np.any(y > gamma[-1]):
        raise ParameterError("valor fora da imagem de γ")
    return np.interp(y, gamma, times)


def _matrix_at(A: MatrixLike, t: float, d: int) -> np.ndarray:
    mat = np.asarray(A(t) if callable(A) else A, dtype=float)
    if mat.shape != (d, d):
        raise ParameterError(f"matriz A com forma {mat.shape}, esperado ({d}, {d})")
    if not np.all(np.isfinite(mat)):
        raise ParameterError("matriz A com valores não finitos")
    return mat


def theta_ode_batch(times: np.ndarray, f_values: np.ndarray, A: MatrixLike) -> np.ndarray:
    """
    Resolve y(t) = f(t) + ∫_0^t A(s) y(s) ds para um lote de caminhos na mesma grade

    Regra do trapézio implícita:
    (I - h/2 A_{j+1}) y_{j+1} = f_{j+1} + I_j + h/2 A_j y_j.

    Args:
        times: grade (G+1,)
        f_values: valores (S, G+1, d)
        A: matriz (d, d) constante ou função t ↦ A(t)

    Returns:
        Valores (S, G+1, d) da solução
    """
    times = np.asarray(times, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    if f_values.ndim != 3 or f_values.shape[1] != times.size:
        raise ParameterError(f"lote com forma {f_values.shape} incompatível com a grade")
    d = f_values.shape[2]
    eye = np.eye(d)
    constant = not callable(A)
    A_prev = _matrix_at(A, times[0], d)
    if constant and not np.any(A_prev):
        return f_values.copy()

    steps = np.diff(times)
    uniform = np.allclose(steps, steps[0], rtol=1e-12, atol=0.0)
    y = np.empty_like(f_values)
    y[:, 0] = f_values[:, 0]
    integral = np.zeros_like(f_values[:, 0])
    solve_cached = None
    if constant and uniform:
        solve_cached = np.linalg.inv(eye - 0.5 * steps[0] * A_prev)

    for j in range(times.size - 1):
        h = steps[j]
        A_next = A_prev if constant else _matrix_at(A, times[j + 1], d)
        drift_prev = y[:, j] @ A_prev.T
        rhs = f_values[:, j + 1] + integral + 0.5 * h * drift_prev
        M = solve_cached if solve_cached is not None else np.linalg.inv(eye - 0.5 * h * A_next)
        y[:, j + 1] = rhs @ M.T
        integral = integral + 0.5 * h * (drift_prev + y[:, j + 1] @ A_next.T)
        A_prev = A_next
    return y


def theta_ode(f: GridPath, A: MatrixLike) -> GridPath:
    """Θ_A(f): solução de y = f + A∫y com y(0) = f(0), na grade de f"""
    if not isinstance(f, GridPath):
        raise ParameterError("Θ_A exige um GridPath")
    values = theta_ode_batch(f.times, f.values[None, :, :], A)[0]
    return GridPath(f.times, values)


def operator_norm(A: np.ndarray) -> float:
    """Norma espectral ‖A‖"""
    return float(np.linalg.norm(np.asarray(A, dtype=float), ord=2))


def theta_lipschitz_constant(A: np.ndarray, T: float) -> float:
    """1 + ‖A‖ T e^{T‖A‖}"""
    norm = operator_norm(A)
    return 1.0 + norm * T * np.exp(T * norm)


def path_table(f: Path) -> pd.DataFrame:
    """Tabela (t, x_1..x_d) do caminho"""
    columns = [f"x_{j + 1}" for j in range(f.d)]
    if isinstance(f, GridPath):
        times, values = f.times, f.values
    else:
        times = np.concatenate([[0.0], f.jump_times])
        values = f.states
        if not f.jump_times.size or f.jump_times[-1] < f.T:
            times = np.append(times, f.T)
            values = np.vstack([values, values[-1:]])
    frame = pd.DataFrame(values, columns=columns)
    frame.insert(0, "t", times)
    return frame


def to_csv(f: Path, filename: str):
    """Exporta o caminho em CSV com colunas t, x_1..x_d"""
    path_table(f).to_csv(filename, index=False, float_format="%.17g")


def from_csv(filename: str, kind: str = "grid") -> Path:
    """
    Lê um caminho escrito por to_csv

    Para kind="rcll" a última linha repetida (estado em T) não é um salto;
    saltos de tamanho nulo não sobrevivem à ida e volta.
    """
    frame = pd.read_csv(filename)
    times = frame["t"].to_numpy(dtype=float)
    values = frame.drop(columns="t").to_numpy(dtype=float)
    if kind == "grid":
        return GridPath(times, values)
    if kind != "rcll":
        raise ParameterError(f"tipo de caminho desconhecido: {kind!r}")
    T = float(times[-1])
    jump_times, jump_values = times[1:], values[1:]
    if jump_times.size and np.array_equal(jump_values[-1], values[-2]):
        jump_times, jump_values = jump_times[:-1], jump_values[:-1]
    return RcllPath(values[0], jump_times, jump_values, T)


def stack_nodes(paths: Sequence[Path], pi: Partition) -> np.ndarray:
    """Valores (S, l+1, d) de vários caminhos nos nós da partição"""
    if not paths:
        raise ParameterError("conjunto de caminhos vazio")
    return np.stack([interpolate(p, pi).values for p in paths])
