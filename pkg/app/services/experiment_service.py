"""
Execução de experimentos de verificação

Cada tipo de experimento gera tarefas de replicação independentes; cada tarefa
carrega apenas identificadores (modelo, parâmetros, n, semente, chaves do fluxo)
e reconstrói o que precisa no worker. Os resultados voltam na ordem das tarefas,
então 1 worker e W workers produzem os mesmos arquivos.
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import settings
from app.monitoring.metrics_exporter import ExperimentMetrics
from app.monitoring.performance_monitor import PerformanceMonitor, default_worker_count
from app.services import catalog
from app.services.distance_lab import (
    SamplePathEnsemble,
    brownian_interp_error,
    finite_rank_envelope,
    finite_rank_gap,
    fit_rate,
    ks_two_sample,
    marginal_w1,
    scaled_poisson_interp_error,
)
from app.services.hawkes import (
    HawkesRun,
    hawkes_limit_check,
    lln_sup_error,
    representation_residual,
    run_hawkes,
)
from app.services.measures import (
    RngStream,
    poisson_max_bound,
    poisson_max_bound_exp,
    poisson_max_bound_loglog,
    poisson_max_bound_loglog_upper,
    poisson_max_loglog_threshold,
    poisson_max_mean_exact,
    psi_bound,
    sample_poisson_max,
)
from app.services.models import (
    ModelSpec,
    coupling_gap,
    coupling_jump_gap,
    fluid_limit,
    interpolation_bound_terms,
    lln_error,
    mm1_reflected,
    sample_limit_at,
    simulate_scaled,
)
from app.services.paths import (
    GridPath,
    Partition,
    RcllPath,
    interpolate,
    local_time,
    modulus,
    running_max,
    sko_reflect,
    sup_distance,
    theta_lipschitz_constant,
    theta_ode,
    time_change,
)
from app.storage.models import ExperimentConfig, RateFitRecord
from app.storage.report_writer import DETAILS_FILE, RATEFIT_FILE, ReportWriter
from app.utils.exceptions import LabError, ParameterError
from app.utils.helpers import canonical_json

logger = logging.getLogger(__name__)

# identificadores de fluxo por finalidade
STREAM_REPLICATION = 1
STREAM_LIMIT = 2
STREAM_BOOTSTRAP = 3
STREAM_FUNCTIONALS = 4
STREAM_PAIRS = 5

LIPSCHITZ_SLACK = 1e-9
MC_SE_WIDTH = 3.0
REPRESENTATION_TOLERANCE = 1e-2
ALLOWED_W1_INVERSIONS = 1
_PAIR_GRID = 256


@dataclass(frozen=True)
class ReplicationTask:
    """Identificadores de uma replicação; o worker reconstrói modelo e fluxo"""
    model_id: Optional[str]
    params_key: str
    n: int
    T: float
    grid: int
    seed: int
    replication: int
    reflect: bool = False

    def rng(self) -> RngStream:
        return RngStream(self.seed, STREAM_REPLICATION, (self.n, self.replication))


@dataclass
class ExperimentOutcome:
    """Resultado agregado de um experimento antes da escrita"""
    summary: pd.DataFrame
    details: Dict[str, Any] = field(default_factory=dict)
    statistics: Dict[int, np.ndarray] = field(default_factory=dict)
    statistic_name: Optional[str] = None
    expected_slope: Optional[float] = None
    band: Optional[Tuple[float, float]] = None
    replications: int = 0
    violations: int = 0


# ---------------------------------------------------------------- workers

@lru_cache(maxsize=16)
def _cached_model(model_id: str, params_key: str) -> ModelSpec:
    return catalog.build_model(model_id, json.loads(params_key))


@lru_cache(maxsize=16)
def _cached_fluid(model_id: str, params_key: str, T: float, grid: int) -> GridPath:
    return fluid_limit(_cached_model(model_id, params_key), T, grid)


def _scaled_run(task: ReplicationTask):
    model = _cached_model(task.model_id, task.params_key)
    fluid = _cached_fluid(task.model_id, task.params_key, task.T, task.grid)
    run = simulate_scaled(model, task.n, task.T, task.rng(), fluid=fluid)
    return mm1_reflected(run) if task.reflect else run


def _lln_task(task: ReplicationTask) -> float:
    return lln_error(_scaled_run(task))


def _coupling_task(task: ReplicationTask) -> Tuple[float, float, float]:
    run = _scaled_run(task)
    jump_gap, jump_bound = coupling_jump_gap(run)
    return coupling_gap(run), jump_gap, jump_bound


def _fclt_task(args: Tuple[ReplicationTask, Tuple[float, ...]]) -> np.ndarray:
    task, nodes = args
    return _scaled_run(task).u_at(np.asarray(nodes))


def _interp_model_task(task: ReplicationTask) -> float:
    xbar = _scaled_run(task).xbar
    return sup_distance(xbar, interpolate(xbar, Partition.uniform(task.T, task.n)))


def _interp_poisson_task(task: ReplicationTask) -> float:
    return scaled_poisson_interp_error(task.n, task.rng(), task.T)


def _brownian_task(task: ReplicationTask) -> float:
    return brownian_interp_error(task.n, task.rng(), task.grid, task.T)


def _hawkes_task(task: ReplicationTask) -> Tuple[np.ndarray, float, float, float]:
    mu, kernel = catalog.build_kernel(json.loads(task.params_key))
    run = run_hawkes(mu, kernel, task.n, task.T, task.rng())
    return (
        run.events,
        lln_sup_error(run),
        representation_residual(run, task.grid),
        representation_residual(run, 2 * task.grid),
    )


def _random_grid_path(gen: np.random.Generator, T: float, G: int, d: int) -> GridPath:
    steps = gen.standard_normal((G, d)) * math.sqrt(T / G) * gen.uniform(0.2, 3.0)
    drift = gen.uniform(-2.0, 2.0, size=d) * T / G
    start = gen.uniform(-1.0, 1.0, size=d)
    values = start + np.concatenate([np.zeros((1, d)), np.cumsum(steps + drift, axis=0)])
    return GridPath.uniform(T, values)


def _perturb(gen: np.random.Generator, f: GridPath) -> GridPath:
    scale = gen.choice([1e-6, 1e-3, 1e-1, 1.0])
    noise = np.cumsum(gen.standard_normal(f.values.shape), axis=0) * scale / math.sqrt(f.values.shape[0])
    return f.with_values(f.values + noise)


def _random_rcll_path(gen: np.random.Generator, T: float) -> RcllPath:
    count = int(gen.integers(0, 40))
    times = np.sort(gen.uniform(0.0, T, size=count))
    times = times[times > 0]
    values = gen.uniform(-1.0, 1.0) + np.cumsum(gen.normal(0.0, 0.5, size=times.size))
    return RcllPath(float(gen.uniform(-1.0, 1.0)), times, values, T)


def _lipschitz_task(args: Tuple[int, int, float, int]) -> List[Tuple[str, str, float, float, float]]:
    """Um par aleatório: (operador, tipo de caminho, ‖Op f - Op g‖, ‖f - g‖, constante)"""
    seed, pair, T, G = args
    gen = RngStream(seed, STREAM_PAIRS, (pair,)).generator
    out = []

    f = _random_grid_path(gen, T, G, 1)
    g = _perturb(gen, f) if gen.random() < 0.5 else _random_grid_path(gen, T, G, 1)
    a = _random_rcll_path(gen, T)
    b = _random_rcll_path(gen, T)
    eps = float(gen.uniform(0.01, 0.5)) * T

    for kind, x, y in (("grid", f, g), ("rcll", a, b)):
        dist = sup_distance(x, y)
        out.append(("running_max", kind, sup_distance(running_max(x), running_max(y)), dist, 1.0))
        out.append(("local_time", kind, sup_distance(local_time(x), local_time(y)), dist, 1.0))
        out.append(("sko", kind, sup_distance(sko_reflect(x), sko_reflect(y)), dist, 2.0))
        out.append(("modulus", kind, abs(modulus(x, eps) - modulus(y, eps)), dist, 2.0))

    floor = float(gen.uniform(0.0, 0.9))
    phase, freq = gen.uniform(0.0, 2 * math.pi), gen.uniform(0.5, 6.0)

    def rate(t):
        return floor + (1.0 - floor) * 0.5 * (1.0 + np.sin(2 * math.pi * freq * t + phase))

    out.append(("time_change", "grid", sup_distance(time_change(f, rate, T, G), time_change(g, rate, T, G)),
                sup_distance(f, g), 1.0))

    f2 = _random_grid_path(gen, T, G, 2)
    g2 = _perturb(gen, f2) if gen.random() < 0.5 else _random_grid_path(gen, T, G, 2)
    A = gen.normal(0.0, 1.0, size=(2, 2))
    A *= gen.uniform(0.0, 2.0) / max(np.linalg.norm(A, 2), 1e-12)
    out.append(("theta_ode", "grid", sup_distance(theta_ode(f2, A), theta_ode(g2, A)),
                sup_distance(f2, g2), theta_lipschitz_constant(A, T)))
    return out


# ---------------------------------------------------------------- critérios

def w1_inversions(summary: pd.DataFrame) -> Dict[str, int]:
    """Aumentos de W1 entre escalas consecutivas, por coordenada"""
    inversions = {}
    for coord in sorted(summary["coordinate"].unique()):
        w1 = summary.loc[summary["coordinate"] == coord].sort_values("n")["w1"].to_numpy()
        inversions[str(int(coord))] = int(np.sum(np.diff(w1) > 0))
    return inversions


def excess_inversions(inversions: Dict[str, int]) -> int:
    return sum(max(0, v - ALLOWED_W1_INVERSIONS) for v in inversions.values())


def representation_failures(residual: np.ndarray, residual_refined: np.ndarray) -> int:
    """
    Falhas da identidade de representação numa escala: o resíduo médio deve
    cair ao dobrar a grade e ficar abaixo de REPRESENTATION_TOLERANCE
    """
    coarse, fine = float(np.mean(residual)), float(np.mean(residual_refined))
    return int(fine >= coarse) + int(fine > REPRESENTATION_TOLERANCE)


# ---------------------------------------------------------------- serviço

class ExperimentService:
    """Executa um ExperimentConfig e grava os artefatos no diretório de saída"""

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None):
        self.config = config
        self.workers = default_worker_count(workers if workers is not None else settings.DEFAULT_WORKERS)
        self.metrics = ExperimentMetrics(config.kind, config.model)
        self.params_key = canonical_json(config.params, indent=None)
        self._runners: Dict[str, Callable[[], ExperimentOutcome]] = {
            "lln-rate": self._run_lln,
            "fclt-marginal": self._run_fclt,
            "interp-bound": self._run_interp,
            "coupling-rate": self._run_coupling,
            "hawkes-limit": self._run_hawkes,
            "poisson-max-bound": self._run_poisson_max,
            "operator-lipschitz": self._run_lipschitz,
            "brownian-interp": self._run_brownian,
        }

    # -- infraestrutura

    @property
    def grid(self) -> int:
        return self.config.grid or settings.DEFAULT_GRID_SIZE

    def _map(self, func: Callable, tasks: Sequence) -> List:
        """Mapeamento ordenado: em processo com 1 worker, senão num pool de processos"""
        if self.workers <= 1 or len(tasks) <= 1:
            return [func(task) for task in tasks]
        chunksize = max(1, len(tasks) // (4 * self.workers))
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(func, tasks, chunksize=chunksize))

    def _tasks(self, n: int, grid: Optional[int] = None, reflect: bool = False) -> List[ReplicationTask]:
        cfg = self.config
        return [
            ReplicationTask(cfg.model, self.params_key, n, cfg.T, grid or self.grid, cfg.seed, r, reflect)
            for r in range(cfg.replications)
        ]

    def _per_n(self, func: Callable, grid: Optional[int] = None, reflect: bool = False) -> Iterable:
        for n in self.config.n:
            logger.info(f"{self.config.kind}: n = {n}, {self.config.replications} replicações")
            with self.metrics.time_scale():
                try:
                    results = self._map(func, self._tasks(n, grid, reflect))
                except LabError as e:
                    logger.error(f"Falha em {self.config.kind} (modelo {self.config.model}, n = {n}): {e}")
                    raise
            self.metrics.record_replications(len(results))
            yield n, results

    @staticmethod
    def _moments(values: np.ndarray) -> Dict[str, float]:
        sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        return {"mean": float(np.mean(values)), "sd": sd, "se": sd / math.sqrt(values.size)}

    def _mean_outcome(self, func: Callable, statistic: str, expected: float,
                      band: Tuple[float, float], grid: Optional[int] = None,
                      reflect: bool = False) -> ExperimentOutcome:
        rows, stats_by_n = [], {}
        for n, results in self._per_n(func, grid, reflect):
            values = np.asarray(results, dtype=float)
            stats_by_n[n] = values
            rows.append({"n": n, "replications": values.size, **self._moments(values)})
        return ExperimentOutcome(
            summary=pd.DataFrame(rows), statistics=stats_by_n, statistic_name=statistic,
            expected_slope=expected, band=band, replications=sum(v.size for v in stats_by_n.values()),
        )

    def _mm1_critical(self) -> bool:
        p = self.config.params
        return self.config.model == "mm1" and p["lam"] == p["mu"] and p["x0"] == 0.0

    # -- tipos de experimento

    def _run_lln(self) -> ExperimentOutcome:
        return self._mean_outcome(_lln_task, "lln_sup_error", -0.5, (-0.6, -0.4))

    def _run_coupling(self) -> ExperimentOutcome:
        rows, stats_by_n, violations = [], {}, 0
        for n, results in self._per_n(_coupling_task):
            arr = np.asarray(results, dtype=float)
            gap, jump_gap, jump_bound = arr[:, 0], arr[:, 1], arr[:, 2]
            bad = int(np.sum(jump_gap > jump_bound + 1e-12))
            violations += bad
            stats_by_n[n] = gap
            rows.append({
                "n": n, "replications": gap.size, **self._moments(gap),
                "jump_gap_mean": float(jump_gap.mean()),
                "jump_bound_mean": float(jump_bound.mean()),
                "jump_bound_violations": bad,
            })
        return ExperimentOutcome(
            summary=pd.DataFrame(rows), statistics=stats_by_n, statistic_name="coupling_gap",
            expected_slope=-0.25, band=(-0.35, -0.15), violations=violations,
            replications=sum(v.size for v in stats_by_n.values()),
        )

    def _run_fclt(self) -> ExperimentOutcome:
        cfg = self.config
        model = _cached_model(cfg.model, self.params_key)
        fluid = _cached_fluid(cfg.model, self.params_key, cfg.T, self.grid)
        pi = Partition.uniform(cfg.T, cfg.partition_size)
        reflect = self._mm1_critical()
        samples = cfg.limit_samples or cfg.replications

        logger.info(f"Amostrando {samples} trajetórias do limite de difusão")
        limit_nodes = sample_limit_at(model, fluid, RngStream(cfg.seed, STREAM_LIMIT), samples,
                                      pi.times, reflected=reflect)
        limit_ens = SamplePathEnsemble(limit_nodes, pi, {"model": cfg.model, "source": "limit"})
        node_tuple = tuple(float(t) for t in pi.times)

        rows, per_n = [], []
        replications = 0
        for n in cfg.n:
            logger.info(f"fclt-marginal: n = {n}, {cfg.replications} replicações")
            with self.metrics.time_scale():
                tasks = [(task, node_tuple) for task in self._tasks(n, reflect=reflect)]
                try:
                    nodes = np.asarray(self._map(_fclt_task, tasks))
                except LabError as e:
                    logger.error(f"Falha em fclt-marginal (modelo {cfg.model}, n = {n}): {e}")
                    raise
            self.metrics.record_replications(len(tasks))
            replications += len(tasks)
            u_ens = SamplePathEnsemble(nodes, pi, {"model": cfg.model, "n": n})
            gap = finite_rank_gap(u_ens, limit_ens, pi, cfg.trials, RngStream(cfg.seed, STREAM_FUNCTIONALS, (n,)))
            envelope = finite_rank_envelope(u_ens, limit_ens)
            per_n.append({"n": n, "finite_rank_gap": gap, "finite_rank_envelope": envelope})
            for coord in range(model.d):
                u_T = nodes[:, -1, coord]
                lim_T = limit_nodes[:, -1, coord]
                ks_stat, ks_p = ks_two_sample(u_T, lim_T)
                rows.append({
                    "n": n, "coordinate": coord, "replications": u_T.size,
                    "ks_statistic": ks_stat, "ks_pvalue": ks_p,
                    "w1": marginal_w1(u_T, lim_T),
                    "mean_u": float(u_T.mean()), "var_u": float(np.var(u_T, ddof=1)) if u_T.size > 1 else 0.0,
                    "var_limit": float(np.var(lim_T, ddof=1)),
                    "finite_rank_gap": gap,
                })

        summary = pd.DataFrame(rows)
        inversions = w1_inversions(summary)
        violations = sum(int(row["finite_rank_gap"] > row["finite_rank_envelope"] + 1e-12) for row in per_n)
        violations += excess_inversions(inversions)
        details = {
            "reflected_limit": reflect,
            "limit_samples": samples,
            "partition_size": cfg.partition_size,
            "trials": cfg.trials,
            "finite_rank": per_n,
            "w1_inversions": inversions,
        }
        return ExperimentOutcome(summary=summary, details=details, replications=replications,
                                 violations=violations)

    def _run_interp(self) -> ExperimentOutcome:
        cfg = self.config
        if cfg.model in (None, "poisson"):
            outcome = self._mean_outcome(_interp_poisson_task, "interp_error", -0.5, (-0.6, -0.4))
            bounds = [psi_bound(n, n * (cfg.T / n)) / math.sqrt(n) if n >= 2 else math.nan for n in cfg.n]
        else:
            outcome = self._mean_outcome(_interp_model_task, "interp_error", -0.5, (-0.6, -0.4),
                                         reflect=self._mm1_critical())
            model = _cached_model(cfg.model, self.params_key)
            bounds = [interpolation_bound_terms(model, n, n, cfg.T / n) if n >= 2 else math.nan for n in cfg.n]

        summary = outcome.summary
        summary["psi_bound"] = bounds
        first = summary.iloc[0]
        constant = float(first["mean"] / first["psi_bound"]) if first["psi_bound"] > 0 else math.nan
        summary["fitted_bound"] = constant * summary["psi_bound"]
        lower = summary["mean"] - MC_SE_WIDTH * summary["se"]
        violated = (lower > summary["fitted_bound"] * (1 + 1e-12)) & (summary.index > 0)
        summary["bound_violation"] = violated
        outcome.violations = int(violated.sum())
        outcome.details = {"fitted_constant": constant, "fitted_on_n": int(first["n"])}
        return outcome

    def _run_brownian(self) -> ExperimentOutcome:
        reference = self.config.grid or settings.BROWNIAN_REFERENCE_GRID
        for n in self.config.n:
            if reference % n != 0:
                raise ParameterError(f"n = {n} deve dividir a grade de referência {reference}")
        return self._mean_outcome(_brownian_task, "brownian_interp_error", -0.5, (-0.55, -0.40), grid=reference)

    def _run_hawkes(self) -> ExperimentOutcome:
        cfg = self.config
        grid = cfg.grid or settings.HAWKES_GRID_SIZE
        rows, checks, stats_by_n = [], [], {}
        failures = 0
        mu, kernel = catalog.build_kernel(cfg.params)
        for n, results in self._per_n(_hawkes_task, grid=grid):
            runs = [HawkesRun(mu=mu, kernel=kernel, n=n, T=cfg.T, events=r[0]) for r in results]
            sup_err = np.array([r[1] for r in results])
            residual = np.array([r[2] for r in results])
            residual_refined = np.array([r[3] for r in results])
            check = hawkes_limit_check(runs, rng=RngStream(cfg.seed, STREAM_LIMIT, (n,)), epsilon=cfg.epsilon)
            checks.append(check)
            stats_by_n[n] = sup_err
            failures += representation_failures(residual, residual_refined)
            rows.append({
                "n": n, "replications": len(runs), **self._moments(sup_err),
                "n_mean_sup_squared": float(n * np.mean(sup_err ** 2)),
                "residual_mean": float(residual.mean()),
                "residual_refined_mean": float(residual_refined.mean()),
                "ks_wbar_pvalue": check["ks_wbar_pvalue"],
                "var_xbar": check["xbar_variance"]["variance"],
                "variance_matches": ";".join(check["variance_matches"]),
                "psi_tail_ratio": check["psi_tail_ratio"],
            })
        summary = pd.DataFrame(rows)
        scaled = summary["n_mean_sup_squared"].to_numpy()
        doublings = int(np.sum(scaled[1:] > 2.0 * scaled[:-1]))
        details = {
            "rho": kernel.stationary_rate(mu),
            "kappa": kernel.kappa,
            "grid": grid,
            "lln_doublings": doublings,
            "representation_failures": failures,
            "representation_tolerance": REPRESENTATION_TOLERANCE,
            "checks": checks,
        }
        return ExperimentOutcome(
            summary=summary, details=details, statistics=stats_by_n, statistic_name="hawkes_lln_sup_error",
            expected_slope=-0.5, band=(-0.6, -0.4), violations=doublings + failures,
            replications=sum(v.size for v in stats_by_n.values()),
        )

    def _run_poisson_max(self) -> ExperimentOutcome:
        cfg = self.config
        rows, violations = [], 0
        for n in cfg.n:
            with self.metrics.time_scale():
                for j, nu in enumerate(cfg.nu):
                    row: Dict[str, Any] = {"n": n, "nu": nu}
                    if n < 2 or math.log(n) <= nu:
                        row["applicable"] = False
                        rows.append(row)
                        continue
                    draws = sample_poisson_max(RngStream(cfg.seed, STREAM_REPLICATION, (n, j)), n, nu,
                                               cfg.replications)
                    moments = self._moments(draws)
                    bound = poisson_max_bound(n, nu)
                    bound_exp = poisson_max_bound_exp(n, nu)
                    exact = poisson_max_mean_exact(n, nu)
                    mc_violation = moments["mean"] - MC_SE_WIDTH * moments["se"] > bound
                    exact_violation = exact > bound * (1 + 1e-12)
                    row.update({
                        "applicable": True,
                        "replications": draws.size,
                        "mc_mean": moments["mean"],
                        "mc_se": moments["se"],
                        "exact_mean": exact,
                        "bound": bound,
                        "bound_exp": bound_exp,
                        "closed_form_gap": abs(bound - bound_exp),
                        "violation": bool(mc_violation or exact_violation),
                    })
                    if n >= poisson_max_loglog_threshold(nu):
                        loglog = poisson_max_bound_loglog(n, nu)
                        upper = poisson_max_bound_loglog_upper(n, nu)
                        row.update({"loglog": loglog, "loglog_upper": upper,
                                    "loglog_ordered": bool(loglog <= bound <= upper)})
                        violations += int(not row["loglog_ordered"])
                    violations += int(row["violation"])
                    self.metrics.record_replications(draws.size)
                    rows.append(row)
        summary = pd.DataFrame(rows)
        return ExperimentOutcome(summary=summary, violations=violations,
                                 replications=int(summary.get("replications", pd.Series(dtype=float)).sum()))

    def _run_lipschitz(self) -> ExperimentOutcome:
        cfg = self.config
        G = cfg.grid or _PAIR_GRID
        tasks = [(cfg.seed, pair, cfg.T, G) for pair in range(cfg.pairs)]
        logger.info(f"operator-lipschitz: {cfg.pairs} pares de caminhos, grade {G}")
        with self.metrics.time_scale():
            results = self._map(_lipschitz_task, tasks)
        self.metrics.record_replications(len(tasks))

        records = pd.DataFrame(
            [item for pair in results for item in pair],
            columns=["operator", "path_kind", "lhs", "distance", "constant"],
        )
        records["violation"] = records["lhs"] > records["constant"] * records["distance"] + LIPSCHITZ_SLACK
        ratio = np.divide(records["lhs"].to_numpy(), records["distance"].to_numpy(),
                          out=np.zeros(len(records)), where=records["distance"].to_numpy() > 0)
        records["ratio"] = ratio / records["constant"].to_numpy()
        summary = (
            records.groupby(["operator", "path_kind"], sort=True)
            .agg(pairs=("lhs", "size"), constant=("constant", "max"),
                 max_ratio=("ratio", "max"), violations=("violation", "sum"))
            .reset_index()
        )
        summary["violations"] = summary["violations"].astype(int)
        violations = int(summary["violations"].sum())
        return ExperimentOutcome(summary=summary, violations=violations, replications=len(tasks),
                                 details={"slack": LIPSCHITZ_SLACK, "grid": G})

    # -- execução

    def execute(self) -> ExperimentOutcome:
        cfg = self.config
        runner = self._runners[cfg.kind]
        logger.info(f"Iniciando experimento {cfg.kind} (modelo {cfg.model}, semente {cfg.seed}, "
                    f"{self.workers} workers)")
        outcome = runner()
        self.metrics.record_violations(outcome.violations)
        if outcome.violations:
            logger.warning(f"{cfg.kind}: {outcome.violations} violações de cota registradas")
        return outcome

    def _rate_record(self, outcome: ExperimentOutcome) -> Optional[RateFitRecord]:
        if outcome.statistic_name is None or len(outcome.statistics) < 4:
            return None
        bootstrap = self.config.bootstrap if self.config.bootstrap is not None else settings.BOOTSTRAP_RESAMPLES
        fit = fit_rate(outcome.statistics, bootstrap=bootstrap, rng=RngStream(self.config.seed, STREAM_BOOTSTRAP))
        in_band = None
        if outcome.band is not None:
            in_band = bool(outcome.band[0] <= fit.slope <= outcome.band[1])
        logger.info(f"Inclinação ajustada de {outcome.statistic_name}: {fit.slope:.4f} (R² = {fit.r2:.4f})")
        return RateFitRecord(statistic=outcome.statistic_name, expected_slope=outcome.expected_slope,
                             band=outcome.band, in_band=in_band, fit=fit)

    def run(self, output_dir: Optional[str] = None) -> ExperimentOutcome:
        """Executa o experimento e grava resumo, ajuste, detalhes, gráfico e manifesto"""
        monitor = PerformanceMonitor()
        out_dir = output_dir or self.config.output_dir or settings.OUTPUT_DIR
        outcome = self.execute()

        writer = ReportWriter(out_dir)
        writer.write_summary(outcome.summary)
        record = self._rate_record(outcome)
        if record is not None:
            writer.write_json(record, RATEFIT_FILE)
        details = {
            "kind": self.config.kind,
            "model": self.config.model,
            "replications": outcome.replications,
            "violations": outcome.violations,
            **outcome.details,
        }
        writer.write_json(details, DETAILS_FILE)
        if settings.ENABLE_PLOTS and outcome.statistic_name is not None:
            series = {outcome.statistic_name: [(n, float(np.mean(v))) for n, v in sorted(outcome.statistics.items())]}
            reference = {f"n^{outcome.expected_slope:g}": outcome.expected_slope} if outcome.expected_slope else None
            writer.write_loglog_plot(series, title=" ".join(filter(None, [self.config.kind, self.config.model])),
                                     ylabel=outcome.statistic_name, reference_slopes=reference)
        writer.write_manifest(self.config)

        snap = monitor.log_summary(f"Experimento {self.config.kind} concluído")
        if "rss_bytes" in snap:
            self.metrics.set_rss(snap["rss_bytes"])
        if settings.ENABLE_METRICS_EXPORT:
            self.metrics.export(out_dir, settings.METRICS_TEXTFILE)
        return outcome


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None,
                   output_dir: Optional[str] = None) -> ExperimentOutcome:
    return ExperimentService(config, workers).run(output_dir)
