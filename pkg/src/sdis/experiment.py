"""Replicated estimation experiments on the benchmark suite.

A run row is one independent estimate; the aggregate report carries the
usual efficiency summary: empirical CoV across replications, the mean of
the per-run CoV predictions, mean evaluation cost, and relative
efficiency against plain Monte Carlo,

    relEff = Pf (1 - Pf) / (MSE * mean cost),

with MSE = bias^2 + variance taken against the reference probability.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import math
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context

import numpy as np

from .engine import RunResult, SdisParams, run
from .model import BenchmarkCase, benchmark
from .sus import SusParams, run_sus

__all__ = [
    "ExperimentConfig",
    "RunRow",
    "AggregateReport",
    "rel_eff",
    "run_experiment",
    "emit",
]

_METHODS = ("sdis", "sus")


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str
    dim: int | None = None
    method: str = "sdis"
    reps: int = 100
    seed: int = 0
    workers: int = 1
    sdis: SdisParams = field(default_factory=SdisParams)
    sus: SusParams = field(default_factory=SusParams)

    def __post_init__(self):
        if self.method == "enhanced-sdis":
            object.__setattr__(self, "method", "sdis")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS} (or enhanced-sdis)")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        benchmark(self.benchmark, self.dim)  # validates name and dimension

    @property
    def case(self) -> BenchmarkCase:
        return benchmark(self.benchmark, self.dim)


@dataclass
class RunRow:
    seed: int
    pf_hat: float
    cov_hat: float
    total_evals: int
    levels: int
    fallback: bool
    converged: bool


def rel_eff(pf_ref: float, estimates: np.ndarray, mean_cost: float) -> float:
    """Efficiency relative to plain Monte Carlo at equal cost; needs at
    least two replications for the variance term."""
    estimates = np.asarray(estimates, dtype=float)
    if len(estimates) < 2:
        return math.nan
    bias = float(estimates.mean()) - pf_ref
    mse = bias * bias + float(estimates.var(ddof=1))
    if mse <= 0.0 or mean_cost <= 0.0:
        return math.inf
    return pf_ref * (1.0 - pf_ref) / (mse * mean_cost)


@dataclass
class AggregateReport:
    config: ExperimentConfig
    rows: list[RunRow]
    pf_ref: float
    created_at: str

    @property
    def mean_pf(self) -> float:
        return float(np.mean([r.pf_hat for r in self.rows]))

    @property
    def cov_empirical(self) -> float:
        pf = np.array([r.pf_hat for r in self.rows])
        if len(pf) < 2 or pf.mean() <= 0:
            return math.nan
        return float(pf.std(ddof=1) / pf.mean())

    @property
    def mean_cov_hat(self) -> float:
        return float(np.mean([r.cov_hat for r in self.rows]))

    @property
    def mean_evals(self) -> float:
        return float(np.mean([r.total_evals for r in self.rows]))

    @property
    def rel_eff(self) -> float:
        return rel_eff(self.pf_ref, [r.pf_hat for r in self.rows], self.mean_evals)

    @property
    def fallback_fraction(self) -> float:
        return float(np.mean([r.fallback for r in self.rows]))

    def to_dict(self) -> dict:
        return {
            "benchmark": self.config.benchmark,
            "dim": self.config.case.dim,
            "method": self.config.method,
            "reps": self.config.reps,
            "base_seed": self.config.seed,
            "pf_ref": self.pf_ref,
            "mean_pf": self.mean_pf,
            "cov_empirical": self.cov_empirical,
            "mean_cov_hat": self.mean_cov_hat,
            "mean_evals": self.mean_evals,
            "rel_eff": self.rel_eff,
            "fallback_fraction": self.fallback_fraction,
            "mean_levels": float(np.mean([r.levels for r in self.rows])),
            "created_at": self.created_at,
            "runs": [asdict(r) for r in self.rows],
        }


def _run_one(config: ExperimentConfig, rep: int) -> RunRow:
    case = config.case
    L = case.make()
    rng = np.random.default_rng(config.seed + rep)
    if config.method == "sdis":
        res: RunResult = run(L, config.sdis, rng)
        return RunRow(config.seed + rep, res.pf_hat, res.cov_hat, res.total_evals,
                      res.n_levels, res.fallback, res.converged)
    res = run_sus(L, 1.0, config.sus, rng)
    return RunRow(config.seed + rep, res.pf_hat, res.cov_hat, res.total_evals,
                  len(res.thresholds) - 1, False, True)


def run_experiment(config: ExperimentConfig) -> AggregateReport:
    """Independent replications with per-replication seeds seed+0 .. seed+reps-1;
    row order is seed order regardless of worker scheduling."""
    reps = range(config.reps)
    if config.workers == 1:
        rows = [_run_one(config, i) for i in reps]
    else:
        ctx = get_context("fork")
        with ctx.Pool(config.workers) as pool:
            rows = pool.starmap(_run_one, [(config, i) for i in reps])
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return AggregateReport(config, rows, config.case.pf_ref, stamp)


_CSV_FIELDS = ["seed", "pf_hat", "cov_hat", "total_evals", "levels",
               "fallback", "converged"]


def emit(report: AggregateReport, fmt: str = "json") -> str:
    """Serialize a report: json (full, deterministic key order), csv
    (one row per replication), or table (human-readable summary)."""
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=_CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in report.rows:
            writer.writerow(asdict(row))
        return buf.getvalue()
    if fmt == "table":
        d = report.to_dict()
        lines = [
            f"benchmark            {d['benchmark']} (n={d['dim']})",
            f"method               {d['method']}",
            f"replications         {d['reps']}",
            f"reference Pf         {d['pf_ref']:.4e}",
            f"mean Pf estimate     {d['mean_pf']:.4e}",
            f"empirical CoV        {d['cov_empirical']:.3f}",
            f"mean estimated CoV   {d['mean_cov_hat']:.3f}",
            f"mean evaluations     {d['mean_evals']:.1f}",
            f"relative efficiency  {d['rel_eff']:.1f}",
            f"fallback fraction    {d['fallback_fraction']:.2f}",
            f"mean levels          {d['mean_levels']:.2f}",
        ]
        return "\n".join(lines) + "\n"
    raise ValueError("format must be json, csv or table")
