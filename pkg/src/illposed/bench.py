"""Monte Carlo harness for the convolution benchmark.

Each replication ``r`` draws from its own stream
``SeedSequence(master_seed, spawn_key=(r,))``, so results do not depend on
the number of worker threads or the order in which replications finish.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import (
    DEFAULT_K_MAX,
    DEFAULT_LAGUERRE_SCALE,
    SCALE_BRACKET,
    oracle_select,
    oracle_select_scale,
)
from .dictionary import DEFAULT_DEGREES, DEFAULT_SCALES, Dictionary, build_dictionary
from .errors import BenchmarkAborted, IllPosedError, InvalidArgumentError
from .model_select import lasso_cv
from .problem import (
    Grid,
    InverseProblem,
    TestFunction,
    build_convolution_operator,
    evaluate_test_function,
    sigma_from_snr,
)

__all__ = [
    "ESTIMATORS",
    "ExperimentConfig",
    "EstimatorSummary",
    "ExperimentReport",
    "run_experiment",
    "replication_estimates",
    "emit_table",
    "emit_plot_data",
    "FileError",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("laguerre_oracle", "lasso_cv", "svd_oracle", "laguerre_oracle_b")
FAIL_FRACTION = 0.05
THREADS_ENV = "ILLPOSED_THREADS"


class FileError(IllPosedError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)


@dataclass
class ExperimentConfig:
    test_function: str = "f1"
    n: int = 32
    snr: float = 3.0
    T: float = 4.0
    kernel: str = "exp"
    dictionary: str = "laguerre"
    dictionary_p: int = 64
    laguerre_degrees: list = field(default_factory=lambda: list(DEFAULT_DEGREES))
    laguerre_scales: list = field(default_factory=lambda: list(DEFAULT_SCALES))
    N_grid: int = 200
    replications: int = 100
    tau: float = 1.0
    master_seed: int = 0
    estimators: list = field(default_factory=lambda: list(ESTIMATORS))
    snr_convention: str = "continuous"
    laguerre_scale: float = DEFAULT_LAGUERRE_SCALE
    laguerre_scale_bracket: list = field(default_factory=lambda: list(SCALE_BRACKET))
    K_max: int = DEFAULT_K_MAX
    selection_image: str = "QPhi"
    out: Optional[str] = None
    format: str = "csv"
    per_replication_csv: Optional[str] = None
    plot_csv: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        TestFunction.parse(self.test_function)
        if int(self.replications) < 1:
            raise InvalidArgumentError("replications must be >= 1")
        if int(self.n) < 2:
            raise InvalidArgumentError("n must be >= 2")
        if not self.snr > 0 or not self.T > 0:
            raise InvalidArgumentError("snr and T must be positive")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise InvalidArgumentError(f"unknown estimators {sorted(unknown)}")
        if "lasso_cv" in self.estimators and self.n & (self.n - 1):
            raise InvalidArgumentError("lasso_cv needs n to be a power of 2 (wavelet pilot)")
        if self.format not in ("csv", "markdown"):
            raise InvalidArgumentError(f"format must be csv or markdown, got {self.format!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise InvalidArgumentError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EstimatorSummary:
    mean_error: float
    std_error: float
    errors: list
    tuning: list


@dataclass
class ExperimentReport:
    config: dict
    estimators: dict
    failed_replications: list
    replications: int

    @property
    def n_failed(self) -> int:
        return len(self.failed_replications)


class _Context:
    """Quantities shared by every replication of one experiment."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.grid = Grid(cfg.T, cfg.n)
        self.Q = build_convolution_operator(cfg.kernel, self.grid)
        self.f = evaluate_test_function(cfg.test_function, self.grid)
        self.q = self.Q @ self.f
        self.sigma = sigma_from_snr(self.q, cfg.snr, cfg.T, convention=cfg.snr_convention)
        self.sigma_eff = self.sigma * np.sqrt(cfg.T / cfg.n)
        self.K_range = range(1, min(cfg.n, cfg.K_max) + 1)
        self.fixed_dict = None
        if cfg.dictionary == "laguerre":
            self.fixed_dict = build_dictionary("laguerre", self.grid, degrees=cfg.laguerre_degrees,
                                               scales=cfg.laguerre_scales)

    def dictionary(self, rng) -> Dictionary:
        if self.fixed_dict is not None:
            return self.fixed_dict
        return build_dictionary(self.cfg.dictionary, self.grid, p=self.cfg.dictionary_p,
                                seed=int(rng.integers(2**63)))

    def rmse(self, f_hat) -> float:
        return float(np.linalg.norm(f_hat - self.f) / np.sqrt(self.grid.n))


def replication_estimates(ctx: _Context, r: int) -> tuple[InverseProblem, dict]:
    """Problem and ``{estimator: (f_hat, tuning)}`` for replication ``r``."""
    cfg = ctx.cfg
    noise_ss, dict_ss = np.random.SeedSequence(cfg.master_seed, spawn_key=(r,)).spawn(2)
    xi = np.random.default_rng(noise_ss).standard_normal(cfg.n)
    problem = InverseProblem(grid=ctx.grid, Q=ctx.Q, y=ctx.q + ctx.sigma_eff * xi,
                             sigma=ctx.sigma, f_true=ctx.f)
    out = {}
    for name in cfg.estimators:
        if name == "lasso_cv":
            res = lasso_cv(problem, ctx.dictionary(np.random.default_rng(dict_ss)),
                           N=cfg.N_grid, tau=cfg.tau, image=cfg.selection_image)
            out[name] = (res.f_hat, res.selection.k_hat)
        elif name == "svd_oracle":
            est = oracle_select("svd", problem, ctx.K_range)
            out[name] = (est.f_hat, est.tuning)
        elif name == "laguerre_oracle":
            est = oracle_select("laguerre", problem, ctx.K_range, cfg.laguerre_scale)
            out[name] = (est.f_hat, est.tuning)
        elif name == "laguerre_oracle_b":
            est = oracle_select_scale(problem, ctx.K_range, cfg.laguerre_scale_bracket)
            out[name] = (est.f_hat, f"{est.tuning}@b={est.scale:g}")
    return problem, out


def _run_one(ctx: _Context, r: int):
    try:
        _, est = replication_estimates(ctx, r)
    except (IllPosedError, np.linalg.LinAlgError) as exc:
        log.warning("replication %d failed: %s", r, exc)
        return r, None
    return r, {k: (ctx.rmse(f_hat), tuning) for k, (f_hat, tuning) in est.items()}


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    """Run all replications and aggregate mean and sample std of the error."""
    config.validate()
    threads = _default_threads() if threads is None else max(1, int(threads))
    ctx = _Context(config)
    R = int(config.replications)
    if threads == 1:
        results = [_run_one(ctx, r) for r in range(R)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _run_one(ctx, r), range(R)))
    results.sort(key=lambda t: t[0])
    failed = [r for r, res in results if res is None]
    if len(failed) > FAIL_FRACTION * R:
        raise BenchmarkAborted(f"{len(failed)} of {R} replications failed (limit {FAIL_FRACTION:.0%})")
    ok = [res for _, res in results if res is not None]
    summaries = {}
    for name in config.estimators:
        errs = np.array([res[name][0] for res in ok])
        tuning = [res[name][1] for res in ok]
        std = float(np.std(errs, ddof=1)) if errs.size > 1 else 0.0
        summaries[name] = EstimatorSummary(float(np.mean(errs)), std, errs.tolist(), tuning)
    return ExperimentReport(config=config.to_dict(), estimators=summaries,
                            failed_replications=failed, replications=R)


def emit_table(report: ExperimentReport, format: str = "csv") -> str:
    """Render one row per estimator: mean error and its standard deviation."""
    names = list(report.estimators)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "mean_error", "std_error", "replications", "failed"])
        for name in names:
            s = report.estimators[name]
            w.writerow([name, repr(s.mean_error), repr(s.std_error), len(s.errors),
                        report.n_failed])
        return buf.getvalue()
    if format == "markdown":
        cfg = report.config
        title = (f"f = {cfg.get('test_function')}, SNR = {cfg.get('snr')}, n = {cfg.get('n')}"
                 if cfg else "")
        lines = [f"<!-- {title} -->", "| Estimator | Mean error | (Std) |", "|---|---:|---:|"]
        for name in names:
            s = report.estimators[name]
            lines.append(f"| {name} | {s.mean_error:.6f} | ({s.std_error:.6f}) |")
        return "\n".join(lines) + "\n"
    raise InvalidArgumentError(f"unknown table format {format!r}")


def write_replications(report: ExperimentReport, path) -> None:
    names = list(report.estimators)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row"] + [f"{n}_error" for n in names] + [f"{n}_tuning" for n in names])
            count = len(next(iter(report.estimators.values())).errors) if names else 0
            for i in range(count):
                s = [report.estimators[n] for n in names]
                w.writerow([i] + [repr(e.errors[i]) for e in s] + [e.tuning[i] for e in s])
    except OSError as exc:
        raise FileError(path, exc.strerror or str(exc)) from exc


def emit_plot_data(problem: InverseProblem, estimates: dict, path, path_fits=None) -> Path:
    """CSV with ``x``, ``f_true`` and one column per named estimate."""
    n = problem.n
    f = problem.f_true
    if f is None:
        raise InvalidArgumentError("plot data needs the true signal")
    for name, v in estimates.items():
        if np.asarray(v).shape != (n,):
            raise InvalidArgumentError(f"estimate {name!r} has length {np.size(v)}, expected {n}")
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "f_true", *estimates])
            x = problem.grid.points
            for i in range(n):
                w.writerow([repr(float(x[i])), repr(float(f[i]))]
                           + [repr(float(np.asarray(v)[i])) for v in estimates.values()])
    except OSError as exc:
        raise FileError(path, exc.strerror or str(exc)) from exc
    return path


def plot_estimates(config: ExperimentConfig, replication: int = 0):
    """Problem and estimates of one replication, ready for :func:`emit_plot_data`."""
    problem, est = replication_estimates(_Context(config), replication)
    return problem, {k: v[0] for k, v in est.items()}
