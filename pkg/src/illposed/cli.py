"""Command-line front end: ``illposed {bench,diagnose,solve,dict}``.

Exit status is 0 on success, 1 on a usage error (bad flags, missing or
malformed config) and 2 when the computation itself fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    THREADS_ENV,
    ExperimentConfig,
    emit_plot_data,
    emit_table,
    plot_estimates,
    run_experiment,
    write_replications,
)
from .dictionary import build_dictionary
from .diagnostics import check_recovery_conditions
from .errors import IllPosedError, InvalidArgumentError
from .lasso import weighted_lasso
from .model_select import default_levels, dwt_forward, lasso_cv
from .precondition import precondition
from .problem import (
    KERNELS,
    Grid,
    InverseProblem,
    build_convolution_operator,
    make_problem,
    read_problem_csv,
)

log = logging.getLogger("illposed")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _threads_default():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="illposed", description="Sparse recovery for linear ill-posed problems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    b = sub.add_parser("bench", help="run a Monte Carlo experiment")
    b.add_argument("--config", help="JSON file with ExperimentConfig keys")
    b.add_argument("--seed", type=int, help="master seed")
    b.add_argument("--reps", type=int, help="number of replications")
    b.add_argument("--snr", type=float)
    b.add_argument("--fn", choices=["f1", "f2", "f3"])
    b.add_argument("--n", type=int)
    b.add_argument("--out", help="report path (stdout when omitted)")
    b.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    b.add_argument("--format", choices=["csv", "markdown"])
    b.add_argument("--per-replication", dest="per_replication_csv",
                   help="also dump per-replication errors to this CSV")
    b.add_argument("--plot", dest="plot_csv", help="write plot data of replication 0 to this CSV")

    d = sub.add_parser("diagnose", help="check recovery conditions for a dictionary")
    _dictionary_flags(d)
    d.add_argument("--fn", choices=["f1", "f2", "f3"], default="f1")
    d.add_argument("--snr", type=float, default=3.0)
    d.add_argument("--s", type=int, default=4)
    d.add_argument("--delta", type=float, default=0.5)
    d.add_argument("--tau", type=float, default=1.0)
    d.add_argument("--reps", type=int, default=20, help="noise draws for the fit-sparsity frequency")
    d.add_argument("--probes", type=int, default=2000)
    d.add_argument("--mode", choices=["auto", "exhaustive", "probe"], default="auto")
    d.add_argument("--out")

    s = sub.add_parser("solve", help="deconvolve one data set given as a CSV of (x, y)")
    s.add_argument("--input", required=True)
    s.add_argument("--kernel", choices=sorted(KERNELS), default="exp")
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--sigma", type=float,
                   help="per-sample noise std; estimated from the finest wavelet scale if omitted")
    s.add_argument("--N", type=int, default=200)
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--out", help="output CSV (stdout when omitted)")

    g = sub.add_parser("dict", help="write a dictionary to CSV")
    _dictionary_flags(g)
    g.add_argument("--out", required=True)
    return p


def _dictionary_flags(sp):
    sp.add_argument("--kind", choices=["laguerre", "rows", "cols", "structured"], default="laguerre")
    sp.add_argument("--n", type=int, default=32)
    sp.add_argument("--p", type=int, default=64)
    sp.add_argument("--T", type=float, default=4.0)
    sp.add_argument("--seed", type=int, default=0)


def _load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})")
        if not isinstance(data, dict):
            raise UsageError(f"{path}: expected a JSON object")
    overrides = {"master_seed": args.seed, "replications": args.reps, "snr": args.snr,
                 "test_function": args.fn, "n": args.n, "out": args.out, "format": args.format,
                 "per_replication_csv": args.per_replication_csv, "plot_csv": args.plot_csv}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.from_dict(data)
    except (InvalidArgumentError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}")


def _write(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    threads = args.threads if args.threads is not None else _threads_default()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    report = run_experiment(cfg, threads=threads)
    _write(emit_table(report, cfg.format), cfg.out)
    if cfg.per_replication_csv:
        write_replications(report, cfg.per_replication_csv)
    if cfg.plot_csv:
        problem, estimates = plot_estimates(cfg)
        emit_plot_data(problem, estimates, cfg.plot_csv)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    problem = make_problem(args.fn, args.n, args.snr, T=args.T, seed=args.seed,
                           snr_convention="continuous")
    D = build_dictionary(args.kind, problem.grid, p=args.p, seed=args.seed)
    system = precondition(problem, D, args.tau)
    G, nu, a0 = system.G, system.nu, system.alpha0
    Psi = system.Psi
    q = problem.Q @ problem.f_true

    def fit(rng):
        y = q + problem.noise_scale * rng.standard_normal(problem.n)
        return weighted_lasso(G, Psi.T @ y, nu, a0)

    K0 = 4.0 / (1.0 - args.delta) ** 2
    report = check_recovery_conditions(D.Phi, nu, a0, args.s, args.delta, K0, fit, problem.f_true,
                                       replications=args.reps, seed=args.seed,
                                       n_probes=args.probes, lamin_mode=args.mode)
    _write(report.to_json(indent=2) + "\n", args.out)
    return EXIT_OK


def estimate_noise_mad(y) -> float:
    """Noise std from the median absolute finest-scale wavelet coefficient."""
    y = np.asarray(y, dtype=float)
    levels = default_levels(y.size)
    if levels == 0:
        raise InvalidArgumentError("series too short to estimate the noise level")
    finest = dwt_forward(y, levels)[y.size // 2:]
    return float(np.median(np.abs(finest)) / 0.6744897501960817)


def cmd_solve(args) -> int:
    if not Path(args.input).is_file():
        raise UsageError(f"input file not found: {args.input}")
    data = read_problem_csv(args.input)
    x, y = data["x"], data["y"]
    n = y.size
    grid = Grid(args.T, n)
    if not np.allclose(x, grid.points, rtol=1e-9, atol=1e-12):
        raise InvalidArgumentError(f"{args.input}: x must be the grid (i + 1) T / n for T={args.T}")
    sigma_eff = args.sigma if args.sigma is not None else estimate_noise_mad(y)
    if sigma_eff < 0:
        raise UsageError("--sigma must be nonnegative")
    Q = build_convolution_operator(args.kernel, grid)
    problem = InverseProblem(grid=grid, Q=Q, y=y, sigma=sigma_eff / np.sqrt(grid.spacing))
    D = build_dictionary("laguerre", grid)
    res = lasso_cv(problem, D, N=args.N, tau=args.tau, sigma_eff=sigma_eff)
    lines = ["x,f_hat"] + [f"{float(a)!r},{float(v)!r}" for a, v in zip(x, res.f_hat)]
    _write("\n".join(lines) + "\n", args.out)
    log.info("selected k=%d (alpha=%.4g), support %d", res.selection.k_hat,
             res.selection.alpha_hat, res.selection.fit.support_size)
    return EXIT_OK


def cmd_dict(args) -> int:
    D = build_dictionary(args.kind, Grid(args.T, args.n), p=args.p, seed=args.seed)
    D.to_csv(args.out)
    return EXIT_OK


COMMANDS = {"bench": cmd_bench, "diagnose": cmd_diagnose, "solve": cmd_solve, "dict": cmd_dict}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"illposed {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IllPosedError, OSError, np.linalg.LinAlgError) as exc:
        print(f"illposed {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
