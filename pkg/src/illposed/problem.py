"""Discretized causal convolution problems and synthetic observations.

The forward model is ``y = Q f + noise`` on a uniform grid of ``n`` points
``x_i = (i + 1) T / n``.  ``Q`` integrates ``g(x - t) f(t)`` over ``[0, x]``
with the composite trapezoid rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "Grid",
    "InverseProblem",
    "TestFunction",
    "KERNELS",
    "build_convolution_operator",
    "evaluate_test_function",
    "sigma_from_snr",
    "synthesize_observations",
    "make_problem",
    "save_problem_csv",
    "read_problem_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``(0, T]`` that excludes the origin."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgumentError(f"T must be positive, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"n must be a positive integer, got {self.n}")

    @property
    def spacing(self) -> float:
        return self.T / self.n

    @property
    def points(self) -> np.ndarray:
        return np.arange(1, self.n + 1) * (self.T / self.n)


class TestFunction(str, Enum):
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"

    __test__ = False  # keep pytest from collecting the enum

    @classmethod
    def parse(cls, value) -> "TestFunction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown test function {value!r}") from None


_CLOSED_FORMS: dict[TestFunction, Callable[[np.ndarray], np.ndarray]] = {
    TestFunction.F1: lambda x: x**2 * np.exp(-3.0 * x),
    TestFunction.F2: lambda x: x**4 * np.exp(-4.0 * x),
    TestFunction.F3: lambda x: np.exp(-x / 2.0),
}

KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp": lambda x: np.exp(-x),
}


@dataclass(frozen=True, eq=False)
class InverseProblem:
    grid: Grid
    Q: np.ndarray
    y: np.ndarray
    sigma: float
    f_true: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def noise_scale(self) -> float:
        """Per-sample noise standard deviation ``sigma * sqrt(T / n)``."""
        return self.sigma * np.sqrt(self.grid.T / self.grid.n)

    @property
    def q(self) -> Optional[np.ndarray]:
        if self.f_true is None:
            return None
        return self.Q @ self.f_true


def evaluate_test_function(fid, grid: Grid) -> np.ndarray:
    return _CLOSED_FORMS[TestFunction.parse(fid)](grid.points)


def build_convolution_operator(kernel, grid: Grid) -> np.ndarray:
    """Lower-triangular trapezoid discretization of ``int_0^x g(x - t) f(t) dt``.

    The quadrature nodes are ``0, x_1, ..., x_i``; the unknown value ``f(0)``
    is replaced by ``f(x_1)``, which folds the first cell onto column 0.

    Parameters
    ----------
    kernel : callable or str
        Vectorized kernel ``g`` or a key of :data:`KERNELS`.
    grid : Grid

    Returns
    -------
    ndarray, shape (n, n)
    """
    if isinstance(kernel, str):
        try:
            kernel = KERNELS[kernel]
        except KeyError:
            raise InvalidArgumentError(f"unknown kernel {kernel!r}") from None
    n, h = grid.n, grid.spacing
    x = grid.points
    # lags[i, j] = x_i - x_j, only the lower triangle is used
    lags = np.subtract.outer(x, x)
    g = np.asarray(kernel(np.where(lags >= 0, lags, 0.0)), dtype=float)
    g = np.broadcast_to(g, (n, n))
    Q = np.tril(h * g)
    Q[np.diag_indices(n)] *= 0.5
    # node t = 0 contributes h/2 * g(x_i) * f(x_1)
    g_origin = np.broadcast_to(np.asarray(kernel(x), dtype=float), (n,))
    Q[:, 0] += 0.5 * h * g_origin
    return Q


def sigma_from_snr(q, snr: float, T: float, convention: str = "sample") -> float:
    """Noise level ``sigma`` giving the requested signal-to-noise ratio.

    ``convention="sample"`` returns ``||q|| / (snr sqrt(T))`` so that the RMS
    of ``q`` over the per-sample noise std ``sigma sqrt(T/n)`` equals ``snr``.
    ``convention="continuous"`` returns ``RMS(q) / snr``, i.e. the ratio is
    taken against ``sigma`` itself and the per-sample noise shrinks like
    ``sqrt(T/n)`` as the grid is refined.
    """
    q = np.asarray(q, dtype=float)
    if not snr > 0:
        raise InvalidArgumentError(f"snr must be positive, got {snr}")
    norm = np.linalg.norm(q)
    if norm == 0:
        raise InvalidArgumentError("q is identically zero; SNR is undefined")
    if convention == "sample":
        return norm / (snr * np.sqrt(T))
    if convention == "continuous":
        return norm / (snr * np.sqrt(q.size))
    raise InvalidArgumentError(f"unknown SNR convention {convention!r}")


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def synthesize_observations(Q, f, sigma: float, grid: Grid, seed) -> np.ndarray:
    """Draw ``y = Q f + sigma sqrt(T/n) xi`` with ``xi`` standard normal."""
    Q = np.asarray(Q, dtype=float)
    f = np.asarray(f, dtype=float)
    if Q.shape != (grid.n, grid.n) or f.shape != (grid.n,):
        raise InvalidArgumentError(
            f"dimension mismatch: Q {Q.shape}, f {f.shape}, grid n={grid.n}"
        )
    q = Q @ f
    if sigma == 0:
        return q
    xi = _as_generator(seed).standard_normal(grid.n)
    return q + sigma * np.sqrt(grid.T / grid.n) * xi


def make_problem(
    test_function="f1",
    n: int = 32,
    snr: float = 3.0,
    T: float = 4.0,
    kernel="exp",
    seed=None,
    snr_convention: str = "sample",
    sigma: Optional[float] = None,
) -> InverseProblem:
    """Build a complete synthetic problem; ``sigma`` overrides ``snr``."""
    grid = Grid(T, n)
    Q = build_convolution_operator(kernel, grid)
    f = evaluate_test_function(test_function, grid)
    if sigma is None:
        sigma = sigma_from_snr(Q @ f, snr, T, convention=snr_convention)
    y = synthesize_observations(Q, f, sigma, grid, seed)
    meta = {"test_function": TestFunction.parse(test_function).value,
            "kernel": kernel if isinstance(kernel, str) else "custom",
            "snr": snr, "snr_convention": snr_convention}
    return InverseProblem(grid=grid, Q=Q, y=y, sigma=float(sigma), f_true=f, meta=meta)


def save_problem_csv(problem: InverseProblem, path) -> None:
    """Write columns ``x, f_true, q, y`` (truth columns empty when unknown)."""
    x = problem.grid.points
    f = problem.f_true
    q = problem.q
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "f_true", "q", "y"])
        for i in range(problem.n):
            w.writerow([
                repr(float(x[i])),
                "" if f is None else repr(float(f[i])),
                "" if q is None else repr(float(q[i])),
                repr(float(problem.y[i])),
            ])


def read_problem_csv(path) -> dict[str, Optional[np.ndarray]]:
    """Read a problem CSV; returns arrays keyed by column name.

    Only ``x`` and ``y`` are mandatory; missing or blank columns map to None.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InvalidArgumentError(f"{path}: no data rows")
    cols: dict[str, Optional[np.ndarray]] = {}
    for name in ("x", "f_true", "q", "y"):
        vals = [r.get(name) for r in rows]
        if any(v in (None, "") for v in vals):
            cols[name] = None
        else:
            cols[name] = np.array([float(v) for v in vals])
    if cols["x"] is None or cols["y"] is None:
        raise InvalidArgumentError(f"{path}: columns 'x' and 'y' are required")
    return cols
