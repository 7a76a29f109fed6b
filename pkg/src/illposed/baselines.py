"""Competitor estimators: truncated SVD and Laguerre least squares, oracle tuned."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .dictionary import laguerre_function
from .errors import (
    IllPosedError,
    InvalidArgumentError,
    OracleUnavailableError,
    RankDeficiencyError,
    TruncationLimitError,
)
from .problem import Grid, InverseProblem

__all__ = [
    "BaselineEstimate",
    "truncated_svd_estimator",
    "laguerre_basis",
    "laguerre_projection_estimator",
    "oracle_select",
    "oracle_select_scale",
    "DEFAULT_K_MAX",
    "DEFAULT_LAGUERRE_SCALE",
    "SCALE_BRACKET",
]

DEFAULT_K_MAX = 20
DEFAULT_LAGUERRE_SCALE = 0.25
SCALE_BRACKET = (0.25, 0.5, 1.0, 2.0)
SVD_CUTOFF = 1e-14
# errors closer than this (relative to RMS of f) count as ties
TIE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class BaselineEstimate:
    f_hat: np.ndarray
    method: str
    tuning: int
    oracle: bool
    scale: Optional[float] = None
    error: Optional[float] = None


def _svd(Q):
    U, s, Vt = np.linalg.svd(np.asarray(Q, dtype=float))
    return U, s, Vt


def truncated_svd_estimator(Q, y, K: int, svd=None) -> np.ndarray:
    """``sum_{i <= K} (u_i^T y / s_i) v_i`` with singular values in decreasing order."""
    U, s, Vt = _svd(Q) if svd is None else svd
    n = s.size
    if not 1 <= K <= n:
        raise InvalidArgumentError(f"K must lie in [1, {n}], got {K}")
    usable = int(np.count_nonzero(s >= SVD_CUTOFF * s[0]))
    if K > usable:
        raise TruncationLimitError(f"singular value {K} is below {SVD_CUTOFF:g} * s_1", usable)
    coef = (U[:, :K].T @ np.asarray(y, dtype=float)) / s[:K]
    return Vt[:K].T @ coef


def laguerre_basis(grid: Grid, K: int, b: float) -> np.ndarray:
    """n x K matrix of ``phi_{0,b}, ..., phi_{K-1,b}`` on the grid."""
    return np.column_stack([laguerre_function(k, b, grid.points) for k in range(K)])


def _qr_lstsq(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    Qf, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(float).eps * (d[0] if d.size else 0.0)
    rank = int(np.count_nonzero(d > tol))
    if rank < A.shape[1]:
        raise RankDeficiencyError(f"Q L has {A.shape[1]} columns", rank)
    c = np.empty(A.shape[1])
    c[piv] = linalg.solve_triangular(R, Qf.T @ y)
    return c


def laguerre_projection_estimator(Q, y, grid: Grid, K: int, b: float) -> np.ndarray:
    """Least-squares fit of ``y`` by ``Q L c`` over the first ``K`` Laguerre functions."""
    n = grid.n
    if not 1 <= K <= n:
        raise InvalidArgumentError(f"K must lie in [1, {n}], got {K}")
    if not b > 0:
        raise InvalidArgumentError(f"scale b must be positive, got {b}")
    L = laguerre_basis(grid, K, b)
    c = _qr_lstsq(np.asarray(Q, dtype=float) @ L, np.asarray(y, dtype=float))
    return L @ c


def _rmse(f_hat, f) -> float:
    return float(np.linalg.norm(f_hat - f) / np.sqrt(f.size))


def oracle_select(method: str, problem: InverseProblem, K_range: Optional[Sequence[int]] = None,
                  b: float = DEFAULT_LAGUERRE_SCALE) -> BaselineEstimate:
    """Tune ``K`` against the true signal (simulation only).

    Values of ``K`` the estimator cannot handle (truncation limit, rank
    deficiency) are skipped.  Ties go to the smallest ``K``; errors within
    ``TIE_RTOL * RMS(f)`` of each other are treated as tied so that rounding
    noise does not decide between exact fits.
    """
    if problem.f_true is None:
        raise OracleUnavailableError("oracle tuning needs the true signal")
    n = problem.n
    if K_range is None:
        K_range = range(1, min(n, DEFAULT_K_MAX) + 1)
    K_range = sorted(set(int(K) for K in K_range))
    f = problem.f_true
    if method == "svd":
        svd = _svd(problem.Q)
        make = lambda K: truncated_svd_estimator(problem.Q, problem.y, K, svd)
    elif method == "laguerre":
        make = lambda K: laguerre_projection_estimator(problem.Q, problem.y, problem.grid, K, b)
    else:
        raise InvalidArgumentError(f"unknown baseline method {method!r}")
    tie = TIE_RTOL * max(float(np.sqrt(np.mean(f**2))), np.finfo(float).tiny)
    best = None
    for K in K_range:
        try:
            f_hat = make(K)
        except (TruncationLimitError, RankDeficiencyError):
            continue
        err = _rmse(f_hat, f)
        if best is None or err < best[0] - tie:
            best = (err, K, f_hat)
    if best is None:
        raise IllPosedError(f"no usable K in {K_range} for method {method!r}")
    err, K, f_hat = best
    return BaselineEstimate(f_hat=f_hat, method=method, tuning=K, oracle=True,
                            scale=b if method == "laguerre" else None, error=err)


def oracle_select_scale(problem: InverseProblem, K_range=None,
                        scales: Sequence[float] = SCALE_BRACKET) -> BaselineEstimate:
    """Laguerre oracle over both ``K`` and the scale ``b``."""
    fits = [oracle_select("laguerre", problem, K_range, b) for b in scales]
    return min(fits, key=lambda e: e.error)
