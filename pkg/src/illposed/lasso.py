"""Weighted Lasso on the covariance form.

Minimizes ``F(t) = t^T G t - 2 t^T b + alpha * sum_j nu_j |t_j|`` by cyclic
coordinate descent.  ``G = Phi^T Phi`` and ``b = Psi^T y`` come from
:mod:`illposed.precondition`; up to the constant ``||z||^2`` this is
``||Phi t - z||^2 + alpha ||diag(nu) t||_1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np

from .errors import DegenerateAtomError, InvalidArgumentError

__all__ = [
    "LassoFit",
    "LassoPath",
    "alpha_max",
    "objective",
    "kkt_residual",
    "weighted_lasso",
    "lasso_path",
    "cardinality_restricted_fit",
    "path_objectives",
]

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
POLISH_EVERY = 1000


@dataclass(frozen=True, eq=False)
class LassoFit:
    theta: np.ndarray
    alpha: float
    support: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool
    objective: float
    fallback: bool = False

    @property
    def support_size(self) -> int:
        return int(self.support.size)


@dataclass(frozen=True, eq=False)
class LassoPath:
    """Fits along a decreasing penalty grid; ``alphas[0] == alpha_max``."""

    alphas: np.ndarray
    fits: tuple
    alpha_max: float

    def __len__(self):
        return len(self.fits)

    @property
    def coefs(self) -> np.ndarray:
        return np.array([f.theta for f in self.fits])

    @property
    def support_sizes(self) -> np.ndarray:
        return np.array([f.support_size for f in self.fits])

    def to_csv(self, path, coefficients: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["alpha", "support_size", "kkt_residual", "objective"]
            if coefficients and self.fits:
                header += [f"theta{j}" for j in range(self.fits[0].theta.size)]
            w.writerow(header)
            for a, f in zip(self.alphas, self.fits):
                row = [repr(float(a)), f.support_size, repr(f.kkt_residual), repr(f.objective)]
                if coefficients:
                    row += [repr(float(v)) for v in f.theta]
                w.writerow(row)


@numba.njit(cache=True, nogil=True)
def _kkt(G, b, nu, alpha, t):
    worst = 0.0
    for j in range(b.size):
        g = -2.0 * b[j]
        for k in range(b.size):
            g += 2.0 * G[j, k] * t[k]
        thr = alpha * nu[j]
        if t[j] > 0.0:
            v = abs(g + thr)
        elif t[j] < 0.0:
            v = abs(g - thr)
        else:
            v = abs(g) - thr
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True, nogil=True)
def _coordinate_descent(G, b, nu, alpha, t, tol, kkt_tol, max_iter):
    p = b.size
    r = b - G @ t
    kkt = np.inf
    for sweep in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            gjj = G[j, j]
            old = t[j]
            rho = r[j] + gjj * old
            thr = 0.5 * alpha * nu[j]
            if rho > thr:
                new = (rho - thr) / gjj
            elif rho < -thr:
                new = (rho + thr) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                t[j] = new
                for k in range(p):
                    r[k] -= G[j, k] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta <= tol:
            # drop accumulated rounding in r before judging optimality
            r = b - G @ t
            kkt = _kkt(G, b, nu, alpha, t)
            if kkt <= kkt_tol:
                return sweep + 1, True, kkt
    kkt = _kkt(G, b, nu, alpha, t)
    return max_iter, kkt <= kkt_tol, kkt


def _polish(G, b, nu, alpha, t):
    """Exact minimizer on the current support and sign pattern, if consistent.

    Returns ``(theta, kkt)`` or None.  Coherent dictionaries make plain
    coordinate descent crawl at small penalties; one linear solve on the
    active face usually lands on the optimum.
    """
    S = np.flatnonzero(t)
    if S.size == 0:
        return None
    signs = np.sign(t[S])
    try:
        tS = np.linalg.solve(G[np.ix_(S, S)], b[S] - 0.5 * alpha * nu[S] * signs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.sign(tS) == signs):
        return None
    out = np.zeros_like(t)
    out[S] = tS
    return out, float(_kkt(G, b, nu, alpha, out))


def _prepare(G, b, nu):
    G = np.ascontiguousarray(G, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    nu = np.ascontiguousarray(nu, dtype=float)
    p = b.size
    if G.shape != (p, p) or nu.shape != (p,):
        raise InvalidArgumentError(f"dimension mismatch: G {G.shape}, b {b.shape}, nu {nu.shape}")
    return G, b, nu


def alpha_max(b, nu) -> float:
    """Smallest penalty at which ``t = 0`` is optimal: ``max_j 2|b_j| / nu_j``."""
    b = np.asarray(b, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0):
        raise InvalidArgumentError("weights nu must be positive")
    return float(np.max(2.0 * np.abs(b) / nu)) if b.size else 0.0


def objective(theta, G, b, nu, alpha) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(theta @ G @ theta - 2.0 * theta @ b + alpha * np.sum(nu * np.abs(theta)))


def kkt_residual(theta, G, b, nu, alpha) -> float:
    """Largest violation of the stationarity conditions at ``theta``."""
    G, b, nu = _prepare(G, b, nu)
    return float(_kkt(G, b, nu, float(alpha), np.ascontiguousarray(theta, dtype=float)))


def weighted_lasso(
    G,
    b,
    nu,
    alpha: float,
    init=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    kkt_tol: Optional[float] = None,
) -> LassoFit:
    """Solve the weighted Lasso at a single penalty level.

    Parameters
    ----------
    G, b, nu : ndarray
        Gram matrix, correlation vector and positive penalty weights.
    alpha : float
        Penalty level, ``alpha >= 0``.
    init : ndarray, optional
        Warm start; zeros by default.
    tol : float
        Stop when no coordinate moves more than ``tol`` in a sweep and the
        KKT residual is below ``kkt_tol``.
    max_iter : int
        Maximum number of full sweeps.  Hitting it yields ``converged=False``.
    kkt_tol : float, optional
        Defaults to ``tol * max(1, ||b||_inf)``.

    Returns
    -------
    LassoFit
    """
    G, b, nu = _prepare(G, b, nu)
    if alpha < 0:
        raise InvalidArgumentError(f"alpha must be nonnegative, got {alpha}")
    diag = np.diag(G)
    bad = np.flatnonzero(diag <= 0)
    if bad.size:
        raise DegenerateAtomError(f"Gram diagonal is not positive at atoms {bad.tolist()}")
    if kkt_tol is None:
        kkt_tol = tol * max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    t = np.zeros(b.size) if init is None else np.array(init, dtype=float)
    alpha = float(alpha)
    iters, remaining = 0, int(max_iter)
    converged, kkt = False, np.inf
    while remaining > 0:
        chunk = min(remaining, POLISH_EVERY)
        done, converged, kkt = _coordinate_descent(G, b, nu, alpha, t, float(tol),
                                                   float(kkt_tol), chunk)
        iters += done
        remaining -= done
        if converged:
            break
        polished = _polish(G, b, nu, alpha, t)
        if polished is not None and polished[1] < kkt:
            t, kkt = polished
            if kkt <= kkt_tol:
                converged = True
                break
    return LassoFit(theta=t, alpha=float(alpha), support=np.flatnonzero(t),
                    kkt_residual=float(kkt), iterations=int(iters),
                    converged=bool(converged), objective=objective(t, G, b, nu, alpha))


def lasso_path(
    G,
    b,
    nu,
    N: int = 200,
    warm_start: bool = True,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LassoPath:
    """Fits on the grid ``alpha_k = alpha_max * k / N`` for ``k = N, ..., 1``."""
    if N < 2:
        raise InvalidArgumentError(f"path needs N >= 2 grid points, got {N}")
    G, b, nu = _prepare(G, b, nu)
    amax = alpha_max(b, nu)
    if amax == 0:
        raise InvalidArgumentError("b is identically zero; the penalty grid is degenerate")
    alphas = amax * np.arange(N, 0, -1) / N
    fits = []
    theta = np.zeros(b.size)
    for a in alphas:
        fit = weighted_lasso(G, b, nu, a, init=theta if warm_start else None,
                             tol=tol, max_iter=max_iter)
        theta = fit.theta
        fits.append(fit)
    return LassoPath(alphas=alphas, fits=tuple(fits), alpha_max=amax)


def cardinality_restricted_fit(path: LassoPath, s: int) -> LassoFit:
    """Path-based stand-in for the l0-constrained problem.

    Picks the smallest-penalty fit whose support has at most ``s`` atoms.
    If none qualifies the ``alpha_max`` fit is returned with ``fallback=True``.
    """
    if s < 0:
        raise InvalidArgumentError(f"s must be nonnegative, got {s}")
    eligible = [i for i, f in enumerate(path.fits) if f.support_size <= s]
    if not eligible:
        return replace(path.fits[0], fallback=True)
    return path.fits[min(eligible, key=lambda i: path.alphas[i])]


def path_objectives(path: LassoPath, G, b, nu, alpha: float) -> np.ndarray:
    """Objective at a common ``alpha`` for every fit on the path."""
    return np.array([objective(f.theta, G, b, nu, alpha) for f in path.fits])
