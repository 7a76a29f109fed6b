"""Empirical checks of the dictionary conditions behind the oracle bounds.

Everything here is a desk-scale diagnostic: exhaustive where the
combinatorics allow it, randomized (and labeled as such) otherwise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from math import comb
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .dictionary import Dictionary, TightFrame
from .errors import CapacityError, InvalidArgumentError
from .lasso import LassoFit

__all__ = [
    "ConditionReport",
    "restricted_eigenvalues",
    "restricted_eigenvalue_probe",
    "support_eigenvalues",
    "compatibility_ratio",
    "compatibility_lower_bound",
    "projection_matrix",
    "oracle_criterion",
    "greedy_oracle_support",
    "exhaustive_oracle_support",
    "check_recovery_conditions",
    "sample_size_check",
    "empirical_oracle_bound",
    "assert_tight_frame",
]

EXHAUSTIVE_MAX_M = 14
EXHAUSTIVE_MAX_SUPPORTS = 5_000_000
_CHUNK = 20_000


def _phi(Phi) -> np.ndarray:
    return Phi.Phi if isinstance(Phi, Dictionary) else np.asarray(Phi, dtype=float)


def support_eigenvalues(G: np.ndarray, supports: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest eigenvalue of ``G[J, J]`` for each row ``J`` of ``supports``."""
    lo, hi = [], []
    for start in range(0, len(supports), _CHUNK):
        S = supports[start:start + _CHUNK]
        blocks = G[S[:, :, None], S[:, None, :]]
        ev = np.linalg.eigvalsh(blocks)
        lo.append(ev[:, 0])
        hi.append(ev[:, -1])
    return np.concatenate(lo), np.concatenate(hi)


def restricted_eigenvalues(Phi, m: int) -> tuple[float, float]:
    """Exact restricted eigenvalues by enumerating all size-``m`` supports."""
    A = _phi(Phi)
    p = A.shape[1]
    if not 1 <= m <= p:
        raise InvalidArgumentError(f"m must lie in [1, {p}], got {m}")
    count = comb(p, m)
    if m > EXHAUSTIVE_MAX_M or count > EXHAUSTIVE_MAX_SUPPORTS:
        raise CapacityError(f"{count} supports of size {m} is too many for exhaustive mode; "
                            "use restricted_eigenvalue_probe")
    G = A.T @ A
    lamin, lamax = np.inf, -np.inf
    it = combinations(range(p), m)
    while True:
        block = np.array([c for _, c in zip(range(_CHUNK), it)], dtype=np.intp)
        if block.size == 0:
            break
        lo, hi = support_eigenvalues(G, block.reshape(-1, m))
        lamin = min(lamin, float(lo.min()))
        lamax = max(lamax, float(hi.max()))
    return max(lamin, 0.0), lamax


def restricted_eigenvalue_probe(Phi, m: int, n_probes: int, seed=None,
                                supports: Optional[np.ndarray] = None) -> tuple[float, float]:
    """Randomized bounds: an upper bound on lamin and a lower bound on lamax.

    Draws ``n_probes`` uniformly random size-``m`` supports (or uses the rows
    of ``supports``) and solves each support's eigenproblem exactly.
    """
    if n_probes < 1 and supports is None:
        raise InvalidArgumentError("n_probes must be >= 1")
    A = _phi(Phi)
    p = A.shape[1]
    if supports is None:
        rng = np.random.default_rng(seed)
        supports = np.array([rng.choice(p, size=m, replace=False) for _ in range(n_probes)])
    supports = np.asarray(supports, dtype=np.intp).reshape(-1, m)
    lo, hi = support_eigenvalues(A.T @ A, supports)
    return max(float(lo.min()), 0.0), float(hi.max())


def compatibility_ratio(d, Phi, nu, J) -> float:
    """``d^T Phi^T Phi d * Tr(Upsilon_J^2) / ||(Upsilon d)_J||_1^2``."""
    A = _phi(Phi)
    d = np.asarray(d, dtype=float)
    nu = np.asarray(nu, dtype=float)
    J = np.asarray(J, dtype=np.intp)
    wd = nu * d
    denom = np.sum(np.abs(wd[J])) ** 2
    if denom == 0:
        return np.inf
    Ad = A @ d
    return float(Ad @ Ad * np.sum(nu[J] ** 2) / denom)


def _project_cone(u: np.ndarray, inJ: np.ndarray, mu: float) -> np.ndarray:
    """Euclidean projection (in weighted coordinates) onto ||u_Jc||_1 <= mu ||u_J||_1.

    Shrinks the off-J block onto the l1 ball of radius ``mu ||u_J||_1``, which
    keeps ``u_J`` fixed; sufficient for a feasible descent heuristic.
    """
    radius = mu * np.sum(np.abs(u[inJ]))
    off = u[~inJ]
    if np.sum(np.abs(off)) <= radius:
        return u
    # soft-threshold onto the l1 ball
    a = np.sort(np.abs(off))[::-1]
    cssv = np.cumsum(a) - radius
    idx = np.arange(1, a.size + 1)
    rho = np.nonzero(a * idx > cssv)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    out = u.copy()
    out[~inJ] = np.sign(off) * np.maximum(np.abs(off) - theta, 0.0)
    return out


def compatibility_lower_bound(Phi, nu, mu: float, J, n_probes: int = 20, seed=None,
                              steps: int = 300) -> float:
    """Heuristic (non-certified) estimate of the compatibility constant.

    Minimizes the compatibility ratio over the cone by projected subgradient
    steps from random feasible starts.  The value returned is the smallest
    ratio actually attained, hence an upper bound on the true constant.
    """
    if not mu > 1:
        raise InvalidArgumentError(f"mu must exceed 1, got {mu}")
    A = _phi(Phi)
    nu = np.asarray(nu, dtype=float)
    p = A.shape[1]
    J = np.unique(np.asarray(J, dtype=np.intp))
    if J.size == 0:
        raise InvalidArgumentError("J must be nonempty")
    inJ = np.zeros(p, dtype=bool)
    inJ[J] = True
    G = A.T @ A
    # work in u = nu * d so the cone is a plain l1 cone
    H = G / np.outer(nu, nu)
    trJ = np.sum(nu[J] ** 2)
    rng = np.random.default_rng(seed)

    def ratio(u):
        s = np.sum(np.abs(u[inJ]))
        return np.inf if s == 0 else float(u @ H @ u * trJ / s**2)

    best = ratio(inJ.astype(float))
    for _ in range(max(n_probes, 1)):
        u = np.zeros(p)
        u[inJ] = rng.standard_normal(J.size)
        u[~inJ] = rng.standard_normal(p - J.size) * rng.uniform(0, mu) / max(p - J.size, 1)
        u = _project_cone(u, inJ, mu)
        r = ratio(u)
        step = 0.1
        for _ in range(steps):
            s = np.sum(np.abs(u[inJ]))
            if s == 0:
                break
            quad = u @ H @ u
            grad = 2.0 * trJ * (H @ u) / s**2
            grad[inJ] -= 2.0 * trJ * quad * np.sign(u[inJ]) / s**3
            cand = _project_cone(u - step * grad / (np.linalg.norm(grad) + 1e-300) * np.linalg.norm(u),
                                 inJ, mu)
            rc = ratio(cand)
            if rc < r:
                u, r = cand / np.linalg.norm(cand), rc
            else:
                step *= 0.5
                if step < 1e-8:
                    break
        best = min(best, r)
    return float(best)


def projection_matrix(Phi, J) -> np.ndarray:
    """Orthogonal projector onto ``span{phi_j : j in J}``."""
    A = _phi(Phi)
    J = np.asarray(J, dtype=np.intp)
    n = A.shape[0]
    if J.size == 0:
        return np.zeros((n, n))
    U, s, _ = np.linalg.svd(A[:, J], full_matrices=False)
    rank = int(np.count_nonzero(s > max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0)))
    U = U[:, :rank]
    return U @ U.T


def oracle_criterion(Phi, nu, f, J, alpha: float, K0: float) -> float:
    """``n^-1 ||f - P_J f||^2 + K0 alpha^2 sum_{j in J} nu_j^2``."""
    f = np.asarray(f, dtype=float)
    J = np.asarray(J, dtype=np.intp)
    r = f - projection_matrix(Phi, J) @ f
    return float(r @ r / f.size + K0 * alpha**2 * np.sum(np.asarray(nu)[J] ** 2))


def greedy_oracle_support(Phi, nu, f, alpha: float, K0: float,
                          max_size: Optional[int] = None) -> tuple[np.ndarray, float]:
    """Forward selection on the oracle criterion; stops when no atom lowers it."""
    A = _phi(Phi)
    p = A.shape[1]
    max_size = p if max_size is None else min(max_size, p)
    J: list[int] = []
    value = oracle_criterion(A, nu, f, J, alpha, K0)
    while len(J) < max_size:
        scores = [(oracle_criterion(A, nu, f, J + [j], alpha, K0), j)
                  for j in range(p) if j not in J]
        cand, j = min(scores)
        if cand >= value:
            break
        J.append(j)
        value = cand
    return np.array(sorted(J), dtype=np.intp), value


def exhaustive_oracle_support(Phi, nu, f, alpha: float, K0: float) -> tuple[np.ndarray, float]:
    A = _phi(Phi)
    p = A.shape[1]
    if p > 12:
        raise CapacityError(f"exhaustive oracle support search limited to p <= 12, got {p}")
    best = (oracle_criterion(A, nu, f, [], alpha, K0), ())
    for size in range(1, p + 1):
        for J in combinations(range(p), size):
            v = oracle_criterion(A, nu, f, list(J), alpha, K0)
            if v < best[0]:
                best = (v, J)
    return np.array(best[1], dtype=np.intp), best[0]


def sample_size_check(n: int, p: int, s: int, delta: float, C1: float = 1.0) -> bool:
    """``n >= C1 delta^-2 s log(e p / s)``."""
    if not 0 < delta < 1:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    if not (n > 0 and p > 0 and s > 0 and s <= p):
        raise InvalidArgumentError(f"need positive n, p, s with s <= p; got {n}, {p}, {s}")
    return bool(n >= C1 * s * np.log(np.e * p / s) / delta**2)


@dataclass
class ConditionReport:
    lamin: float
    lamax: float
    s: int
    delta: float
    con1_holds: bool
    con2_freq: float
    con3_freq: float
    kappa2_lower: float
    K0: float
    C1: float
    alpha: float = 0.0
    n: int = 0
    p: int = 0
    mu: float = 2.0
    lamin_mode: str = "exhaustive"
    sample_size_ok: bool = False
    oracle_support: list = field(default_factory=list)
    replications: int = 0
    seed: Optional[int] = None

    def to_json(self, **kwargs) -> str:
        return json.dumps(asdict(self), **kwargs)


def check_recovery_conditions(
    Phi,
    nu,
    alpha: float,
    s: int,
    delta: float,
    K0: float,
    fits,
    f_true,
    replications: int = 1,
    seed=None,
    *,
    C1: float = 1.0,
    mu: float = 2.0,
    n_probes: int = 2000,
    lamin_mode: str = "auto",
) -> ConditionReport:
    """Check the eigenvalue, oracle-sparsity and fit-sparsity conditions for one dictionary.

    Parameters
    ----------
    Phi, nu : dictionary matrix and penalty weights
    alpha, s, delta, K0 : float, int, float, float
        Penalty level, sparsity level, restricted-eigenvalue slack and the
        oracle constant; ``K0 >= 4 / (1 - delta)^2`` is required.
    fits : LassoFit, sequence of LassoFit, or callable
        Output of the fitting procedure.  A callable is invoked as
        ``fits(rng)`` once per replication with an independent generator.
    f_true : ndarray
        True signal, needed for the oracle support ``J*``.
    lamin_mode : {"auto", "exhaustive", "probe"}
        ``auto`` enumerates when the support count allows it.
    """
    A = _phi(Phi)
    n, p = A.shape
    nu = np.asarray(nu, dtype=float)
    if not 0 < delta < 1:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    if K0 < 4.0 / (1.0 - delta) ** 2:
        raise InvalidArgumentError(f"K0={K0} is below 4/(1-delta)^2={4.0 / (1.0 - delta) ** 2:g}")
    if not 1 <= s <= n / 2:
        raise InvalidArgumentError(f"s must lie in [1, n/2], got {s}")
    m = min(2 * s, p)
    mode = lamin_mode
    if mode == "auto":
        mode = "exhaustive" if m <= EXHAUSTIVE_MAX_M and comb(p, m) <= 200_000 else "probe"
    if mode == "exhaustive":
        lamin, lamax = restricted_eigenvalues(A, m)
    elif mode == "probe":
        lamin, lamax = restricted_eigenvalue_probe(A, m, n_probes, seed)
    else:
        raise InvalidArgumentError(f"unknown lamin_mode {lamin_mode!r}")

    J_star, _ = greedy_oracle_support(A, nu, f_true, alpha, K0)
    con2 = 1.0 if J_star.size <= s else 0.0

    if callable(fits):
        streams = np.random.SeedSequence(seed).spawn(replications)
        fit_list = [fits(np.random.default_rng(ss)) for ss in streams]
    elif isinstance(fits, LassoFit):
        fit_list = [fits]
    else:
        fit_list = list(fits)
    con3 = float(np.mean([f.support_size <= s for f in fit_list])) if fit_list else 0.0

    kappa = (compatibility_lower_bound(A, nu, mu, J_star, n_probes=5, seed=seed)
             if J_star.size else 0.0)
    return ConditionReport(
        lamin=lamin, lamax=lamax, s=s, delta=delta, con1_holds=bool(lamin >= 1 - delta),
        con2_freq=con2, con3_freq=con3, kappa2_lower=kappa, K0=K0, C1=C1, alpha=float(alpha),
        n=n, p=p, mu=mu, lamin_mode=mode, sample_size_ok=sample_size_check(n, p, s, delta, C1),
        oracle_support=J_star.tolist(), replications=len(fit_list),
        seed=seed if isinstance(seed, (int, type(None))) else None,
    )


def empirical_oracle_bound(
    Phi,
    nu,
    fit: LassoFit,
    f_true,
    variant: str = "slow",
    J=None,
    candidates: Optional[Iterable] = None,
    K0: Optional[float] = None,
) -> bool:
    """Whether the oracle inequality holds for this draw.

    ``slow``: ``n^-1 ||f_hat - f||^2 <= min_t n^-1 ||Phi t - f||^2 + 4 alpha sum nu|t|``
    over the candidate vectors ``t`` (always including ``t = 0``).

    ``fast``: ``n^-1 ||f_hat - f||^2 <= min_J n^-1 ||f - P_J f||^2 + K0 alpha^2 sum_J nu^2``
    over the candidate supports ``J`` (a single support or an iterable of them).
    """
    A = _phi(Phi)
    nu = np.asarray(nu, dtype=float)
    f = np.asarray(f_true, dtype=float)
    n = f.size
    r = A @ fit.theta - f
    lhs = float(r @ r / n)
    alpha = fit.alpha
    if variant == "slow":
        ts = [np.zeros(A.shape[1])]
        if candidates is not None:
            ts += [np.asarray(t, dtype=float) for t in candidates]
        rhs = min(float(np.sum((A @ t - f) ** 2) / n + 4.0 * alpha * np.sum(nu * np.abs(t)))
                  for t in ts)
    elif variant == "fast":
        if K0 is None:
            raise InvalidArgumentError("the fast bound needs K0")
        if J is None:
            Js = [np.array([], dtype=np.intp)]
        elif len(J) and np.ndim(J[0]) > 0:
            Js = [np.asarray(j, dtype=np.intp) for j in J]
        else:
            Js = [np.asarray(J, dtype=np.intp)]
        rhs = min(oracle_criterion(A, nu, f, j, alpha, K0) for j in Js)
    else:
        raise InvalidArgumentError(f"variant must be 'slow' or 'fast', got {variant!r}")
    return bool(lhs <= rhs)


def assert_tight_frame(frame: TightFrame, rtol: float = 1e-10) -> None:
    defect = frame.identity_defect()
    if defect > rtol * frame.k**2:
        raise InvalidArgumentError(f"not a tight frame: ||D D^T - k^2 I|| = {defect:.3e}")
