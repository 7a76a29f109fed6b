"""Inverse images, penalty weights and the covariance form of the Lasso.

For an invertible operator ``Q`` the inverse images ``Psi`` solve
``Q^T Psi = Phi``.  The data enter the Lasso only through ``b = Psi^T y``,
which equals ``Phi^T z`` for the surrogate ``z = Q^{-1} y``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dictionary import Dictionary
from .errors import DegenerateWeightError, InvalidArgumentError, SingularOperatorError
from .problem import Grid, InverseProblem

__all__ = [
    "PreconditionedSystem",
    "compute_inverse_images",
    "compute_weights",
    "compute_surrogate",
    "surrogate_from_dictionary",
    "compute_covariance_form",
    "alpha0",
    "precondition",
]

PIVOT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class PreconditionedSystem:
    Psi: np.ndarray
    nu: np.ndarray
    G: np.ndarray
    b: np.ndarray
    z: np.ndarray
    sigma: float
    tau: float
    alpha0: float

    @property
    def p(self) -> int:
        return self.nu.size


def _matrix(A) -> np.ndarray:
    if isinstance(A, Dictionary):
        return A.Phi
    return np.asarray(A, dtype=float)


def _is_lower_triangular(Q: np.ndarray) -> bool:
    return not np.any(np.triu(Q, 1))


def _check_pivots(pivots: np.ndarray) -> None:
    mags = np.abs(pivots)
    scale = mags.max() if mags.size else 0.0
    smallest = float(mags.min()) if mags.size else 0.0
    if scale == 0 or smallest <= PIVOT_TOL * scale:
        raise SingularOperatorError("operator is numerically singular", smallest)


def _solve(Q: np.ndarray, rhs: np.ndarray, transpose: bool) -> np.ndarray:
    """Solve ``Q x = rhs`` (or ``Q^T x = rhs``), exploiting triangularity."""
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidArgumentError(f"Q must be square, got {Q.shape}")
    if Q.shape[0] != rhs.shape[0]:
        raise InvalidArgumentError(f"dimension mismatch: Q {Q.shape}, rhs {rhs.shape}")
    if _is_lower_triangular(Q):
        _check_pivots(np.diag(Q))
        return linalg.solve_triangular(Q, rhs, lower=True, trans=1 if transpose else 0)
    with warnings.catch_warnings():
        # exact singularity is reported through the pivot check below
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(Q, check_finite=True)
    _check_pivots(np.diag(lu))
    return linalg.lu_solve((lu, piv), rhs, trans=1 if transpose else 0)


def compute_inverse_images(Q, Phi) -> np.ndarray:
    """Columns ``psi_j`` with ``Q^T psi_j = phi_j``.

    For the lower-triangular convolution operator this is a back substitution
    on ``Q^T``; general square operators go through an LU factorization.
    """
    return _solve(np.asarray(Q, dtype=float), _matrix(Phi), transpose=True)


def compute_weights(Psi) -> np.ndarray:
    """Penalty weights ``nu_j = ||psi_j||_2``."""
    nu = np.linalg.norm(np.asarray(Psi, dtype=float), axis=0)
    zero = np.flatnonzero(nu == 0)
    if zero.size:
        raise DegenerateWeightError(f"inverse image columns {zero.tolist()} are zero")
    return nu


def compute_surrogate(Q, y) -> np.ndarray:
    """Surrogate data ``z`` with ``Q z = y``."""
    return _solve(np.asarray(Q, dtype=float), np.asarray(y, dtype=float), transpose=False)


def surrogate_from_dictionary(Phi, Psi, y) -> np.ndarray:
    """Literal ``z = (Phi Phi^T)^{-1} Phi Psi^T y``; requires full row rank of Phi."""
    Phi = _matrix(Phi)
    rhs = Phi @ (np.asarray(Psi).T @ np.asarray(y, dtype=float))
    return linalg.solve(Phi @ Phi.T, rhs, assume_a="pos")


def compute_covariance_form(Phi, Psi, y) -> tuple[np.ndarray, np.ndarray]:
    """``G = Phi^T Phi`` and ``b = Psi^T y``.

    ``t^T G t - 2 t^T b`` differs from ``||Phi t - z||^2`` only by ``||z||^2``.
    """
    Phi = _matrix(Phi)
    Psi = np.asarray(Psi, dtype=float)
    y = np.asarray(y, dtype=float)
    if Phi.shape != Psi.shape or Psi.shape[0] != y.shape[0]:
        raise InvalidArgumentError(
            f"dimension mismatch: Phi {Phi.shape}, Psi {Psi.shape}, y {y.shape}")
    G = Phi.T @ Phi
    G = 0.5 * (G + G.T)
    return G, Psi.T @ y


def alpha0(sigma: float, grid: Grid, p: int, tau: float = 1.0) -> float:
    """Smallest theoretically admissible penalty level.

    Uses the per-sample noise std ``sigma_eff = sigma sqrt(T/n)``:
    ``alpha0 = sigma_eff * sqrt(2 (tau + 1) log(p) / n)``.
    """
    if p < 2:
        raise InvalidArgumentError(f"alpha0 needs p >= 2, got {p}")
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    sigma_eff = sigma * np.sqrt(grid.T / grid.n)
    return float(sigma_eff * np.sqrt(2.0 * (tau + 1.0) * np.log(p) / grid.n))


def precondition(problem: InverseProblem, dictionary, tau: float = 1.0) -> PreconditionedSystem:
    """Assemble every quantity the weighted Lasso needs for ``problem``."""
    Phi = _matrix(dictionary)
    Psi = compute_inverse_images(problem.Q, Phi)
    nu = compute_weights(Psi)
    G, b = compute_covariance_form(Phi, Psi, problem.y)
    z = compute_surrogate(problem.Q, problem.y)
    a0 = alpha0(problem.sigma, problem.grid, Phi.shape[1], tau) if Phi.shape[1] >= 2 else 0.0
    return PreconditionedSystem(Psi=Psi, nu=nu, G=G, b=b, z=z,
                                sigma=problem.sigma, tau=tau, alpha0=a0)
