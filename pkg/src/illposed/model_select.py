"""Data-driven choice of the penalty level.

A wavelet pilot ``q_hat`` of the noiseless data is formed by hard universal
thresholding; each path fit is then scored by

    n^-1 ||Q Phi theta(alpha_k) - q_hat||^2 + 2 sigma_eff^2 n^-1 |supp theta(alpha_k)|

and the minimizer is kept.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pywt

from .dictionary import Dictionary
from .errors import InvalidArgumentError
from .lasso import LassoFit, LassoPath, lasso_path
from .precondition import PreconditionedSystem, precondition
from .problem import InverseProblem

__all__ = [
    "PilotEstimate",
    "SelectionResult",
    "LassoCVResult",
    "dwt_forward",
    "dwt_inverse",
    "default_levels",
    "hard_threshold",
    "pilot_estimate_q",
    "cp_criterion",
    "cp_select",
    "estimate_f",
    "lasso_cv",
]

DEFAULT_WAVELET = "db8"
APPROX_LENGTH = 4


@dataclass(frozen=True, eq=False)
class PilotEstimate:
    q_hat: np.ndarray
    threshold: float
    kept_coeffs: int
    kept_details: int


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Outcome of the penalized selection.

    ``k_hat`` follows the grid numbering ``alpha_k = alpha_max k / N`` (1-based,
    small k = small penalty); ``criterion_values[k - 1]`` is the score of grid
    point ``k`` and ``index`` is the matching position in ``path.fits``.
    """

    k_hat: int
    index: int
    alpha_hat: float
    criterion_values: np.ndarray
    fit_terms: np.ndarray
    penalty_terms: np.ndarray
    alphas: np.ndarray
    fit: LassoFit

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "alpha", "fit_term", "penalty_term", "criterion"])
            for k in range(1, self.criterion_values.size + 1):
                w.writerow([k, repr(float(self.alphas[k - 1])),
                            repr(float(self.fit_terms[k - 1])),
                            repr(float(self.penalty_terms[k - 1])),
                            repr(float(self.criterion_values[k - 1]))])


def _check_power_of_two(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise InvalidArgumentError(f"signal length must be a power of 2, got {n}")
    return int(np.log2(n))


def default_levels(n: int) -> int:
    """Decomposition depth that leaves ``APPROX_LENGTH`` coarse coefficients."""
    J = _check_power_of_two(n)
    return max(J - int(np.log2(APPROX_LENGTH)), 0)


def dwt_forward(v, levels: Optional[int] = None, wavelet: str = DEFAULT_WAVELET) -> np.ndarray:
    """Periodized orthonormal DWT, flattened as ``[cA_L, cD_L, ..., cD_1]``."""
    v = np.asarray(v, dtype=float)
    J = _check_power_of_two(v.size)
    if levels is None:
        levels = default_levels(v.size)
    if levels < 0 or levels > max(J - 2, 0):
        raise InvalidArgumentError(f"levels must lie in [0, {max(J - 2, 0)}], got {levels}")
    if levels == 0:
        return v.copy()
    with warnings.catch_warnings():
        # periodization stays exact when the filter outgrows the coarse levels
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec(v, wavelet, mode="periodization", level=levels)
    return np.concatenate(coeffs)


def dwt_inverse(c, levels: Optional[int] = None, wavelet: str = DEFAULT_WAVELET) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    n = c.size
    _check_power_of_two(n)
    if levels is None:
        levels = default_levels(n)
    if levels == 0:
        return c.copy()
    sizes = [n >> levels] + [n >> j for j in range(levels, 0, -1)]
    coeffs = np.split(c, np.cumsum(sizes)[:-1])
    return pywt.waverec(coeffs, wavelet, mode="periodization")


def hard_threshold(c, lam: float) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    return np.where(np.abs(c) > lam, c, 0.0)


def pilot_estimate_q(y, sigma_eff: float, wavelet: str = DEFAULT_WAVELET,
                     levels: Optional[int] = None) -> PilotEstimate:
    """Hard universal thresholding of the detail coefficients of ``y``.

    The threshold is ``sigma_eff * sqrt(2 log n)``; the coarsest approximation
    block is kept untouched.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if levels is None:
        levels = default_levels(n)
    c = dwt_forward(y, levels, wavelet)
    lam = float(sigma_eff * np.sqrt(2.0 * np.log(n))) if n > 1 else 0.0
    n_approx = n >> levels if levels else n
    out = c.copy()
    out[n_approx:] = hard_threshold(c[n_approx:], lam)
    q_hat = dwt_inverse(out, levels, wavelet)
    kept_details = int(np.count_nonzero(out[n_approx:]))
    return PilotEstimate(q_hat=q_hat, threshold=lam,
                         kept_coeffs=int(np.count_nonzero(out)), kept_details=kept_details)


def _image(Q, Phi, image: str) -> np.ndarray:
    Phi = Phi.Phi if isinstance(Phi, Dictionary) else np.asarray(Phi, dtype=float)
    if image == "QPhi":
        return np.asarray(Q, dtype=float) @ Phi
    if image == "Phi":
        return Phi
    raise InvalidArgumentError(f"image must be 'QPhi' or 'Phi', got {image!r}")


def cp_criterion(fits: Sequence[LassoFit], A, q_hat, sigma_eff: float):
    """Fit and penalty terms for each fit, with ``A`` the coefficient-to-data map."""
    q_hat = np.asarray(q_hat, dtype=float)
    n = q_hat.size
    thetas = np.array([f.theta for f in fits])
    resid = thetas @ np.asarray(A).T - q_hat
    fit_terms = np.sum(resid**2, axis=1) / n
    penalty_terms = 2.0 * sigma_eff**2 * np.array([f.support_size for f in fits]) / n
    return fit_terms, penalty_terms


def cp_select(path: LassoPath, Q, Phi, q_hat, sigma_eff: float,
              image: str = "QPhi") -> SelectionResult:
    """Pick the path point minimizing the penalized data-space criterion.

    Ties go to the smallest grid number ``k`` (the smallest penalty).
    """
    if len(path) == 0:
        raise InvalidArgumentError("empty path")
    A = _image(Q, Phi, image)
    fit_terms, penalty_terms = cp_criterion(path.fits, A, q_hat, sigma_eff)
    # reorder from path order (decreasing alpha) to grid order k = 1..N
    fit_terms, penalty_terms = fit_terms[::-1], penalty_terms[::-1]
    crit = fit_terms + penalty_terms
    k = int(np.argmin(crit)) + 1
    index = len(path) - k
    return SelectionResult(k_hat=k, index=index, alpha_hat=float(path.alphas[index]),
                           criterion_values=crit, fit_terms=fit_terms,
                           penalty_terms=penalty_terms, alphas=np.asarray(path.alphas)[::-1],
                           fit=path.fits[index])


def estimate_f(fit: LassoFit, Phi) -> np.ndarray:
    Phi = Phi.Phi if isinstance(Phi, Dictionary) else np.asarray(Phi, dtype=float)
    return Phi @ fit.theta


@dataclass(frozen=True, eq=False)
class LassoCVResult:
    f_hat: np.ndarray
    selection: SelectionResult
    path: LassoPath
    system: PreconditionedSystem
    pilot: PilotEstimate


def lasso_cv(problem: InverseProblem, dictionary, N: int = 200, tau: float = 1.0,
             sigma_eff: Optional[float] = None, image: str = "QPhi",
             wavelet: str = DEFAULT_WAVELET) -> LassoCVResult:
    """Weighted-Lasso estimate of ``f`` with the penalty picked by the pilot criterion.

    ``sigma_eff`` defaults to the problem's per-sample noise std.
    """
    Phi = dictionary.Phi if isinstance(dictionary, Dictionary) else np.asarray(dictionary)
    if sigma_eff is None:
        sigma_eff = problem.noise_scale
    system = precondition(problem, Phi, tau)
    path = lasso_path(system.G, system.b, system.nu, N)
    pilot = pilot_estimate_q(problem.y, sigma_eff, wavelet)
    sel = cp_select(path, problem.Q, Phi, pilot.q_hat, sigma_eff, image)
    return LassoCVResult(f_hat=estimate_f(sel.fit, Phi), selection=sel, path=path,
                         system=system, pilot=pilot)
