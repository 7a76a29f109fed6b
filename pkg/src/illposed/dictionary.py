"""Dictionaries: scaled Laguerre functions and sub-Gaussian random designs."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.fft import dct

from .errors import InvalidArgumentError
from .problem import Grid

__all__ = [
    "Dictionary",
    "TightFrame",
    "DEFAULT_DEGREES",
    "DEFAULT_SCALES",
    "laguerre_polynomial",
    "laguerre_function",
    "build_laguerre_dictionary",
    "build_random_dictionary",
    "build_tight_frame",
    "build_structured_dictionary",
    "build_dictionary",
]

DEFAULT_DEGREES = (0, 1, 2, 3)
DEFAULT_SCALES = tuple(k / 4 for k in range(1, 17))

MAX_DEGREE = 60


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Column matrix ``Phi`` (n x p) plus a record of how it was made."""

    Phi: np.ndarray
    provenance: dict = field(default_factory=dict)
    normalized: bool = False
    labels: tuple = ()

    def __post_init__(self):
        Phi = np.asarray(self.Phi, dtype=float)
        if Phi.ndim != 2 or Phi.shape[1] < 1:
            raise InvalidArgumentError(f"Phi must be a nonempty matrix, got shape {Phi.shape}")
        Phi.setflags(write=False)
        object.__setattr__(self, "Phi", Phi)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"atom{j}" for j in range(Phi.shape[1])))

    @property
    def n(self) -> int:
        return self.Phi.shape[0]

    @property
    def p(self) -> int:
        return self.Phi.shape[1]

    def to_csv(self, path) -> None:
        """Header row holds the column labels; a leading comment line holds provenance."""
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps({"provenance": self.provenance,
                                        "normalized": self.normalized}) + "\n")
            w = csv.writer(fh)
            w.writerow(self.labels)
            for row in self.Phi:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Dictionary":
        with open(path, newline="") as fh:
            first = fh.readline()
            meta = {}
            if first.startswith("#"):
                meta = json.loads(first[1:])
            else:
                fh.seek(0)
            reader = csv.reader(fh)
            labels = tuple(next(reader))
            Phi = np.array([[float(v) for v in row] for row in reader])
        return cls(Phi, meta.get("provenance", {}), bool(meta.get("normalized", False)), labels)


@dataclass(frozen=True, eq=False)
class TightFrame:
    D: np.ndarray
    k: float

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[1]

    def identity_defect(self) -> float:
        """Spectral norm of ``D D^T - k^2 I``."""
        E = self.D @ self.D.T - self.k**2 * np.eye(self.n)
        return float(np.linalg.norm(E, 2))


def laguerre_polynomial(degree: int, x):
    """Laguerre polynomial ``L_degree(x)`` by the three-term recurrence.

    ``(k+1) L_{k+1} = (2k + 1 - x) L_k - k L_{k-1}``, vectorized over ``x``.
    """
    if degree < 0 or degree > MAX_DEGREE:
        raise InvalidArgumentError(f"degree must lie in [0, {MAX_DEGREE}], got {degree}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if degree == 0:
        return prev
    cur = 1.0 - x
    for k in range(1, degree):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur


def laguerre_function(degree: int, b: float, x):
    """``exp(-b x / 2) L_degree(b x)``."""
    if not b > 0:
        raise InvalidArgumentError(f"scale b must be positive, got {b}")
    x = np.asarray(x, dtype=float)
    return np.exp(-b * x / 2.0) * laguerre_polynomial(degree, b * x)


def _normalize_columns(Phi: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(Phi, axis=0)
    if np.any(norms == 0):
        raise InvalidArgumentError("dictionary has a zero column")
    return Phi / norms


def build_laguerre_dictionary(
    grid: Grid,
    degrees: Sequence[int] = DEFAULT_DEGREES,
    scales: Sequence[float] = DEFAULT_SCALES,
    normalize: bool = True,
) -> Dictionary:
    """Laguerre functions ``phi_{d,b}`` for every (degree, scale) pair.

    Columns are ordered scale-major: all degrees of the first scale, then all
    degrees of the second, and so on.  With the defaults ``p = 4 * 16 = 64``.
    """
    degrees = [int(d) for d in degrees]
    scales = [float(b) for b in scales]
    if not degrees or not scales:
        raise InvalidArgumentError("degrees and scales must be nonempty")
    pairs = [(d, b) for b in scales for d in degrees]
    if len(set(pairs)) != len(pairs):
        raise InvalidArgumentError("duplicate (degree, scale) pairs")
    x = grid.points
    Phi = np.column_stack([laguerre_function(d, b, x) for d, b in pairs])
    if normalize:
        Phi = _normalize_columns(Phi)
    provenance = {"kind": "laguerre", "degrees": degrees, "scales": scales,
                  "T": grid.T, "n": grid.n}
    labels = tuple(f"lag_d{d}_b{b:g}" for d, b in pairs)
    return Dictionary(Phi, provenance, normalize, labels)


def _entries(rng: np.random.Generator, shape, entries: str) -> np.ndarray:
    if entries == "gaussian":
        return rng.standard_normal(shape)
    if entries == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=shape)
    raise InvalidArgumentError(f"unknown entry distribution {entries!r}")


def build_random_dictionary(kind: str, n: int, p: int, seed, entries: str = "gaussian") -> Dictionary:
    """Random sub-Gaussian dictionary.

    ``kind="rows"``: i.i.d. entries scaled by ``n**-0.5`` (isotropic rows,
    columns of expected unit norm).  ``kind="cols"``: i.i.d. columns rescaled
    to exactly unit norm.
    """
    if n < 1 or p < 1:
        raise InvalidArgumentError(f"n and p must be >= 1, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    if kind == "rows":
        Phi = _entries(rng, (n, p), entries) / np.sqrt(n)
        normalized = False
    elif kind == "cols":
        Phi = _normalize_columns(_entries(rng, (n, p), entries))
        normalized = True
    else:
        raise InvalidArgumentError(f"unknown random dictionary kind {kind!r}")
    provenance = {"kind": f"subgauss_{kind}", "seed": _seed_repr(seed), "entries": entries}
    return Dictionary(Phi, provenance, normalized)


def build_tight_frame(n: int, m: int, k: float = 1.0) -> TightFrame:
    """``k`` times the first ``n`` rows of the orthonormal DCT-II matrix of size ``m``."""
    if m < n:
        raise InvalidArgumentError(f"a tight frame needs m >= n, got m={m} < n={n}")
    if not k > 0:
        raise InvalidArgumentError(f"frame constant must be positive, got {k}")
    C = dct(np.eye(m), type=2, norm="ortho", axis=0)
    return TightFrame(k * C[:n], float(k))


def build_structured_dictionary(frame: TightFrame, p: int, seed) -> Dictionary:
    """``Phi = (k sqrt(n))^-1 D W`` with ``W`` an m x p standard Gaussian matrix."""
    if p < 1:
        raise InvalidArgumentError(f"p must be >= 1, got {p}")
    W = np.random.default_rng(seed).standard_normal((frame.m, p))
    Phi = frame.D @ W / (frame.k * np.sqrt(frame.n))
    provenance = {"kind": "tight_frame", "k": frame.k, "m": frame.m, "seed": _seed_repr(seed)}
    return Dictionary(Phi, provenance, False)


def build_dictionary(kind: str, grid: Grid, p: int = 64, seed=0, **options) -> Dictionary:
    """Dispatch on a string kind: laguerre, rows, cols or structured."""
    if kind == "laguerre":
        return build_laguerre_dictionary(grid, options.get("degrees", DEFAULT_DEGREES),
                                         options.get("scales", DEFAULT_SCALES))
    if kind in ("rows", "cols"):
        return build_random_dictionary(kind, grid.n, p, seed, options.get("entries", "gaussian"))
    if kind == "structured":
        frame = build_tight_frame(grid.n, options.get("m", 2 * grid.n), options.get("k", 1.0))
        return build_structured_dictionary(frame, p, seed)
    raise InvalidArgumentError(f"unknown dictionary kind {kind!r}")


def _seed_repr(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return repr(seed)
