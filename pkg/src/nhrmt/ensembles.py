r"""Gaussian non-Hermitian ensembles in classes A, AI-dagger and AII-dagger.

All three ensembles share the weight ``P(H) ~ exp(-tr(H^dag H) / g)`` restricted
to the class manifold:

=========== ================================ ========================
class       constraint                       matrix dimension
=========== ================================ ========================
A           none                             ``N``
AIdagger    ``H = H^T``                      ``N``
AIIdagger   ``Sigma^y H^T Sigma^y = H``      ``2N``
=========== ================================ ========================

with ``Sigma^y = sigma^y (x) 1_N`` in the (first N, last N) block ordering.

Matrices are built by projecting an i.i.d. complex Gaussian ``G`` (entry
variance ``g``) onto the class subspace.  Every realization draws from its own
counter-based Philox stream keyed by the seed, with the realization index in
the top word of the counter, so a realization is a pure function of
``(seed, realization_index)`` regardless of how work is scheduled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError

__all__ = [
    "SymmetryClass",
    "EnsembleSpec",
    "realization_rng",
    "sample",
    "sample_batch",
    "check_symmetry",
    "sigma_y_transpose",
    "entry_variance",
]

_MASK64 = (1 << 64) - 1


class SymmetryClass(str, enum.Enum):
    A = "A"
    AI_DAG = "AIdagger"
    AII_DAG = "AIIdagger"

    @classmethod
    def parse(cls, value) -> "SymmetryClass":
        """Accept enum members, canonical names and common spellings."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("†", "dagger").replace("_", "")
        aliases = {
            "a": cls.A,
            "aidagger": cls.AI_DAG,
            "aidag": cls.AI_DAG,
            "aid": cls.AI_DAG,
            "aiidagger": cls.AII_DAG,
            "aiidag": cls.AII_DAG,
            "aiid": cls.AII_DAG,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ParameterError(f"unknown symmetry class {value!r}") from None

    def dim(self, n_half: int) -> int:
        return 2 * n_half if self is SymmetryClass.AII_DAG else n_half


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything needed to reproduce one matrix stream.

    ``n_half`` is the matrix dimension for A and AI-dagger and half of it for
    AII-dagger.  ``width`` is the variance scale ``g``.
    """

    symmetry: SymmetryClass
    n_half: int
    width: float
    seed: int = 0
    realization_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "symmetry", SymmetryClass.parse(self.symmetry))
        if int(self.n_half) != self.n_half or self.n_half < 1:
            raise ParameterError(f"n_half must be a positive integer, got {self.n_half!r}")
        if not np.isfinite(self.width) or self.width <= 0:
            raise ParameterError(f"width must be positive, got {self.width!r}")
        if self.realization_index < 0:
            raise ParameterError("realization_index must be non-negative")
        object.__setattr__(self, "n_half", int(self.n_half))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "realization_index", int(self.realization_index))

    @property
    def dim(self) -> int:
        return self.symmetry.dim(self.n_half)

    def at(self, realization_index: int) -> "EnsembleSpec":
        return replace(self, realization_index=realization_index)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def realization_rng(seed: int, realization_index: int) -> np.random.Generator:
    """Independent generator for one realization of a seeded stream."""
    s = int(seed) & _MASK64
    key = (_splitmix64(s) << 64) | _splitmix64(s ^ 0xD1B54A32D192ED03)
    counter = (int(realization_index) & _MASK64) << 192
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def sigma_y_transpose(H: np.ndarray) -> np.ndarray:
    """Return ``Sigma^y H^T Sigma^y`` for a (stack of) even-dimensional matrices.

    Evaluated blockwise as ``[[D^T, -B^T], [-C^T, A^T]]`` so no rounding occurs.
    """
    d = H.shape[-1]
    if d % 2:
        raise ParameterError("Sigma^y conjugation needs an even dimension")
    n = d // 2
    a = H[..., :n, :n]
    b = H[..., :n, n:]
    c = H[..., n:, :n]
    dd = H[..., n:, n:]
    out = np.empty_like(H)
    out[..., :n, :n] = np.swapaxes(dd, -1, -2)
    out[..., :n, n:] = -np.swapaxes(b, -1, -2)
    out[..., n:, :n] = -np.swapaxes(c, -1, -2)
    out[..., n:, n:] = np.swapaxes(a, -1, -2)
    return out


def _project(G: np.ndarray, symmetry: SymmetryClass) -> np.ndarray:
    if symmetry is SymmetryClass.A:
        return G
    if symmetry is SymmetryClass.AI_DAG:
        return (G + np.swapaxes(G, -1, -2)) / 2
    return (G + sigma_y_transpose(G)) / 2


def _draw(spec: EnsembleSpec, index: int) -> np.ndarray:
    rng = realization_rng(spec.seed, index)
    d = spec.dim
    xy = rng.standard_normal((2, d, d))
    G = (xy[0] + 1j * xy[1]) * np.sqrt(spec.width / 2)
    return _project(G, spec.symmetry)


def sample(spec: EnsembleSpec) -> np.ndarray:
    """Draw the matrix of realization ``spec.realization_index``."""
    return _draw(spec, spec.realization_index)


def sample_batch(spec: EnsembleSpec, count: int, start: int | None = None) -> np.ndarray:
    """Stack of ``count`` consecutive realizations, shape ``(count, dim, dim)``.

    The first realization is ``start`` (default ``spec.realization_index``).
    Row ``k`` equals ``sample(spec.at(start + k))`` bitwise.
    """
    if count < 0:
        raise ParameterError("count must be non-negative")
    start = spec.realization_index if start is None else int(start)
    d = spec.dim
    out = np.empty((count, d, d), dtype=complex)
    for k in range(count):
        out[k] = _draw(spec, start + k)
    return out


def check_symmetry(H, symmetry) -> float:
    """Max-norm deviation of ``H`` from the class constraint (0 for class A)."""
    H = np.asarray(H)
    symmetry = SymmetryClass.parse(symmetry)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {H.shape}")
    if symmetry is SymmetryClass.A:
        return 0.0
    if symmetry is SymmetryClass.AI_DAG:
        other = H.T
    else:
        if H.shape[0] % 2:
            raise ParameterError("AIIdagger matrices must have even dimension")
        other = sigma_y_transpose(H)
    if H.size == 0:
        return 0.0
    return float(np.max(np.abs(H - other)))


def entry_variance(symmetry, n_half: int, width: float) -> np.ndarray:
    """Analytic ``E|H_ij|^2`` for every entry position.

    A: ``g`` everywhere.  AI-dagger: ``g`` on the diagonal, ``g/2`` elsewhere.
    AII-dagger: ``g/2`` everywhere except the diagonals of the off-diagonal
    blocks, which vanish by antisymmetry.
    """
    symmetry = SymmetryClass.parse(symmetry)
    d = symmetry.dim(n_half)
    g = float(width)
    if symmetry is SymmetryClass.A:
        return np.full((d, d), g)
    if symmetry is SymmetryClass.AI_DAG:
        v = np.full((d, d), g / 2)
        np.fill_diagonal(v, g)
        return v
    v = np.full((d, d), g / 2)
    idx = np.arange(n_half)
    v[idx, n_half + idx] = 0.0
    v[n_half + idx, idx] = 0.0
    return v
