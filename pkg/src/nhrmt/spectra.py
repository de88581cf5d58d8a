"""Complex spectra and the spectral observables built from them.

Estimators accumulate per-realization sums and sums of squares, so partial
histograms computed on different workers merge by plain addition and the
standard errors come from realization-to-realization scatter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from .ensembles import EnsembleSpec, SymmetryClass
from .errors import ComputationError, DegeneracyError, ParameterError

__all__ = [
    "ComplexSpectrum",
    "HistogramEstimate",
    "eigenvalues",
    "eigenvalues_batch",
    "kramers_dedup",
    "kramers_pairs",
    "kramers_dedup_batch",
    "radial_density",
    "pair_correlation",
    "disk_overlap_area",
    "spacing_samples",
    "equal_area_edges",
]

KRAMERS_GUARD = 1e-6


@dataclass
class ComplexSpectrum:
    eigenvalues: np.ndarray
    source: EnsembleSpec | None = None
    pairing_residual: float | None = None
    multiplicity: int = 1

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=complex).ravel()

    def __len__(self):
        return self.eigenvalues.size

    @property
    def spectral_radius(self) -> float:
        if self.eigenvalues.size == 0:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def relative_pairing_residual(self) -> float | None:
        if self.pairing_residual is None:
            return None
        r = self.spectral_radius
        return self.pairing_residual / r if r > 0 else self.pairing_residual


@dataclass
class HistogramEstimate:
    """Binned estimator with mergeable per-realization moments.

    ``counts`` holds the summed (weighted) bin contents and ``sum_sq`` the sum
    over realizations of the squared per-realization contents.  ``bin_norm``
    is the per-bin divisor applied after dividing by ``n_samples``.
    """

    kind: str
    bin_edges: np.ndarray
    counts: np.ndarray
    sum_sq: np.ndarray
    n_samples: int
    bin_norm: np.ndarray
    normalization: dict = field(default_factory=dict)

    @property
    def value(self) -> np.ndarray:
        if self.n_samples == 0:
            return np.full(self.counts.shape, np.nan)
        return self.counts / self.n_samples / self.bin_norm

    @property
    def std_error(self) -> np.ndarray:
        n = self.n_samples
        if n < 2:
            return np.full(self.counts.shape, np.inf)
        mean = self.counts / n
        var = np.maximum(self.sum_sq / n - mean**2, 0.0) * n / (n - 1)
        return np.sqrt(var / n) / self.bin_norm

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def merge(self, other: "HistogramEstimate") -> "HistogramEstimate":
        if self.kind != other.kind or not np.array_equal(self.bin_edges, other.bin_edges):
            raise ParameterError("cannot merge histograms with different binning")
        return HistogramEstimate(
            self.kind,
            self.bin_edges,
            self.counts + other.counts,
            self.sum_sq + other.sum_sq,
            self.n_samples + other.n_samples,
            self.bin_norm,
            dict(self.normalization),
        )

    def rescaled(self, length: float, density_power: int) -> "HistogramEstimate":
        """Express the estimate in units where lengths are divided by ``length``.

        A density of points in ``k`` complex coordinates picks up a factor
        ``length**(2*k)``; pass ``density_power=k``.
        """
        f = float(length) ** (2 * density_power)
        norm = dict(self.normalization)
        norm["length_unit"] = norm.get("length_unit", 1.0) * float(length)
        return HistogramEstimate(
            self.kind,
            self.bin_edges / length,
            self.counts * f,
            self.sum_sq * f * f,
            self.n_samples,
            self.bin_norm,
            norm,
        )

    def to_csv(self, path, scale: float = 1.0):
        """Write ``bin_left, bin_right, value, std_error, n_samples`` rows."""
        value = self.value * scale
        err = self.std_error * scale
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "value", "std_error", "n_samples"])
            for lo, hi, v, e in zip(self.bin_edges[:-1], self.bin_edges[1:], value, err):
                w.writerow([f"{lo:.12e}", f"{hi:.12e}", f"{v:.12e}", f"{e:.12e}", self.n_samples])


def eigenvalues(H, source: EnsembleSpec | None = None) -> ComplexSpectrum:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ParameterError("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(H)
    except np.linalg.LinAlgError as exc:
        idx = source.realization_index if source is not None else None
        raise ComputationError(f"eigensolver did not converge: {exc}", idx) from exc
    return ComplexSpectrum(ev, source)


def eigenvalues_batch(H: np.ndarray, start_index: int | None = None) -> np.ndarray:
    """Eigenvalues of a stack ``(k, d, d)`` as a ``(k, d)`` array."""
    try:
        return np.linalg.eigvals(H)
    except np.linalg.LinAlgError:
        # locate the offending realization
        for k in range(H.shape[0]):
            try:
                np.linalg.eigvals(H[k])
            except np.linalg.LinAlgError as exc:
                idx = None if start_index is None else start_index + k
                raise ComputationError(f"eigensolver did not converge: {exc}", idx) from exc
        raise


def _greedy_pairs_dense(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = z.size
    d = np.abs(z[:, None] - z[None, :])
    iu, ju = np.triu_indices(n, 1)
    order = np.argsort(d[iu, ju], kind="stable")
    used = np.zeros(n, bool)
    first, second = [], []
    for k in order:
        i, j = iu[k], ju[k]
        if used[i] or used[j]:
            continue
        used[i] = used[j] = True
        first.append(i)
        second.append(j)
        if len(first) * 2 == n:
            break
    return np.array(first, int), np.array(second, int)


def _greedy_pairs_tree(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = z.size
    pts = np.column_stack([z.real, z.imag])
    k = min(n, 6)
    dist, nbr = cKDTree(pts).query(pts, k=k)
    rows = np.repeat(np.arange(n), k)
    cand_i = rows
    cand_j = nbr.ravel()
    cand_d = dist.ravel()
    keep = cand_i < cand_j
    # duplicates at distance 0 may list j before i; keep both orientations once
    swap = cand_i > cand_j
    ci = np.where(swap, cand_j, cand_i)[keep | swap]
    cj = np.where(swap, cand_i, cand_j)[keep | swap]
    cd = cand_d[keep | swap]
    order = np.lexsort((cj, ci, cd))
    used = np.zeros(n, bool)
    first, second = [], []
    for k_ in order:
        i, j = ci[k_], cj[k_]
        if i == j or used[i] or used[j]:
            continue
        used[i] = used[j] = True
        first.append(i)
        second.append(j)
    rest = np.flatnonzero(~used)
    if rest.size:
        a, b = _greedy_pairs_dense(z[rest])
        first.extend(rest[a])
        second.extend(rest[b])
    return np.array(first, int), np.array(second, int)


def kramers_pairs(z: np.ndarray) -> tuple[np.ndarray, float]:
    """Greedy nearest-neighbour pairing; returns pair midpoints and max gap."""
    z = np.asarray(z, dtype=complex).ravel()
    if z.size % 2:
        raise ParameterError("Kramers pairing needs an even number of eigenvalues")
    if z.size == 0:
        return z, 0.0
    if z.size <= 64:
        i, j = _greedy_pairs_dense(z)
    else:
        i, j = _greedy_pairs_tree(z)
    gaps = np.abs(z[i] - z[j])
    order = np.argsort(i)
    reps = 0.5 * (z[i] + z[j])[order]
    return reps, float(gaps.max())


def kramers_dedup(spectrum: ComplexSpectrum, guard: float = KRAMERS_GUARD) -> ComplexSpectrum:
    """Replace each degenerate AII-dagger pair by its midpoint.

    Raises ``DegeneracyError`` when the largest intra-pair distance exceeds
    ``guard`` times the spectral radius.
    """
    src = spectrum.source
    if src is not None and src.symmetry is not SymmetryClass.AII_DAG:
        raise ParameterError("Kramers deduplication applies to AIIdagger spectra only")
    reps, gap = kramers_pairs(spectrum.eigenvalues)
    radius = spectrum.spectral_radius
    scale = radius if radius > 0 else 1.0
    if gap > guard * scale:
        idx = src.realization_index if src is not None else None
        raise DegeneracyError(
            f"Kramers pairing residual {gap:.3e} exceeds {guard:g} x spectral radius", idx
        )
    return ComplexSpectrum(reps, src, pairing_residual=gap, multiplicity=2)


def kramers_dedup_batch(ev: np.ndarray, guard: float = KRAMERS_GUARD, start_index: int | None = None):
    """Vectorized greedy pairing for a stack of small spectra, shape ``(k, 2m)``.

    Returns ``(representatives, residuals)`` with shapes ``(k, m)`` and ``(k,)``;
    residuals are absolute.  Raises ``DegeneracyError`` like :func:`kramers_dedup`.
    """
    ev = np.asarray(ev, dtype=complex)
    k, d = ev.shape
    if d % 2:
        raise ParameterError("Kramers pairing needs an even number of eigenvalues")
    dist = np.abs(ev[:, :, None] - ev[:, None, :])
    idx = np.arange(d)
    dist[:, idx, idx] = np.inf
    rows = np.arange(k)
    reps = np.empty((k, d // 2), dtype=complex)
    resid = np.zeros(k)
    for p in range(d // 2):
        flat = np.argmin(dist.reshape(k, -1), axis=1)
        i, j = np.divmod(flat, d)
        resid = np.maximum(resid, dist[rows, i, j])
        reps[:, p] = 0.5 * (ev[rows, i] + ev[rows, j])
        for c in (i, j):
            dist[rows, c, :] = np.inf
            dist[rows, :, c] = np.inf
    radius = np.abs(ev).max(axis=1)
    bad = resid > guard * np.where(radius > 0, radius, 1.0)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        idx_r = None if start_index is None else start_index + first
        raise DegeneracyError(f"Kramers pairing residual {resid[first]:.3e} too large", idx_r)
    return reps, resid


def equal_area_edges(r_max: float, n_bins: int) -> np.ndarray:
    """Radial bin edges on ``[0, r_max]`` whose annuli all have the same area."""
    return r_max * np.sqrt(np.arange(n_bins + 1) / n_bins)


def _as_points(spectra) -> Iterable[tuple[np.ndarray, int]]:
    """Yield ``(points, multiplicity)`` from spectra or raw arrays."""
    if isinstance(spectra, np.ndarray):
        spectra = spectra.reshape(-1, spectra.shape[-1]) if spectra.ndim > 1 else [spectra]
    for s in spectra:
        if isinstance(s, ComplexSpectrum):
            yield s.eigenvalues, s.multiplicity
        else:
            yield np.asarray(s, dtype=complex).ravel(), 1


def _check_edges(bins) -> np.ndarray:
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("bin edges must be a strictly increasing 1-D array")
    if edges[0] < 0:
        raise ParameterError("radial bin edges must be non-negative")
    return edges


def radial_density(spectra, bins) -> HistogramEstimate:
    """Radially averaged density of states ``R1(|z|)``.

    Eigenvalues are counted with their multiplicity (a Kramers-deduplicated
    spectrum carries multiplicity 2), so the estimate integrates to the matrix
    dimension over the full support.
    """
    edges = _check_edges(bins)
    area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    counts = np.zeros(edges.size - 1)
    sum_sq = np.zeros(edges.size - 1)
    n = 0
    for pts, mult in _as_points(spectra):
        c, _ = np.histogram(np.abs(pts), edges)
        c = c * float(mult)
        counts += c
        sum_sq += c * c
        n += 1
    if n == 0:
        raise ParameterError("empty spectrum stream")
    return HistogramEstimate(
        "radial_density",
        edges,
        counts,
        sum_sq,
        n,
        area,
        {"estimator": "annulus_count", "divisor": "n_samples*annulus_area", "multiplicity": "all"},
    )


def disk_overlap_area(radius: float, d) -> np.ndarray:
    """Area of the intersection of two disks of ``radius`` whose centres are ``d`` apart."""
    d = np.minimum(np.asarray(d, dtype=float), 2 * radius)
    h = d / (2 * radius)
    return 2 * radius**2 * np.arccos(h) - 0.5 * d * np.sqrt(np.maximum(4 * radius**2 - d**2, 0.0))


def pair_correlation(
    spectra,
    window_radius: float,
    omega_bins,
    center: complex = 0.0,
) -> HistogramEstimate:
    """Rotationally averaged two-point function ``R2(|omega|)`` in a bulk disk.

    Ordered pairs ``i != j`` with both points inside the window are binned by
    ``|z_i - z_j|``.  Each pair is weighted by ``|W| / |W cap (W + omega)|``
    (translation edge correction), which makes the estimate unbiased for a
    homogeneous process; the result is then divided by the number of
    realizations, the window area and the bin annulus area.

    Deduplicated AII-dagger spectra (multiplicity 2) contribute four ordered
    pairs per pair of doublets and nothing from inside a doublet.
    """
    edges = _check_edges(omega_bins)
    if window_radius <= 0:
        raise ParameterError("window_radius must be positive")
    if edges[-1] >= 2 * window_radius:
        raise ParameterError("largest separation must be below the window diameter")
    w_area = np.pi * window_radius**2
    ann = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    counts = np.zeros(edges.size - 1)
    sum_sq = np.zeros(edges.size - 1)
    n = 0
    n_points = 0
    for pts, mult in _as_points(spectra):
        inside = pts[np.abs(pts - center) < window_radius]
        n += 1
        n_points += inside.size
        if inside.size < 2:
            continue
        tree = cKDTree(np.column_stack([inside.real, inside.imag]))
        pairs = tree.query_pairs(edges[-1], output_type="ndarray")
        c = np.zeros(edges.size - 1)
        if pairs.size:
            d = np.abs(inside[pairs[:, 0]] - inside[pairs[:, 1]])
            wgt = 2.0 * mult * mult * w_area / disk_overlap_area(window_radius, d)
            c, _ = np.histogram(d, edges, weights=wgt)
        counts += c
        sum_sq += c * c
    if n == 0:
        raise ParameterError("empty spectrum stream")
    if n_points == 0:
        raise ParameterError("no eigenvalues fall inside the window")
    return HistogramEstimate(
        "pair_correlation",
        edges,
        counts,
        sum_sq,
        n,
        w_area * ann,
        {
            "estimator": "translation_corrected_pair_count",
            "window_radius": float(window_radius),
            "divisor": "n_samples*window_area*annulus_area",
            "connected": False,
        },
    )


def spacing_samples(spectra) -> np.ndarray:
    """``s = |z_+ - z_-|`` for spectra holding exactly two distinct eigenvalues."""
    if isinstance(spectra, np.ndarray) and spectra.ndim == 2:
        arr = spectra
    else:
        rows = [pts for pts, _ in _as_points(spectra)]
        if not rows:
            return np.zeros(0)
        if any(r.size != 2 for r in rows):
            raise ParameterError("each spectrum must hold exactly two eigenvalues")
        arr = np.array(rows)
    if arr.shape[-1] != 2:
        raise ParameterError("each spectrum must hold exactly two eigenvalues")
    s = np.abs(arr[:, 0] - arr[:, 1])
    if np.any(s == 0):
        raise ParameterError("spectrum with coincident eigenvalues has no spacing")
    return s
