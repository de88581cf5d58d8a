"""Experiment configuration, batch runs and estimate/prediction comparison.

A run writes four files into ``output_dir``::

    estimate.csv     Monte Carlo estimate
    prediction.csv   analytic or quadrature prediction on the same grid
    comparison.csv   both side by side with z-scores
    manifest.json    config echo, version, timings, checksums, dropped samples

Configs are plain ``key = value`` text files.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import kstest

from . import __version__
from .asymptotics import (
    EDGE_WIDTH,
    OutOfRegimeWarning,
    dos_edge,
    r2_bulk,
    surmise_cdf,
    surmise_mean,
)
from .charpoly import write_moment_csv, z1_moment_grid, z2_moment_grid
from .ensembles import EnsembleSpec, SymmetryClass, sample_batch
from .errors import ComputationError, ParameterError
from .nlsm import z1_normalized, z2_normalized
from .spectra import (
    ComplexSpectrum,
    eigenvalues_batch,
    kramers_dedup_batch,
    kramers_pairs,
    pair_correlation,
    radial_density,
    spacing_samples,
)

__all__ = [
    "EXPERIMENTS",
    "GridSpec",
    "ExperimentConfig",
    "RunManifest",
    "PRESETS",
    "spectral_radius",
    "generate_spectra",
    "run_experiment",
    "CompareReport",
    "compare",
]

SCHEMA_VERSION = 1
EXPERIMENTS = ("charpoly1", "charpoly2", "dos_edge", "r2_bulk", "spacing_surmise", "girko")
_REPLICA_ONLY = {"charpoly1", "charpoly2", "dos_edge", "r2_bulk"}
_CHUNK = 16


@dataclass(frozen=True)
class GridSpec:
    min: float
    max: float
    count: int

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = str(text).split(":")
        if len(parts) != 3:
            raise ParameterError(f"grid must look like min:max:count, got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise ParameterError(f"bad grid {text!r}") from None

    def __str__(self):
        return f"{self.min!r}:{self.max!r}:{self.count}"

    def points(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)

    def edges(self) -> np.ndarray:
        """``count`` equal bins spanning ``[min, max]``."""
        return np.linspace(self.min, self.max, self.count + 1)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    symmetry: SymmetryClass
    N: int
    g: float
    n_list: tuple = (1,)
    n_samples: int = 1000
    seed: int = 0
    grid: GridSpec = GridSpec(0.0, 3.0, 20)
    output_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "symmetry", SymmetryClass.parse(self.symmetry))
        if isinstance(self.grid, str):
            object.__setattr__(self, "grid", GridSpec.parse(self.grid))
        if isinstance(self.n_list, (int, np.integer)):
            object.__setattr__(self, "n_list", (int(self.n_list),))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}")
        if self.experiment in _REPLICA_ONLY and self.symmetry is SymmetryClass.A:
            raise ParameterError(f"{self.experiment} needs class AIdagger or AIIdagger")
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError("N must be a positive integer")
        if not (self.g > 0 and math.isfinite(self.g)):
            raise ParameterError("g must be positive")
        if self.n_samples < 1:
            raise ParameterError("n_samples must be positive (zero realizations requested)")
        if self.experiment.startswith("charpoly"):
            if self.n_samples < 2:
                raise ParameterError("moment estimates need at least two samples")
            if not self.n_list or any(n < 1 for n in self.n_list):
                raise ParameterError("n_list must hold positive replica indices")
        if self.grid.count < 1 or not self.grid.max >= self.grid.min:
            raise ParameterError("grid needs count >= 1 and max >= min")
        if self.experiment in ("dos_edge", "r2_bulk", "girko", "spacing_surmise") and self.grid.max <= self.grid.min:
            raise ParameterError("binned experiments need max > min")
        if self.experiment == "spacing_surmise" and self.N != 2:
            raise ParameterError("spacing_surmise uses N = 2 (2x2 or 4x4 matrices)")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")

    @property
    def spec(self) -> EnsembleSpec:
        return EnsembleSpec(self.symmetry, self.N, self.g, self.seed)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "class": self.symmetry.value,
            "N": self.N,
            "g": self.g,
            "n_list": list(self.n_list),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "grid": str(self.grid),
            "output_dir": str(self.output_dir),
            "threads": self.threads,
        }

    def to_text(self) -> str:
        d = self.to_dict()
        d["n_list"] = ",".join(str(n) for n in self.n_list)
        d["g"] = repr(float(self.g))
        return "".join(f"{k} = {v}\n" for k, v in d.items())

    @classmethod
    def from_mapping(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {"experiment", "class", "N", "g", "n_list", "n_samples", "seed", "grid", "output_dir", "threads"}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in d or "class" not in d:
            raise ParameterError("config needs at least 'experiment' and 'class'")
        try:
            kw = {"experiment": str(d["experiment"]), "symmetry": d["class"]}
            if "N" in d:
                kw["N"] = int(d["N"])
            if "g" in d:
                kw["g"] = float(d["g"])
            if "n_list" in d:
                v = d["n_list"]
                kw["n_list"] = tuple(int(x) for x in (v.split(",") if isinstance(v, str) else v) if str(x).strip())
            if "n_samples" in d:
                kw["n_samples"] = int(d["n_samples"])
            if "seed" in d:
                kw["seed"] = int(d["seed"])
            if "grid" in d:
                kw["grid"] = GridSpec.parse(d["grid"])
            if "output_dir" in d:
                kw["output_dir"] = str(d["output_dir"])
            if "threads" in d:
                kw["threads"] = int(d["threads"])
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"bad config value: {exc}") from None
        kw.setdefault("N", 2)
        kw.setdefault("g", 1.0)
        return cls(**kw)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        d = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"line {lineno}: expected key = value")
            k, v = line.split("=", 1)
            d[k.strip()] = v.strip()
        return cls.from_mapping(d)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _preset(experiment, symmetry, N, g, n_list, n_samples, grid, seed=20240501):
    return dict(
        experiment=experiment,
        symmetry=symmetry,
        N=N,
        g=g,
        n_list=n_list,
        n_samples=n_samples,
        grid=GridSpec.parse(grid),
        seed=seed,
    )


# desk scale runs in minutes on one core; the large presets use the full published sample sizes
PRESETS = {
    "charpoly1-aidag-desk": _preset("charpoly1", "AIdagger", 5, 2.0, (1, 2), 10**5, "0:3:20"),
    "charpoly1-aiidag-desk": _preset("charpoly1", "AIIdagger", 2, 2.0, (1, 2), 10**5, "0:3:20"),
    "charpoly2-aidag-desk": _preset("charpoly2", "AIdagger", 50, 2.0, (1,), 10**5, "0:1:11"),
    "charpoly2-aidag-paper": _preset("charpoly2", "AIdagger", 50, 2.0, (1, 2, 3), 5 * 10**6, "0:3:31"),
    "girko-aidag-desk": _preset("girko", "AIdagger", 500, 2.0, (1,), 10**3, "0:15.6:20"),
    "girko-aiidag-desk": _preset("girko", "AIIdagger", 100, 2.0, (1,), 10**3, "0:9.8:10"),
    "dos-edge-aidag-desk": _preset("dos_edge", "AIdagger", 500, 2.0, (1,), 10**3, "1:4:12"),
    "dos-edge-aidag-paper": _preset("dos_edge", "AIdagger", 1000, 2.0, (1,), 2 * 10**4, "0.5:4:28"),
    "dos-edge-aiidag-desk": _preset("dos_edge", "AIIdagger", 500, 2.0, (1,), 10**3, "1:4:12"),
    "dos-edge-aiidag-paper": _preset("dos_edge", "AIIdagger", 1000, 2.0, (1,), 2 * 10**4, "0.5:4:28"),
    "r2-bulk-aidag-desk": _preset("r2_bulk", "AIdagger", 1000, 1.0, (1,), 200, "0.2:6:29"),
    "r2-bulk-aiidag-desk": _preset("r2_bulk", "AIIdagger", 500, 1.0, (1,), 200, "0.2:6:29"),
    "spacing-a-desk": _preset("spacing_surmise", "A", 2, 1.0, (1,), 10**6, "0:3:60"),
    "spacing-aidag-desk": _preset("spacing_surmise", "AIdagger", 2, 1.0, (1,), 10**6, "0:3:60"),
    "spacing-aiidag-desk": _preset("spacing_surmise", "AIIdagger", 2, 1.0, (1,), 10**6, "0:3:60"),
}


def spectral_radius(symmetry, N: int, g: float) -> float:
    """Radius of the uniform-disk support: ``sqrt(gN)`` for A and AII†, ``sqrt(gN/2)`` for AI†."""
    symmetry = SymmetryClass.parse(symmetry)
    if symmetry is SymmetryClass.AI_DAG:
        return math.sqrt(g * N / 2)
    return math.sqrt(g * N)


def generate_spectra(spec: EnsembleSpec, count: int, threads: int = 1, failures: list | None = None):
    """Yield ``(start_index, eigenvalues)`` chunks for realizations ``0..count-1``.

    Chunks come out in realization order whatever the worker count.  A chunk
    whose eigensolve fails is retried one realization at a time; failing
    realizations are skipped and reported in ``failures``.
    """

    def work(start):
        k = min(_CHUNK, count - start)
        H = sample_batch(spec, k, start=start)
        try:
            return start, eigenvalues_batch(H, start_index=start)
        except ComputationError:
            rows = []
            for i in range(k):
                try:
                    rows.append(eigenvalues_batch(H[i : i + 1], start_index=start + i)[0])
                except ComputationError as exc:
                    if failures is not None:
                        failures.append({"realization": start + i, "error": str(exc)})
            return start, np.array(rows).reshape(len(rows), spec.dim)

    starts = range(0, count, _CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(work, starts)
    else:
        for s in starts:
            yield work(s)


def _dedup_rows(ev, start, failures):
    """Kramers-deduplicate each row; rows failing the residual guard are dropped."""
    out = []
    for i, row in enumerate(ev):
        reps, gap = kramers_pairs(row)
        radius = np.abs(row).max()
        if gap > 1e-6 * radius:
            failures.append({"realization": start + i, "error": f"Kramers residual {gap:.3e}"})
            continue
        out.append(reps)
    return out


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_clock_seconds: float
    outputs: dict
    dropped_samples: int = 0
    failures: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def _fmt(x) -> str:
    return f"{x:.12e}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _write_comparison(path, keys, key_header, est, se, pred):
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(est == pred, 0.0, (est - pred) / se)
    rows = [list(k) + [e, s, p, zz] for k, e, s, p, zz in zip(keys, est, se, pred, z)]
    _write_rows(path, key_header + ["estimate", "std_error", "prediction", "z_score"], rows)
    return z


def _hist_prediction(path, edges, pred, n_samples):
    rows = [(lo, hi, p, 0.0, n_samples) for lo, hi, p in zip(edges[:-1], edges[1:], pred)]
    _write_rows(path, ["bin_left", "bin_right", "value", "std_error", "n_samples"], rows)


def _annulus_average(f, r_lo, r_hi, n=64):
    """Area-weighted mean of ``f(r)`` over the annulus ``r_lo < r < r_hi``."""
    x, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * (r_hi - r_lo) * (x + 1) + r_lo
    return np.sum(w * r * f(r)) / np.sum(w * r)


def _run_girko(cfg, out, failures):
    spec = cfg.spec
    edges = cfg.grid.edges()
    hist = None
    for start, ev in generate_spectra(spec, cfg.n_samples, cfg.threads, failures):
        h = radial_density(ev, edges)
        hist = h if hist is None else hist.merge(h)
    scale = math.pi * cfg.g / (1.0 if cfg.symmetry is SymmetryClass.A else 2.0)
    hist.to_csv(out / "estimate.csv", scale=scale)
    pred = np.ones(edges.size - 1)
    _hist_prediction(out / "prediction.csv", edges, pred, hist.n_samples)
    keys = list(zip(edges[:-1], edges[1:]))
    z = _write_comparison(
        out / "comparison.csv", keys, ["bin_left", "bin_right"], hist.value * scale, hist.std_error * scale, pred
    )
    return z, {"observable": "pi*R1*g/2 (AI, AII) or pi*R1*g (A); bulk value 1"}


def _run_dos_edge(cfg, out, failures):
    spec = cfg.spec
    sym = cfg.symmetry
    g_ref = EDGE_WIDTH[sym]
    u_edges = cfg.grid.edges()
    if u_edges[0] <= 0:
        raise ParameterError("edge grid needs u > 0")
    # |z| at width g from u in formula units
    to_r = lambda u: (math.sqrt(cfg.N) - u) * math.sqrt(cfg.g / g_ref)  # noqa: E731
    r_edges = to_r(u_edges)[::-1]
    if r_edges[0] < 0:
        raise ParameterError("edge grid extends past the centre")
    hist = None
    for start, ev in generate_spectra(spec, cfg.n_samples, cfg.threads, failures):
        h = radial_density(ev, r_edges)
        hist = h if hist is None else hist.merge(h)
    scale = math.pi * cfg.g / g_ref
    est = (hist.value * scale)[::-1]
    se = (hist.std_error * scale)[::-1]
    rows = [(lo, hi, v, s, hist.n_samples) for lo, hi, v, s in zip(u_edges[:-1], u_edges[1:], est, se)]
    _write_rows(out / "estimate.csv", ["bin_left", "bin_right", "value", "std_error", "n_samples"], rows)
    sqn = math.sqrt(cfg.N)
    pred = np.array(
        [
            _annulus_average(lambda r: dos_edge(sym, sqn - r, cfg.N), sqn - hi, sqn - lo)
            for lo, hi in zip(u_edges[:-1], u_edges[1:])
        ]
    )
    _hist_prediction(out / "prediction.csv", u_edges, pred, hist.n_samples)
    keys = list(zip(u_edges[:-1], u_edges[1:]))
    z = _write_comparison(out / "comparison.csv", keys, ["bin_left", "bin_right"], est, se, pred)
    return z, {"observable": "pi*R1 in edge-formula units, binned in u", "g_formula": g_ref}


def _run_r2_bulk(cfg, out, failures):
    spec = cfg.spec
    sym = cfg.symmetry
    edges = cfg.grid.edges()
    window = 0.5 * spectral_radius(sym, cfg.N, cfg.g)
    hist = None
    dropped = 0
    for start, ev in generate_spectra(spec, cfg.n_samples, cfg.threads, failures):
        if sym is SymmetryClass.AII_DAG:
            before = len(failures)
            rows = _dedup_rows(ev, start, failures)
            dropped += len(failures) - before
            items = [ComplexSpectrum(r, multiplicity=2) for r in rows]
        else:
            items = ev
        if len(items) == 0:
            continue
        h = pair_correlation(items, window, edges)
        hist = h if hist is None else hist.merge(h)
    if hist is None:
        raise ComputationError("no usable realizations")
    scale = math.pi**2
    hist.to_csv(out / "estimate.csv", scale=scale)
    centers = 0.5 * (edges[1:] + edges[:-1])
    ok = centers > 0
    pred = np.full(centers.shape, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutOfRegimeWarning)
        pred[ok] = r2_bulk(sym, centers[ok], cfg.g)
    _hist_prediction(out / "prediction.csv", edges, pred, hist.n_samples)
    keys = list(zip(edges[:-1], edges[1:]))
    z = _write_comparison(
        out / "comparison.csv", keys, ["bin_left", "bin_right"], hist.value * scale, hist.std_error * scale, pred
    )
    regime = centers**2 >= cfg.g
    return z, {
        "observable": "pi^2*R2",
        "window_radius": window,
        "in_regime_bins": int(regime.sum()),
        "kramers_dropped": dropped,
    }


def _run_spacing(cfg, out, failures):
    spec = cfg.spec
    sym = cfg.symmetry
    parts = []
    for start, ev in generate_spectra(spec, cfg.n_samples, cfg.threads, failures):
        if sym is SymmetryClass.AII_DAG:
            ev, _ = kramers_dedup_batch(ev, start_index=start)
        parts.append(spacing_samples(ev))
    s = np.concatenate(parts)
    x = s / s.mean()
    m = surmise_mean(sym)
    edges = cfg.grid.edges()
    counts, _ = np.histogram(x, edges)
    width = np.diff(edges)
    n = x.size
    est = counts / (n * width)
    # an empty bin still carries the one-count Poisson uncertainty
    se = np.sqrt(np.maximum(counts, 1) * (1 - counts / n)) / (n * width)
    cdf = surmise_cdf(sym, edges * m)
    pred = np.diff(cdf) / width
    rows = [(lo, hi, v, e, n) for lo, hi, v, e in zip(edges[:-1], edges[1:], est, se)]
    _write_rows(out / "estimate.csv", ["bin_left", "bin_right", "value", "std_error", "n_samples"], rows)
    _hist_prediction(out / "prediction.csv", edges, pred, n)
    keys = list(zip(edges[:-1], edges[1:]))
    z = _write_comparison(out / "comparison.csv", keys, ["bin_left", "bin_right"], est, se, pred)
    ks = kstest(x, lambda v: surmise_cdf(sym, np.asarray(v) * m)).statistic
    return z, {"observable": "spacing density of s/<s>", "ks_distance": float(ks)}


def _run_charpoly(cfg, out, failures):
    spec = cfg.spec
    sym = cfg.symmetry
    pts = cfg.grid.points()
    if cfg.experiment == "charpoly1":
        grid = z1_moment_grid(spec, cfg.n_list, pts, cfg.n_samples, threads=cfg.threads)
        pred_fn = lambda n: z1_normalized(sym, n, cfg.N, cfg.g, pts**2)  # noqa: E731
        key = "abs_z"
    else:
        grid = z2_moment_grid(spec, cfg.n_list, 0.0, pts, cfg.n_samples, threads=cfg.threads)
        pred_fn = lambda n: z2_normalized(sym, n, cfg.g, pts**2)  # noqa: E731
        key = "abs_omega"
    write_moment_csv(out / "estimate.csv", grid)
    preds = []
    for n in cfg.n_list:
        p = pred_fn(n)
        # normalize to the first grid point, like the estimate
        p = p / p[0]
        preds.append(p)
    preds = np.array(preds)
    header = [key, "n", "N", "g", "normalized_moment", "rel_std_error", "n_samples"]
    rows = [
        (a, n, cfg.N, float(cfg.g), preds[i, j], 0.0, grid.n_samples)
        for i, n in enumerate(cfg.n_list)
        for j, a in enumerate(pts)
    ]
    _write_rows(out / "prediction.csv", header, rows)
    est = grid.normalized.ravel()
    se = (grid.normalized * grid.normalized_rel_se).ravel()
    keys = [(a, n) for n in cfg.n_list for a in pts]
    z = _write_comparison(out / "comparison.csv", keys, [key, "n"], est, se, preds.ravel())
    return z, {"observable": "normalized moment", "n_dropped": grid.n_dropped}


_RUNNERS = {
    "girko": _run_girko,
    "dos_edge": _run_dos_edge,
    "r2_bulk": _run_r2_bulk,
    "spacing_surmise": _run_spacing,
    "charpoly1": _run_charpoly,
    "charpoly2": _run_charpoly,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def run_experiment(config: ExperimentConfig) -> RunManifest:
    """Run ``config`` and write estimate, prediction, comparison and manifest files."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    failures: list = []
    t0 = time.perf_counter()
    z, summary = _RUNNERS[config.experiment](config, out, failures)
    elapsed = time.perf_counter() - t0
    finite = np.isfinite(z)
    summary = dict(summary)
    summary["max_abs_z"] = float(np.max(np.abs(z[finite]))) if finite.any() else None
    names = ["estimate.csv", "prediction.csv", "comparison.csv"]
    manifest = RunManifest(
        config=config.to_dict(),
        version=__version__,
        wall_clock_seconds=elapsed,
        outputs={n: _sha256(out / n) for n in names},
        dropped_samples=len(failures) + int(summary.get("n_dropped", 0) or 0),
        failures=failures,
        summary=summary,
    )
    (out / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    return manifest


@dataclass
class CompareReport:
    keys: list
    z_scores: np.ndarray
    tolerance: float
    fraction_over: float
    passed: bool

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1

    def text(self) -> str:
        bad = int(np.sum(np.abs(self.z_scores) > self.tolerance))
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict}: {bad}/{len(self.z_scores)} bins beyond |z| > {self.tolerance:g} "
            f"({100 * self.fraction_over:.2f}%, allowed 1%)"
        )


_VALUE_COLUMNS = {
    "value": "std_error",
    "normalized_moment": "rel_std_error",
}


def _read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParameterError(f"{path} is empty")
    return rows[0], rows[1:]


def _table_columns(header):
    for val, err in _VALUE_COLUMNS.items():
        if val in header:
            keys = [h for h in header if h not in (val, err, "n_samples", "N", "g")]
            return val, err, keys
    raise ParameterError(f"unrecognized table header {header}")


def compare(estimates, predictions, tolerance: float = 3.0) -> CompareReport:
    """Per-row z-scores of an estimate table against a prediction table.

    Rows are matched on their key columns (bin edges or argument and replica
    index).  The comparison fails when more than 1% of rows exceed
    ``tolerance``.
    """
    h1, r1 = _read_table(estimates)
    h2, r2 = _read_table(predictions)
    if h1 != h2:
        raise ParameterError("estimate and prediction tables have different columns")
    val, err, keys = _table_columns(h1)
    ki = [h1.index(k) for k in keys]
    vi, ei = h1.index(val), h1.index(err)
    k1 = [tuple(r[i] for i in ki) for r in r1]
    k2 = [tuple(r[i] for i in ki) for r in r2]
    if k1 != k2:
        raise ParameterError("estimate and prediction grids do not match")
    est = np.array([float(r[vi]) for r in r1])
    pred = np.array([float(r[vi]) for r in r2])
    se = np.array([float(r[ei]) for r in r1])
    if err == "rel_std_error":
        se = se * np.abs(est)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(est == pred, 0.0, (est - pred) / se)
    z = np.where(np.isnan(z), np.inf, z)
    frac = float(np.mean(np.abs(z) > tolerance)) if z.size else 0.0
    return CompareReport(k1, z, float(tolerance), frac, frac <= 0.01)
