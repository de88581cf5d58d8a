"""Command line entry point.

Examples::

    nhrmt charpoly1 --class AIdagger --dim 5 --width 2 --replicas 1,2 --samples 100000 --out runs/c1
    nhrmt girko --preset girko-aidag-desk --out runs/girko
    nhrmt dos-edge --config edge.cfg --threads 4
    nhrmt compare runs/c1/estimate.csv runs/c1/prediction.csv --tol 3
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ensembles import EnsembleSpec, SymmetryClass, check_symmetry, sample_batch
from .errors import ComputationError, ParameterError
from .nlsm import (
    write_quadrature_csv,
    z1_integral_aidag,
    z1_integral_aiidag,
    z2_integral_aidag,
    z2_integral_aiidag,
)
from .runner import PRESETS, ExperimentConfig, GridSpec, compare, run_experiment

_EXPERIMENT_COMMANDS = {
    "girko": "girko",
    "dos-edge": "dos_edge",
    "r2-bulk": "r2_bulk",
    "charpoly1": "charpoly1",
    "charpoly2": "charpoly2",
    "spacing": "spacing_surmise",
}


def _add_common(p, with_out=True):
    p.add_argument("--class", dest="symmetry", help="A, AIdagger or AIIdagger")
    p.add_argument("--dim", type=int, help="half-dimension N (matrix size N, or 2N for AIIdagger)")
    p.add_argument("--width", type=float, help="variance scale g")
    p.add_argument("--replicas", help="comma-separated replica indices n")
    p.add_argument("--samples", type=int, help="number of realizations")
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", help="argument grid min:max:count")
    p.add_argument("--threads", type=int)
    if with_out:
        p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhrmt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw matrices and save them as .npy")
    _add_common(p)

    for name, experiment in _EXPERIMENT_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {experiment} experiment")
        _add_common(p)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--preset", choices=sorted(k for k, v in PRESETS.items() if v["experiment"] == experiment))
        p.set_defaults(experiment=experiment)

    p = sub.add_parser("nlsm-eval", help="evaluate a replica integral on a grid")
    _add_common(p)
    p.add_argument("--kind", choices=("one_point", "two_point"), default="one_point")

    p = sub.add_parser("compare", help="z-score an estimate table against a prediction table")
    p.add_argument("estimates")
    p.add_argument("predictions")
    p.add_argument("--tol", type=float, default=3.0, help="z-score tolerance")
    return parser


def _overrides(args) -> dict:
    d = {}
    if args.symmetry is not None:
        d["class"] = args.symmetry
    if args.dim is not None:
        d["N"] = args.dim
    if args.width is not None:
        d["g"] = args.width
    if args.replicas is not None:
        d["n_list"] = args.replicas
    if args.samples is not None:
        d["n_samples"] = args.samples
    if args.seed is not None:
        d["seed"] = args.seed
    if args.grid is not None:
        d["grid"] = args.grid
    if args.threads is not None:
        d["threads"] = args.threads
    if getattr(args, "out", None) is not None:
        d["output_dir"] = args.out
    return d


def config_from_args(args) -> ExperimentConfig:
    """Preset, then config file, then flags; later sources win."""
    d: dict = {"experiment": args.experiment}
    if args.preset:
        p = dict(PRESETS[args.preset])
        p["class"] = p.pop("symmetry")
        p["grid"] = str(p["grid"])
        d.update(p)
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                if "=" not in line:
                    raise ParameterError(f"bad config line {line!r}")
                k, v = line.split("=", 1)
                d[k.strip()] = v.strip()
        if d.get("experiment") != args.experiment:
            raise ParameterError(f"config is for {d.get('experiment')!r}, not {args.experiment!r}")
    d.update(_overrides(args))
    return ExperimentConfig.from_mapping(d)


def _cmd_sample(args) -> int:
    spec = EnsembleSpec(args.symmetry or "A", args.dim or 2, args.width or 1.0, args.seed or 0)
    count = args.samples or 1
    H = sample_batch(spec, count)
    resid = max(check_symmetry(h, spec.symmetry) for h in H)
    print(f"{count} x {spec.dim}x{spec.dim} {spec.symmetry.value} matrices, symmetry residual {resid:.3e}")
    if args.out:
        out = Path(args.out)
        if out.suffix != ".npy":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "matrices.npy"
        np.save(out, H)
        print(f"wrote {out}")
    else:
        with np.printoptions(precision=4, suppress=True):
            print(H[0])
    return 0


def _cmd_nlsm(args) -> int:
    sym = SymmetryClass.parse(args.symmetry or "AIdagger")
    n = int((args.replicas or "1").split(",")[0])
    g = args.width or 1.0
    grid = GridSpec.parse(args.grid or "0:3:20").points()
    results = []
    for a in grid:
        x = a * a
        if args.kind == "one_point":
            N = args.dim or 2
            r = z1_integral_aidag(n, N, g, x) if sym is SymmetryClass.AI_DAG else z1_integral_aiidag(n, N, x / g)
        else:
            r = z2_integral_aidag(n, x, 0.0, g) if sym is SymmetryClass.AI_DAG else z2_integral_aiidag(n, x, 0.0, g)
        results.append(r)
    out = Path(args.out or ".")
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"nlsm_{args.kind}.csv"
    write_quadrature_csv(out, grid, results)
    print(f"wrote {out}")
    return 0


def _cmd_experiment(args) -> int:
    cfg = config_from_args(args)
    manifest = run_experiment(cfg)
    print(json.dumps(manifest.summary, sort_keys=True))
    print(f"wrote {cfg.output_dir} in {manifest.wall_clock_seconds:.1f} s")
    report = compare(Path(cfg.output_dir) / "estimate.csv", Path(cfg.output_dir) / "prediction.csv", 4.0)
    print(report.text())
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "nlsm-eval":
            return _cmd_nlsm(args)
        if args.command == "compare":
            report = compare(args.estimates, args.predictions, args.tol)
            print(report.text())
            return report.exit_status
        return _cmd_experiment(args)
    except (ParameterError, ComputationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
