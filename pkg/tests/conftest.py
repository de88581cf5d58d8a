"""Shared fixtures: cached eigenvalue streams and the acceptance report."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from nhrmt.ensembles import EnsembleSpec
from nhrmt.runner import generate_spectra

_REPORT: dict[int, str] = {}


class SpectrumStore:
    """Eigenvalue streams kept in the pytest cache between sessions.

    Each stream is stored with the wall-clock seconds its generation took, so
    runtime budgets can be checked against the recorded compute time even
    when a later session loads the stream from disk.
    """

    def __init__(self, root):
        self.root = root

    def get(self, name: str, spec: EnsembleSpec, count: int):
        meta = {"class": spec.symmetry.value, "N": spec.n_half, "g": spec.width, "seed": spec.seed, "count": count}
        path = self.root / f"{name}.npz"
        if path.exists():
            with np.load(path) as data:
                if json.loads(str(data["meta"])) == meta:
                    return data["eigenvalues"], float(data["seconds"])
        t0 = time.perf_counter()
        ev = np.concatenate([chunk for _, chunk in generate_spectra(spec, count)])
        seconds = time.perf_counter() - t0
        np.savez(path, eigenvalues=ev, seconds=seconds, meta=json.dumps(meta))
        return ev, seconds


@pytest.fixture(scope="session")
def spectrum_store(request):
    return SpectrumStore(request.config.cache.mkdir("nhrmt-spectra"))


@pytest.fixture(scope="session")
def criterion_report():
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        _REPORT[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_REPORT):
        terminalreporter.write_line(_REPORT[k])
