"""Sampling, spectral statistics and replica-integral predictions for Gaussian
non-Hermitian random matrices in classes A, AI-dagger and AII-dagger."""

__version__ = "0.1.0"

from .ensembles import EnsembleSpec, SymmetryClass, check_symmetry, sample, sample_batch  # noqa: E402
from .errors import ComputationError, DegeneracyError, ParameterError  # noqa: E402

__all__ = [
    "__version__",
    "EnsembleSpec",
    "SymmetryClass",
    "check_symmetry",
    "sample",
    "sample_batch",
    "ComputationError",
    "DegeneracyError",
    "ParameterError",
]
