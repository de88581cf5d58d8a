"""Closed-form predictions: edge density, bulk two-point function, small-n
expansion coefficients and small-matrix surmises.

Unit conventions are those native to each formula:

* ``dos_edge`` for AI† assumes ``g = 2`` and for AII† ``g = 1``; in both cases
  the spectral radius is ``sqrt(N)`` and ``u = sqrt(N) - |z|``.  Use
  :func:`edge_coordinate` and :func:`density_in_edge_units` to convert data
  taken at another width.  Lengths scale as ``sqrt(g)`` and densities as
  ``1/g``.
* ``r2_bulk`` and ``yn_smalln`` take ``g`` explicitly (``nu = |omega|^2 / g``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, k0, k0e, k1

from .ensembles import SymmetryClass
from .errors import ParameterError

__all__ = [
    "OutOfRegimeWarning",
    "EdgeCoordinate",
    "edge_coordinate",
    "density_in_edge_units",
    "EDGE_WIDTH",
    "dos_edge",
    "r2_bulk",
    "yn_smalln",
    "radial_biharmonic",
    "r2_from_smalln",
    "r2_small",
    "surmise_spacing",
    "surmise_cdf",
    "surmise_mean",
]

SQRT_PI = math.sqrt(math.pi)

# width each edge formula is written in
EDGE_WIDTH = {SymmetryClass.AI_DAG: 2.0, SymmetryClass.AII_DAG: 1.0}


class OutOfRegimeWarning(UserWarning):
    """Evaluation outside the stated validity regime of an asymptotic formula."""


def _replica_class(symmetry) -> SymmetryClass:
    symmetry = SymmetryClass.parse(symmetry)
    if symmetry is SymmetryClass.A:
        raise ParameterError("this formula exists for AIdagger and AIIdagger only")
    return symmetry


@dataclass(frozen=True)
class EdgeCoordinate:
    u: np.ndarray
    N: int
    g_convention: float


def edge_coordinate(symmetry, abs_z, N: int, g: float) -> EdgeCoordinate:
    """Distance from the spectral edge in the formula's units.

    ``|z|`` measured at width ``g`` becomes ``|z| * sqrt(g_ref / g)``, where
    ``g_ref`` is the width the edge formula assumes.
    """
    symmetry = _replica_class(symmetry)
    g_ref = EDGE_WIDTH[symmetry]
    z = np.asarray(abs_z, dtype=float) * math.sqrt(g_ref / g)
    return EdgeCoordinate(math.sqrt(N) - z, int(N), g_ref)


def density_in_edge_units(symmetry, pi_r1, g: float):
    """Convert ``pi R1`` measured at width ``g`` to the edge formula's width."""
    symmetry = _replica_class(symmetry)
    return np.asarray(pi_r1, dtype=float) * g / EDGE_WIDTH[symmetry]


def dos_edge(symmetry, u, N: int):
    """``pi R1`` near the spectral edge as a function of ``u = sqrt(N) - |z|``.

    AI† (``g = 2``)::

        1 - 1/(4u^2) - sqrt(2/(pi N)) e^{-2u^2}/(16 u^4) - e^{-2u^2}/(16 sqrt(2 pi) u^5)

    AII† (``g = 1``)::

        2 + 1/(4u^2) - sqrt(2 pi) e^{-2u^2} (u + 1/(4u) + 1/(8u^3)) - e^{-4u^2}/(8 sqrt(pi) u^3)
    """
    symmetry = _replica_class(symmetry)
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0):
        raise ParameterError("edge formulas need u > 0")
    if N < 1:
        raise ParameterError("N must be positive")
    e2 = np.exp(-2 * u_arr**2)
    if symmetry is SymmetryClass.AI_DAG:
        out = (
            1
            - 1 / (4 * u_arr**2)
            - math.sqrt(2 / (math.pi * N)) * e2 / (16 * u_arr**4)
            - e2 / (16 * math.sqrt(2 * math.pi) * u_arr**5)
        )
    else:
        out = (
            2
            + 1 / (4 * u_arr**2)
            - math.sqrt(2 * math.pi) * e2 * (u_arr + 1 / (4 * u_arr) + 1 / (8 * u_arr**3))
            - np.exp(-4 * u_arr**2) / (8 * SQRT_PI * u_arr**3)
        )
    return out if out.ndim else float(out)


def r2_bulk(symmetry, omega_abs, g: float = 1.0):
    """``pi^2 R2`` in the bulk to leading order for ``|omega|^2 >> g``.

    AI†: ``4 g^-2 (1 - e^{-2 nu} / nu^2)``; AII†: ``g^-2 (4 - pi nu e^{-nu})``
    with ``nu = |omega|^2 / g``.  Inputs with ``|omega|^2 < g`` are evaluated
    but trigger :class:`OutOfRegimeWarning`.
    """
    symmetry = _replica_class(symmetry)
    if g <= 0:
        raise ParameterError("g must be positive")
    w = np.asarray(omega_abs, dtype=float)
    if np.any(w <= 0):
        raise ParameterError("omega_abs must be positive")
    nu = w**2 / g
    if np.any(nu < 1):
        warnings.warn("r2_bulk evaluated at |omega|^2 < g", OutOfRegimeWarning, stacklevel=2)
    if symmetry is SymmetryClass.AI_DAG:
        out = 4 / g**2 * (1 - np.exp(-2 * nu) / nu**2)
    else:
        out = (4 - math.pi * nu * np.exp(-nu)) / g**2
    return out if out.ndim else float(out)


# c2 is a sum of  coef * nu^p  (poly), coef * log(nu)  and  coef * e^{-a nu} nu^{-k}
def _c2_terms(symmetry, alt_sign):
    flip = -1.0 if alt_sign else 1.0
    if symmetry is SymmetryClass.AI_DAG:
        return {"nu2": 0.5, "log": -2.0, "log_shift": 0.0, "exp": [(-flip / 4, 2.0, 4)]}
    return {
        "nu2": 0.5,
        "log": -2.0,
        "log_shift": 2.0 * math.log(2.0),
        "exp": [(-flip * math.pi, 1.0, 1), (0.25, 2.0, 4)],
    }


def yn_smalln(symmetry, nu, alt_sign: bool = False):
    """Coefficients ``(c1, c2)`` of ``Y = 1 + c1 n + c2 n^2 + O(n^3)``.

    AI†:  ``c1 = nu``, ``c2 = nu^2/2 - 2 ln nu - e^{-2nu}/(4 nu^4)``.
    AII†: ``c1 = nu``, ``c2 = nu^2/2 - 2 ln(nu/2) - pi e^{-nu}/nu + e^{-2nu}/(4 nu^4)``.

    The sign of the exponential term that comes from continuing an odd power
    of the expansion variable to the imaginary axis is a choice; ``alt_sign``
    flips it (``e^{-2nu}/(4nu^4)`` for AI†, ``pi e^{-nu}/nu`` for AII†).
    """
    symmetry = _replica_class(symmetry)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0):
        raise ParameterError("nu must be positive")
    t = _c2_terms(symmetry, alt_sign)
    c2 = t["nu2"] * nu**2 + t["log"] * np.log(nu) + t["log_shift"]
    for coef, a, k in t["exp"]:
        c2 = c2 + coef * np.exp(-a * nu) / nu**k
    c1 = nu * 1.0
    if c2.ndim == 0:
        return float(c1), float(c2)
    return c1, c2


def _exp_power_derivative(a, k, j, nu):
    """``d^j/dnu^j [e^{-a nu} nu^{-k}]``."""
    total = 0.0
    for i in range(j + 1):
        falling = 1.0
        for r in range(i):
            falling *= -k - r
        total = total + math.comb(j, i) * (-a) ** (j - i) * falling * nu ** (-k - i)
    return total * np.exp(-a * nu)


def radial_biharmonic(f1, f2, f3, f4, nu):
    """``d^2_w d^2_wbar F(w wbar)`` from the derivatives of ``F`` at ``nu = |w|^2``."""
    return 2 * f2 + 4 * nu * f3 + nu**2 * f4


def r2_from_smalln(symmetry, nu, alt_sign: bool = False):
    """``2 + d^2_w d^2_wbar c2(|w|^2)`` in ``g = 1`` units.

    To leading order this reproduces :func:`r2_bulk`; the difference is made
    of the subleading exponential terms the bulk formula drops.
    """
    symmetry = _replica_class(symmetry)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0):
        raise ParameterError("nu must be positive")
    t = _c2_terms(symmetry, alt_sign)
    # nu^2/2 contributes 2 f'' = 2; log(nu) is annihilated by the operator
    out = 2.0 + 2.0 * (2 * t["nu2"]) + 0 * nu
    for coef, a, k in t["exp"]:
        d = [_exp_power_derivative(a, k, j, nu) for j in range(5)]
        out = out + coef * radial_biharmonic(d[1], d[2], d[3], d[4], nu)
    return out if out.ndim else float(out)


def _k0_safe(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return np.where(x > 600, k0e(x) * np.exp(-np.minimum(x, 745.0)), k0(np.maximum(x, 1e-300)))


def r2_small(symmetry, z1_abs, C: float = 1.0):
    """Radial factor of ``R2(z1, z2) = delta(z1 + z2) * r2_small(|z1|)`` for small matrices.

    A: ``(2/pi) 16 C^4 r^2 e^{-4C^2 r^2}``;
    AI†: ``(2/pi) 16 C^4 r^2 K0(4 C^2 r^2)``;
    AII†: ``(2/pi) (16 C^4 r^2/3)(1 + 4 C^2 r^2) e^{-4C^2 r^2}``.
    All vanish at ``r = 0``.
    """
    symmetry = SymmetryClass.parse(symmetry)
    if C <= 0:
        raise ParameterError("C must be positive")
    r = np.asarray(z1_abs, dtype=float)
    if np.any(r < 0):
        raise ParameterError("|z1| must be non-negative")
    y = 4 * C**2 * r**2
    pre = 16 * C**4 * r**2
    with np.errstate(invalid="ignore"):
        if symmetry is SymmetryClass.A:
            f = pre * np.exp(-y)
        elif symmetry is SymmetryClass.AI_DAG:
            f = np.where(r > 0, pre * _k0_safe(y), 0.0)
        else:
            f = pre / 3 * (1 + y) * np.exp(-y)
    out = 2 / math.pi * f
    return out if out.ndim else float(out)


def surmise_spacing(symmetry, s, C: float = 1.0):
    """Spacing density ``p_s(s)``, normalized for every ``C > 0``.

    A: ``2 C^4 s^3 e^{-C^2 s^2}``; AI†: ``2 C^4 s^3 K0(C^2 s^2)``;
    AII†: ``(2/3) C^4 s^3 (1 + C^2 s^2) e^{-C^2 s^2}``.
    Each satisfies ``p_s(2r) = (pi r / 2) * r2_small(r)``.
    """
    symmetry = SymmetryClass.parse(symmetry)
    if C <= 0:
        raise ParameterError("C must be positive")
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ParameterError("spacings must be non-negative")
    y = C**2 * s**2
    pre = C**4 * s**3
    with np.errstate(invalid="ignore"):
        if symmetry is SymmetryClass.A:
            out = 2 * pre * np.exp(-y)
        elif symmetry is SymmetryClass.AI_DAG:
            out = np.where(s > 0, 2 * pre * _k0_safe(y), 0.0)
        else:
            out = 2 / 3 * pre * (1 + y) * np.exp(-y)
    return out if out.ndim else float(out)


def surmise_cdf(symmetry, s, C: float = 1.0):
    """Cumulative distribution of :func:`surmise_spacing` (with ``Y = C^2 s^2``).

    A: ``1 - e^{-Y}(1 + Y)``; AI†: ``1 - Y K1(Y)``; AII†: ``1 - e^{-Y}(Y^2 + 3Y + 3)/3``.
    """
    symmetry = SymmetryClass.parse(symmetry)
    s = np.asarray(s, dtype=float)
    y = C**2 * np.maximum(s, 0.0) ** 2
    if symmetry is SymmetryClass.A:
        out = -np.expm1(-y) - y * np.exp(-y)
    elif symmetry is SymmetryClass.AI_DAG:
        with np.errstate(invalid="ignore", over="ignore"):
            tail = np.where(y > 0, y * k1(np.where(y > 0, y, 1.0)), 1.0)
        out = 1 - np.nan_to_num(tail, nan=0.0)
    else:
        out = 1 - np.exp(-y) * (y * y + 3 * y + 3) / 3
    return out if out.ndim else float(out)


def surmise_mean(symmetry, C: float = 1.0) -> float:
    """Mean spacing ``<s>`` of :func:`surmise_spacing`."""
    symmetry = SymmetryClass.parse(symmetry)
    if symmetry is SymmetryClass.A:
        return 3 * SQRT_PI / (4 * C)
    if symmetry is SymmetryClass.AI_DAG:
        return math.sqrt(2) * gamma(1.25) ** 2 / C
    return 7 * SQRT_PI / (8 * C)
