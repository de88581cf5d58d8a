r"""Finite-n replica integrals and their Selberg closed forms.

The integrals evaluated here, with ``Delta`` the Vandermonde product:

================  ====================================================================
one-point AI†     ``int_{[0,inf)^n} prod e^{-2l/g} (|z|^2+l)^N l  Delta^4``
one-point AII†    ``int_{[0,inf)^{2n}} prod l^{-1/2} e^{-l} (l+|z|^2)^N |Delta|``  (g=1)
two-point AI†     ``int_{[0,1]^n} prod l(1-l) e^{-2 w^2 sum l} Delta^4``              (g=1)
two-point AII†    ``int_{[0,1]^{2n}} prod (l(1-l))^{-1/2} e^{-t sum l} |Delta|``      (g=1)
================  ====================================================================

Even Vandermonde powers leave a polynomial times the weight, so tensor Gauss
rules are exact.  ``|Delta|`` is only piecewise polynomial; those integrals
are restricted to the ordered region (where ``|Delta| = Delta``), mapped onto
the unit cube and refined panel-wise.

Only normalized ratios carry meaning for the characteristic-polynomial
comparisons; absolute values drop z-independent constants.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, roots_genlaguerre

from .ensembles import SymmetryClass
from .errors import ParameterError
from .quadrature import (
    adaptive_ordered_simplex,
    composite_legendre,
    log_abs_vandermonde,
    tensor_log_sum,
    truncation_length,
)

__all__ = [
    "QuadratureResult",
    "selberg_laguerre",
    "laguerre_vandermonde_quad",
    "z1_integral_aidag",
    "z1_integral_aiidag",
    "z1_integral_aiidag_grid",
    "z1_normalized",
    "z2_integral_aidag",
    "z2_integral_aiidag",
    "arcsine_vandermonde_integral",
    "z2_normalized",
    "write_quadrature_csv",
]

SUPPORTED_ALPHA = (-0.5, 0.0, 1.0)
SUPPORTED_BETA = (1, 4)

_TAIL_DROP = 45.0
_TWO_POINT_ORDERS = (8, 12, 16, 24, 32, 48, 64, 96, 128)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_est: float
    n_nodes: int
    method: str
    log_value: float
    converged: bool = True
    log_rel_error: float | None = None

    @property
    def rel_error_est(self) -> float:
        """Relative error estimate; stays meaningful when ``value`` overflows."""
        if self.log_rel_error is not None:
            return self.log_rel_error
        return self.abs_error_est / abs(self.value) if self.value else math.inf

    @classmethod
    def unit(cls) -> "QuadratureResult":
        return cls(1.0, 0.0, 0, "empty_product", 0.0)

    @classmethod
    def from_log(cls, log_value, rel_err, n_nodes, method, converged=True):
        value = math.exp(log_value) if log_value < 709.0 else math.inf
        rel = abs(float(rel_err))
        return cls(value, rel * value, int(n_nodes), method, float(log_value), converged, rel)


def _check_selberg(m, alpha, beta):
    if int(m) != m or m < 1:
        raise ParameterError("m must be a positive integer")
    if float(alpha) not in SUPPORTED_ALPHA or beta not in SUPPORTED_BETA:
        raise ParameterError(f"unsupported (alpha, beta) = ({alpha}, {beta})")


def log_selberg_laguerre(m: int, t: float, alpha: float, beta: int) -> float:
    _check_selberg(m, alpha, beta)
    if t <= 0:
        raise ParameterError("t must be positive")
    gam = beta / 2.0
    j = np.arange(m)
    out = gammaln(alpha + 1 + j * gam) + gammaln(1 + (j + 1) * gam) - gammaln(1 + gam)
    power = m * (alpha + 1) + gam * m * (m - 1)
    return float(out.sum() - power * math.log(t))


def selberg_laguerre(m: int, t: float, alpha: float, beta: int) -> float:
    """``int_{[0,inf)^m} prod y^alpha e^{-t y} |Delta(y)|^beta dy`` in closed form.

    Supported: ``alpha`` in {-1/2, 0, 1} and ``beta`` in {1, 4}.
    """
    return math.exp(log_selberg_laguerre(m, t, alpha, beta))


def _tensor_laguerre_log(m, alpha, beta, shift, power, n_nodes):
    x, w = roots_genlaguerre(n_nodes, alpha)

    def log_f(pts):
        with np.errstate(divide="ignore"):
            v = power * np.log(pts + shift).sum(axis=1) if power else 0.0
            return v + beta * log_abs_vandermonde(pts)

    return tensor_log_sum(log_f, x, np.log(w), m)


def _ordered_laguerre_log(m, alpha, beta, t, shift, power, rel_tol):
    # y = mu^2 turns y^alpha dy into 2 mu^(2 alpha + 1) d mu, which is smooth.
    # An array of shifts is integrated on one shared node set.
    a = 2 * alpha + 1
    shifts = np.atleast_1d(np.asarray(shift, dtype=float))
    vector = np.ndim(shift) > 0

    def log_f(mu):
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = mu * mu
            v = m * math.log(2.0) - t * sq.sum(axis=1) + beta * log_abs_vandermonde(sq)
            if a:
                v = v + a * np.log(mu).sum(axis=1)
            if not power:
                return np.repeat(v[:, None], shifts.size, axis=1) if vector else v
            if not vector:
                return v + power * np.log(sq + shifts[0]).sum(axis=1)
            w = np.log(sq[:, :, None] + shifts[None, None, :]).sum(axis=1)
            return v[:, None] + power * w

    def profile(mu):
        return (
            (a + 2 * beta * (m - 1)) * np.log(mu)
            - t * mu * mu
            + power * np.log(mu * mu + shifts.max())
        )

    length = truncation_length(profile, _TAIL_DROP, start=max(1.0, 2.0 / math.sqrt(t)))
    return adaptive_ordered_simplex(log_f, m, length, rel_tol=rel_tol)


def laguerre_vandermonde_quad(
    m: int,
    t: float,
    alpha: float,
    beta: int,
    shift: float = 0.0,
    power: int = 0,
    method: str | None = None,
    rel_tol: float = 1e-11,
) -> QuadratureResult:
    """``int_{[0,inf)^m} prod y^alpha e^{-t y} (y + shift)^power |Delta(y)|^beta dy``.

    ``method`` defaults to ``"tensor_gauss"`` for ``beta = 4`` and
    ``"ordered_simplex_adaptive"`` for ``beta = 1``; the ordered route works for
    either power and serves as a cross-check.
    """
    _check_selberg(m, alpha, beta)
    if t <= 0:
        raise ParameterError("t must be positive")
    if shift < 0 or int(power) != power or power < 0:
        raise ParameterError("shift must be >= 0 and power a non-negative integer")
    alpha = float(alpha)
    if method is None:
        method = "tensor_gauss" if beta % 2 == 0 else "ordered_simplex_adaptive"
    if method == "tensor_gauss":
        if beta % 2:
            raise ParameterError("tensor rules need an even Vandermonde power")
        # y = x / t moves t into the prefactor
        scale = -(m * (alpha + 1 + power) + beta * m * (m - 1) / 2) * math.log(t)
        deg = power + beta * (m - 1)
        n_nodes = math.ceil((deg + 2) / 2) + 2
        lv = _tensor_laguerre_log(m, alpha, beta, shift * t, power, n_nodes)
        lv2 = _tensor_laguerre_log(m, alpha, beta, shift * t, power, n_nodes + 2)
        return QuadratureResult.from_log(lv + scale, math.expm1(lv2 - lv), n_nodes**m, method)
    if method == "ordered_simplex_adaptive":
        lv, change, used, ok = _ordered_laguerre_log(m, alpha, beta, t, shift, power, rel_tol)
        return QuadratureResult.from_log(lv, change, used, method, ok)
    raise ParameterError(f"unknown method {method!r}")


def z1_integral_aidag(n: int, N: int, g: float, zsq: float) -> QuadratureResult:
    """One-point AI† replica integral, up to a z-independent constant.

    After ``l -> (g/2) mu`` the integrand is ``mu e^{-mu}`` times a polynomial
    of degree at most ``N + 4(n-1)`` per axis, integrated exactly by
    ``ceil((N + 2 + 4(n-1))/2) + 2`` generalized Gauss-Laguerre nodes per axis.
    The error estimate is the change under two extra nodes.
    """
    if n == 0:
        return QuadratureResult.unit()
    if int(n) != n or not 1 <= n <= 4:
        raise ParameterError("one-point AI† integrals support 1 <= n <= 4")
    if int(N) != N or N < 1 or g <= 0 or zsq < 0:
        raise ParameterError("need N >= 1, g > 0, zsq >= 0")
    n, N = int(n), int(N)
    m_nodes = math.ceil((N + 2 + 4 * (n - 1)) / 2) + 2
    shift = 2.0 * zsq / g
    lv = _tensor_laguerre_log(n, 1.0, 4, shift, N, m_nodes)
    lv2 = _tensor_laguerre_log(n, 1.0, 4, shift, N, m_nodes + 2)
    prefactor = (n * (N + 2) + 2 * n * (n - 1)) * math.log(g / 2.0)
    return QuadratureResult.from_log(lv + prefactor, math.expm1(lv2 - lv), m_nodes**n, "tensor_gauss")


def _check_aiidag_one_point(n, N):
    if int(n) != n or not 1 <= n <= 2:
        raise ParameterError("one-point AII† integrals support 1 <= n <= 2")
    if int(N) != N or N < 0:
        raise ParameterError("need N >= 0")


def z1_integral_aiidag(n: int, N: int, zsq: float, rel_tol: float = 1e-11) -> QuadratureResult:
    """One-point AII† replica integral in ``g = 1`` units (``2n``-fold).

    For a general width pass ``zsq / g``; :func:`z1_normalized` does this.
    """
    if n == 0:
        return QuadratureResult.unit()
    _check_aiidag_one_point(n, N)
    if zsq < 0:
        raise ParameterError("need zsq >= 0")
    return laguerre_vandermonde_quad(2 * int(n), 1.0, -0.5, 1, shift=zsq, power=int(N), rel_tol=rel_tol)


def z1_integral_aiidag_grid(n: int, N: int, zsq, rel_tol: float = 1e-10) -> list[QuadratureResult]:
    """:func:`z1_integral_aiidag` on a whole grid of ``zsq`` sharing one node set."""
    _check_aiidag_one_point(n, N)
    zsq = np.atleast_1d(np.asarray(zsq, dtype=float))
    if np.any(zsq < 0):
        raise ParameterError("need zsq >= 0")
    lv, change, used, ok = _ordered_laguerre_log(2 * int(n), -0.5, 1, 1.0, zsq, int(N), rel_tol)
    method = "ordered_simplex_adaptive"
    return [QuadratureResult.from_log(v, c, used, method, ok) for v, c in zip(lv, change)]


def z1_normalized(symmetry, n: int, N: int, g: float, zsq) -> np.ndarray:
    """Prediction for ``Z_n(z)/Z_n(0) * exp(-2 n |z|^2 / g)`` on a grid of ``|z|^2``."""
    symmetry = SymmetryClass.parse(symmetry)
    zsq = np.atleast_1d(np.asarray(zsq, dtype=float))
    if g <= 0:
        raise ParameterError("g must be positive")
    if symmetry is SymmetryClass.AI_DAG:
        logs = np.array([z1_integral_aidag(n, N, g, x).log_value for x in np.append(0.0, zsq)])
    elif symmetry is SymmetryClass.AII_DAG:
        res = z1_integral_aiidag_grid(n, N, np.append(0.0, zsq) / g)
        logs = np.array([r.log_value for r in res])
    else:
        raise ParameterError("replica integrals exist for AIdagger and AIIdagger only")
    return np.exp(logs[1:] - logs[0] - 2 * n * zsq / g)


def _two_point_aidag_log(n, c, rel_tol):
    # the integrand is e^{-c l} times a polynomial, so Gauss-Legendre on the
    # (possibly truncated) interval converges geometrically in the order
    upper = min(1.0, (_TAIL_DROP + 2.0 * (1 + 8 * (n - 1))) / c) if c > 0 else 1.0

    def log_f(lam):
        with np.errstate(divide="ignore"):
            v = (np.log(lam) + np.log1p(-lam)).sum(axis=1) + 4 * log_abs_vandermonde(lam)
        return v - c * lam.sum(axis=1)

    prev = None
    used = 0
    change = math.inf
    for order in _TWO_POINT_ORDERS:
        x, w = composite_legendre(1, order, 0.0, upper)
        cur = tensor_log_sum(log_f, x, np.log(w), n)
        used += order**n
        if prev is not None:
            change = abs(math.expm1(prev - cur))
            if change <= rel_tol:
                return cur, change, used, True
        prev = cur
    return cur, change, used, False


def z2_integral_aidag(
    n: int, omega_sq: float, zsq: float = 0.0, g: float = 1.0, rel_tol: float = 1e-12
) -> QuadratureResult:
    """Two-point AI† replica integral including its exponential prefactors.

    Returns ``e^{4 n zsq/g} e^{n w^2/g} int_{[0,1]^n} prod l(1-l) e^{-2 (w^2/g) sum l} Delta^4``
    where ``zsq`` is the squared centre of mass and ``w^2`` the squared separation.
    """
    if n == 0:
        return QuadratureResult.unit()
    if int(n) != n or not 1 <= n <= 3:
        raise ParameterError("two-point AI† integrals support 1 <= n <= 3")
    if omega_sq < 0 or zsq < 0 or g <= 0:
        raise ParameterError("need omega_sq >= 0, zsq >= 0, g > 0")
    lv, change, used, ok = _two_point_aidag_log(int(n), 2.0 * omega_sq / g, rel_tol)
    pre = 4 * n * zsq / g + n * omega_sq / g
    return QuadratureResult.from_log(lv + pre, change, used, "tensor_gauss", ok)


def _arcsine_log(m, t, rel_tol):
    # lambda = sin^2(theta) turns (l(1-l))^{-1/2} dl into 2 d theta
    if t > _TAIL_DROP:
        theta_max = math.asin(math.sqrt(_TAIL_DROP / t))
    else:
        theta_max = math.pi / 2

    def log_f(theta):
        lam = np.sin(theta) ** 2
        return m * math.log(2.0) - t * lam.sum(axis=1) + log_abs_vandermonde(lam)

    return adaptive_ordered_simplex(log_f, m, theta_max, rel_tol=rel_tol)


def arcsine_vandermonde_integral(m: int, t: float, rel_tol: float = 1e-11) -> QuadratureResult:
    """``I_m(t) = int_{[0,1]^m} prod (l(1-l))^{-1/2} e^{-t sum l} |Delta(l)| dl``."""
    if int(m) != m or m < 1:
        raise ParameterError("m must be a positive integer")
    if t < 0:
        raise ParameterError("t must be non-negative")
    lv, change, used, ok = _arcsine_log(int(m), float(t), rel_tol)
    return QuadratureResult.from_log(lv, change, used, "ordered_simplex_adaptive", ok)


def z2_integral_aiidag(
    n: int, t: float, zsq: float = 0.0, g: float = 1.0, rel_tol: float = 1e-11
) -> QuadratureResult:
    """Two-point AII† replica integral ``e^{4n zsq/g} e^{n t/g} I_{2n}(t/g)``.

    ``t`` is the squared separation ``|w|^2`` and ``zsq`` the squared centre.
    """
    if n == 0:
        return QuadratureResult.unit()
    if int(n) != n or not 1 <= n <= 2:
        raise ParameterError("two-point AII† integrals support 1 <= n <= 2")
    if t < 0 or zsq < 0 or g <= 0:
        raise ParameterError("need t >= 0, zsq >= 0, g > 0")
    core = arcsine_vandermonde_integral(2 * int(n), t / g, rel_tol)
    pre = 4 * n * zsq / g + n * t / g
    return QuadratureResult.from_log(
        core.log_value + pre, core.rel_error_est, core.n_nodes, core.method, core.converged
    )


def z2_normalized(symmetry, n: int, g: float, z2_sq) -> np.ndarray:
    """Prediction for ``Z_n(0, z)/Z_n(0, 0) * exp(-2 n |z|^2 / g)`` on a grid of ``|z|^2``.

    With one point pinned at the origin the centre-of-mass and separation
    prefactors combine into ``exp(2 n |z|^2 / g)``, which the normalization
    removes, leaving the ratio of the bare integrals.
    """
    symmetry = SymmetryClass.parse(symmetry)
    z2_sq = np.atleast_1d(np.asarray(z2_sq, dtype=float))
    if symmetry is SymmetryClass.AI_DAG:
        core = lambda x: _two_point_aidag_log(n, 2.0 * x / g, 1e-12)[0]  # noqa: E731
        if not 1 <= n <= 3:
            raise ParameterError("two-point AI† integrals support 1 <= n <= 3")
    elif symmetry is SymmetryClass.AII_DAG:
        core = lambda x: _arcsine_log(2 * n, x / g, 1e-11)[0]  # noqa: E731
        if not 1 <= n <= 2:
            raise ParameterError("two-point AII† integrals support 1 <= n <= 2")
    else:
        raise ParameterError("replica integrals exist for AIdagger and AIIdagger only")
    base = core(0.0)
    return np.array([math.exp(core(x) - base) for x in z2_sq])


def write_quadrature_csv(path, arguments, results) -> None:
    """Columns: ``argument, value, abs_error_est, method, nodes``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["argument", "value", "abs_error_est", "method", "nodes"])
        for a, r in zip(arguments, results):
            w.writerow([f"{a:.12e}", f"{r.value:.12e}", f"{r.abs_error_est:.12e}", r.method, r.n_nodes])
