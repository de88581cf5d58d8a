"""Low-level multidimensional quadrature used by the replica integrals.

Two building blocks:

* ``tensor_log_sum`` evaluates a tensor-product rule for a non-negative
  integrand given as a log-density, in chunks, with a log-sum-exp reduction.
* ``ordered_simplex`` integrates a symmetric non-negative integrand over
  ``0 < x_1 < ... < x_m < L`` with a collapsed (Duffy-type) map onto the unit
  cube and Gauss-Legendre rules of increasing order on every axis.

Everything works with logarithms so that integrands spanning hundreds of
orders of magnitude do not overflow.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np
from scipy.special import logsumexp, roots_legendre

LogIntegrand = Callable[[np.ndarray], np.ndarray]

_CHUNK = 1 << 18


def composite_legendre(panels: int, order: int, a: float = 0.0, b: float = 1.0):
    """Nodes and weights of ``panels`` equal Gauss-Legendre panels on ``[a, b]``."""
    x, w = roots_legendre(order)
    h = (b - a) / panels
    left = a + h * np.arange(panels)
    nodes = (left[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * h * w, panels)
    return nodes, weights


def tensor_log_sum(
    log_f: LogIntegrand,
    nodes: np.ndarray,
    log_weights: np.ndarray,
    m: int,
):
    """``log sum_{i_1..i_m} prod_k w_{i_k} f(x_{i_1}, ..., x_{i_m})``.

    ``log_f`` receives an array of shape ``(k, m)`` and returns ``k`` log values
    (``-inf`` marks a zero of the integrand), or a ``(k, r)`` array to integrate
    ``r`` integrands on the same nodes, in which case ``r`` results come back.
    """
    q = nodes.size
    total = q**m
    parts = []
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK))
        digits = np.empty((idx.size, m), dtype=np.int64)
        rem = idx
        for k in range(m - 1, -1, -1):
            digits[:, k] = rem % q
            rem = rem // q
        pts = nodes[digits]
        lw = log_weights[digits].sum(axis=1)
        vals = log_f(pts)
        if vals.ndim == 2:
            lw = lw[:, None]
        parts.append(logsumexp(vals + lw, axis=0))
    out = logsumexp(np.array(parts), axis=0)
    return float(out) if np.ndim(out) == 0 else out


def _duffy_points(u: np.ndarray, length: float) -> tuple[np.ndarray, np.ndarray]:
    """Map unit-cube points to the ordered simplex; returns points and log Jacobian."""
    m = u.shape[1]
    x = np.empty_like(u)
    x[:, m - 1] = length * u[:, m - 1]
    for k in range(m - 2, -1, -1):
        x[:, k] = x[:, k + 1] * u[:, k]
    with np.errstate(divide="ignore"):
        log_jac = math.log(length) + np.log(x[:, 1:]).sum(axis=1)
    return x, log_jac


def ordered_simplex_log(
    log_f: LogIntegrand,
    m: int,
    length: float,
    panels: int = 1,
    order: int = 10,
):
    """``log`` of ``m! * integral`` of ``f`` over ``0 < x_1 < ... < x_m < length``.

    For a permutation-symmetric ``f`` this equals the integral over the cube
    ``[0, length]^m``.
    """
    nodes, weights = composite_legendre(panels, order)
    logw = np.log(weights)

    def pulled(u):
        x, lj = _duffy_points(u, length)
        v = log_f(x)
        return v + (lj[:, None] if v.ndim == 2 else lj)

    return tensor_log_sum(pulled, nodes, logw, m) + math.lgamma(m + 1)


ORDERS = (10, 14, 20, 28, 40, 48, 56, 64, 80, 112)
MAX_NODES = 2 * 10**7


def adaptive_ordered_simplex(
    log_f: LogIntegrand,
    m: int,
    length: float,
    rel_tol: float = 1e-10,
):
    """Raise the Gauss-Legendre order until successive results agree to ``rel_tol``.

    Returns ``(log_value, rel_change, n_nodes, converged)``; with a vector
    integrand the first two entries are arrays and convergence is judged on
    the worst component.
    """
    prev = None
    used = 0
    cur = change = None
    for q in ORDERS:
        if q**m > MAX_NODES:
            break
        cur = ordered_simplex_log(log_f, m, length, 1, q)
        used += q**m
        if prev is not None:
            change = np.abs(np.expm1(np.asarray(prev) - np.asarray(cur)))
            if np.max(change) <= rel_tol:
                return cur, _scalar(change), used, True
        prev = cur
    return cur, _scalar(change), used, False


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def truncation_length(profile: Callable[[np.ndarray], np.ndarray], drop: float = 50.0, start: float = 1.0) -> float:
    """Smallest grid point beyond the maximum where ``profile`` fell by ``drop``.

    ``profile`` is a one-variable log-integrand that eventually decreases.
    """
    hi = float(start)
    for _ in range(60):
        x = np.linspace(0.0, hi, 4001)[1:]
        with np.errstate(divide="ignore"):
            p = profile(x)
        top = np.max(p)
        if p[-1] < top - drop:
            peak = int(np.argmax(p))
            below = np.flatnonzero(p[peak:] < top - drop)
            return float(x[peak + below[0]])
        hi *= 2.0
    raise RuntimeError("integrand profile does not decay")


def log_abs_vandermonde(x: np.ndarray) -> np.ndarray:
    """``log prod_{a<b} |x_b - x_a|`` row-wise for an array of shape ``(k, m)``."""
    m = x.shape[1]
    out = np.zeros(x.shape[0])
    with np.errstate(divide="ignore"):
        for a, b in itertools.combinations(range(m), 2):
            out += np.log(np.abs(x[:, b] - x[:, a]))
    return out
