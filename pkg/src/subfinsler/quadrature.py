"""Panel quadrature helpers shared by the special-function and kernel modules."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and limits for semi-infinite (possibly oscillatory) integrals."""

    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    max_panels: int = 200_000
    truncation_safety: float = 1.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_panels < 1:
            raise ValueError("max_panels must be >= 1")
        if self.truncation_safety < 1:
            raise ValueError("truncation_safety must be >= 1")


class TruncationError(RuntimeError):
    """A semi-infinite integral could not be truncated within the panel budget."""


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_rule(edges, n: int = 20):
    """Composite Gauss-Legendre nodes/weights for consecutive panels ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(n)
    h = np.diff(edges)
    nodes = edges[:-1, None] + h[:, None] * x[None, :]
    weights = h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def bessel_zero_guess(nu: float, count: int) -> np.ndarray:
    """McMahon approximations of the first ``count`` positive zeros of J_nu.

    Good to a few digits for the first zero and improving with the index;
    they are only used as panel breakpoints.
    """
    i = np.arange(1, count + 1, dtype=float)
    b = (i + 0.5 * nu - 0.25) * np.pi
    mu = 4.0 * nu * nu
    z = b - (mu - 1) / (8 * b) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * b) ** 3)
    # keep strictly increasing and positive
    z = np.maximum(z, 0.5 * b)
    return z


def integrate_panels(f, edges_iter, n: int = 20, rel_tol: float = 1e-13,
                     abs_tol: float = 1e-300, max_panels: int = 200_000,
                     quiet_panels: int = 3, batch: int = 32):
    """Sum Gauss-Legendre panel integrals until the tail is negligible.

    ``edges_iter`` yields successive panel endpoints (the first yielded value is
    the lower limit).  ``f`` is vectorised.  Integration stops once
    ``quiet_panels`` consecutive panels each contribute less than
    ``max(abs_tol, rel_tol * |sum|)``.

    Returns ``(value, abs_error_estimate, panels_used)``.  The error estimate is
    the sum of |G20 - G10| differences plus the magnitude of the quiet tail.
    """
    x_hi, w_hi = gauss_legendre(n)
    x_lo, w_lo = gauss_legendre(max(n // 2, 2))
    it = iter(edges_iter)
    try:
        left = float(next(it))
    except StopIteration:
        return 0.0, 0.0, 0
    total = 0.0
    err = 0.0
    used = 0
    quiet = 0
    tail = 0.0
    exhausted = False
    while not exhausted and used < max_panels:
        edges = [left]
        for _ in range(batch):
            try:
                edges.append(float(next(it)))
            except StopIteration:
                exhausted = True
                break
        if len(edges) < 2:
            break
        edges = np.asarray(edges)
        h = np.diff(edges)
        nodes_hi = edges[:-1, None] + h[:, None] * x_hi[None, :]
        nodes_lo = edges[:-1, None] + h[:, None] * x_lo[None, :]
        vals_hi = np.asarray(f(nodes_hi.ravel()), dtype=float).reshape(nodes_hi.shape)
        vals_lo = np.asarray(f(nodes_lo.ravel()), dtype=float).reshape(nodes_lo.shape)
        p_hi = h * (vals_hi @ w_hi)
        p_lo = h * (vals_lo @ w_lo)
        for a, b in zip(p_hi, p_lo):
            total += a
            err += abs(a - b)
            used += 1
            if abs(a) <= max(abs_tol, rel_tol * abs(total)):
                quiet += 1
                tail += abs(a)
            else:
                quiet = 0
                tail = 0.0
            if quiet >= quiet_panels:
                return total, err + tail, used
        left = edges[-1]
    if exhausted:
        return total, err, used
    raise TruncationError(
        f"panel budget ({max_panels}) exhausted; partial sum {total!r}")
