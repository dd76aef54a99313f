"""Wulff-ball volumes, Wulff-sphere measures and radial integration reductions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .minkowski import DualNormHandle, equivalence_constants
from .quadrature import gauss_legendre

__all__ = [
    "WulffMeasures", "DivergentIntegralError", "sphere_area", "wulff_ball_volume",
    "wulff_sphere_measure", "wulff_measures", "minkowski_formula_volume",
    "radial_pushforward_integral", "double_radial_integral",
]


class DivergentIntegralError(ArithmeticError):
    """The radial tail does not decay."""


@dataclass(frozen=True)
class WulffMeasures:
    dim: int
    omega: float
    sigma: float
    method: str
    error_estimate: float


def sphere_area(n: int) -> float:
    """H^{n-1}(S^{n-1}) = 2 pi^{n/2} / Gamma(n/2)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def _sphere_rule(dim: int, level: int):
    """Quadrature (directions, weights) on S^{dim-1} with total weight sigma_{dim-1}."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        n = 64 * level
        phi = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(n, 2 * np.pi / n)
    if dim == 3:
        nt, nphi = 24 * level, 48 * level
        x, w = gauss_legendre(nt)
        ct = 2 * x - 1          # cos(theta) on [-1, 1]
        wt = 2 * w
        phi = 2 * np.pi * np.arange(nphi) / nphi
        st = np.sqrt(1 - ct ** 2)
        d = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                      np.outer(ct, np.ones(nphi))], axis=-1).reshape(-1, 3)
        ww = np.outer(wt, np.full(nphi, 2 * np.pi / nphi)).ravel()
        return d, ww
    if dim == 4:
        n1, n2, n3 = 16 * level, 16 * level, 32 * level
        x1, w1 = gauss_legendre(n1)
        x2, w2 = gauss_legendre(n2)
        psi = np.pi * x1
        wpsi = np.pi * w1 * np.sin(psi) ** 2
        ct = 2 * x2 - 1
        wt = 2 * w2
        st = np.sqrt(1 - ct ** 2)
        phi = 2 * np.pi * np.arange(n3) / n3
        wphi = np.full(n3, 2 * np.pi / n3)
        P, C, F = np.meshgrid(psi, np.arange(n2), phi, indexing="ij")
        sp_, cp = np.sin(P), np.cos(P)
        cth, sth = ct[C], st[C]
        d = np.stack([cp, sp_ * cth, sp_ * sth * np.cos(F), sp_ * sth * np.sin(F)], axis=-1)
        W = wpsi[:, None, None] * wt[None, :, None] * wphi[None, None, :]
        return d.reshape(-1, 4), W.ravel()
    raise ValueError("sphere quadrature implemented for dim <= 4")


_MAX_LEVEL = {2: 64, 3: 8, 4: 2}


def _refine(at_level, n, rel_tol=1e-10):
    """Double the sphere-rule level until successive values agree."""
    level = 1
    prev = at_level(level)
    if n == 1:
        return prev, 0.0
    while level < _MAX_LEVEL[n]:
        level *= 2
        cur = at_level(level)
        err = abs(cur - prev)
        if err <= rel_tol * abs(cur):
            break
        prev = cur
    return cur, err


def _closed_form_volume(handle: DualNormHandle):
    norm = handle.primal
    n = norm.dim
    unit = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    if norm.kind == "euclidean":
        return unit
    if norm.kind == "quadratic":
        # {x^T A^{-1} x < 1} has volume omega_n sqrt(det A)
        return unit * math.sqrt(float(np.linalg.det(norm.params["matrix"])))
    return None


def wulff_ball_volume(handle: DualNormHandle, method: str = "coarea_quadrature",
                      samples_or_tol=None, seed: int = 0):
    """Volume omega_M of {M^0 < 1}.  Returns ``(omega, error_estimate)``.

    ``coarea_quadrature`` integrates M^0(theta)^{-n}/n over the Euclidean
    sphere; ``monte_carlo`` uses rejection sampling in [-beta, beta]^n where
    beta bounds M on the unit sphere; ``closed_form`` is available for the
    Euclidean and quadratic kinds.
    """
    n = handle.dim
    if method == "closed_form":
        v = _closed_form_volume(handle)
        if v is None:
            raise ValueError(f"no closed-form volume for {handle.primal.kind}")
        return v, 0.0
    if method == "coarea_quadrature":
        if n > 4:
            raise ValueError("quadrature volume implemented for dim <= 4")

        def at_level(level):
            d, w = _sphere_rule(n, level)
            r = handle.dual_value(d)
            if np.any(r <= 0):
                raise ValueError("dual norm vanishes on a direction; invalid norm")
            return float(np.dot(w, r ** (-n))) / n

        return _refine(at_level, n)
    if method == "monte_carlo":
        count = int(samples_or_tol or 100_000)
        if count < 1000:
            raise ValueError("Monte Carlo volume needs at least 1000 samples")
        _, beta_ = equivalence_constants(handle.primal)
        box = 1.02 * beta_
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-box, box, size=(count, n))
        inside = handle.dual_value(pts) < 1.0
        frac = inside.mean()
        vol_box = (2 * box) ** n
        return vol_box * frac, vol_box * math.sqrt(frac * (1 - frac) / count)
    raise ValueError(f"unknown method {method!r}")


def wulff_sphere_measure(handle: DualNormHandle, method: str = "surface_quadrature"):
    """sigma_M = int_{M^0 = 1} dH^{n-1} / |grad M^0|.  Returns ``(sigma, err)``.

    ``surface_quadrature`` parametrises the Wulff sphere radially,
    x = theta / M^0(theta), and uses the graph area element
    rho^{n-2} sqrt(rho^2 + |grad_S rho|^2) with grad_S rho obtained from
    grad M^0.  ``volume`` returns n * omega_M.
    """
    n = handle.dim
    if method == "volume":
        om, e = wulff_ball_volume(handle, "coarea_quadrature")
        return n * om, n * e
    if method == "closed_form":
        om, _ = wulff_ball_volume(handle, "closed_form")
        return n * om, 0.0
    if method != "surface_quadrature":
        raise ValueError(f"unknown method {method!r}")
    if n == 1:
        pts = np.array([[1.0], [-1.0]])
        m0 = handle.dual_value(pts)
        if np.any(m0 <= 0):
            raise ValueError("dual norm vanishes on a direction; invalid norm")
        # H^0 is counting measure; |grad M^0| = M^0(e) on the line
        g = np.abs(handle.dual_gradient(pts)[:, 0])
        return float(np.sum(1.0 / g)), 0.0
    def at_level(level):
        d, w = _sphere_rule(n, level)
        m0 = handle.dual_value(d)
        if np.any(m0 <= 0):
            raise ValueError("dual norm vanishes on a direction; invalid norm")
        g = handle.dual_gradient(d)
        rho = 1.0 / m0
        tang = g - np.sum(g * d, axis=1, keepdims=True) * d
        grad_rho = -tang / m0[:, None] ** 2
        area = rho ** (n - 2) * np.sqrt(rho ** 2 + np.sum(grad_rho ** 2, axis=1))
        return float(np.dot(w, area / np.linalg.norm(g, axis=1)))

    return _refine(at_level, n)


def wulff_measures(handle: DualNormHandle) -> WulffMeasures:
    """Volume and sphere measure; closed form when available, else quadrature."""
    n = handle.dim
    closed = _closed_form_volume(handle)
    if closed is not None:
        return WulffMeasures(n, closed, n * closed, "closed_form", 0.0)
    om, e1 = wulff_ball_volume(handle, "coarea_quadrature")
    sig, e2 = wulff_sphere_measure(handle, "surface_quadrature")
    return WulffMeasures(n, om, sig, "coarea_quadrature", max(n * e1, e2))


def minkowski_formula_volume(handle: DualNormHandle, nodes: int = 256) -> float:
    """omega_M = (1/2) int <x, nu> dH^1 over the planar Wulff curve (dim 2 only).

    The curve x(phi) = rho(phi)(cos phi, sin phi) is traced with
    rho' = -<grad M^0(e_r), e_phi> / M^0(e_r)^2, the normal taken from
    grad M^0, and the periodic trapezoid rule.
    """
    if handle.dim != 2:
        raise ValueError("Minkowski-formula volume implemented in dim 2")
    phi = 2 * np.pi * np.arange(nodes) / nodes
    er = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    ephi = np.stack([-np.sin(phi), np.cos(phi)], axis=1)
    m0 = handle.dual_value(er)
    g = handle.dual_gradient(er)
    rho = 1.0 / m0
    drho = -np.sum(g * ephi, axis=1) / m0 ** 2
    x = rho[:, None] * er
    dx = drho[:, None] * er + rho[:, None] * ephi
    nu = g / np.linalg.norm(g, axis=1, keepdims=True)
    integrand = np.sum(x * nu, axis=1) * np.linalg.norm(dx, axis=1)
    return 0.5 * float(integrand.sum() * 2 * np.pi / nodes)


def _radial_1d(f, n: int, breakpoints=(), tol: float = 1e-12, start: float = 1.0,
               max_doublings: int = 60) -> tuple[float, float]:
    """int_0^inf f(r) r^{n-1} dr with a doubling truncation-tail test."""
    bp = sorted(b for b in breakpoints if b > 0)

    def piece(a, b):
        pts = [p for p in bp if a < p < b]
        v, e = integrate.quad(lambda r: f(r) * r ** (n - 1), a, b, points=pts or None,
                              limit=400, epsabs=0, epsrel=tol)
        return v, e

    R = max(start, (bp[-1] if bp else 0.0))
    total, err = piece(0.0, R)
    prev_chunk = None
    for _ in range(max_doublings):
        chunk, e = piece(R, 2 * R)
        total += chunk
        err += e
        R *= 2
        if abs(chunk) <= 1e-10 * abs(total) or (chunk == 0 and total == 0):
            return total, err + abs(chunk)
        if prev_chunk is not None and abs(chunk) >= abs(prev_chunk) > 0:
            raise DivergentIntegralError(f"radial tail does not decay (chunk {chunk!r} at R={R})")
        prev_chunk = chunk
    raise DivergentIntegralError("radial integral tail did not fall below tolerance")


def radial_pushforward_integral(handle: DualNormHandle, f_star, sigma: float | None = None,
                                breakpoints=(), tol: float = 1e-12) -> float:
    """int_{R^n} f_star(M^0(x)) dx = sigma_M int_0^inf f_star(r) r^{n-1} dr."""
    n = handle.dim
    if sigma is None:
        sigma = wulff_measures(handle).sigma
    v, _ = _radial_1d(f_star, n, breakpoints, tol)
    return sigma * v


def double_radial_integral(handle_phi: DualNormHandle, handle_psi: DualNormHandle,
                           f_star, s_upper=None, r_max: float | None = None,
                           sigmas: tuple[float, float] | None = None,
                           tol: float = 1e-11, s_break=None) -> float:
    """sigma_Phi sigma_Psi int int f_star(r, s) r^{m-1} s^{k-1} dr ds.

    ``s_upper(r)`` and ``r_max`` describe a compact support when the
    integrand has a jump there (e.g. an indicator); otherwise the domain is
    grown by doubling until the tails vanish.  ``s_break(r)`` marks an
    inner transition layer handed to QUADPACK as a breakpoint.
    """
    m, k = handle_phi.dim, handle_psi.dim
    if sigmas is None:
        sigmas = (wulff_measures(handle_phi).sigma, wulff_measures(handle_psi).sigma)
    pref = sigmas[0] * sigmas[1]
    if r_max is not None and s_upper is not None:
        def inner_c(r):
            hi = s_upper(r)
            pts = None
            if s_break is not None and 0 < s_break(r) < hi:
                pts = [s_break(r)]
            # |f_star| <= 1 bounds the inner integral by hi^k / k
            return integrate.quad(lambda s: f_star(r, s) * s ** (k - 1), 0.0, hi, points=pts,
                                  epsabs=1e-3 * tol * hi ** k / k, epsrel=tol,
                                  limit=200)[0] * r ** (m - 1)

        with warnings.catch_warnings():
            # QAGS extrapolation stalls near the corner r = 0 at tol ~ 1e-11 while the
            # result is already accurate well below any tolerance it is compared at
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, _ = integrate.quad(inner_c, 0.0, r_max, epsabs=0, epsrel=tol, limit=200)
        return pref * v

    def inner(r):
        return _radial_1d(lambda s: f_star(r, s), k, tol=tol)[0]

    v, _ = _radial_1d(inner, m, tol=tol)
    return pref * v
