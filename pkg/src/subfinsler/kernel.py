"""Heat kernel of the mixed-homogeneity evolution equation on R^m x R^k.

The kernel is reduced to its profile

    F(r, s, t) = (2 pi)^{-k/2} (4 pi)^{-m/2} t^{-(m/2+k)}
                 int_0^inf (u/sinh u)^{m/2} exp(-(u/tanh u) r^2/4t)
                           G_{k/2-1}(u s/t) u^{k-1} du,

and G(X, t) = (sigma_{m-1} sigma_{k-1} / sigma_Phi sigma_Psi) F(Phi0(z), Psi0(sigma), t).
The u-integral is a composite Gauss-Legendre sum on a grid that depends on
(r^2/4t, s/t) only, so the same nodes serve a whole grid of profile values
through one matrix product.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .minkowski import DualNormHandle, dual_norm, make_builtin_norm
from .quadrature import QuadratureSpec, gauss_legendre
from .special import g_nu_array
from .wulff import _closed_form_volume, sphere_area, wulff_ball_volume, wulff_measures

__all__ = [
    "ProductSpaceConfig", "KernelEvaluation", "kernel_profile", "profile_grid",
    "heat_kernel", "heat_kernel_many", "reference_kernel_H", "reference_kernel_fourier",
    "kernel_mass", "mass_outside_ball", "dilation", "integrand_factors",
]


@dataclass(frozen=True)
class ProductSpaceConfig:
    """Dimensions, exponents and the two Minkowski norms of R^m x R^k.

    ``phi``/``psi`` default to the Euclidean norm.  ``sigma_phi``/``sigma_psi``
    override the Wulff-sphere measures (otherwise computed on first use).
    """

    m: int
    k: int
    phi: DualNormHandle | None = None
    psi: DualNormHandle | None = None
    alpha: float = 1.0
    p: float = 2.0
    sigma_override: tuple[float, float] | None = None

    def __post_init__(self):
        if int(self.m) != self.m or int(self.k) != self.k or self.m < 1 or self.k < 1:
            raise ValueError("m and k must be integers >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.phi is None:
            object.__setattr__(self, "phi", dual_norm(make_builtin_norm("euclidean", self.m)))
        if self.psi is None:
            object.__setattr__(self, "psi", dual_norm(make_builtin_norm("euclidean", self.k)))
        if self.phi.dim != self.m or self.psi.dim != self.k:
            raise ValueError("norm dimensions do not match (m, k)")

    @property
    def N(self) -> int:
        return self.m + self.k

    @property
    def Q(self) -> float:
        return self.m + (self.alpha + 1) * self.k

    @cached_property
    def sigmas(self) -> tuple[float, float]:
        if self.sigma_override is not None:
            return tuple(float(v) for v in self.sigma_override)
        return wulff_measures(self.phi).sigma, wulff_measures(self.psi).sigma

    @property
    def sigma_phi(self) -> float:
        return self.sigmas[0]

    @property
    def sigma_psi(self) -> float:
        return self.sigmas[1]

    @cached_property
    def measure_ratio(self) -> float:
        """sigma_{m-1} sigma_{k-1} / (sigma_Phi sigma_Psi); 1 for Euclidean norms."""
        return sphere_area(self.m) * sphere_area(self.k) / (self.sigma_phi * self.sigma_psi)

    def gauges(self, z, sigma):
        """(Phi0(z), Psi0(sigma)) for single points or stacks along axis 0."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        return self.phi.dual_value(z), self.psi.dual_value(sigma)


@dataclass(frozen=True)
class KernelEvaluation:
    value: float
    abs_error_estimate: float
    u_truncation: float
    panels: int


def _prefactor(m: int, k: int, t: float) -> float:
    return (2 * math.pi) ** (-k / 2) * (4 * math.pi) ** (-m / 2) * t ** (-(m / 2 + k))


def integrand_factors(m: int, k: int, u):
    """((u/sinh u)^{m/2} u^{k-1}, u/tanh u - 1) with the u -> 0 limits built in."""
    u = np.asarray(u, dtype=float)
    small = u < 1e-4
    us = u[small]
    ratio = np.empty_like(u)
    coth_m1 = np.empty_like(u)
    ratio[small] = 1 - m * us * us / 12
    coth_m1[small] = us * us / 3 - us ** 4 / 45
    ul = u[~small]
    # log form keeps (u/sinh u)^{m/2} finite for large u
    ratio[~small] = np.exp(0.5 * m * (np.log(2 * ul) - ul - np.log1p(-np.exp(-2 * ul))))
    coth_m1[~small] = ul / np.tanh(ul) - 1
    return ratio * u ** (k - 1), coth_m1


def _log_envelope(m, k, c, u):
    a, b = integrand_factors(m, k, u)
    with np.errstate(divide="ignore"):
        return np.log(a) - c * b


def _u_rule(m: int, k: int, c_min: float, c_max: float, omega_max: float,
            quad: QuadratureSpec, n: int = 20):
    """Panel nodes/weights on [0, U] plus a lower-order companion rule.

    U comes from the envelope (u/sinh u)^{m/2} e^{-c(u/tanh u - 1)} u^{k-1}
    at the slowest-decaying c; panels resolve the Bessel oscillation
    (frequency omega_max) and the Gaussian bump of width ~sqrt(3/c_max).
    """
    grid = np.concatenate([np.linspace(1e-3, 4.0, 400), np.linspace(4.0, 4000.0, 8000)[1:]])
    logenv = _log_envelope(m, k, c_min, grid)
    peak = np.max(logenv)
    cut = peak + math.log(quad.rel_tol * 1e-3)
    beyond = np.nonzero((logenv < cut) & (grid > grid[np.argmax(logenv)]))[0]
    U = grid[beyond[0]] if beyond.size else grid[-1]
    U *= quad.truncation_safety
    width = 0.5
    if omega_max > 0:
        width = min(width, math.pi / omega_max)
    if c_max > 0:
        width = min(width, 1.5 / math.sqrt(c_max))
    panels = max(1, int(math.ceil(U / width)))
    if panels > quad.max_panels:
        panels = quad.max_panels
    edges = np.linspace(0.0, U, panels + 1)
    h = np.diff(edges)
    xh, wh = gauss_legendre(n)
    xl, wl = gauss_legendre(n // 2)
    uh = (edges[:-1, None] + h[:, None] * xh).ravel()
    whv = (h[:, None] * wh).ravel()
    ul = (edges[:-1, None] + h[:, None] * xl).ravel()
    wlv = (h[:, None] * wl).ravel()
    tail = math.exp(_log_envelope(m, k, c_min, np.array([U]))[0]) if U > 0 else 0.0
    return (uh, whv), (ul, wlv), U, panels, tail


def _grid_sum(m, k, c, omega, rule):
    u, w = rule
    a, b = integrand_factors(m, k, u)
    E = np.exp(-np.outer(c, b))                      # (nr, nu)
    G = g_nu_array(k / 2 - 1, np.outer(u, omega))    # (nu, ns)
    return (E * (w * a)) @ G


def profile_grid(m: int, k: int, r, s, t: float, quad: QuadratureSpec | None = None):
    """F(r_i, s_j, t) on a tensor grid.  Returns ``(values, errors, U, panels)``."""
    quad = quad or QuadratureSpec()
    if not t > 0:
        raise ValueError("t must be positive")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(r < 0) or np.any(s < 0):
        raise ValueError("profile arguments r, s must be non-negative")
    c = r * r / (4 * t)
    omega = s / t
    hi, lo, U, panels, tail = _u_rule(m, k, float(c.min()), float(c.max()),
                                      float(omega.max()), quad)
    vh = _grid_sum(m, k, c, omega, hi)
    vl = _grid_sum(m, k, c, omega, lo)
    pref = _prefactor(m, k, t)
    scale = np.exp(-c)[:, None]
    g0 = 2.0 ** (1 - k / 2) / math.gamma(k / 2)  # bound on |G_{k/2-1}|
    # cancellation floor: the oscillatory sum cannot resolve less than eps * int |integrand|
    u, w = hi
    a, b = integrand_factors(m, k, u)
    floor = 10 * np.finfo(float).eps * g0 * (np.exp(-np.outer(c, b)) @ (w * a))
    err = np.abs(vh - vl) + tail * g0 + floor[:, None]
    return pref * scale * vh, pref * scale * err, U, panels


def kernel_profile(cfg: ProductSpaceConfig, r: float, s: float, t: float,
                   quad: QuadratureSpec | None = None) -> KernelEvaluation:
    """The radial profile F(r, s, t)."""
    v, e, U, panels = profile_grid(cfg.m, cfg.k, [r], [s], t, quad)
    return KernelEvaluation(float(v[0, 0]), float(e[0, 0]), U, panels)


def heat_kernel(cfg: ProductSpaceConfig, z, sigma, t: float,
                quad: QuadratureSpec | None = None) -> KernelEvaluation:
    """G(X, t) at X = (z, sigma) with pole at the origin."""
    if cfg.alpha != 1 or cfg.p != 2:
        raise ValueError("the heat kernel is defined for alpha = 1, p = 2")
    r, s = cfg.gauges(z, sigma)
    ev = kernel_profile(cfg, float(np.ravel(r)[0]), float(np.ravel(s)[0]), t, quad)
    ratio = cfg.measure_ratio
    return KernelEvaluation(ratio * ev.value, ratio * ev.abs_error_estimate,
                            ev.u_truncation, ev.panels)


def heat_kernel_many(cfg: ProductSpaceConfig, Z, S, T, quad: QuadratureSpec | None = None):
    """Vector of G(X_i, t_i); returns ``(values, errors)``."""
    Z = np.asarray(Z, dtype=float).reshape(-1, cfg.m)
    S = np.asarray(S, dtype=float).reshape(-1, cfg.k)
    T = np.asarray(T, dtype=float).ravel()
    r = cfg.phi.dual_value(Z)
    s = cfg.psi.dual_value(S)
    vals = np.empty(len(T))
    errs = np.empty(len(T))
    for i, (ri, si, ti) in enumerate(zip(r, s, T)):
        v, e, _, _ = profile_grid(cfg.m, cfg.k, [ri], [si], ti, quad)
        vals[i] = v[0, 0]
        errs[i] = e[0, 0]
    return cfg.measure_ratio * vals, cfg.measure_ratio * errs


def reference_kernel_H(m: int, k: int, z, sigma, t: float,
                       quad: QuadratureSpec | None = None) -> KernelEvaluation:
    """Isotropic kernel H(X, t) = F(|z|, |sigma|, t) by an independent route:
    QUADPACK on panels of one half-period of the Bessel factor, with
    J_nu from scipy.special rather than the in-house G_nu and GL rules.
    """
    quad = quad or QuadratureSpec()
    r = float(np.linalg.norm(np.atleast_1d(z)))
    s = float(np.linalg.norm(np.atleast_1d(sigma)))
    nu = k / 2 - 1
    c = r * r / (4 * t)
    w = s / t

    def f(u):
        if u < 1e-8:
            return (2.0 ** -nu / math.gamma(nu + 1)) * math.exp(-c) * u ** (k - 1)
        if u > 700:
            return 0.0
        g = special.jv(nu, w * u) / (w * u) ** nu if w > 0 else 2.0 ** -nu / math.gamma(nu + 1)
        return (u / math.sinh(u)) ** (m / 2) * math.exp(-c * u / math.tanh(u)) * g * u ** (k - 1)

    width = min(1.0, math.pi / w) if w > 0 else 1.0
    total, err, a, panels, quiet = 0.0, 0.0, 0.0, 0, 0
    while quiet < 4 and panels < quad.max_panels:
        with warnings.catch_warnings():
            # panels far in the tail hit roundoff before epsrel; err carries it
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, e = integrate.quad(f, a, a + width, epsabs=1e-16 * abs(total), epsrel=1e-13,
                                  limit=100)
        total += v
        err += e
        a += width
        panels += 1
        quiet = quiet + 1 if abs(v) <= 1e-16 * abs(total) else 0
    pref = _prefactor(m, k, t)
    return KernelEvaluation(pref * total, pref * err, a, panels)


def reference_kernel_fourier(z: float, sigma: float, t: float, tol: float = 1e-12) -> float:
    """H for m = k = 1 from its Fourier form,

        H = 2 (4 pi t)^{-3/2} int_R e^{-i sigma lam / t} (lam/sinh lam)^{1/2}
            exp(-(lam/tanh lam) z^2/4t) d lam,

    folded to a cosine integral on (0, inf) and handed to QUADPACK's
    Fourier-weight routine (independent of the Bessel/panel machinery).
    """
    c = z * z / (4 * t)

    def h(lam):
        a, b = integrand_factors(1, 1, np.array([lam]))
        return float(a[0] * math.exp(-c * (1 + b[0])))

    w = abs(sigma) / t
    if w == 0:
        v = integrate.quad(h, 0, np.inf, epsabs=0, epsrel=tol, limit=400)[0]
    else:
        # QUADPACK flags slow cycle convergence at z = 0 where only (lam/sinh)^{1/2} decays
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v = integrate.quad(h, 0, np.inf, weight="cos", wvar=w, epsabs=1e-300,
                               epsrel=tol, limlst=200)[0]
    return 4 * (4 * math.pi * t) ** (-1.5) * v


def _gl_composite(a: float, b: float, panels: int, n: int = 20):
    edges = np.linspace(a, b, panels + 1)
    x, w = gauss_legendre(n)
    h = np.diff(edges)
    return (edges[:-1, None] + h[:, None] * x).ravel(), (h[:, None] * w).ravel()


def _radial_extent(m, k, t, quad):
    """Radii (R, S) past which the profile is negligible, from a coarse scan."""
    R = math.sqrt(4 * t * (-math.log(quad.rel_tol * 1e-4)))
    probe = t * np.array([1, 2, 4, 8, 16, 32, 64, 128], dtype=float)
    f0, _, _, _ = profile_grid(m, k, [0.0], np.concatenate([[0.0], probe]), t, quad)
    f0 = np.abs(f0[0])
    ok = np.nonzero(f0[1:] < quad.rel_tol * 1e-4 * f0[0])[0]
    S = probe[ok[0]] if ok.size else probe[-1]
    return R, S


def kernel_mass(cfg: ProductSpaceConfig, t: float, quad: QuadratureSpec | None = None,
                sigmas: tuple[float, float] | None = None) -> float:
    """int G(X, t) dX = sigma_Phi sigma_Psi int int G*(r, s) r^{m-1} s^{k-1} dr ds.

    ``sigmas`` are the measures used for the radial reduction; by default
    they are n * omega from the Wulff-ball volume quadrature, a route
    independent of the surface quadrature that normalises the kernel.
    """
    quad = quad or QuadratureSpec()
    m, k = cfg.m, cfg.k
    if sigmas is None:
        sigmas = (_volume_sigma(cfg.phi), _volume_sigma(cfg.psi))
    R, S = _radial_extent(m, k, t, quad)
    rn, rw = _gl_composite(0.0, R, 8)
    sn, sw = _gl_composite(0.0, S, 24)
    F, _, _, _ = profile_grid(m, k, rn, sn, t, quad)
    inner = F @ (sw * sn ** (k - 1))
    total = float(np.dot(rw * rn ** (m - 1), inner))
    return cfg.measure_ratio * sigmas[0] * sigmas[1] * total


def _volume_sigma(handle: DualNormHandle) -> float:
    n = handle.dim
    closed = _closed_form_volume(handle)
    if closed is not None:
        return n * closed
    return n * wulff_ball_volume(handle, "coarea_quadrature")[0]


def mass_outside_ball(m: int, k: int, t: float, radius: float,
                      quad: QuadratureSpec | None = None, nodes: int = 160) -> float:
    """Mass of H outside the Euclidean ball |X| < radius in R^{m+k}.

    Polar coordinates in the (r, s) quarter-plane: r = rho cos(th), s = rho sin(th).
    """
    quad = quad or QuadratureSpec()
    R, S = _radial_extent(m, k, t, quad)
    rho_max = math.hypot(R, S)
    if radius >= rho_max:
        return 0.0
    th, tw = _gl_composite(0.0, math.pi / 2, 8)
    rho, pw = _gl_composite(radius, rho_max, max(8, nodes // 20))
    total = 0.0
    for a, wa in zip(th, tw):
        r = rho * math.cos(a)
        s = rho * math.sin(a)
        vals = np.array([profile_grid(m, k, [ri], [si], t, quad)[0][0, 0]
                         for ri, si in zip(r, s)])
        total += wa * float(np.dot(pw, vals * r ** (m - 1) * s ** (k - 1) * rho))
    return sphere_area(m) * sphere_area(k) * total


def dilation(X, t: float, lam: float):
    """Delta_lambda(z, sigma, t) = ((lambda z, lambda^2 sigma), lambda^2 t)."""
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    z, sigma = X
    z = np.asarray(z, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return (lam * z, lam * lam * sigma), lam * lam * t
