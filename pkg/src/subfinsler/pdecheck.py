"""Finite-difference residuals for the Finsler Laplacian, the mixed operator
Delta_Phi + (Phi0(z)^2/4) Delta_Psi, the Finsler Gauss kernel and the
radial profile equation.

Scalar fields are vectorised: ``u(x)`` maps points of shape ``(..., n)`` to
values of shape ``(...)``; mixed fields are ``f(z, sigma, t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import ProductSpaceConfig, profile_grid
from .minkowski import DualNormHandle, MinkowskiNorm
from .quadrature import QuadratureSpec, gauss_legendre

__all__ = [
    "StencilSpec", "FieldSample", "DegenerateGradientError", "ExcludedPointError",
    "GrowthReport", "finsler_laplacian_fd", "finsler_heat_residual", "li_yau_residual",
    "mixed_operator_residual", "energy", "quadratic_growth_check", "profile_pde_residual",
    "weak_form_residual", "convergence_order", "gauss_kernel", "kernel_field",
    "fundamental_field",
]


class DegenerateGradientError(ValueError):
    """The flux M(grad u) grad M(grad u) needs grad u != 0."""


class ExcludedPointError(ValueError):
    """The point (or its stencil) is too close to the singular set {z = 0}."""


@dataclass(frozen=True)
class StencilSpec:
    """``h`` is the outer (divergence) step and ``inner`` the gradient step
    (``None`` means the same as ``h``); ``ht`` is the time step."""

    h: float = 1e-3
    ht: float = 1e-3
    order: int = 2
    richardson: bool = False
    inner: float | None = None

    def __post_init__(self):
        if not (self.h > 0 and self.ht > 0):
            raise ValueError("stencil steps must be positive")
        if self.order != 2:
            raise ValueError("only second-order stencils are implemented")
        if self.inner is not None and not self.inner > 0:
            raise ValueError("inner step must be positive")

    def halved(self) -> "StencilSpec":
        return StencilSpec(self.h / 2, self.ht / 2, self.order, False,
                           None if self.inner is None else self.inner / 2)

    def plain(self) -> "StencilSpec":
        return StencilSpec(self.h, self.ht, self.order, False, self.inner)


@dataclass(frozen=True)
class FieldSample:
    point: tuple
    time: float
    exclusion_radius: float = 0.05


@dataclass(frozen=True)
class GrowthReport:
    gamma: float
    gamma_star: float
    assembly_residual: float
    skipped: int


def _richardson(fun, stencil: StencilSpec):
    """fun(stencil) with one Richardson step when requested (even error expansion)."""
    if not stencil.richardson:
        return fun(stencil)
    coarse = fun(stencil.plain())
    fine = fun(stencil.halved())
    return (4 * fine - coarse) / 3


def _fd_gradient(u, x, h):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    g = np.empty(x.shape)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        g[..., i] = (u(x + e) - u(x - e)) / (2 * h)
    return g


def _flux(norm: MinkowskiNorm, g, degenerate_tol=1e-8):
    gn = np.linalg.norm(g, axis=-1)
    if np.any(gn < degenerate_tol):
        raise DegenerateGradientError("gradient vanishes inside the stencil")
    return norm.value(g)[..., None] * norm.gradient(g)


def finsler_laplacian_fd(norm: MinkowskiNorm, u, x, stencil: StencilSpec | None = None,
                         grad=None):
    """div(M(grad u) grad M(grad u)) by centred differences of the flux.

    ``grad`` is an optional analytic gradient of ``u``; otherwise the
    gradient is itself a centred difference with step ``stencil.inner``.
    """
    stencil = stencil or StencilSpec()
    x = np.asarray(x, dtype=float)
    n = norm.dim
    if x.shape[-1] != n:
        raise ValueError("point dimension does not match the norm")
    if grad is None:
        gx = _fd_gradient(u, x, stencil.inner or stencil.h)
    else:
        gx = grad(x)
    if np.any(np.linalg.norm(gx, axis=-1) < 1e-8):
        raise DegenerateGradientError("grad u(x) vanishes; the Finsler Laplacian is undefined")

    def once(st: StencilSpec):
        H = st.h
        inner = st.inner or st.h
        total = np.zeros(x.shape[:-1])
        for i in range(n):
            e = np.zeros(n)
            e[i] = H
            if grad is None:
                fp = _flux(norm, _fd_gradient(u, x + e, inner))
                fm = _flux(norm, _fd_gradient(u, x - e, inner))
            else:
                fp = _flux(norm, grad(x + e))
                fm = _flux(norm, grad(x - e))
            total = total + (fp[..., i] - fm[..., i]) / (2 * H)
        return total

    return _richardson(once, stencil)


def _time_derivative(f, t, ht):
    return (f(t + ht) - f(t - ht)) / (2 * ht)


def gauss_kernel(handle: DualNormHandle):
    """(G, grad_x G) for G(x, t) = t^{-n/2} exp(-M0(x)^2 / 4t)."""
    n = handle.dim

    def G(x, t):
        r = handle.dual_value(np.asarray(x, dtype=float))
        return t ** (-n / 2) * np.exp(-r * r / (4 * t))

    def grad(x, t):
        x = np.asarray(x, dtype=float)
        r = handle.dual_value(x)
        g = handle.dual_gradient(x)
        return (-(r / (2 * t)) * t ** (-n / 2) * np.exp(-r * r / (4 * t)))[..., None] * g

    return G, grad


def finsler_heat_residual(handle: DualNormHandle, x, t: float,
                          stencil: StencilSpec | None = None, gradient: str | None = None):
    """|d_t G - Delta_M G| for the Finsler Gauss kernel G = t^{-n/2} e^{-M0^2/4t}.

    ``gradient`` is ``"fd"`` (nested stencil) or ``"analytic"`` (grad M0 from
    the dual handle); the default is ``"fd"`` for closed-form duals and
    ``"analytic"`` for numeric ones, whose values carry solver noise that a
    nested stencil would amplify by 1/h^2.
    """
    stencil = stencil or StencilSpec()
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(x, axis=-1) == 0):
        raise DegenerateGradientError("the Gauss kernel gradient vanishes at x = 0")
    if t <= 0:
        raise ValueError("t must be positive")
    gradient = gradient or ("fd" if handle.mode == "closed_form" else "analytic")
    G, gradG = gauss_kernel(handle)

    def once(st: StencilSpec):
        lap = finsler_laplacian_fd(handle.primal, lambda y: G(y, t), x, st,
                                   grad=(lambda y: gradG(y, t)) if gradient == "analytic" else None)
        dt = _time_derivative(lambda s: G(x, s), t, st.ht)
        return dt - lap

    return np.abs(_richardson(once, stencil))


def li_yau_residual(handle: DualNormHandle, x, t: float, stencil: StencilSpec | None = None):
    """|M(grad log G)^2 - d_t log G - n/(2t)| with both derivatives by differences."""
    stencil = stencil or StencilSpec()
    x = np.asarray(x, dtype=float)
    if np.any(np.linalg.norm(x, axis=-1) == 0):
        raise DegenerateGradientError("log G is not differentiable at x = 0")
    n = handle.dim
    G, _ = gauss_kernel(handle)

    def logG(y, s):
        return np.log(G(y, s))

    def grad_once(st):
        return _fd_gradient(lambda y: logG(y, t), x, st.h)

    def dt_once(st):
        return _time_derivative(lambda s: logG(x, s), t, st.ht)

    g = _richardson(grad_once, stencil)
    d = _richardson(dt_once, stencil)
    return np.abs(handle.primal.value(g) ** 2 - d - n / (2 * t))


def _split(cfg: ProductSpaceConfig, X):
    X = np.asarray(X, dtype=float)
    return X[..., :cfg.m], X[..., cfg.m:]


def mixed_operator_residual(cfg: ProductSpaceConfig, f, X, t: float | None,
                            stencil: StencilSpec | None = None,
                            exclusion_radius: float = 0.05):
    """|d_t f - Delta_Phi f - (Phi0(z)^2/4) Delta_Psi f| at X = (z, sigma).

    ``f(z, sigma, t)`` is vectorised in the point arguments.  ``t=None``
    treats ``f`` as stationary (``f(z, sigma, None)``) and drops d_t.
    """
    stencil = stencil or StencilSpec()
    z, sigma = _split(cfg, X)
    r = cfg.phi.dual_value(z)
    reach = 2 * stencil.h * (2 if stencil.richardson else 1)
    if np.any(r < exclusion_radius) or np.any(np.linalg.norm(z, axis=-1) <= reach):
        raise ExcludedPointError("Phi0(z) below the exclusion radius or stencil crosses z = 0")

    def once(st: StencilSpec):
        lz = finsler_laplacian_fd(cfg.phi.primal, lambda zz: f(zz, sigma, t), z, st)
        ls = finsler_laplacian_fd(cfg.psi.primal, lambda ss: f(z, ss, t), sigma, st)
        out = -(lz + r * r / 4 * ls)
        if t is not None:
            out = out + _time_derivative(lambda s: f(z, sigma, s), t, st.ht)
        return out

    return np.abs(_richardson(once, stencil))


def kernel_field(cfg: ProductSpaceConfig, quad: QuadratureSpec | None = None):
    """f(z, sigma, t) = G(X, t) evaluated pointwise by quadrature, memoised per field."""
    quad = quad or QuadratureSpec(rel_tol=1e-13)
    memo = {}

    def f(z, sigma, t):
        z = np.asarray(z, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        r = np.atleast_1d(cfg.phi.dual_value(z))
        s = np.atleast_1d(cfg.psi.dual_value(sigma))
        r, s = np.broadcast_arrays(r, s)
        out = np.empty(r.shape)
        for idx in np.ndindex(r.shape):
            key = (float(r[idx]), float(s[idx]), float(t))
            if key not in memo:
                memo[key] = profile_grid(cfg.m, cfg.k, [key[0]], [key[1]], key[2], quad)[0][0, 0]
            out[idx] = memo[key]
        out = cfg.measure_ratio * out
        return out.reshape(np.broadcast_shapes(np.shape(z)[:-1], np.shape(sigma)[:-1]))

    return f


def fundamental_field(cfg: ProductSpaceConfig, c_value: float | None = None):
    """u(z, sigma) = C_{1,2} Theta0(z, sigma)^{2-Q} as a stationary mixed field."""
    from .fundsol import c12_closed_form
    c = c12_closed_form(cfg) if c_value is None else c_value
    Q = cfg.m + 2 * cfg.k

    def f(z, sigma, t=None):
        a = cfg.phi.dual_value(np.asarray(z, dtype=float))
        b = cfg.psi.dual_value(np.asarray(sigma, dtype=float))
        th = (a ** 4 + 16 * b * b) ** 0.25
        return c * th ** (2 - Q)

    return f


def energy(cfg: ProductSpaceConfig, f, domain_box, grid_n: int = 16, grad=None,
           h: float = 1e-6) -> float:
    """(1/2) int_box Phi(grad_z f)^2 + (Phi0(z)^2/4) Psi(grad_sigma f)^2 on a tensor
    Gauss-Legendre grid.  ``f(X)`` takes stacked points of shape (..., N);
    ``grad`` is an optional analytic gradient of the same signature."""
    if grid_n < 8:
        raise ValueError("grid_n must be at least 8")
    box = np.asarray(domain_box, dtype=float).reshape(cfg.N, 2)
    x, w = gauss_legendre(grid_n)
    axes = [lo + (hi - lo) * x for lo, hi in box]
    wts = [(hi - lo) * w for lo, hi in box]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cfg.N)
    W = np.ones(1)
    for wa in wts:
        W = np.outer(W, wa).ravel()
    g = grad(P) if grad is not None else _fd_gradient(f, P, h)
    gz, gs = g[:, :cfg.m], g[:, cfg.m:]
    r = cfg.phi.dual_value(P[:, :cfg.m])
    dens = _safe_norm(cfg.phi.primal, gz) ** 2 + r * r / 4 * _safe_norm(cfg.psi.primal, gs) ** 2
    return 0.5 * float(np.dot(W, dens))


def _safe_norm(norm: MinkowskiNorm, v):
    out = np.zeros(v.shape[:-1])
    nz = np.linalg.norm(v, axis=-1) > 0
    if np.any(nz):
        out[nz] = norm.value(v[nz])
    return out


def quadratic_growth_check(cfg: ProductSpaceConfig, z, gradient_samples) -> GrowthReport:
    """Rayleigh quotients <A(v), v>/|v|^2 over stacked gradients v = (grad_z f,
    (Phi0(z)/2) grad_sigma f), with A assembled componentwise and compared to
    Phi(grad_z f)^2 + (Phi0(z)^2/4) Psi(grad_sigma f)^2."""
    z = np.asarray(z, dtype=float).reshape(cfg.m)
    V = np.asarray(gradient_samples, dtype=float).reshape(-1, cfg.N)
    r = float(cfg.phi.dual_value(z))
    if r == 0:
        raise ExcludedPointError("the stacked gradient is undefined on z = 0")
    a, b = V[:, :cfg.m], V[:, cfg.m:]
    gs = 2 * b / r
    keep = (np.linalg.norm(a, axis=1) > 0) & (np.linalg.norm(gs, axis=1) > 0)
    skipped = int(np.count_nonzero(~keep))
    a, b, gs, V = a[keep], b[keep], gs[keep], V[keep]
    if len(V) == 0:
        return GrowthReport(math.nan, math.nan, 0.0, skipped)
    Phi, Psi = cfg.phi.primal, cfg.psi.primal
    A = np.concatenate([Phi.value(a)[:, None] * Phi.gradient(a),
                        (r / 2) * Psi.value(gs)[:, None] * Psi.gradient(gs)], axis=1)
    inner = np.sum(A * V, axis=1)
    reduced = Phi.value(a) ** 2 + r * r / 4 * Psi.value(gs) ** 2
    q = inner / np.sum(V * V, axis=1)
    resid = float(np.max(np.abs(inner - reduced) / np.maximum(np.abs(reduced), 1e-300)))
    return GrowthReport(float(q.min()), float(q.max()), resid, skipped)


def weak_form_residual(cfg: ProductSpaceConfig, f, g, domain_box, grid_n: int = 24,
                       h: float = 1e-4) -> tuple[float, float]:
    """(int <A(grad_X f), grad_X g>, -int g (Delta_Phi f + (Phi0^2/4) Delta_Psi f)).

    ``f`` and ``g`` take stacked points (..., N) and should vanish with their
    derivatives on the box boundary.
    """
    box = np.asarray(domain_box, dtype=float).reshape(cfg.N, 2)
    x, w = gauss_legendre(grid_n)
    axes = [lo + (hi - lo) * x for lo, hi in box]
    wts = [(hi - lo) * w for lo, hi in box]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cfg.N)
    W = np.ones(1)
    for wa in wts:
        W = np.outer(W, wa).ravel()
    m = cfg.m
    Phi, Psi = cfg.phi.primal, cfg.psi.primal
    r = cfg.phi.dual_value(P[:, :m])
    gf = _fd_gradient(f, P, h)
    gg = _fd_gradient(g, P, h)

    def half_flux(norm, v):
        out = np.zeros(v.shape)
        nz = np.linalg.norm(v, axis=-1) > 1e-14
        if np.any(nz):
            out[nz] = norm.value(v[nz])[:, None] * norm.gradient(v[nz])
        return out

    lhs = np.sum(half_flux(Phi, gf[:, :m]) * gg[:, :m], axis=1) \
        + r * r / 4 * np.sum(half_flux(Psi, gf[:, m:]) * gg[:, m:], axis=1)

    def div(norm, sl):
        total = np.zeros(len(P))
        for i in range(sl.start, sl.stop):
            e = np.zeros(cfg.N)
            e[i] = h
            fp = half_flux(norm, _fd_gradient(f, P + e, h)[:, sl])
            fm = half_flux(norm, _fd_gradient(f, P - e, h)[:, sl])
            total += (fp[:, i - sl.start] - fm[:, i - sl.start]) / (2 * h)
        return total

    op = div(Phi, slice(0, m)) + r * r / 4 * div(Psi, slice(m, cfg.N))
    return float(np.dot(W, lhs)), float(-np.dot(W, g(P) * op))


def profile_pde_residual(cfg: ProductSpaceConfig, r: float, s: float, t: float,
                         stencil: StencilSpec | None = None,
                         quad: QuadratureSpec | None = None, exclusion: float = 1e-3):
    """|F_t - F_rr - (m-1)/r F_r - (r^2/4)(F_ss + (k-1)/s F_s)| at (r, s, t)."""
    stencil = stencil or StencilSpec()
    quad = quad or QuadratureSpec(rel_tol=1e-13)
    if r < exclusion or s < exclusion or t <= 0:
        raise ExcludedPointError("profile residual needs r, s above the exclusion threshold")
    m, k = cfg.m, cfg.k

    def once(st: StencilSpec):
        h, ht = st.h, st.ht
        if r - h <= 0 or s - h <= 0 or t - ht <= 0:
            raise ExcludedPointError("stencil leaves the open quadrant")
        F, _, _, _ = profile_grid(m, k, [r - h, r, r + h], [s - h, s, s + h], t, quad)
        Fp = profile_grid(m, k, [r], [s], t + ht, quad)[0][0, 0]
        Fm = profile_grid(m, k, [r], [s], t - ht, quad)[0][0, 0]
        Frr = (F[2, 1] - 2 * F[1, 1] + F[0, 1]) / h ** 2
        Fr = (F[2, 1] - F[0, 1]) / (2 * h)
        Fss = (F[1, 2] - 2 * F[1, 1] + F[1, 0]) / h ** 2
        Fs = (F[1, 2] - F[1, 0]) / (2 * h)
        Ft = (Fp - Fm) / (2 * ht)
        return Ft - (Frr + (m - 1) / r * Fr + r * r / 4 * (Fss + (k - 1) / s * Fs))

    return abs(_richardson(once, stencil))


def convergence_order(residual_at, steps) -> tuple[float, list[float]]:
    """Least-squares slope of log residual against log step over ``steps``."""
    steps = [float(h) for h in steps]
    res = [float(np.max(residual_at(h))) for h in steps]
    if min(res) <= 0:
        return math.inf, res
    slope = np.polyfit(np.log(steps), np.log(res), 1)[0]
    return float(slope), res
