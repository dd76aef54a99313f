"""Anisotropic gauges, the constants sigma_{alpha,p} and C_{alpha,p}, the
fundamental solution, and the subordination identity

    int_0^inf G(X, t) dt = C_{1,2} Theta0(z, sigma)^{2-Q}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .kernel import ProductSpaceConfig, integrand_factors, profile_grid
from .minkowski import DualSolverError, DualSolverOptions
from .quadrature import QuadratureSpec, gauss_legendre, integrate_panels
from .special import PoleError, beta, gamma, hyp2f1, hyp2f1_series
from .wulff import double_radial_integral, sphere_area

__all__ = [
    "GaugeValue", "FundamentalConstants", "theta_gauge", "theta0_gauge",
    "theta0_variational", "sigma_alpha_p_closed", "sigma_alpha_p_numeric",
    "c_alpha_p", "c12_closed_form", "c12_from_sigma", "fundamental_solution",
    "subordination_check", "gegenbauer_pipeline_check", "crucial_jacobian",
    "crucial_jacobian_numeric",
]


@dataclass(frozen=True)
class GaugeValue:
    theta0: float
    components: tuple[float, float]
    alpha: float


@dataclass(frozen=True)
class FundamentalConstants:
    sigma_ap: float
    c_ap: float
    q: float
    branch: str


def _combine(a: float, b: float, alpha: float) -> float:
    e = 2 * (alpha + 1)
    return (a ** e + 4 * (alpha + 1) ** 2 * b * b) ** (1 / e)


def theta_gauge(cfg: ProductSpaceConfig, z, sigma) -> GaugeValue:
    """Theta(z, sigma) from the primal norms Phi, Psi."""
    a = float(cfg.phi.primal.value(np.asarray(z, dtype=float)))
    b = float(cfg.psi.primal.value(np.asarray(sigma, dtype=float)))
    return GaugeValue(_combine(a, b, cfg.alpha), (a, b), cfg.alpha)


def theta0_gauge(cfg: ProductSpaceConfig, z, sigma) -> GaugeValue:
    """Theta0(z, sigma) = (Phi0^{2(a+1)} + 4(a+1)^2 Psi0^2)^{1/(2(a+1))}."""
    a = float(cfg.phi.dual_value(np.asarray(z, dtype=float)))
    b = float(cfg.psi.dual_value(np.asarray(sigma, dtype=float)))
    return GaugeValue(_combine(a, b, cfg.alpha), (a, b), cfg.alpha)


def theta0_variational(cfg: ProductSpaceConfig, z, sigma,
                       opts: DualSolverOptions | None = None, seed: int = 0) -> float:
    """Theta0 from sup_{Theta(xi, tau) = 1} (|<z, xi>|^{a+1} + 4(a+1)^2 <sigma, tau>).

    Only the primal norms enter.  Points of R^{m+k} are retracted onto the
    Theta-sphere by the anisotropic dilation (xi, tau) -> (xi/T, tau/T^{a+1}),
    T = Theta(xi, tau), and the resulting unconstrained objective is
    maximised by BFGS from several starts.
    """
    opts = opts or DualSolverOptions(tolerance=1e-10)
    m, k, al = cfg.m, cfg.k, cfg.alpha
    z = np.asarray(z, dtype=float).reshape(m)
    sigma = np.asarray(sigma, dtype=float).reshape(k)
    Phi = cfg.phi.primal.value
    Psi = cfg.psi.primal.value
    c = 4 * (al + 1) ** 2

    def retract(v):
        xi, tau = v[:m], v[m:]
        T = _combine(float(Phi(xi)), float(Psi(tau)), al)
        return xi / T, tau / T ** (al + 1)

    def neg(v):
        if not np.any(v):
            return 0.0
        xi, tau = retract(v)
        return -(abs(float(xi @ z)) ** (al + 1) + c * float(tau @ sigma))

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([z, sigma])] if np.any(z) or np.any(sigma) else []
    starts += list(rng.standard_normal((max(opts.restarts, 1), m + k)))
    best = None
    for v0 in starts:
        if not np.any(v0):
            continue
        res = optimize.minimize(neg, v0, method="BFGS",
                                options={"gtol": 1e-12, "maxiter": opts.max_iterations})
        res = optimize.minimize(neg, res.x, method="Nelder-Mead",
                                options={"xatol": 1e-13, "fatol": 1e-16,
                                         "maxiter": opts.max_iterations})
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        return 0.0
    val = -best.fun
    if val < 0:
        raise DualSolverError("variational gauge maximisation failed", best.x, val)
    return val ** (1 / (al + 1))


def sigma_alpha_p_closed(cfg: ProductSpaceConfig, sigma_phi: float | None = None,
                         sigma_psi: float | None = None) -> float:
    """sigma_{a,p} = sigma_Phi sigma_Psi B((m + a p)/(2(a+1)), k/2) / (2^{k+1}(a+1)^k)."""
    sp = cfg.sigma_phi if sigma_phi is None else sigma_phi
    ss = cfg.sigma_psi if sigma_psi is None else sigma_psi
    m, k, al, p = cfg.m, cfg.k, cfg.alpha, cfg.p
    b = beta((m + al * p) / (2 * (al + 1)), k / 2).value
    return sp * ss * b / (2 ** (k + 1) * (al + 1) ** k)


def sigma_alpha_p_numeric(cfg: ProductSpaceConfig, quad: QuadratureSpec | None = None,
                          weight_exponent: float | None = None) -> float:
    """sigma_Phi sigma_Psi Q int_{K*} f*(r, s) r^{m-1} s^{k-1} dr ds by iterated quadrature,

    K* = {r^{2(a+1)} + 4(a+1)^2 s^2 < 1},
    f* = r^{ap} / (r^{2(a+1)} + 4(a+1)^2 s^2)^{ap/(2(a+1))}.
    ``weight_exponent`` replaces a*p (0 gives the plain weighted area of K*).
    """
    quad = quad or QuadratureSpec(rel_tol=1e-11)
    al = cfg.alpha
    ap = cfg.alpha * cfg.p if weight_exponent is None else weight_exponent
    e = 2 * (al + 1)
    c = 4 * (al + 1) ** 2

    def f_star(r, s):
        if ap == 0:
            return 1.0
        return r ** ap / (r ** e + c * s * s) ** (ap / e)

    def s_upper(r):
        return math.sqrt(max(1 - r ** e, 0.0) / c)

    v = double_radial_integral(cfg.phi, cfg.psi, f_star, s_upper=s_upper, r_max=1.0,
                               sigmas=cfg.sigmas, tol=quad.rel_tol,
                               s_break=lambda r: r ** (e / 2) / math.sqrt(c))
    return cfg.Q * v


def c_alpha_p(sigma_ap: float, cfg: ProductSpaceConfig) -> FundamentalConstants:
    """C_{a,p} = ((p-1)/(Q-p)) sigma^{-1/(p-1)}, or sigma^{-1/(Q-1)} when p = Q."""
    if not sigma_ap > 0:
        raise ValueError("sigma_{alpha,p} must be positive")
    Q, p = cfg.Q, cfg.p
    if abs(p - Q) < 1e-12:
        return FundamentalConstants(sigma_ap, sigma_ap ** (-1 / (Q - 1)), Q, "p_eq_Q")
    return FundamentalConstants(sigma_ap, (p - 1) / (Q - p) * sigma_ap ** (-1 / (p - 1)),
                                Q, "p_ne_Q")


def c12_closed_form(cfg: ProductSpaceConfig, sigma_phi: float | None = None,
                    sigma_psi: float | None = None) -> float:
    """Gamma-function route:

    (sigma_{m-1} sigma_{k-1}/sigma_Phi sigma_Psi) 2^{m/2+2k-4} Gamma(m/4)
    Gamma((m/2+k-1)/2) / pi^{(m+k+1)/2}.
    """
    m, k = cfg.m, cfg.k
    sp = cfg.sigma_phi if sigma_phi is None else sigma_phi
    ss = cfg.sigma_psi if sigma_psi is None else sigma_psi
    ratio = sphere_area(m) * sphere_area(k) / (sp * ss)
    g = gamma(m / 4).value * gamma(0.5 * (m / 2 + k - 1)).value
    return ratio * 2.0 ** (m / 2 + 2 * k - 4) * g / math.pi ** ((m + k + 1) / 2)


def c12_from_sigma(cfg: ProductSpaceConfig, sigma_12: float | None = None) -> float:
    """1 / ((Q - 2) sigma_{1,2}) with sigma_{1,2} from the Beta closed form."""
    if sigma_12 is None:
        sigma_12 = sigma_alpha_p_closed(_with(cfg, 1.0, 2.0))
    Q = cfg.m + 2 * cfg.k
    return 1.0 / ((Q - 2) * sigma_12)


def _with(cfg: ProductSpaceConfig, alpha: float, p: float) -> ProductSpaceConfig:
    if cfg.alpha == alpha and cfg.p == p:
        return cfg
    return ProductSpaceConfig(cfg.m, cfg.k, cfg.phi, cfg.psi, alpha, p,
                              sigma_override=cfg.sigmas)


def fundamental_solution(cfg: ProductSpaceConfig, z, sigma,
                         constants: FundamentalConstants | None = None) -> float:
    """C_{a,p} Theta0^{-(Q-p)/(p-1)} for p != Q, C_a log Theta0 for p = Q."""
    th = theta0_gauge(cfg, z, sigma).theta0
    if th == 0:
        raise PoleError("fundamental solution has its pole at the origin")
    if constants is None:
        constants = c_alpha_p(sigma_alpha_p_closed(cfg), cfg)
    if constants.branch == "p_eq_Q":
        return constants.c_ap * math.log(th)
    return constants.c_ap * th ** (-(cfg.Q - cfg.p) / (cfg.p - 1))


def _time_integral(cfg: ProductSpaceConfig, r: float, s: float, scale: float,
                   quad: QuadratureSpec):
    """int_0^inf F(r, s, t) dt with t = scale * e^x and an analytic large-t tail.

    For large t, F(r, s, t) ~ t^{-(m/2+k)} F(0, 0, 1), so the tail beyond T is
    F(r, s, T) T / (Q/2 - 1) up to a relative O(1/T) correction.
    """
    m, k = cfg.m, cfg.k
    Q = m + 2 * k
    x_hi = 14.0
    width = 0.25

    def f(xs):
        out = np.empty(len(xs))
        for i, x in enumerate(xs):
            t = scale * math.exp(x)
            out[i] = profile_grid(m, k, [r], [s], t, quad)[0][0, 0] * t
        return out

    def down():
        x = 0.0
        while True:
            yield x
            x -= width

    def up():
        x = 0.0
        while x < x_hi:
            yield x
            x = min(x + width, x_hi)
        yield x_hi

    lo, e1, _ = integrate_panels(f, down(), n=16, rel_tol=1e-12, quiet_panels=4, batch=8)
    hi, e2, _ = integrate_panels(f, up(), n=16, rel_tol=0.0, abs_tol=0.0, batch=8)
    T = scale * math.exp(x_hi)
    tail = profile_grid(m, k, [r], [s], T, quad)[0][0, 0] * T / (Q / 2 - 1)
    # lower branch ran from 0 downward, so its sign is reversed
    return -lo + hi + tail, e1 + e2 + abs(tail) / T


def subordination_check(cfg: ProductSpaceConfig, z, sigma,
                        quad: QuadratureSpec | None = None):
    """(lhs, rhs, relative residual) for int_0^inf G dt = C_{1,2} Theta0^{2-Q}."""
    if cfg.alpha != 1 or cfg.p != 2:
        raise ValueError("subordination holds for alpha = 1, p = 2")
    quad = quad or QuadratureSpec(rel_tol=1e-12)
    g = theta0_gauge(cfg, z, sigma)
    if g.theta0 == 0:
        raise PoleError("subordination check needs (z, sigma) != 0")
    r, s = g.components
    val, _ = _time_integral(cfg, r, s, g.theta0 ** 2, quad)
    lhs = cfg.measure_ratio * val
    rhs = fundamental_solution(cfg, z, sigma)
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


def _u_integral(f, quad_rel=1e-13):
    def edges():
        u = 0.0
        while True:
            yield u
            u += 0.5
    v, e, _ = integrate_panels(f, edges(), n=20, rel_tol=quad_rel, quiet_panels=4, batch=16)
    return v


def gegenbauer_pipeline_check(cfg: ProductSpaceConfig, z, sigma,
                              quad: QuadratureSpec | None = None) -> dict:
    """The integral I = int_0^inf t^{-(m/2+k-1)} [u-integral] dt/t along four routes.

    raw      -- time integral of the profile divided by the constant
                (2 pi)^{-k/2} (4 pi)^{-m/2};
    gauss    -- single u-integral after the Gegenbauer Laplace-Bessel formula,
                2F1 with argument 16 Psi0^2 tanh^2 u / (Phi0^4 + 16 Psi0^2 tanh^2 u);
    kummer   -- same after the Kummer transformation, 2F1 at -16 Psi0^2 tanh^2 u / Phi0^4;
    closed   -- pi^{-1/2} 2^{3m/2+5k/2-4} Gamma(m/4) Gamma((m/2+k-1)/2) Theta0^{-(Q-2)}.

    Also returns the product of ``closed`` with the measure-ratio constant
    against the C_{1,2} Theta0^{2-Q} value.
    """
    m, k = cfg.m, cfg.k
    if k < 2:
        raise ValueError("the change of variables of this route needs k >= 2")
    quad = quad or QuadratureSpec(rel_tol=1e-12)
    g = theta0_gauge(cfg, z, sigma)
    r, s = g.components
    if r <= 0:
        raise ValueError("the Gegenbauer step needs Phi0(z) > 0")
    Q = m + 2 * k
    a = 0.5 * (m / 2 + k - 1)
    co0 = (2 * math.pi) ** (-k / 2) * (4 * math.pi) ** (-m / 2)
    raw = _time_integral(cfg, r, s, g.theta0 ** 2, quad)[0] / co0

    lead = 4.0 ** (m / 2 + k - 1) * 2.0 ** (1 - k / 2) * gamma(m / 2 + k - 1).value \
        / gamma(k / 2).value
    r4 = r ** 4
    b2 = 16 * s * s

    def gauss_f(u):
        out = np.empty(len(u))
        for i, uu in enumerate(u):
            if uu == 0:
                out[i] = 0.0
                continue
            th2 = math.tanh(uu) ** 2
            w = b2 * th2 / (r4 + b2 * th2)
            # (1/sinh^2 u)^{m/4} (tanh^2 u)^a in a form stable at u -> 0
            sh = (uu / math.sinh(uu)) ** (m / 2) * uu ** (-m / 2) if uu < 300 else 0.0
            out[i] = sh * th2 ** a / (r4 + b2 * th2) ** a \
                * hyp2f1_series(a, -m / 4, k / 2, w).value
        return out

    def kummer_f(u):
        out = np.empty(len(u))
        for i, uu in enumerate(u):
            if uu == 0:
                out[i] = 0.0
                continue
            th2 = math.tanh(uu) ** 2
            sh = (uu / math.sinh(uu)) ** (m / 2) * uu ** (-m / 2) if uu < 300 else 0.0
            out[i] = sh * th2 ** a * hyp2f1(a=a, b=m / 4 + k / 2, c=k / 2,
                                            z=-b2 * th2 / r4).value
        return out

    gauss_v = lead * _u_integral(gauss_f)
    kummer_v = lead / r ** (2 * (m / 2 + k - 1)) * _u_integral(kummer_f)
    closed = math.pi ** -0.5 * 2.0 ** (1.5 * m + 2.5 * k - 4) * gamma(m / 4).value \
        * gamma(0.5 * (m / 2 + k - 1)).value * g.theta0 ** (-(Q - 2))
    final = cfg.measure_ratio * co0 * closed
    target = c12_closed_form(cfg) * g.theta0 ** (2 - Q)

    def rel(x, y):
        return abs(x - y) / abs(y)

    return {
        "raw": raw, "gauss": gauss_v, "kummer": kummer_v, "closed": closed,
        "raw_vs_closed": rel(raw, closed), "gauss_vs_closed": rel(gauss_v, closed),
        "kummer_vs_closed": rel(kummer_v, closed), "gauss_vs_kummer": rel(gauss_v, kummer_v),
        "times_constant_vs_c12": rel(final, target),
    }


def crucial_jacobian(rho: float, th: float, alpha: float) -> float:
    """rho^{a+1} cos(th)^{-a/(a+1)} / (2(a+1))."""
    return rho ** (alpha + 1) * math.cos(th) ** (-alpha / (alpha + 1)) / (2 * (alpha + 1))


def crucial_jacobian_numeric(rho: float, th: float, alpha: float, h: float = 1e-5) -> float:
    """Determinant of d(r, s)/d(rho, th) for r = rho cos^{1/(a+1)} th,
    s = rho^{a+1} sin th / (2(a+1)), by fourth-order central differences."""
    def rs(a, b):
        return np.array([a * math.cos(b) ** (1 / (alpha + 1)),
                         a ** (alpha + 1) * math.sin(b) / (2 * (alpha + 1))])

    def d(fun, x, step):
        return (-fun(x + 2 * step) + 8 * fun(x + step) - 8 * fun(x - step)
                + fun(x - 2 * step)) / (12 * step)

    hr = h * max(1.0, rho)
    ht = h * min(1.0, th, math.pi / 2 - th) if th > 0 else h
    col_r = d(lambda a: rs(a, th), rho, hr)
    col_t = d(lambda b: rs(rho, b), th, ht)
    return float(col_r[0] * col_t[1] - col_r[1] * col_t[0])
