"""Gamma/Beta, Bessel J and G, Gauss 2F1, Hankel transform and identity checks.

Every scalar routine returns a :class:`SpecialValue` carrying a heuristic
(last-term or last-panel) absolute error estimate.  The array routine
:func:`g_nu_array` is the fast path used inside the kernel quadratures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .quadrature import (QuadratureSpec, bessel_zero_guess, gauss_legendre,
                         integrate_panels)

__all__ = [
    "SpecialValue", "HypergeometricParams", "PoleError", "DomainError",
    "gamma", "beta", "beta_trig", "bessel_j", "g_nu", "g_nu_array", "hyp2f1",
    "hyp2f1_series", "verify_kummer", "gegenbauer_laplace_bessel",
    "gegenbauer_laplace_bessel_quad", "verify_bateman", "verify_duplication",
    "verify_fs6", "hankel_transform",
]

_EPS = np.finfo(float).eps
_LD_EPS = float(np.finfo(np.longdouble).eps)


class PoleError(ArithmeticError):
    """Evaluation at a pole of the function."""


class DomainError(ValueError):
    """Arguments outside the implemented domain."""


@dataclass(frozen=True)
class SpecialValue:
    value: float
    abs_error_estimate: float
    method: str

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class HypergeometricParams:
    a: float
    b: float
    c: float
    z: float

    def __post_init__(self):
        if _is_nonpositive_int(self.c):
            raise PoleError(f"2F1 has a pole at c={self.c}")


def _is_nonpositive_int(x) -> bool:
    return x <= 0 and float(x).is_integer()


# ---------------------------------------------------------------------------
# Gamma / Beta
# ---------------------------------------------------------------------------

def gamma(x: float) -> SpecialValue:
    """Euler Gamma.  Poles at non-positive integers raise :class:`PoleError`."""
    x = float(x)
    if _is_nonpositive_int(x):
        raise PoleError(f"Gamma has a pole at {x}")
    if x < 0.5:
        # reflection keeps the relative error uniform for negative arguments
        s = math.sin(math.pi * x)
        v = math.pi / (s * math.gamma(1.0 - x))
        return SpecialValue(v, 4 * _EPS * abs(v), "recurrence")
    v = math.gamma(x)
    return SpecialValue(v, 2 * _EPS * abs(v), "closed_form")


def beta(x: float, y: float) -> SpecialValue:
    """B(x, y) = Gamma(x)Gamma(y)/Gamma(x+y) via log-gamma."""
    if not (x > 0 and y > 0):
        raise DomainError("beta requires x > 0 and y > 0")
    if x + y < 150:
        v = math.gamma(x) * math.gamma(y) / math.gamma(x + y)
        return SpecialValue(v, 4 * _EPS * v, "closed_form")
    lg = math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y)
    v = math.exp(lg)
    return SpecialValue(v, (abs(lg) + 4) * _EPS * v, "closed_form")


def beta_trig(x: float, y: float, tol: float = 1e-13) -> SpecialValue:
    """B(x, y) = 2 int_0^{pi/2} cos^{2x-1} sin^{2y-1} by quadrature.

    Cross-check route for :func:`beta`.  The endpoint algebraic
    singularities are moved into the QAWS weight after the substitution
    u = sin^2(theta), which turns the integral into int_0^1 u^{y-1}(1-u)^{x-1}.
    """
    if not (x > 0 and y > 0):
        raise DomainError("beta requires x > 0 and y > 0")

    # 2 cos^{2x-1} sin^{2y-1} dtheta = u^{y-1} (1-u)^{x-1} du  with u = sin^2
    v, e = integrate.quad(lambda u: 1.0, 0.0, 1.0, weight="alg",
                          wvar=(y - 1.0, x - 1.0), epsabs=0, epsrel=tol)
    return SpecialValue(v, e, "quadrature")


def verify_duplication(x: float, tol: float = 1e-12) -> float:
    """Relative residual of 2^{2x-1} Gamma(x) Gamma(x+1/2) = sqrt(pi) Gamma(2x)."""
    if not x > 0:
        raise DomainError("duplication check requires x > 0")
    if 2 * x < 170:
        lhs = 2.0 ** (2 * x - 1) * gamma(x).value * gamma(x + 0.5).value
        rhs = math.sqrt(math.pi) * gamma(2 * x).value
        return abs(lhs - rhs) / abs(rhs)
    lhs = (2 * x - 1) * math.log(2) + math.lgamma(x) + math.lgamma(x + 0.5)
    rhs = 0.5 * math.log(math.pi) + math.lgamma(2 * x)
    return abs(math.expm1(lhs - rhs))


# ---------------------------------------------------------------------------
# Bessel J_nu and G_nu(z) = z^{-nu} J_nu(z)
# ---------------------------------------------------------------------------

_SERIES_MAX_Z = 17.0


def _asymptotic_threshold(nu: float) -> float:
    return max(_SERIES_MAX_Z, 1.5 * nu * nu + 10.0)


def _use_series(nu, z):
    return (z <= _SERIES_MAX_Z) | (z <= 0.5 * nu)


def _g_series_ld(nu: float, z):
    """Power series of G_nu, in extended precision once cancellation matters."""
    z = np.asarray(z, dtype=float)
    low = z <= 8.0
    if np.all(low):
        return _g_series(nu, z, float, _EPS)
    if not np.any(low):
        return _g_series(nu, z, np.longdouble, _LD_EPS)
    val = np.empty_like(z)
    err = np.empty_like(z)
    val[low], err[low] = _g_series(nu, z[low], float, _EPS)
    val[~low], err[~low] = _g_series(nu, z[~low], np.longdouble, _LD_EPS)
    return val, err


def _g_series(nu: float, z, dtype, eps):
    z = np.asarray(z, dtype=dtype)
    q = -(z * z) / 4
    term = np.full(z.shape, 1.0 / (2.0 ** nu * math.gamma(nu + 1.0)), dtype=dtype)
    total = term.copy()
    big = np.abs(term)
    j = 0
    while True:
        term = term * q / ((j + 1) * (nu + j + 1))
        total += term
        big = np.maximum(big, np.abs(term))
        j += 1
        if np.all(np.abs(term) <= 1e-21 * np.maximum(np.abs(total), 1e-300)) or j > 400:
            break
    err = np.abs(term) + 8 * eps * big * math.sqrt(j)
    return total.astype(float), err.astype(float)


def _hankel_asymptotic(nu: float, z):
    """Large-argument expansion of J_nu (vectorised, float64)."""
    z = np.asarray(z, dtype=float)
    mu = 4.0 * nu * nu
    p = np.ones_like(z)
    q = np.zeros_like(z)
    a = 1.0
    last = np.zeros_like(z)
    active = np.ones(z.shape, dtype=bool)
    for kk in range(1, 60):
        a = a * (mu - (2 * kk - 1) ** 2) / (kk * 8.0)
        term = a / z ** kk
        if kk % 2 == 1:
            sgn = -1.0 if (kk // 2) % 2 else 1.0
            contrib = sgn * term
            q = np.where(active, q + contrib, q)
        else:
            sgn = -1.0 if (kk // 2) % 2 else 1.0
            contrib = sgn * term
            p = np.where(active, p + contrib, p)
        mag = np.abs(term)
        grew = (kk > 1) & (mag > np.abs(last))
        active = active & ~grew & (mag > 1e-18)
        last = np.where(active, term, last)
        if a == 0.0 or not np.any(active):
            break
    chi = z - (0.5 * nu + 0.25) * np.pi
    amp = np.sqrt(2.0 / (np.pi * z))
    val = amp * (p * np.cos(chi) - q * np.sin(chi))
    err = amp * np.abs(last) + 4 * _EPS * amp * (1 + z * _EPS)
    return val, err


def _miller(nu: float, z: float):
    """J_nu(z) by backward recurrence, normalised with
    (z/2)^nu = sum_k (nu+2k) Gamma(nu+k)/k! J_{nu+2k}(z)."""
    n_start = int(z + 40 + 12 * z ** (1.0 / 3.0))
    n_start += n_start % 2
    j_next = 0.0
    j_cur = 1e-280
    norm = 0.0
    val_nu = None
    log_scale = 0.0
    # coefficients c_k, k = n_start/2 ... 0, accumulated in log form
    for idx in range(n_start, -1, -1):
        order = nu + idx
        if idx % 2 == 0:
            kk = idx // 2
            if kk == 0:
                c = math.gamma(nu + 1.0)
            else:
                c = (nu + 2 * kk) * math.exp(math.lgamma(nu + kk) - math.lgamma(kk + 1))
            norm += c * j_cur
        if idx == 0:
            val_nu = j_cur
            break
        j_prev = (2.0 * order / z) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
            log_scale += 250
    target = math.exp(nu * math.log(z / 2.0))
    v = val_nu * target / norm
    return v, 64 * _EPS * max(abs(v), 1e-3)


def bessel_j(nu: float, z: float) -> SpecialValue:
    """Bessel function of the first kind, real order nu >= 0 (or -1/2), z >= 0."""
    nu = float(nu)
    z = float(z)
    if z < 0:
        raise DomainError("bessel_j implemented for z >= 0")
    if nu == -0.5:
        if z == 0:
            raise PoleError("J_{-1/2} is singular at 0")
        return SpecialValue(math.sqrt(2 / (math.pi * z)) * math.cos(z),
                            4 * _EPS, "closed_form")
    if nu < 0:
        raise DomainError("bessel_j implemented for nu >= 0 and nu = -1/2")
    if z == 0:
        return SpecialValue(1.0 if nu == 0 else 0.0, 0.0, "closed_form")
    if _use_series(nu, z):
        g, e = _g_series_ld(nu, np.array([z]))
        scale = z ** nu
        return SpecialValue(float(g[0] * scale), float(e[0] * scale), "series")
    if z >= _asymptotic_threshold(nu):
        v, e = _hankel_asymptotic(nu, np.array([z]))
        return SpecialValue(float(v[0]), float(e[0]), "asymptotic")
    v, e = _miller(nu, z)
    return SpecialValue(v, e, "recurrence")


def g_nu_array(nu: float, z) -> np.ndarray:
    """Vectorised G_nu(z) = z^{-nu} J_nu(z) for z >= 0 (even extension for z < 0)."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    if nu == -0.5:
        return math.sqrt(2 / math.pi) * np.cos(z)
    if nu == 0.5:
        small = z < 1e-3
        zs = z[small]
        out[small] = math.sqrt(2 / math.pi) * (1 - zs * zs / 6 + zs ** 4 / 120)
        zl = z[~small]
        out[~small] = math.sqrt(2 / math.pi) * np.sin(zl) / zl
        return out
    if nu < 0:
        raise DomainError("g_nu implemented for nu >= 0 and nu = -1/2")
    ser = _use_series(nu, z)
    if np.any(ser):
        out[ser] = _g_series_ld(nu, z[ser])[0]
    asy = ~ser & (z >= _asymptotic_threshold(nu))
    if np.any(asy):
        za = z[asy]
        out[asy] = _hankel_asymptotic(nu, za)[0] / za ** nu
    mid = ~ser & ~asy
    if np.any(mid):
        out[mid] = [_miller(nu, zz)[0] / zz ** nu for zz in z[mid]]
    return out


def g_nu(nu: float, z: float) -> SpecialValue:
    """G_nu(z) = z^{-nu} J_nu(z); even in z, with G_nu(0) = 2^{-nu}/Gamma(nu+1)."""
    nu = float(nu)
    z = abs(float(z))
    if nu == -0.5:
        return SpecialValue(math.sqrt(2 / math.pi) * math.cos(z), 4 * _EPS, "closed_form")
    if z == 0:
        return SpecialValue(2.0 ** (-nu) / math.gamma(nu + 1.0), 2 * _EPS, "closed_form")
    if _use_series(nu, z):
        g, e = _g_series_ld(nu, np.array([z]))
        return SpecialValue(float(g[0]), float(e[0]), "series")
    j = bessel_j(nu, z)
    s = z ** nu
    return SpecialValue(j.value / s, j.abs_error_estimate / s, j.method)


# ---------------------------------------------------------------------------
# Gauss hypergeometric 2F1 (real z < 1)
# ---------------------------------------------------------------------------

def hyp2f1_series(a: float, b: float, c: float, z: float,
                  max_terms: int = 500_000) -> SpecialValue:
    """Raw Gauss series; requires |z| < 1 (or a terminating series)."""
    if _is_nonpositive_int(c):
        raise PoleError(f"2F1 has a pole at c={c}")
    terminating = _is_nonpositive_int(a) or _is_nonpositive_int(b)
    if abs(z) >= 1 and not terminating:
        raise DomainError(f"Gauss series diverges at z={z}")
    term = 1.0
    total = 1.0
    big = 1.0
    small_run = 0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        big = max(big, abs(term))
        if term == 0.0:
            return SpecialValue(total, 2 * _EPS * big * (n + 1), "series")
        if abs(term) <= 1e-17 * abs(total):
            small_run += 1
            if small_run >= 3:
                # geometric bound on the remainder
                tail = abs(term) * abs(z) / max(1e-300, 1 - abs(z))
                return SpecialValue(total, tail + 2 * _EPS * big * math.sqrt(n + 1), "series")
        else:
            small_run = 0
    raise DomainError(f"2F1 series did not converge in {max_terms} terms (z={z})")


def hyp2f1(params: HypergeometricParams | None = None, *, a=None, b=None,
           c=None, z=None) -> SpecialValue:
    """Gauss 2F1(a, b; c; z) for real z < 1.

    Direct series for -1/2 <= z < 1; below that the Pfaff transformation
    (1-z)^{-a} F(a, c-b; c; z/(z-1)) maps the argument into [0, 1).
    """
    if params is None:
        params = HypergeometricParams(a, b, c, z)
    a, b, c, z = params.a, params.b, params.c, params.z
    if z >= 1:
        terminating = _is_nonpositive_int(a) or _is_nonpositive_int(b)
        if not terminating:
            raise DomainError("2F1 implemented for real z < 1")
        return hyp2f1_series(a, b, c, z)
    if z == 0:
        return SpecialValue(1.0, 0.0, "closed_form")
    if z >= -0.5:
        return hyp2f1_series(a, b, c, z)
    w = z / (z - 1.0)
    s = hyp2f1_series(a, c - b, c, w)
    f = (1.0 - z) ** (-a)
    return SpecialValue(f * s.value, f * s.abs_error_estimate + 2 * _EPS * abs(f * s.value),
                        "series")


def verify_kummer(a: float, b: float, c: float, x: float) -> float:
    """|F(a,b;c;x) - (1-x)^{-a} F(a, c-b; c; x/(x-1))| with independent sums.

    For x < -1/2 the left side uses the companion transformation
    (1-x)^{-b} F(c-a, b; c; x/(x-1)); for x > 1/3 the right side's series
    (slow or divergent once |x/(x-1)| > 1/2) is replaced by Euler's form
    (1-x)^{c-a-b} F(c-a, c-b; c; x).  Both sides are always summed with
    different parameter sets.
    """
    if not (x < 1 and x != 0):
        raise DomainError("Kummer check requires x < 1, x != 0")
    w = x / (x - 1.0)
    if x < -0.5:
        lhs = (1.0 - x) ** (-b) * hyp2f1_series(c - a, b, c, w).value
    else:
        lhs = hyp2f1_series(a, b, c, x).value
    if x > 1 / 3:
        rhs = (1.0 - x) ** (c - a - b) * hyp2f1_series(c - a, c - b, c, x).value
    else:
        rhs = (1.0 - x) ** (-a) * hyp2f1_series(a, c - b, c, w).value
    return abs(lhs - rhs)


def verify_fs6(a: float, b: float, x: float) -> float:
    """Relative residual of F(a, b; b; -x) = (1+x)^{-a}, x > -1."""
    v = hyp2f1(a=a, b=b, c=b, z=-x).value
    ref = (1.0 + x) ** (-a)
    return abs(v - ref) / abs(ref)


# ---------------------------------------------------------------------------
# Laplace transform of t^{mu-1} J_nu(beta t) (Gegenbauer) and Bateman integral
# ---------------------------------------------------------------------------

def gegenbauer_laplace_bessel(mu: float, nu: float, alpha: float,
                              beta_: float) -> SpecialValue:
    """Closed form of int_0^inf t^{mu-1} e^{-alpha t} J_nu(beta t) dt."""
    if not (nu + mu > 0 and alpha > 0 and beta_ >= 0):
        raise DomainError("need nu + mu > 0, alpha > 0, beta >= 0")
    r2 = alpha * alpha + beta_ * beta_
    pref = (2.0 ** (-nu) * beta_ ** nu * gamma(nu + mu).value
            / (gamma(nu + 1).value * r2 ** ((nu + mu) / 2)))
    f = hyp2f1(a=(nu + mu) / 2, b=(1 - mu + nu) / 2, c=nu + 1, z=beta_ ** 2 / r2)
    return SpecialValue(pref * f.value, abs(pref) * f.abs_error_estimate
                        + 4 * _EPS * abs(pref * f.value), "closed_form")


def gegenbauer_laplace_bessel_quad(mu: float, nu: float, alpha: float, beta_: float,
                                   rel_tol: float = 1e-12) -> SpecialValue:
    """The same integral by direct quadrature (independent oracle).

    The algebraic endpoint t^{mu+nu-1} is absorbed into a QAWS weight on a
    short first panel; the rest is split at the zeros of J_nu(beta t) and
    summed until the exponential envelope is exhausted.
    """
    if not (nu + mu > 0 and alpha > 0 and beta_ >= 0):
        raise DomainError("need nu + mu > 0, alpha > 0, beta >= 0")
    scale = max(alpha, beta_)
    w0 = 0.25 / scale
    # smooth part: e^{-alpha t} beta^nu G_nu(beta t)
    if beta_ == 0:
        if nu != 0:
            return SpecialValue(0.0, 0.0, "quadrature")
        smooth = lambda t: np.exp(-alpha * t)  # noqa: E731
    else:
        smooth = lambda t: np.exp(-alpha * t) * beta_ ** nu * g_nu_array(nu, beta_ * t)  # noqa: E731
    head, e_head = integrate.quad(lambda t: float(smooth(np.array([t]))[0]), 0.0, w0,
                                  weight="alg", wvar=(mu + nu - 1.0, 0.0),
                                  epsabs=0, epsrel=rel_tol, limit=200)

    def full(t):
        return t ** (mu + nu - 1.0) * smooth(t)

    def edges():
        yield w0
        if beta_ > 0:
            zeros = bessel_zero_guess(max(nu, 0.0), 4000) / beta_
            zeros = zeros[zeros > w0 * 1.01]
            width = min(1.0 / alpha, np.pi / beta_)
        else:
            zeros = np.array([])
            width = 1.0 / alpha
        t = w0
        for zz in zeros:
            while zz - t > width:
                t += width
                yield t
            t = zz
            yield t
        while True:
            t += width
            yield t

    tail, e_tail, _ = integrate_panels(full, edges(), n=24, rel_tol=1e-16,
                                       abs_tol=1e-300, quiet_panels=4)
    return SpecialValue(head + tail, e_head + e_tail, "quadrature")


def verify_bateman(alpha: float, beta_: float, c: float, gamma_p: float,
                   a: float, rel_tol: float = 1e-12) -> float:
    """|int_0^1 (1-y)^{g-c-1} y^{c-1} F(alpha,beta;c;a y) dy - B(c, g-c) F(alpha,beta;g;a)|."""
    if not (gamma_p > c > 0 and a < 1):
        raise DomainError("Bateman integral requires gamma > c > 0 and a < 1")

    def f(y):
        return hyp2f1(a=alpha, b=beta_, c=c, z=a * y).value

    lhs, _ = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(c - 1.0, gamma_p - c - 1.0),
                            epsabs=0, epsrel=rel_tol, limit=200)
    rhs = beta(c, gamma_p - c).value * hyp2f1(a=alpha, b=beta_, c=gamma_p, z=a).value
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Hankel transform
# ---------------------------------------------------------------------------

def hankel_transform(h_star, nu: float, s: float,
                     quad: QuadratureSpec | None = None,
                     scale: float = 1.0) -> SpecialValue:
    """(2 pi)^{nu+1} int_0^inf h(u) G_nu(2 pi u s) u^{2 nu + 1} du.

    ``h_star`` must be vectorised and rapidly decreasing; ``scale`` is the
    length over which it varies (panel width when s is small).  Panels are
    split at the zeros of J_nu(2 pi u s).
    """
    quad = quad or QuadratureSpec()
    s = abs(float(s))
    pref = (2 * math.pi) ** (nu + 1)

    def f(u):
        return h_star(u) * g_nu_array(nu, 2 * math.pi * u * s) * u ** (2 * nu + 1)

    def edges():
        yield 0.0
        width = float(scale)
        if s > 0:
            width = min(width, 0.5 / s)
            zeros = bessel_zero_guess(max(nu, 0.0), 100_000) / (2 * math.pi * s)
        else:
            zeros = np.array([])
        t = 0.0
        for zz in zeros:
            while zz - t > width:
                t += width
                yield t
            t = zz
            yield t
        while True:
            t += width
            yield t

    v, e, _ = integrate_panels(f, edges(), n=24, rel_tol=min(quad.rel_tol, 1e-14),
                               abs_tol=quad.abs_tol * 1e-3, max_panels=quad.max_panels,
                               quiet_panels=4)
    return SpecialValue(pref * v, pref * e, "quadrature")


def gl_integral(f, a: float, b: float, n: int = 64) -> float:
    """Plain Gauss-Legendre on [a, b]; small helper for smooth integrands."""
    x, w = gauss_legendre(n)
    return float((b - a) * np.dot(w, f(a + (b - a) * x)))
