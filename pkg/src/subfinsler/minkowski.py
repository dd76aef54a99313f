"""Minkowski norms, their Legendre duals, and the duality identities.

Norm callables are vectorised over the last axis: ``value`` maps an array of
shape ``(..., dim)`` to ``(...)`` and ``gradient`` maps ``(..., dim)`` to
``(..., dim)``.  ``hessian_of_square`` maps ``(..., dim)`` to the full Hessians of M^2,
shape ``(..., dim, dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "MinkowskiNorm", "DualSolverOptions", "DualNormHandle", "DualSolverError",
    "IdentityReport", "make_builtin_norm", "dual_norm", "dual_gradient",
    "verify_duality_identities", "equivalence_constants", "sample_directions",
]


@dataclass(frozen=True)
class MinkowskiNorm:
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian_of_square: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "custom"
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class DualSolverOptions:
    tolerance: float = 1e-13
    max_iterations: int = 2000
    restarts: int = 4

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


class DualSolverError(RuntimeError):
    """The constrained maximisation defining M^0(x) did not converge."""

    def __init__(self, message, best_iterate, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.best_iterate = best_iterate
        self.residual = residual


@dataclass(frozen=True)
class DualNormHandle:
    primal: MinkowskiNorm
    dual_value: Callable[[np.ndarray], np.ndarray]
    dual_gradient: Callable[[np.ndarray], np.ndarray]
    mode: str
    solver: Optional[DualSolverOptions] = None

    @property
    def dim(self) -> int:
        return self.primal.dim

    def __call__(self, x):
        return self.dual_value(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# builtin norms
# ---------------------------------------------------------------------------

def _check_vec(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"expected trailing dimension {dim}, got {x.shape}")
    return x


def _diag(v):
    out = np.zeros(v.shape + (v.shape[-1],))
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


def _euclidean(dim):
    def value(x):
        return np.linalg.norm(_check_vec(x, dim), axis=-1)

    def gradient(x):
        x = _check_vec(x, dim)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def hess(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(2.0 * np.eye(dim), x.shape + (dim,)).copy()

    return MinkowskiNorm(dim, value, gradient, hess, label="euclidean", kind="euclidean")


def _quadratic(A, dim):
    A = np.asarray(A, dtype=float)
    if A.shape != (dim, dim):
        raise ValueError(f"quadratic norm needs a {dim}x{dim} matrix, got {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("quadratic norm matrix must be symmetric")
    if np.linalg.eigvalsh(A).min() <= 0:
        raise ValueError("quadratic norm matrix must be positive definite")

    def value(x):
        x = _check_vec(x, dim)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, A, x))

    def gradient(x):
        x = _check_vec(x, dim)
        return (x @ A) / value(x)[..., None]

    def hess(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(2.0 * A, x.shape + (dim,)).copy()

    return MinkowskiNorm(dim, value, gradient, hess, label=f"quadratic{A.tolist()}",
                         kind="quadratic", params={"matrix": A})


def _pnorm(p, dim):
    if not p > 1:
        raise ValueError("pnorm requires p > 1")

    def value(x):
        x = _check_vec(x, dim)
        return np.sum(np.abs(x) ** p, axis=-1) ** (1.0 / p)

    def gradient(x):
        x = _check_vec(x, dim)
        m = value(x)[..., None]
        return np.sign(x) * (np.abs(x) / m) ** (p - 1)

    def hess(x):
        x = np.asarray(x, dtype=float)
        s = np.sum(np.abs(x) ** p, axis=-1)[..., None, None]
        g = np.sign(x) * np.abs(x) ** (p - 1)
        with np.errstate(divide="ignore"):
            diag = np.abs(x) ** (p - 2)
        return 2.0 * ((2.0 - p) * s ** (2.0 / p - 2.0) * g[..., :, None] * g[..., None, :]
                      + (p - 1) * s ** (2.0 / p - 1.0) * _diag(diag))

    return MinkowskiNorm(dim, value, gradient, hess, label=f"pnorm({p})", kind="pnorm",
                         params={"p": float(p)})


def _quartic(eps, dim):
    if not 0 <= eps <= 1:
        raise ValueError("quartic_perturbation requires 0 <= epsilon <= 1")

    def poly(x):
        r2 = np.sum(x * x, axis=-1)
        return r2 * r2 + eps * np.sum(x ** 4, axis=-1)

    def value(x):
        return poly(_check_vec(x, dim)) ** 0.25

    def gradient(x):
        x = _check_vec(x, dim)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        dp = 4 * r2 * x + 4 * eps * x ** 3
        return 0.25 * poly(x)[..., None] ** (-0.75) * dp

    def hess(x):
        x = np.asarray(x, dtype=float)
        P = poly(x)[..., None, None]
        r2 = np.sum(x * x, axis=-1)[..., None]
        dp = 4 * r2 * x + 4 * eps * x ** 3
        d2p = (4 * r2[..., None] * np.eye(dim) + 8 * x[..., :, None] * x[..., None, :]
               + 12 * eps * _diag(x * x))
        return 0.5 * P ** -0.5 * d2p - 0.25 * P ** -1.5 * dp[..., :, None] * dp[..., None, :]

    norm = MinkowskiNorm(dim, value, gradient, hess, label=f"quartic({eps})",
                         kind="quartic_perturbation", params={"epsilon": float(eps)})
    # strict convexity at 64 sphere points
    for d in sample_directions(dim, 64, seed=12345):
        if np.linalg.eigvalsh(hess(d)).min() <= 0:
            raise ValueError(f"quartic_perturbation({eps}) is not strictly convex")
    return norm


def make_builtin_norm(kind: str, dim: int, **params) -> MinkowskiNorm:
    """Build one of the builtin norms.

    ``kind`` is ``euclidean``, ``quadratic`` (``matrix=``), ``pnorm`` (``p=``)
    or ``quartic_perturbation`` (``epsilon=``).
    """
    if int(dim) != dim or dim < 1:
        raise ValueError("dim must be a positive integer")
    dim = int(dim)
    if kind == "euclidean":
        return _euclidean(dim)
    if kind == "quadratic":
        return _quadratic(params["matrix"], dim)
    if kind == "pnorm":
        return _pnorm(float(params["p"]), dim)
    if kind == "quartic_perturbation":
        return _quartic(float(params.get("epsilon", params.get("eps", 0.0))), dim)
    raise ValueError(f"unknown norm kind {kind!r}")


def sample_directions(dim: int, count: int, seed: int = 0,
                      min_coordinate: float = 0.0) -> np.ndarray:
    """Random unit vectors; optionally reject those with a small |x_i|/|x|."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        v = rng.standard_normal((2 * count, dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if min_coordinate > 0 and dim > 1:
            v = v[np.min(np.abs(v), axis=1) >= min_coordinate]
        out.extend(v)
    return np.asarray(out[:count])


def equivalence_constants(norm: MinkowskiNorm, samples: int = 2000,
                          seed: int = 0) -> tuple[float, float]:
    """Sampled (alpha, beta) with alpha|x| <= M(x) <= beta|x| on the sphere."""
    d = sample_directions(norm.dim, samples, seed)
    if norm.dim == 1:
        d = np.array([[1.0], [-1.0]])
    v = norm.value(d)
    return float(v.min()), float(v.max())


# ---------------------------------------------------------------------------
# dual norms
# ---------------------------------------------------------------------------

def _solve_dual(norm: MinkowskiNorm, x: np.ndarray, opts: DualSolverOptions):
    """Maximise <x, xi> over {M(xi) = 1}.  Returns (M0(x), xi*)."""
    x = np.asarray(x, dtype=float)
    xn = float(np.linalg.norm(x))
    if xn == 0:
        return 0.0, np.zeros_like(x)
    rng = np.random.default_rng(0)
    starts = [x / xn] + [d for d in rng.standard_normal((opts.restarts - 1, x.size))]
    best = None
    for start in starts:
        xi = start / norm.value(start)
        # projected gradient ascent on {M = 1}
        step = 1.0 / xn
        f = float(x @ xi)
        for _ in range(opts.max_iterations):
            g = norm.gradient(xi)
            grad = x - f * g  # tangential part of x (since <g, xi> = 1)
            gn = float(np.linalg.norm(grad))
            if gn <= 1e-6 * xn:
                break
            while True:
                cand = xi + step * grad
                cand = cand / norm.value(cand)
                fc = float(x @ cand)
                if fc > f or step < 1e-14 / xn:
                    break
                step *= 0.5
            xi, f = cand, fc
            step *= 2.0
        # Newton polish on grad(M^2/2)(eta) = x, eta = M0(x) xi
        if norm.hessian_of_square is not None:
            eta = f * xi
            for _ in range(30):
                r = norm.value(eta) * norm.gradient(eta) - x
                if np.linalg.norm(r) <= 1e-15 * xn:
                    break
                H = 0.5 * norm.hessian_of_square(eta)
                try:
                    delta = np.linalg.solve(H, r)
                except np.linalg.LinAlgError:
                    break
                cand = eta - delta
                if not np.all(np.isfinite(cand)) or norm.value(cand) == 0:
                    break
                eta = cand
            m_eta = float(norm.value(eta))
            if m_eta > 0:
                xi_n = eta / m_eta
                if float(x @ xi_n) >= f - 1e-12 * xn:
                    xi, f = xi_n, float(x @ xi_n)
        res = float(np.linalg.norm(x - f * norm.gradient(xi))) / xn
        if best is None or res < best[2]:
            best = (f, xi, res)
        if res <= opts.tolerance:
            return f, xi
    raise DualSolverError("dual norm maximisation did not converge", best[1], best[2])


def _solve_dual_batch(norm: MinkowskiNorm, X: np.ndarray, opts: DualSolverOptions):
    """Vectorised version of :func:`_solve_dual` for rows of ``X``.

    Rows that do not converge are retried one at a time with restarts.
    """
    X = np.asarray(X, dtype=float)
    xn = np.linalg.norm(X, axis=1)
    vals = np.zeros(X.shape[0])
    grads = np.zeros_like(X)
    nz = xn > 0
    if not np.any(nz):
        return vals, grads
    Xz, xz = X[nz], xn[nz]
    xi = Xz / norm.value(Xz)[:, None]
    f = np.sum(Xz * xi, axis=1)
    step = 1.0 / xz
    active = np.ones(len(xz), dtype=bool)
    # coarse projected gradient ascent on {M = 1}
    for _ in range(opts.max_iterations):
        g = norm.gradient(xi[active])
        grad = Xz[active] - f[active, None] * g
        gn = np.linalg.norm(grad, axis=1)
        idx = np.flatnonzero(active)
        done = gn <= 1e-3 * xz[active]
        active[idx[done]] = False
        idx, grad = idx[~done], grad[~done]
        if idx.size == 0:
            break
        cand = xi[idx] + step[idx, None] * grad
        cand /= norm.value(cand)[:, None]
        fc = np.sum(Xz[idx] * cand, axis=1)
        up = fc > f[idx]
        xi[idx[up]] = cand[up]
        f[idx[up]] = fc[up]
        step[idx[up]] *= 2.0
        step[idx[~up]] *= 0.5
    # Newton polish on grad(M^2/2)(eta) = x
    if norm.hessian_of_square is not None:
        eta = f[:, None] * xi
        for _ in range(40):
            r = norm.value(eta)[:, None] * norm.gradient(eta) - Xz
            if np.all(np.linalg.norm(r, axis=1) <= 1e-15 * xz):
                break
            H = 0.5 * norm.hessian_of_square(eta)
            try:
                delta = np.linalg.solve(H, r[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
            cand = eta - delta
            ok = np.all(np.isfinite(cand), axis=1)
            eta[ok] = cand[ok]
        m_eta = norm.value(eta)
        good = np.isfinite(m_eta) & (m_eta > 0)
        xi_n = xi.copy()
        xi_n[good] = eta[good] / m_eta[good, None]
        fn = np.sum(Xz * xi_n, axis=1)
        better = good & (fn >= f - 1e-12 * xz)
        xi[better], f[better] = xi_n[better], fn[better]
    res = np.linalg.norm(Xz - f[:, None] * norm.gradient(xi), axis=1) / xz
    for i in np.flatnonzero(~(res <= opts.tolerance)):
        f[i], xi[i] = _solve_dual(norm, Xz[i], opts)
    vals[nz] = f
    grads[nz] = xi
    return vals, grads


def _numeric_dual(norm: MinkowskiNorm, opts: DualSolverOptions) -> DualNormHandle:
    dim = norm.dim

    def value(x):
        x = _check_vec(x, dim)
        return _solve_dual_batch(norm, x.reshape(-1, dim), opts)[0].reshape(x.shape[:-1])

    def gradient(x):
        x = _check_vec(x, dim)
        flat = x.reshape(-1, dim)
        if np.any(np.all(flat == 0, axis=1)):
            raise ValueError("dual gradient undefined at the origin")
        return _solve_dual_batch(norm, flat, opts)[1].reshape(x.shape)

    return DualNormHandle(norm, value, gradient, mode="numeric", solver=opts)


def dual_norm(norm: MinkowskiNorm, opts: DualSolverOptions | None = None,
              force_numeric: bool = False) -> DualNormHandle:
    """Legendre dual M^0(x) = sup_{M(xi)=1} <x, xi>.

    Closed forms for the ``euclidean`` and ``quadratic`` kinds, and the
    Hoelder-conjugate norm for ``pnorm`` unless ``force_numeric``; every other
    norm goes through the numerical maximisation.
    """
    opts = opts or DualSolverOptions()
    dim = norm.dim
    if norm.kind == "euclidean" and not force_numeric:
        return DualNormHandle(norm, norm.value, norm.gradient, mode="closed_form")
    if norm.kind == "quadratic" and not force_numeric:
        Ainv = np.linalg.inv(norm.params["matrix"])
        Ainv = 0.5 * (Ainv + Ainv.T)

        def value(x):
            x = _check_vec(x, dim)
            return np.sqrt(np.einsum("...i,ij,...j->...", x, Ainv, x))

        def gradient(x):
            x = _check_vec(x, dim)
            return (x @ Ainv) / value(x)[..., None]

        return DualNormHandle(norm, value, gradient, mode="closed_form")
    if norm.kind == "pnorm" and not force_numeric:
        # Hoelder conjugate exponent
        q = norm.params["p"] / (norm.params["p"] - 1.0)
        dual = _pnorm(q, dim)
        return DualNormHandle(norm, dual.value, dual.gradient, mode="closed_form")
    return _numeric_dual(norm, opts)


def dual_gradient(handle: DualNormHandle, x, method: str = "envelope",
                  h: float | None = None) -> np.ndarray:
    """Gradient of M^0 at x != 0.

    ``envelope`` returns the maximiser of the dual problem (exact for closed
    forms); ``fd`` uses centred differences with h = 1e-6 max(1, |x|).
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise ValueError("M^0 is not differentiable at the origin")
    if method == "envelope":
        return handle.dual_gradient(x)
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    h = h or 1e-6 * max(1.0, float(np.linalg.norm(x)))
    e = np.eye(x.size) * h
    return np.array([(handle.dual_value(x + e[i]) - handle.dual_value(x - e[i])) / (2 * h)
                     for i in range(x.size)])


@dataclass
class IdentityReport:
    residuals: dict
    samples: int

    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def passed(self, threshold: float) -> bool:
        return self.max_residual() <= threshold


def verify_duality_identities(norm: MinkowskiNorm, handle: DualNormHandle,
                              sample_points) -> IdentityReport:
    """Maximum absolute residuals of the Euler, unit-gradient, Bellettini-Paolini
    and Cauchy-Schwarz identities over ``sample_points``."""
    X = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if np.any(np.linalg.norm(X, axis=1) == 0):
        raise ValueError("sample points must be nonzero")
    M = norm.value(X)
    gM = norm.gradient(X)
    M0 = handle.dual_value(X)
    gM0 = handle.dual_gradient(X)
    res = {}
    res["euler"] = float(np.max(np.abs(np.sum(gM * X, axis=1) - M)))
    res["euler_dual"] = float(np.max(np.abs(np.sum(gM0 * X, axis=1) - M0)))
    res["unit_gradient_primal"] = float(np.max(np.abs(norm.value(gM0) - 1)))
    res["unit_gradient_dual"] = float(np.max(np.abs(handle.dual_value(gM) - 1)))
    res["bp_first"] = float(np.max(np.abs(M0[:, None] * norm.gradient(gM0) - X)))
    res["bp_second"] = float(np.max(np.abs(M[:, None] * handle.dual_gradient(gM) - X)))
    Y = np.roll(X, 1, axis=0)
    cs = np.abs(np.sum(X * Y, axis=1)) - norm.value(X) * handle.dual_value(Y)
    res["cauchy_schwarz"] = float(max(0.0, cs.max()))
    return IdentityReport(res, X.shape[0])
