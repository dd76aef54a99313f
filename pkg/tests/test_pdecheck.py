import math

import numpy as np
import pytest

from subfinsler.kernel import ProductSpaceConfig, profile_grid
from subfinsler.minkowski import dual_norm, make_builtin_norm
from subfinsler.pdecheck import (
    DegenerateGradientError,
    ExcludedPointError,
    StencilSpec,
    convergence_order,
    energy,
    finsler_heat_residual,
    finsler_laplacian_fd,
    fundamental_field,
    kernel_field,
    li_yau_residual,
    mixed_operator_residual,
    profile_pde_residual,
    quadratic_growth_check,
    weak_form_residual,
)

DIAG41 = np.diag([4.0, 1.0])
RICH = StencilSpec(1e-4, 1e-4, richardson=True)


def handle(kind, dim, **params):
    return dual_norm(make_builtin_norm(kind, dim, **params))


@pytest.mark.parametrize("kind,params", [
    ("euclidean", {}), ("quadratic", {"matrix": DIAG41}), ("quartic_perturbation", {"epsilon": 0.1}),
])
def test_radial_composition(kind, params):
    # Delta_M(k o M0) = k'' + (n-1)/psi k' with k(rho) = rho^2, n = 2 -> 4
    h = handle(kind, 2, **params)
    x = np.array([0.8, 0.45])
    x = x / h.dual_value(x)
    v = finsler_laplacian_fd(h.primal, lambda y: h.dual_value(y) ** 2, x,
                             StencilSpec(1e-3, 1e-3, richardson=True),
                             grad=lambda y: 2 * h.dual_value(y)[..., None] * h.dual_gradient(y))
    assert v == pytest.approx(4.0, abs=1e-7)


def test_heat_euclidean():
    assert finsler_heat_residual(handle("euclidean", 2), np.array([1.0, 0.0]), 1.0, RICH) < 1e-6


@pytest.mark.parametrize("kind,params", [
    ("quadratic", {"matrix": DIAG41}), ("quartic_perturbation", {"epsilon": 0.1}),
])
def test_heat_convergence(kind, params):
    h = handle(kind, 2, **params)
    x = np.array([0.7, -0.4])
    for t in (0.5, 2.0):
        order, res = convergence_order(
            lambda hh: finsler_heat_residual(h, x, t, StencilSpec(hh, hh)), [0.04, 0.02, 0.01])
        assert order >= 1.9, res


def test_li_yau_euclidean():
    assert li_yau_residual(handle("euclidean", 3), np.array([1.0, 1.0, 0.0]), 2.0, RICH) < 1e-6


def test_li_yau_anisotropic():
    h = handle("quadratic", 2, matrix=DIAG41)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.normal(size=2)
        t = rng.uniform(0.3, 3.0)
        assert li_yau_residual(h, x, t, RICH) < 1e-5


def test_mixed_operator_kernel_order():
    cfg = ProductSpaceConfig(2, 1)
    f = kernel_field(cfg)
    X = np.array([1.0, 0.0, 0.3])
    order, res = convergence_order(
        lambda hh: mixed_operator_residual(cfg, f, X, 1.0, StencilSpec(hh, hh)), [0.04, 0.02, 0.01])
    assert order >= 1.5, res


def plain_operator(f, z, s, t, h):
    """d_t f - Delta_z f - (|z|^2/4) Delta_sigma f with the 5-point Laplacian."""
    def lap(fun, x):
        out = 0.0
        for i in range(len(x)):
            e = np.zeros(len(x))
            e[i] = h
            out += (fun(x + e) - 2 * fun(x) + fun(x - e)) / h ** 2
        return out

    lz = lap(lambda zz: f(zz, s, t), z)
    ls = lap(lambda ss: f(z, ss, t), s)
    dt = (f(z, s, t + h) - f(z, s, t - h)) / (2 * h)
    return abs(dt - lz - np.dot(z, z) / 4 * ls)


def test_isotropic_kernel_plain_laplacians():
    cfg = ProductSpaceConfig(2, 1)
    f = kernel_field(cfg)
    g = lambda z, s, t: float(np.ravel(f(z, s, t))[0])
    assert plain_operator(g, np.array([1.0, 0.2]), np.array([0.3]), 1.0, 1e-3) < 1e-5


@pytest.mark.parametrize("phi", [None, ("quadratic", {"matrix": DIAG41})])
def test_fundamental_stationary_order(phi):
    kw = {} if phi is None else {"phi": handle(phi[0], 2, **phi[1])}
    cfg = ProductSpaceConfig(2, 1, **kw)
    u = fundamental_field(cfg)
    X = np.array([0.9, -0.5, 0.4])
    order, res = convergence_order(
        lambda hh: mixed_operator_residual(cfg, u, X, None, StencilSpec(hh, hh)), [0.04, 0.02, 0.01])
    assert order >= 1.5, res


def test_energy_linear_sigma():
    cfg = ProductSpaceConfig(1, 1)
    e = energy(cfg, lambda X: X[..., 1], [[0, 1], [0, 1]])
    assert e == pytest.approx(1 / 24, rel=1e-10)


def test_growth_quadratic_bounds():
    cfg = ProductSpaceConfig(2, 1, phi=handle("quadratic", 2, matrix=DIAG41))
    rng = np.random.default_rng(1)
    rep = quadratic_growth_check(cfg, [1.0, 0.5], rng.normal(size=(500, 3)))
    # Phi^2 in [1, 4] |a|^2 and the Euclidean Psi block contributes exactly |b|^2
    assert 1 - 1e-12 <= rep.gamma <= rep.gamma_star <= 4 + 1e-12
    assert rep.assembly_residual < 1e-12


def test_growth_quartic_positive():
    h = handle("quartic_perturbation", 2, epsilon=0.1)
    cfg = ProductSpaceConfig(2, 2, phi=h, psi=handle("quartic_perturbation", 2, epsilon=0.2))
    rep = quadratic_growth_check(cfg, [0.3, 0.9], np.random.default_rng(2).normal(size=(1000, 4)))
    assert 0 < rep.gamma <= rep.gamma_star < math.inf


def test_weak_form_identity():
    cfg = ProductSpaceConfig(1, 1, phi=handle("euclidean", 1))

    def bump(X, c):
        y = np.sum((X - c) ** 2, axis=-1)
        return np.where(y < 0.2, np.exp(-1 / np.maximum(0.2 - y, 1e-300)), 0.0)

    f = lambda X: bump(X, np.array([1.0, 0.0])) + 0.3 * bump(X, np.array([1.1, 0.1]))
    g = lambda X: bump(X, np.array([1.05, 0.05]))
    lhs, rhs = weak_form_residual(cfg, f, g, [[0.4, 1.6], [-0.6, 0.6]], grid_n=48)
    assert lhs == pytest.approx(rhs, rel=1e-4)


def test_profile_residual():
    cfg = ProductSpaceConfig(2, 2)
    assert profile_pde_residual(cfg, 1.0, 0.5, 1.0, StencilSpec(1e-3, 1e-3)) < 1e-4


def test_profile_near_axis_m1():
    cfg = ProductSpaceConfig(1, 1)
    order, res = convergence_order(
        lambda hh: profile_pde_residual(cfg, 0.05, 0.5, 1.0, StencilSpec(hh, hh)),
        [0.02, 0.01, 0.005])
    assert all(np.isfinite(res))
    assert order >= 1.5, res


def test_mixed_matches_profile():
    # G(X) = F(|z|, |sigma|) for Euclidean norms: both stencils see the same O(h^2) defect
    cfg = ProductSpaceConfig(2, 2)
    f = kernel_field(cfg)
    X = np.array([1.0, 0.0, 0.5, 0.0])
    steps = [4e-3, 2e-3, 1e-3]
    om, rm = convergence_order(lambda hh: mixed_operator_residual(cfg, f, X, 1.0,
                                                                  StencilSpec(hh, hh)), steps)
    op, rp = convergence_order(lambda hh: profile_pde_residual(cfg, 1.0, 0.5, 1.0,
                                                               StencilSpec(hh, hh)), steps)
    assert om >= 1.9 and op >= 1.9
    assert 0.5 < rm[-1] / rp[-1] < 2.0
    assert rm[-1] < 1e-5 * profile_grid(2, 2, [1.0], [0.5], 1.0)[0][0, 0]


def test_degenerate_and_excluded():
    h = handle("euclidean", 2)
    with pytest.raises(DegenerateGradientError):
        finsler_heat_residual(h, np.zeros(2), 1.0)
    cfg = ProductSpaceConfig(2, 1)
    with pytest.raises(ExcludedPointError):
        mixed_operator_residual(cfg, fundamental_field(cfg), np.array([0.01, 0.0, 0.5]), None)
    with pytest.raises(ExcludedPointError):
        profile_pde_residual(cfg, 1e-4, 0.5, 1.0)
    with pytest.raises(DegenerateGradientError):
        finsler_laplacian_fd(h.primal, lambda y: np.ones(y.shape[:-1]), np.array([1.0, 0.0]))


def test_stencil_validation():
    with pytest.raises(ValueError):
        StencilSpec(h=0.0)
    with pytest.raises(ValueError):
        StencilSpec(order=4)
