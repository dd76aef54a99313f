import math

import numpy as np
import pytest
from scipy import integrate

from subfinsler.kernel import (
    ProductSpaceConfig,
    dilation,
    heat_kernel,
    heat_kernel_many,
    kernel_mass,
    kernel_profile,
    mass_outside_ball,
    profile_grid,
    reference_kernel_fourier,
    reference_kernel_H,
)
from subfinsler.minkowski import dual_norm, make_builtin_norm

DIAG41 = np.diag([4.0, 1.0])


def test_profile_origin_m1k1():
    # at s = 0, G_{-1/2}(0) = sqrt(2/pi)
    ref = integrate.quad(lambda u: (u / math.sinh(u)) ** 0.5 if u > 0 else 1.0, 0, 200,
                         epsabs=0, epsrel=1e-13, limit=200)[0]
    ref *= (2 * math.pi) ** -0.5 * (4 * math.pi) ** -0.5 * math.sqrt(2 / math.pi)
    v = kernel_profile(ProductSpaceConfig(1, 1), 0.0, 0.0, 1.0).value
    assert v == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("z,sigma,t", [
    (0.3, 0.2, 1.0), (1.0, 1.0, 0.5), (0.0, 1.0, 1.0), (1.5, 0.0, 2.0), (0.3, 0.05, 0.01),
])
def test_fourier_route_m1k1(z, sigma, t):
    v = heat_kernel(ProductSpaceConfig(1, 1), [z], [sigma], t).value
    assert v == pytest.approx(reference_kernel_fourier(z, sigma, t), rel=1e-6)


def test_isotropic_reduction_independent_route():
    rng = np.random.default_rng(4)
    for m, k in [(1, 1), (2, 1), (2, 2), (3, 2)]:
        cfg = ProductSpaceConfig(m, k)
        assert cfg.measure_ratio == pytest.approx(1.0, rel=1e-14)
        for _ in range(5):
            z, s, t = rng.normal(size=m), rng.normal(size=k), rng.uniform(0.5, 3.0)
            ref = reference_kernel_H(m, k, z, s, t).value
            assert heat_kernel(cfg, z, s, t).value == pytest.approx(ref, rel=1e-8)


def test_envelope_decay_in_r():
    cfg = ProductSpaceConfig(2, 1)
    for s in (0.0, 0.5):
        far = kernel_profile(cfg, 10.0, s, 1.0)
        near = kernel_profile(cfg, 0.0, s, 1.0).value
        assert abs(far.value) < 1e-9 * near


def test_profile_scaling():
    rng = np.random.default_rng(2)
    for m, k in [(1, 1), (2, 2)]:
        cfg = ProductSpaceConfig(m, k)
        for _ in range(4):
            r, s, t = rng.uniform(0.1, 2), rng.uniform(0, 2), rng.uniform(0.3, 3)
            lam = 2.0
            a = kernel_profile(cfg, lam * r, lam * lam * s, lam * lam * t).value * lam ** (m + 2 * k)
            assert a == pytest.approx(kernel_profile(cfg, r, s, t).value, rel=1e-9)


def test_homogeneity_anisotropic():
    phi = dual_norm(make_builtin_norm("quadratic", 2, matrix=DIAG41))
    cfg = ProductSpaceConfig(2, 1, phi=phi)
    rng = np.random.default_rng(8)
    for _ in range(20):
        z, s, t = rng.normal(size=2), rng.normal(size=1), rng.uniform(0.2, 3)
        (zl, sl), tl = dilation((z, s), t, 1.7)
        lhs = 1.7 ** cfg.Q * heat_kernel(cfg, zl, sl, tl).value
        assert lhs == pytest.approx(heat_kernel(cfg, z, s, t).value, rel=1e-7)


def test_positivity():
    cfg = ProductSpaceConfig(2, 1)
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(100, 2))
    S = rng.normal(size=(100, 1))
    T = rng.uniform(0.1, 10, 100)
    vals, errs = heat_kernel_many(cfg, Z, S, T)
    assert np.all(vals > 0)
    assert np.all(errs < 1e-6 * vals)


def test_grid_matches_pointwise():
    v, e, _, _ = profile_grid(2, 2, [0.2, 1.0], [0.0, 0.7, 1.3], 0.8)
    for i, r in enumerate([0.2, 1.0]):
        for j, s in enumerate([0.0, 0.7, 1.3]):
            assert v[i, j] == pytest.approx(profile_grid(2, 2, [r], [s], 0.8)[0][0, 0], rel=1e-10)


@pytest.mark.parametrize("mk", [(1, 1), (2, 1)])
def test_mass_euclidean(mk):
    assert kernel_mass(ProductSpaceConfig(*mk), 1.0) == pytest.approx(1.0, abs=1e-6)


def test_mass_quadratic_phi():
    phi = dual_norm(make_builtin_norm("quadratic", 2, matrix=DIAG41))
    cfg = ProductSpaceConfig(2, 1, phi=phi)
    assert kernel_mass(cfg, 0.5) == pytest.approx(1.0, abs=1e-5)


def test_mass_concentrates():
    assert mass_outside_ball(1, 1, 1e-3, 0.5) < 1e-2


def test_mass_outside_zero_ball_is_total():
    assert mass_outside_ball(1, 1, 1.0, 0.0) == pytest.approx(1.0, abs=1e-6)


def test_invalid_arguments():
    cfg = ProductSpaceConfig(1, 1)
    with pytest.raises(ValueError):
        kernel_profile(cfg, 0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        profile_grid(1, 1, [-1.0], [0.0], 1.0)
    with pytest.raises(ValueError):
        heat_kernel(ProductSpaceConfig(1, 1, alpha=2.0), [1.0], [0.0], 1.0)
    with pytest.raises(ValueError):
        dilation(([1.0], [0.0]), 1.0, -1.0)
