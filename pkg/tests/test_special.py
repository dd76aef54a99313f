import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate, special as sps

from subfinsler.special import (
    DomainError,
    PoleError,
    bessel_j,
    beta,
    beta_trig,
    g_nu,
    g_nu_array,
    gamma,
    gegenbauer_laplace_bessel,
    gegenbauer_laplace_bessel_quad,
    hankel_transform,
    hyp2f1,
    hyp2f1_series,
    verify_bateman,
    verify_duplication,
    verify_fs6,
    verify_kummer,
)


def test_gamma_reflection():
    v = gamma(0.25).value * gamma(0.75).value
    assert v == pytest.approx(math.pi * math.sqrt(2), rel=1e-14)


@pytest.mark.parametrize("x", [0, -1, -7])
def test_gamma_poles(x):
    with pytest.raises(PoleError):
        gamma(x)


def test_beta_against_integral():
    ref = integrate.quad(lambda t: 1.0, 0, 1, weight="alg", wvar=(-0.25, -0.5),
                         epsabs=0, epsrel=1e-13)[0]
    assert beta(0.75, 0.5).value == pytest.approx(ref, rel=1e-10)
    assert beta_trig(0.75, 0.5).value == pytest.approx(ref, rel=1e-10)
    assert beta(0.75, 0.5).value == pytest.approx(
        math.gamma(0.75) * math.gamma(0.5) / math.gamma(1.25), rel=1e-14)


def test_beta_domain():
    with pytest.raises(DomainError):
        beta(-1.0, 2.0)


@pytest.mark.parametrize("z", [0.5, 1.0, 5.0])
def test_bessel_half_integer(z):
    assert bessel_j(0.5, z).value == pytest.approx(math.sqrt(2 / (math.pi * z)) * math.sin(z),
                                                   rel=1e-13)


def test_bessel_first_zero():
    assert abs(bessel_j(0.0, 2.404825557695773).value) < 1e-9


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.5, 3.0, 7.0])
def test_bessel_against_scipy(nu):
    z = np.concatenate([np.linspace(0, 10, 41), [17.3, 40.0, 120.0, 1000.5]])
    for zi in z:
        assert bessel_j(nu, zi).value == pytest.approx(sps.jv(nu, zi), abs=1e-13)


@pytest.mark.parametrize("nu", [-0.5, 0.0, 0.5, 1.0, 3.0])
def test_g_nu_array_against_mpmath(nu):
    z = np.array([1e-6, 0.3, 2.0, 8.5, 25.0, 300.0])
    ref = np.array([float(mpmath.besselj(nu, x) / mpmath.mpf(x) ** nu) for x in z])
    assert np.allclose(g_nu_array(nu, z), ref, rtol=1e-11, atol=1e-15)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 3.0])
def test_g_nu_origin(nu):
    assert g_nu(nu, 0.0).value == pytest.approx(2 ** -nu / math.gamma(nu + 1), rel=1e-15)


def test_g_half():
    for z in (0.1, 2.0, 30.0):
        assert g_nu(0.5, z).value == pytest.approx(math.sqrt(2 / math.pi) * math.sin(z) / z,
                                                   rel=1e-12)


def test_hyp2f1_examples():
    assert hyp2f1(a=1.3, b=0.7, c=0.7, z=-2.0).value == pytest.approx(3 ** -1.3, rel=1e-13)
    assert hyp2f1(a=1.0, b=1.0, c=2.0, z=0.5).value == pytest.approx(2 * math.log(2), rel=1e-13)


def test_hyp2f1_pole():
    with pytest.raises(PoleError):
        hyp2f1_series(1.0, 1.0, -2.0, 0.3)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-5, 0.9))
def test_hyp2f1_against_mpmath(a, b, c, z):
    ref = float(mpmath.hyp2f1(a, b, c, z))
    assert hyp2f1(a=a, b=b, c=c, z=z).value == pytest.approx(ref, rel=1e-10)


def test_kummer_paper_instance():
    m, k = 2, 1
    assert verify_kummer(0.5 * (m / 2 + k - 1), -m / 4, k / 2, 0.3) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-5, 0.9))
def test_kummer_property(a, b, c, x):
    assume(x != 0)
    assert verify_kummer(a, b, c, x) < 1e-9 * max(1.0, abs(float(mpmath.hyp2f1(a, b, c, x))))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0, 5))
def test_fs6_property(a, b, x):
    assert verify_fs6(a, b, x) < 1e-12


def test_gegenbauer_laplace_j0():
    assert gegenbauer_laplace_bessel(1.0, 0.0, 1.0, 2.0).value == pytest.approx(
        1 / math.sqrt(5), rel=1e-14)


def test_gegenbauer_against_mpmath():
    mu, nu, al, be = 2.5, 1.0, 1.2, 0.7
    f = lambda t: mpmath.exp(-al * t) * mpmath.besselj(nu, be * t) * t ** (mu - 1)
    ref = float(mpmath.quadosc(f, [0, mpmath.inf], omega=be))
    assert gegenbauer_laplace_bessel(mu, nu, al, be).value == pytest.approx(ref, rel=1e-10)


def test_gegenbauer_paper_instance():
    m, k = 2, 2
    mu, nu = m / 2 + k / 2, k / 2 - 1
    cf = gegenbauer_laplace_bessel(mu, nu, 1.0, 1.0).value
    qd = gegenbauer_laplace_bessel_quad(mu, nu, 1.0, 1.0).value
    assert cf == pytest.approx(qd, rel=1e-8)


def test_bateman_paper_instance():
    m, k = 2, 2
    phi, psi = 1.0, 0.25
    r = verify_bateman(0.5 * (m / 2 + k - 1), m / 4 + k / 2, k / 2, m / 4 + k / 2,
                       -16 * psi ** 2 / phi ** 4)
    assert r < 1e-8


def test_bateman_random_trials():
    rng = np.random.default_rng(0)
    for _ in range(100):
        al, be = rng.uniform(0.1, 3.0, 2)
        c = rng.uniform(0.2, 2.0)
        g = c + rng.uniform(0.2, 2.0)
        a = rng.uniform(-3.0, 0.8)
        ref = abs(float(mpmath.beta(c, g - c) * mpmath.hyp2f1(al, be, g, a)))
        assert verify_bateman(al, be, c, g, a) < 1e-7 * ref


def test_duplication():
    assert verify_duplication(0.25) < 1e-12
    for m in (1, 2, 3):
        for k in (1, 2, 3):
            assert verify_duplication(0.5 * (m / 2 + k - 1)) < 1e-12


def test_hankel_gaussian_self_dual():
    # k = 2: the radial Fourier transform of e^{-pi |x|^2} is e^{-pi |s|^2}
    for s in (0.0, 0.4, 1.3):
        v = hankel_transform(lambda u: np.exp(-math.pi * u * u), 0.0, s, scale=0.5).value
        assert v == pytest.approx(math.exp(-math.pi * s * s), rel=1e-10)
