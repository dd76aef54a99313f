import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from subfinsler.minkowski import (
    DualSolverOptions,
    dual_gradient,
    dual_norm,
    equivalence_constants,
    make_builtin_norm,
    sample_directions,
    verify_duality_identities,
)

DIAG41 = np.diag([4.0, 1.0])


def brute_dual(norm, x):
    """max <x, xi> on {M(xi) = 1} via SLSQP from many starts."""
    best = -np.inf
    for d in sample_directions(norm.dim, 24, seed=7):
        d = d / norm.value(d)
        res = minimize(lambda v: -np.dot(x, v), d, method="SLSQP", tol=1e-14,
                       constraints=[{"type": "eq", "fun": lambda v: norm.value(v) - 1}])
        if res.success:
            best = max(best, -res.fun)
    return best


def test_quadratic_dual_value():
    h = dual_norm(make_builtin_norm("quadratic", 2, matrix=DIAG41))
    assert h.dual_value(np.array([1.0, 0.0])) == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(h.dual_gradient(np.array([1.0, 0.0])), [0.5, 0.0], atol=1e-15)


def test_pnorm_dual_value_holder():
    h = dual_norm(make_builtin_norm("pnorm", 2, p=3.0))
    assert h.dual_value(np.array([1.0, 1.0])) == pytest.approx(2 ** (2 / 3), rel=1e-14)


def test_pnorm_numeric_dual_matches_holder():
    norm = make_builtin_norm("pnorm", 2, p=3.0)
    closed = dual_norm(norm)
    numeric = dual_norm(norm, force_numeric=True)
    assert numeric.mode != "closed_form"
    x = sample_directions(2, 20, seed=3, min_coordinate=0.05) * 1.7
    assert np.allclose(numeric.dual_value(x), closed.dual_value(x), rtol=1e-10)


@pytest.mark.parametrize("kind,params", [
    ("quadratic", {"matrix": DIAG41}),
    ("quartic_perturbation", {"epsilon": 0.1}),
    ("pnorm", {"p": 1.5}),
])
def test_dual_against_constrained_maximisation(kind, params):
    norm = make_builtin_norm(kind, 2, **params)
    h = dual_norm(norm)
    for x in sample_directions(2, 4, seed=11, min_coordinate=0.1) * 1.3:
        assert h.dual_value(x) == pytest.approx(brute_dual(norm, x), rel=1e-8)


@pytest.mark.parametrize("kind,params,dim", [
    ("euclidean", {}, 3),
    ("quadratic", {"matrix": DIAG41}, 2),
    ("pnorm", {"p": 3.0}, 2),
    ("quartic_perturbation", {"epsilon": 0.1}, 2),
    ("quartic_perturbation", {"epsilon": 0.2}, 3),
])
def test_unit_gradient(kind, params, dim):
    norm = make_builtin_norm(kind, dim, **params)
    h = dual_norm(norm)
    x = sample_directions(dim, 30, seed=1, min_coordinate=1e-3) * 2.5
    g = h.dual_gradient(x)
    tol = 1e-12 if h.mode == "closed_form" else 10 * h.solver.tolerance
    assert np.max(np.abs(norm.value(g) - 1)) < tol


def test_dual_gradient_methods_agree():
    h = dual_norm(make_builtin_norm("quartic_perturbation", 2, epsilon=0.1))
    x = np.array([0.7, -1.2])
    assert np.allclose(dual_gradient(h, x), dual_gradient(h, x, method="fd"),
                       atol=1e-7)


def test_identities_quadratic():
    norm = make_builtin_norm("quadratic", 2, matrix=DIAG41)
    x = sample_directions(2, 100, seed=0) * np.random.default_rng(1).uniform(0.5, 2, 100)[:, None]
    rep = verify_duality_identities(norm, dual_norm(norm), x)
    assert rep.max_residual() < 1e-10
    assert set(rep.residuals) >= {"euler", "unit_gradient_primal", "unit_gradient_dual",
                                  "bp_first", "bp_second", "cauchy_schwarz"}


def test_identities_quartic_numeric():
    norm = make_builtin_norm("quartic_perturbation", 2, epsilon=0.1)
    h = dual_norm(norm, DualSolverOptions(tolerance=1e-12))
    x = sample_directions(2, 100, seed=0)
    rep = verify_duality_identities(norm, h, x)
    assert rep.passed(10 * 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(-math.pi, math.pi), st.floats(0.05, 5.0))
def test_dual_homogeneity_and_cauchy_schwarz(rad, ang, lam):
    norm = make_builtin_norm("quadratic", 2, matrix=DIAG41)
    h = dual_norm(norm)
    x = rad * np.array([math.cos(ang), math.sin(ang)])
    assert h.dual_value(lam * x) == pytest.approx(lam * h.dual_value(x), rel=1e-13)
    xi = np.array([math.sin(3 * ang), math.cos(ang)])
    assert np.dot(x, xi) <= norm.value(xi) * h.dual_value(x) * (1 + 1e-13)


def test_equivalence_constants_quadratic():
    a, b = equivalence_constants(make_builtin_norm("quadratic", 2, matrix=DIAG41))
    assert a == pytest.approx(1.0, rel=1e-3)
    assert b == pytest.approx(2.0, rel=1e-3)


@pytest.mark.parametrize("kind,params", [
    ("quadratic", {"matrix": np.array([[1.0, 2.0], [0.0, 1.0]])}),
    ("quadratic", {"matrix": -np.eye(2)}),
    ("pnorm", {"p": 1.0}),
    ("quartic_perturbation", {"epsilon": 2.0}),
    ("nope", {}),
])
def test_invalid_norms(kind, params):
    with pytest.raises(ValueError):
        make_builtin_norm(kind, 2, **params)


def test_origin_gradient_rejected():
    h = dual_norm(make_builtin_norm("euclidean", 2))
    with pytest.raises(ValueError):
        dual_gradient(h, np.zeros(2))
