"""scikit-learn style wrappers around the kernel and fundamental solution.

Inputs are rows ``[z_1..z_m, sigma_1..sigma_k, t]`` (kernel) or
``[z_1..z_m, sigma_1..sigma_k]`` (fundamental solution).  ``fit`` only
resolves the Wulff measures and constants; there is nothing to learn.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import fundsol
from .config import parse_norm
from .kernel import ProductSpaceConfig, heat_kernel_many
from .quadrature import QuadratureSpec

__all__ = ["HeatKernelEstimator", "FundamentalSolutionEstimator"]


class _SpaceMixin:
    def _build_space(self):
        phi = parse_norm(self.phi or {"kind": "euclidean"}, self.m)
        psi = parse_norm(self.psi or {"kind": "euclidean"}, self.k)
        return ProductSpaceConfig(self.m, self.k, phi, psi, float(self.alpha), float(self.p))

    def _check(self, X, extra):
        X = check_array(X, dtype=np.float64)
        width = self.space_.m + self.space_.k + extra
        if X.shape[1] != width:
            raise ValueError(f"expected {width} columns, got {X.shape[1]}")
        return X


class HeatKernelEstimator(_SpaceMixin, BaseEstimator):
    """Evaluates G(z, sigma, t); ``predict`` also stores ``errors_`` for the last call."""

    def __init__(self, m=1, k=1, phi=None, psi=None, rel_tol=1e-12):
        self.m = m
        self.k = k
        self.phi = phi
        self.psi = psi
        self.rel_tol = rel_tol

    alpha = 1.0
    p = 2.0

    def fit(self, X=None, y=None):
        self.space_ = self._build_space()
        self.quadrature_ = QuadratureSpec(rel_tol=self.rel_tol)
        self.sigma_phi_, self.sigma_psi_ = self.space_.sigmas
        return self

    def predict(self, X):
        check_is_fitted(self, "space_")
        X = self._check(X, 1)
        m, k = self.space_.m, self.space_.k
        vals, errs = heat_kernel_many(self.space_, X[:, :m], X[:, m:m + k], X[:, -1],
                                      self.quadrature_)
        self.errors_ = errs
        return vals


class FundamentalSolutionEstimator(_SpaceMixin, TransformerMixin, BaseEstimator):
    """``predict`` gives the fundamental solution, ``transform`` the gauge Theta0."""

    def __init__(self, m=1, k=1, phi=None, psi=None, alpha=1.0, p=2.0):
        self.m = m
        self.k = k
        self.phi = phi
        self.psi = psi
        self.alpha = alpha
        self.p = p

    def fit(self, X=None, y=None):
        self.space_ = self._build_space()
        self.constants_ = fundsol.c_alpha_p(fundsol.sigma_alpha_p_closed(self.space_),
                                            self.space_)
        return self

    def transform(self, X):
        check_is_fitted(self, "space_")
        X = self._check(X, 0)
        m = self.space_.m
        return np.array([[fundsol.theta0_gauge(self.space_, row[:m], row[m:]).theta0]
                         for row in X])

    def predict(self, X):
        check_is_fitted(self, "space_")
        X = self._check(X, 0)
        m = self.space_.m
        return np.array([fundsol.fundamental_solution(self.space_, row[:m], row[m:],
                                                      self.constants_) for row in X])
