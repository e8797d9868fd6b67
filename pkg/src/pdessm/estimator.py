"""Scikit-learn style wrapper around the spectral operator.

``SpectralOperatorRegressor`` learns the operator parameters from paired
``(X, Y)`` feature maps with :func:`pdessm.grad.fit_operator` and applies the
learned operator in :meth:`transform` / :meth:`predict`, so the operator
composes with standard pipelines and parameter search utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .grad import fit_operator
from .operator import init_fit_params, pde_ssm_forward
from .validation import check_feature_map


class SpectralOperatorRegressor(BaseEstimator, TransformerMixin):
    """Least-squares identification of a spectral evolution operator.

    Parameters
    ----------
    c_hid:
        Hidden channel count; defaults to the target's channel count at fit
        time.
    tau:
        Initial integration time.
    lr:
        Initial gradient-descent step size (backtracking halves it as
        needed).
    steps:
        Number of descent steps.
    coeff_scale, noise_scale:
        Initialization scales, see :func:`pdessm.operator.init_fit_params`.
    random_state:
        Seed for the parameter initialization.
    """

    def __init__(self, c_hid=None, tau=1.0, lr=0.1, steps=200,
                 coeff_scale=0.02, noise_scale=0.01, random_state=0):
        self.c_hid = c_hid
        self.tau = tau
        self.lr = lr
        self.steps = steps
        self.coeff_scale = coeff_scale
        self.noise_scale = noise_scale
        self.random_state = random_state

    def fit(self, X, y):
        """Fit operator parameters to map ``X`` onto ``y``. Returns self."""
        X = check_feature_map(X, "X")
        y = check_feature_map(y, "y")
        if X.shape[0] != y.shape[0] or X.shape[2:] != y.shape[2:]:
            raise ValueError(
                f"X and y must agree in batch and spatial shape, got "
                f"{X.shape} and {y.shape}"
            )
        c_hid = self.c_hid if self.c_hid is not None else y.shape[1]
        if y.shape[1] != c_hid:
            raise ValueError(f"y has {y.shape[1]} channels, expected {c_hid}")
        rng = np.random.default_rng(self.random_state)
        g0, z0 = init_fit_params(
            X.shape[1], c_hid, rng,
            tau=self.tau, coeff_scale=self.coeff_scale,
            noise_scale=self.noise_scale, mode="raw",
        )
        g, z, trace = fit_operator([(X, y)], g0, z0, lr=self.lr, steps=self.steps)
        self.embed_params_ = g
        self.pde_params_ = z
        self.loss_trace_ = trace
        return self

    def transform(self, X):
        """Apply the learned operator to ``X``."""
        if not hasattr(self, "pde_params_"):
            raise NotFittedError("call fit before transform")
        return pde_ssm_forward(X, self.embed_params_, self.pde_params_)

    def predict(self, X):
        return self.transform(X)
