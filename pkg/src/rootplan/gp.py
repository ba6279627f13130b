"""Exact Gaussian process regression with an RBF-plus-noise kernel.

The regressor follows the scikit-learn estimator protocol (``fit`` /
``predict`` / ``get_params``) so it composes with ``sklearn.clone`` and
model-selection utilities. Fitting factorizes ``K + noise * I`` with a
Cholesky decomposition; posterior queries reuse the factor. Hyperparameters
are always supplied explicitly -- there is no marginal-likelihood
optimization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import (
    as_float_matrix,
    as_float_vector,
    check_consistent_rows,
    check_nonnegative,
    check_positive,
)

# Relative diagonal jitter: start tiny, escalate x10 on factorization failure.
JITTER_START = 1e-10
JITTER_LIMIT = 1e-4


@dataclass(frozen=True)
class KernelParams:
    """RBF kernel hyperparameters: signal variance, length scale, noise variance."""

    signal_variance: float
    length_scale: float
    noise_variance: float = 0.0

    def __post_init__(self):
        check_positive(self.signal_variance, "signal_variance")
        check_positive(self.length_scale, "length_scale")
        check_nonnegative(self.noise_variance, "noise_variance")


def rbf_kernel(a, b, params: KernelParams, same_point_noise: bool = False) -> float:
    """Scalar kernel value ``s2 * exp(-|a - b|^2 / (2 l^2))``.

    ``same_point_noise`` adds the noise variance, i.e. the diagonal
    contribution of the training kernel matrix.
    """
    a = as_float_vector(a, "a")
    b = as_float_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sq = float(np.sum((a - b) ** 2))
    value = params.signal_variance * np.exp(-sq / (2.0 * params.length_scale**2))
    if same_point_noise:
        value += params.noise_variance
    return float(value)


def _sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of A and rows of B."""
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    return np.maximum(sq, 0.0)


def rbf_kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    """Noise-free cross-covariance matrix between two sets of points."""
    return params.signal_variance * np.exp(
        -_sq_distances(A, B) / (2.0 * params.length_scale**2)
    )


class RbfGaussianProcessRegressor(RegressorMixin, BaseEstimator):
    """Exact GP regressor with a fixed RBF kernel and homoskedastic noise.

    Parameters
    ----------
    signal_variance : prior variance of the latent function.
    length_scale : RBF correlation length.
    noise_variance : observation noise added to the training diagonal.
    center_targets : subtract the target mean before fitting and add it back
        to predictions, so the zero-mean prior reverts to the data mean
        instead of zero far from the training set. Predictive variance is
        unaffected.
    scale_targets : additionally divide centered targets by their standard
        deviation before fitting (undone on prediction), making the fixed
        signal/noise variances act as fractions of the data variance instead
        of absolute quantities. Requires ``center_targets``.
    """

    def __init__(
        self,
        signal_variance: float = 1.0,
        length_scale: float = 1.0,
        noise_variance: float = 0.0,
        center_targets: bool = True,
        scale_targets: bool = False,
    ):
        self.signal_variance = signal_variance
        self.length_scale = length_scale
        self.noise_variance = noise_variance
        self.center_targets = center_targets
        self.scale_targets = scale_targets

    @property
    def kernel_params(self) -> KernelParams:
        return KernelParams(self.signal_variance, self.length_scale, self.noise_variance)

    def fit(self, X, y):
        """Factorize the training kernel and precompute the weight vector."""
        params = self.kernel_params
        X = as_float_matrix(X, "X")
        y = as_float_vector(y, "y")
        check_consistent_rows(X, y)
        if X.shape[0] < 1:
            raise ValueError("at least one training point is required")

        if self.scale_targets and not self.center_targets:
            raise ValueError("scale_targets requires center_targets")
        self.y_offset_ = float(np.mean(y)) if self.center_targets else 0.0
        self.y_scale_ = 1.0
        if self.scale_targets:
            spread = float(np.std(y))
            if spread > 0:
                self.y_scale_ = spread
        centered = (y - self.y_offset_) / self.y_scale_

        K = rbf_kernel_matrix(X, X, params)
        K[np.diag_indices_from(K)] += params.noise_variance

        jitter = JITTER_START * params.signal_variance
        limit = JITTER_LIMIT * params.signal_variance
        lower = None
        while True:
            try:
                lower = cholesky(
                    K + jitter * np.eye(K.shape[0]), lower=True, check_finite=False
                )
                break
            except np.linalg.LinAlgError:
                pass
            jitter *= 10.0
            if jitter > limit:
                raise np.linalg.LinAlgError("kernel matrix not positive definite")

        self.X_train_ = X
        self.y_train_ = y
        self.L_ = lower
        self.jitter_ = jitter
        self.alpha_ = cho_solve((lower, True), centered, check_finite=False)
        return self

    def _check_query(self, X) -> np.ndarray:
        X = as_float_matrix(X, "X")
        if X.shape[1] != self.X_train_.shape[1]:
            raise ValueError(
                f"query dimension {X.shape[1]} does not match "
                f"training dimension {self.X_train_.shape[1]}"
            )
        return X

    def predict(self, X, return_std: bool = False):
        """Posterior mean (and optionally standard deviation) at query points."""
        X = self._check_query(X)
        k_star = rbf_kernel_matrix(X, self.X_train_, self.kernel_params)
        mean = k_star @ self.alpha_ * self.y_scale_ + self.y_offset_
        if not return_std:
            return mean
        v = solve_triangular(self.L_, k_star.T, lower=True, check_finite=False)
        var = self.signal_variance - np.sum(v**2, axis=0)
        return mean, self.y_scale_ * np.sqrt(np.maximum(var, 0.0))

    def posterior_mean(self, query) -> float:
        """Posterior mean at a single query point."""
        return float(self.predict(np.atleast_2d(as_float_vector(query, "query")))[0])

    def posterior_variance(self, query) -> float:
        """Posterior variance at a single query point, clamped at zero."""
        _, std = self.predict(
            np.atleast_2d(as_float_vector(query, "query")), return_std=True
        )
        return float(std[0] ** 2)


def fit_gp(
    X, y, params: KernelParams, center_targets: bool = True, scale_targets: bool = False
) -> RbfGaussianProcessRegressor:
    """Convenience constructor from a KernelParams bundle."""
    return RbfGaussianProcessRegressor(
        signal_variance=params.signal_variance,
        length_scale=params.length_scale,
        noise_variance=params.noise_variance,
        center_targets=center_targets,
        scale_targets=scale_targets,
    ).fit(X, y)
