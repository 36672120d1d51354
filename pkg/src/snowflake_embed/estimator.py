"""scikit-learn style front ends."""
from __future__ import annotations

import numbers
import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .embedder import certify, derive_params, holder_check, measure_distortion
from .exceptions import DegenerateImage
from .heisenberg import HeisSample, sample_embed
from .metric import from_points, resolve_doubling, validate_metric


class CertificationWarning(UserWarning):
    pass


def _int_seed(random_state):
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    return int(check_random_state(random_state).randint(0, 2**31 - 1))


class SnowflakeEmbedding(BaseEstimator):
    """Embed the (1 - epsilon)-snowflake of a finite metric space into R^N.

    Parameters
    ----------
    epsilon : float, default=0.25
        Snowflake exponent gap; distances are raised to ``1 - epsilon``.
    theta : float, default=0.5
        Trades dimension (``N ~ log K / theta``) against distortion.
    K : float or None
        Doubling constant. Estimated by greedy covering when None.
    c, c_star : float
        Dimension and certification-net constants.
    n_components : int or None
        Overrides the derived dimension N.
    tail_tol : float, default=1e-6
        Scales are truncated once ``tau**i <= tail_tol * d_min**(1 - epsilon)``.
    budget : int, default=10000
        Maximum number of local resampling steps during certification.
    metric : {"euclidean", "precomputed"}
        Whether ``X`` holds points or a distance matrix.
    random_state : int, RandomState or None
    n_jobs : int, default=1
        Threads used across coordinates; results do not depend on it.

    Attributes
    ----------
    embedding_ : ndarray of shape (n_samples, N)
    params_ : SnowflakeParams
    doubling_ : DoublingEstimate
    certification_ : CertificationReport
    distortion_ : DistortionReport or None
    """

    def __init__(
        self,
        epsilon=0.25,
        theta=0.5,
        K=None,
        c=8.0,
        c_star=4096.0,
        n_components=None,
        tail_tol=1e-6,
        budget=10_000,
        metric="euclidean",
        random_state=0,
        n_jobs=1,
    ):
        self.epsilon = epsilon
        self.theta = theta
        self.K = K
        self.c = c
        self.c_star = c_star
        self.n_components = n_components
        self.tail_tol = tail_tol
        self.budget = budget
        self.metric = metric
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _space(self, X):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        if self.metric == "precomputed":
            return validate_metric(X)
        if self.metric == "euclidean":
            return from_points(X)
        raise ValueError(f"metric must be 'euclidean' or 'precomputed', got {self.metric!r}")

    def fit(self, X, y=None):
        space = self._space(X)
        self.n_features_in_ = np.asarray(X).shape[1]
        self.space_ = space
        self.doubling_ = resolve_doubling(space, self.K)
        self.params_ = derive_params(
            self.doubling_.K_est,
            self.epsilon,
            self.theta,
            c=self.c,
            c_star=self.c_star,
            d_min=space.d_min,
            tail_tol=self.tail_tol,
            dimension_override=self.n_components,
        )
        self.result_, self.certification_ = certify(
            space,
            self.params_,
            seed=_int_seed(self.random_state),
            budget=self.budget,
            threads=self.n_jobs,
        )
        if not self.certification_.certified:
            warnings.warn(
                "resampling budget exhausted; the embedding is not certified",
                CertificationWarning,
            )
        self.holder_ = holder_check(self.result_)
        try:
            self.distortion_ = measure_distortion(self.result_)
        except DegenerateImage as exc:
            warnings.warn(str(exc), CertificationWarning)
            self.distortion_ = None
        self.embedding_ = self.result_.F
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def score(self, X=None, y=None):
        """Negative distortion of the fitted embedding (higher is better)."""
        check_is_fitted(self, "embedding_")
        if self.distortion_ is None:
            return -np.inf
        return -self.distortion_.distortion


class HeisenbergSnowflake(BaseEstimator):
    """Euclidean embedding of a finite Heisenberg sample under d_{M_p}^{p/2}.

    Rows of ``X`` are ``(x_1..x_n, y_1..y_n, t)``; ``p = 2 (1 - epsilon)``.
    """

    def __init__(self, epsilon=0.25):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        self.n_features_in_ = X.shape[1]
        self.result_ = sample_embed(HeisSample(X, self.epsilon))
        self.embedding_ = self.result_.coords
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_
