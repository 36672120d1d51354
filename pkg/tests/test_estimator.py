import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from snowflake_embed import HeisenbergSnowflake, SnowflakeEmbedding
from snowflake_embed.estimator import CertificationWarning
from snowflake_embed.heisenberg import random_sample

from conftest import CYCLE4, grid_points


def test_params_round_trip():
    est = SnowflakeEmbedding(epsilon=0.1, K=4, n_components=6)
    params = est.get_params()
    assert params["epsilon"] == 0.1 and params["n_components"] == 6
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(theta=0.75)
    assert est.theta == 0.75


def test_precomputed_cycle4():
    est = SnowflakeEmbedding(metric="precomputed", random_state=7)
    F = est.fit_transform(np.array(CYCLE4, dtype=float))
    assert F.shape == (4, est.params_.N)
    assert est.certification_.certified
    assert est.doubling_.method == "greedy-cover"
    assert np.isfinite(est.score())


def test_points_match_precomputed():
    pts = grid_points(4)
    a = SnowflakeEmbedding(random_state=1).fit_transform(pts)
    from scipy.spatial.distance import cdist

    b = SnowflakeEmbedding(metric="precomputed", random_state=1).fit_transform(cdist(pts, pts))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_n_jobs_does_not_change_result():
    pts = grid_points(5)
    a = SnowflakeEmbedding(random_state=2, n_jobs=1).fit_transform(pts)
    b = SnowflakeEmbedding(random_state=2, n_jobs=3).fit_transform(pts)
    assert a.tobytes() == b.tobytes()


def test_random_state_object():
    est = SnowflakeEmbedding(random_state=np.random.RandomState(0))
    assert est.fit_transform(grid_points(3)).shape[0] == 9


def test_budget_warning():
    with pytest.warns(CertificationWarning):
        for seed in range(40):
            est = SnowflakeEmbedding(n_components=1, budget=0, random_state=seed).fit(grid_points(6))
            if not est.certification_.certified:
                break


def test_bad_metric():
    with pytest.raises(ValueError, match="metric"):
        SnowflakeEmbedding(metric="cosine").fit(grid_points(3))


def test_bad_input():
    with pytest.raises(ValueError):
        SnowflakeEmbedding().fit(np.array([[0.0, 1.0]]))
    with pytest.raises(ValueError):
        SnowflakeEmbedding().fit(np.array([[0.0, np.nan], [1.0, 2.0]]))


def test_score_unfitted():
    with pytest.raises(NotFittedError):
        SnowflakeEmbedding().score()


def test_heisenberg_estimator():
    X = random_sample(20, 1, seed=4)
    est = HeisenbergSnowflake(epsilon=0.25)
    Y = est.fit_transform(X)
    assert Y.shape == (20, 20) and est.n_features_in_ == 3
    assert est.result_.max_distance_error < 1e-8
