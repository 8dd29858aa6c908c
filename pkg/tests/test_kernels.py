import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinners.data import gaussian_blob
from spinners.errors import DimensionError, DomainError
from spinners.kernels import (
    SIGMA_PROFILES,
    Kernel,
    embed,
    error_curve,
    feature_map,
    gram_approx,
    gram_error,
    gram_exact,
    median_sigma,
)
from spinners.spinner import Variant

GAUSS = Kernel.gaussian(1.5)
ANG = Kernel.angular()


def test_angular_embedding_is_scale_invariant():
    fm = feature_map("HD3HD2HD1", 16, 16, ANG, seed=1)
    x = np.random.default_rng(0).standard_normal(16)
    assert np.array_equal(embed(fm, x), embed(fm, 2.0 * x))


@pytest.mark.parametrize("variant", list(Variant))
def test_gaussian_self_similarity_is_one(variant):
    fm = feature_map(variant, 16, 24, GAUSS, seed=2)
    f = embed(fm, np.random.default_rng(1).standard_normal(16))
    assert abs(f @ f - 1.0) <= 1e-14


def test_gaussian_features_match_cosine_formula():
    fm = feature_map("Gcirc_D2HD1", 4, 4, GAUSS, seed=3)
    A = fm.projector.to_dense()
    gen = np.random.default_rng(4)
    x, y = gen.standard_normal(4), gen.standard_normal(4)
    direct = np.mean(np.cos(A @ (x - y) / GAUSS.sigma))
    assert abs(embed(fm, x) @ embed(fm, y) - direct) <= 1e-14


def test_gram_exact_anchors():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    K = gram_exact(X, ANG)
    assert K[0, 2] == 1.0 and K[0, 0] == 1.0
    assert abs(K[0, 1] - 0.5) <= 1e-15
    sigma = 0.7
    Y = np.array([[0.0, 0.0], [sigma * math.sqrt(2.0), 0.0]])
    Kg = gram_exact(Y, Kernel.gaussian(sigma))
    assert abs(Kg[0, 1] - math.exp(-1.0)) <= 1e-15
    assert Kg[0, 0] == 1.0


def test_gram_exact_angular_antipodal_and_near_parallel():
    u = np.array([1.0, 2.0, -0.5])
    K = gram_exact(np.stack([u, -u, u + np.array([1e-9, 0, 0])]), ANG)
    assert K[0, 1] == 0.0
    # theta ~ 1e-9 / |u| must survive rounding
    theta = np.linalg.norm(np.cross(u, [1e-9, 0, 0])) / np.dot(u, u)
    assert abs((1.0 - K[0, 2]) * np.pi - theta) <= 1e-15


def test_gram_exact_rejects_zero_for_angular():
    with pytest.raises(DomainError):
        gram_exact(np.array([[0.0, 0.0], [1.0, 0.0]]), ANG)


@pytest.mark.parametrize("kernel", [GAUSS, ANG])
def test_gram_approx_diagonal_is_one(kernel):
    X = np.random.default_rng(5).standard_normal((7, 8))
    K = gram_approx(feature_map("HDg_HD2HD1", 8, 20, kernel, seed=4), X)
    np.testing.assert_allclose(np.diag(K), 1.0, atol=1e-14)
    assert np.array_equal(K, K.T)


def test_angular_opposite_points_give_zero():
    x = np.random.default_rng(6).standard_normal(8)
    K = gram_approx(feature_map("GSkewCirc_D2HD1", 8, 16, ANG, seed=0), np.stack([x, -x]))
    # projections of x and -x are exact negatives; only exact zeros could tie
    assert K[0, 1] == 0.0


@pytest.mark.parametrize("kernel", [Kernel.gaussian(2.0), ANG])
def test_gram_approx_matches_scalar_reimplementation(kernel):
    fm = feature_map("GToeplitz_D2HD1", 8, 8, kernel, seed=7)
    A = fm.projector.to_dense()
    X = np.random.default_rng(8).standard_normal((3, 8))
    K = gram_approx(fm, X)
    for i in range(3):
        for j in range(3):
            if kernel.kind == "gaussian":
                s = 0.0
                for k in range(8):
                    zi = sum(A[k, t] * X[i, t] for t in range(8)) / kernel.sigma
                    zj = sum(A[k, t] * X[j, t] for t in range(8)) / kernel.sigma
                    s += math.cos(zi) * math.cos(zj) + math.sin(zi) * math.sin(zj)
                expected = s / 8
            else:
                disagree = 0
                for k in range(8):
                    zi = sum(A[k, t] * X[i, t] for t in range(8))
                    zj = sum(A[k, t] * X[j, t] for t in range(8))
                    disagree += (zi >= 0) != (zj >= 0)
                expected = 1.0 - disagree / 8
            assert abs(K[i, j] - expected) <= 1e-12


def test_gram_error_arithmetic():
    K = np.eye(2)
    assert gram_error(K, K) == 0.0
    assert gram_error(K, np.zeros((2, 2))) == 1.0
    assert abs(gram_error(K, np.array([[1.0, 0.1], [0.1, 1.0]])) - 0.1) <= 1e-15
    with pytest.raises(DimensionError):
        gram_error(K, np.eye(3))
    with pytest.raises(DomainError):
        gram_error(np.zeros((2, 2)), K)


def test_kernel_validation():
    with pytest.raises(ValueError):
        Kernel.gaussian(0.0)
    with pytest.raises(ValueError):
        Kernel("laplace", 1.0)
    assert Kernel.angular().sigma is None
    assert SIGMA_PROFILES["g50c"] == 17.4734


@pytest.mark.parametrize("kernel", [GAUSS, ANG])
def test_gaussian_dense_estimator_is_unbiased(kernel):
    X = np.random.default_rng(9).standard_normal((6, 8))
    K = gram_exact(X, kernel)
    mean = np.mean([gram_approx(feature_map("GaussianDense", 8, 64, kernel, seed=s), X)
                    for s in range(400)], axis=0)
    assert np.abs(mean - K).max() < 0.02


def test_error_curve_duplicate_counts_are_identical():
    X = gaussian_blob(16, 40, seed=0).rows
    rows = error_curve(X, "HD3HD2HD1", Kernel.gaussian(median_sigma(X)), [16, 16, 32], [1, 2, 3])
    assert rows[0] == rows[1]
    assert rows[0]["seeds"] == 3
    assert rows[2]["mean_error"] < rows[0]["mean_error"]


def test_median_sigma():
    X = np.array([[0.0], [1.0], [3.0]])
    assert median_sigma(X) == pytest.approx(2.0 / math.sqrt(2.0))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2 ** 32))
def test_feature_map_has_requested_dimension(n_features, seed):
    fm = feature_map("HD3HD2HD1", 8, n_features, GAUSS, seed)
    assert embed(fm, np.ones(8)).shape == (2 * n_features,)
    assert embed(feature_map("HD3HD2HD1", 8, n_features, ANG, seed), np.ones(8)).shape == (
        n_features,)
