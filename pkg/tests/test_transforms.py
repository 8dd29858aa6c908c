import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import circulant_dense, hadamard_normalized, skew_dense, toeplitz_dense
from spinners.errors import DimensionError, NonFiniteError
from spinners.transforms import (
    CirculantSpec,
    circulant_matvec,
    diag_matvec,
    fwht_normalized,
    is_power_of_two,
    next_power_of_two,
    pad_to_power_of_two,
    skew_circulant_matvec,
    structured_matvec,
    toeplitz_matvec,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def power_of_two_vectors(max_log=8):
    return st.integers(0, max_log).flatmap(lambda k: arrays(np.float64, 2 ** k, elements=finite))


def test_fwht_two_point():
    np.testing.assert_allclose(fwht_normalized([1.0, 0.0]), [1 / math.sqrt(2), 1 / math.sqrt(2)],
                               atol=1e-15)


def test_fwht_matches_sylvester_matrix_n4():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(fwht_normalized(x), hadamard_normalized(4) @ x, atol=1e-14)
    np.testing.assert_allclose(fwht_normalized(x), [5.0, -1.0, -2.0, 0.0], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 8, 64, 512])
def test_fwht_matches_dense_for_batches(n):
    X = np.random.default_rng(n).standard_normal((3, 5, n))
    np.testing.assert_allclose(fwht_normalized(X), X @ hadamard_normalized(n).T, atol=1e-12)


def test_fwht_does_not_modify_input():
    x = np.arange(8.0)
    before = x.copy()
    fwht_normalized(x)
    np.testing.assert_array_equal(x, before)


@settings(max_examples=60, deadline=None)
@given(power_of_two_vectors())
def test_fwht_is_involution_and_isometry(x):
    y = fwht_normalized(x)
    scale = max(1.0, np.abs(x).max())
    np.testing.assert_allclose(fwht_normalized(y), x, atol=1e-12 * scale)
    assert abs(np.linalg.norm(y) - np.linalg.norm(x)) <= 1e-12 * scale * math.sqrt(x.size)


@settings(max_examples=40, deadline=None)
@given(power_of_two_vectors(6), power_of_two_vectors(6))
def test_fwht_is_linear(x, y):
    if x.size != y.size:
        return
    np.testing.assert_allclose(fwht_normalized(2.0 * x - y),
                               2.0 * fwht_normalized(x) - fwht_normalized(y), atol=1e-9)


@pytest.mark.parametrize("n", [3, 6, 12, 100])
def test_fwht_rejects_non_power_of_two(n):
    with pytest.raises(DimensionError):
        fwht_normalized(np.ones(n))


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_fwht_rejects_non_finite(bad):
    x = np.ones(4)
    x[2] = bad
    with pytest.raises(NonFiniteError):
        fwht_normalized(x)


def test_power_of_two_helpers():
    assert [is_power_of_two(k) for k in (0, 1, 2, 3, 4, 6, 8)] == [False, True, True, False,
                                                                  True, False, True]
    assert [next_power_of_two(k) for k in (1, 2, 3, 5, 8, 9)] == [1, 2, 4, 8, 8, 16]
    np.testing.assert_array_equal(pad_to_power_of_two([1.0, 2.0, 3.0]), [1, 2, 3, 0])


def test_circulant_identity_and_ones():
    x = np.array([0.5, -1.0, 2.0, 3.0, 7.0])
    e1 = np.eye(5)[0]
    np.testing.assert_allclose(circulant_matvec(CirculantSpec(e1), x), x, atol=1e-14)
    np.testing.assert_allclose(circulant_matvec(CirculantSpec(np.ones(5)), x),
                               np.full(5, x.sum()), atol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 4, 7, 16, 33])
def test_circulant_matches_dense(n):
    gen = np.random.default_rng(100 + n)
    r, x = gen.standard_normal(n), gen.standard_normal(n)
    np.testing.assert_allclose(circulant_matvec(CirculantSpec(r), x), circulant_dense(r) @ x,
                               atol=1e-10)


def test_toeplitz_identity_and_first_column():
    e1 = np.eye(4)[0]
    x = np.array([1.0, -2.0, 3.0, 0.25])
    np.testing.assert_allclose(toeplitz_matvec(CirculantSpec(e1, "toeplitz", e1), x), x,
                               atol=1e-14)
    spec = CirculantSpec([1.0, 4.0, 5.0], "toeplitz", [1.0, 2.0, 3.0])
    np.testing.assert_allclose(toeplitz_matvec(spec, [1.0, 0.0, 0.0]), [1.0, 2.0, 3.0],
                               atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 5, 8, 13])
def test_toeplitz_matches_dense(n):
    gen = np.random.default_rng(200 + n)
    col, row, x = gen.standard_normal(n), gen.standard_normal(n), gen.standard_normal(n)
    row[0] = col[0]
    spec = CirculantSpec(row, "toeplitz", col)
    np.testing.assert_allclose(toeplitz_matvec(spec, x), toeplitz_dense(col, row) @ x, atol=1e-10)
    np.testing.assert_allclose(spec.to_dense(), toeplitz_dense(col, row))


def test_toeplitz_rejects_inconsistent_corner():
    with pytest.raises(DimensionError, match="corner"):
        CirculantSpec([1.0, 2.0], "toeplitz", [3.0, 4.0])
    with pytest.raises(DimensionError):
        CirculantSpec([1.0, 2.0], "toeplitz")


def test_skew_identity_and_two_by_two():
    x = np.array([3.0, -1.0, 2.0])
    np.testing.assert_allclose(skew_circulant_matvec(CirculantSpec(np.eye(3)[0], "skew_circulant"),
                                                     x), x, atol=1e-14)
    a, b = 2.0, 3.0
    spec = CirculantSpec([a, b], "skew_circulant")
    np.testing.assert_allclose(spec.to_dense(), [[a, b], [-b, a]])
    np.testing.assert_allclose(skew_circulant_matvec(spec, [1.0, 0.0]), [a, -b], atol=1e-14)


@pytest.mark.parametrize("n", [1, 3, 8, 10, 32])
def test_skew_matches_dense(n):
    gen = np.random.default_rng(300 + n)
    r, x = gen.standard_normal(n), gen.standard_normal(n)
    np.testing.assert_allclose(skew_circulant_matvec(CirculantSpec(r, "skew_circulant"), x),
                               skew_dense(r) @ x, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24).flatmap(
    lambda n: st.tuples(arrays(np.float64, n, elements=finite), arrays(np.float64, n, elements=finite),
                        arrays(np.float64, n, elements=finite))))
def test_structured_kinds_match_dense(args):
    r, c, x = args
    c = c.copy()
    c[0] = r[0]
    scale = max(1.0, np.abs(r).max(), np.abs(c).max()) * max(1.0, np.abs(x).max()) * len(x)
    cases = [(CirculantSpec(r), circulant_dense(r)),
             (CirculantSpec(r, "skew_circulant"), skew_dense(r)),
             (CirculantSpec(r, "toeplitz", c), toeplitz_dense(c, r))]
    for spec, dense in cases:
        np.testing.assert_allclose(structured_matvec(spec, x), dense @ x, atol=1e-12 * scale)


def test_matvec_dimension_and_kind_checks():
    spec = CirculantSpec(np.ones(4))
    with pytest.raises(DimensionError):
        circulant_matvec(spec, np.ones(5))
    with pytest.raises(ValueError):
        skew_circulant_matvec(spec, np.ones(4))
    with pytest.raises(NonFiniteError):
        CirculantSpec([1.0, np.nan])


def test_generator_arrays_are_read_only():
    r = np.ones(4)
    spec = CirculantSpec(r)
    r[0] = 5.0
    assert spec.first_row[0] == 1.0
    with pytest.raises(ValueError):
        spec.first_row[0] = 2.0


def test_diag_matvec():
    x = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(diag_matvec(np.ones(3), x), x)
    np.testing.assert_array_equal(diag_matvec(-np.ones(3), x), -x)
    np.testing.assert_array_equal(diag_matvec([2.0, 3.0], [5.0, 7.0]), [10.0, 21.0])
    with pytest.raises(DimensionError):
        diag_matvec([1.0, 2.0], [1.0, 2.0, 3.0])
