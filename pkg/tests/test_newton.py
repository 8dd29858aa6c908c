import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinners.errors import DimensionError, StepFailure
from spinners.newton import (
    EXACT,
    LogisticProblem,
    SketchConfig,
    generate_ar1_problem,
    gradient,
    hessian,
    hessian_sqrt,
    loss,
    make_sketch,
    reference_optimum,
    sketch_isotropy,
    sketched_step,
    solve,
)
from spinners.spinner import Variant


def random_problem(n, d, seed):
    gen = np.random.default_rng(seed)
    A = gen.standard_normal((n, d))
    y = np.where(gen.random(n) < 0.5, -1.0, 1.0)
    return LogisticProblem(A, y), gen.standard_normal(d)


def test_loss_at_zero_is_n_log_two():
    p, _ = random_problem(17, 3, 0)
    assert loss(p, np.zeros(3)) == pytest.approx(17 * math.log(2.0), rel=1e-15)


def test_loss_vanishes_for_large_correct_margin():
    p = LogisticProblem(np.array([[1.0]]), np.array([1.0]))
    values = [loss(p, [t]) for t in (0.0, 5.0, 15.0, 30.0)]
    assert values == sorted(values, reverse=True)
    assert values[-1] <= 1e-13
    assert loss(p, [-800.0]) == pytest.approx(800.0)  # no overflow


def test_loss_matches_naive_sum():
    p, x = random_problem(20, 3, 1)
    naive = 0.0
    for i in range(20):
        margin = p.y[i] * sum(p.A[i, j] * x[j] for j in range(3))
        naive += math.log(1.0 + math.exp(-margin))
    assert abs(loss(p, x) - naive) <= 1e-12


def test_gradient_at_zero_and_label_flip():
    p, _ = random_problem(15, 4, 2)
    g0 = gradient(p, np.zeros(4))
    np.testing.assert_allclose(g0, -0.5 * (p.y[:, None] * p.A).sum(0), atol=1e-14)
    flipped = LogisticProblem(p.A, -p.y)
    np.testing.assert_allclose(gradient(flipped, np.zeros(4)), -g0, atol=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_gradient_matches_central_differences(seed):
    p, x = random_problem(40, 5, seed)
    h = 1e-5
    g = gradient(p, x)
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        fd = (loss(p, x + e) - loss(p, x - e)) / (2 * h)
        assert abs(fd - g[j]) <= 1e-5 * max(1.0, abs(g[j]))


def test_hessian_sqrt_at_zero_is_half_a():
    p, _ = random_problem(10, 3, 3)
    np.testing.assert_allclose(hessian_sqrt(p, np.zeros(3)), 0.5 * p.A, atol=1e-15)


def test_hessian_sqrt_reproduces_explicit_hessian():
    p, x = random_problem(30, 4, 4)
    B = hessian_sqrt(p, x)
    explicit = np.zeros((4, 4))
    for i in range(30):
        s = 1.0 / (1.0 + math.exp(-p.A[i] @ x))
        explicit += s * (1 - s) * np.outer(p.A[i], p.A[i])
    np.testing.assert_allclose(B.T @ B, explicit, atol=1e-10)
    np.testing.assert_allclose(hessian(p, x), explicit, atol=1e-10)


def test_hessian_sqrt_saturates():
    A = np.array([[40.0, 0.0], [1.0, 1.0]])
    p = LogisticProblem(A, np.array([1.0, -1.0]))
    B = hessian_sqrt(p, np.array([1.0, 0.0]))
    assert np.linalg.norm(B[0]) <= 1e-8 * np.linalg.norm(A[0])


def test_exact_step_is_dense_newton_step():
    p, x = random_problem(50, 6, 5)
    expected = np.linalg.solve(hessian(p, x), -gradient(p, x))
    np.testing.assert_allclose(sketched_step(p, x), expected, atol=1e-8)


def test_scalar_newton_step():
    p, _ = random_problem(25, 1, 6)
    x = np.array([0.3])
    s = 1.0 / (1.0 + np.exp(-p.A[:, 0] * 0.3))
    f1 = float(np.sum((s - (p.y + 1) / 2) * p.A[:, 0]))
    f2 = float(np.sum(s * (1 - s) * p.A[:, 0] ** 2))
    assert abs(sketched_step(p, x)[0] - (-f1 / f2)) <= 1e-12


def test_square_hadamard_sketch_is_orthonormal():
    p, x = random_problem(64, 5, 7)
    sketch = make_sketch("HD3HD2HD1", 64, 64, seed=1)
    S = sketch(np.eye(64))
    np.testing.assert_allclose(S @ S.T, np.eye(64), atol=1e-12)
    np.testing.assert_allclose(sketched_step(p, x, sketch), sketched_step(p, x), atol=1e-8)


def test_sketch_pads_and_stacks():
    sketch = make_sketch("Gcirc_D2HD1", 100, 300, seed=0)
    out = sketch(np.ones((3, 100)))
    assert out.shape == (3, 300)
    dense = make_sketch("GaussianDense", 100, 30, seed=0)(np.eye(100))
    assert dense.shape == (100, 30)


@pytest.mark.parametrize("variant", list(Variant))
def test_sketches_are_isotropic(variant):
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((64, 3)))[0]
    M = sketch_isotropy(variant, Q, 32, 300, seed=1)
    assert np.abs(M - np.eye(3)).max() < 0.1


def test_exact_newton_converges_fast():
    p = generate_ar1_problem(200, 10, seed=0, rho=0.5)
    trace = solve(p, SketchConfig(EXACT, gap_tolerance=1e-10, max_iters=15))
    assert trace.status == "converged"
    assert trace.final_gap <= 1e-10
    assert trace.iterations <= 15


@pytest.mark.parametrize("variant", ["HD3HD2HD1", "GToeplitz_D2HD1", "GaussianDense"])
def test_backtracking_loss_strictly_decreases(variant):
    p = generate_ar1_problem(300, 12, seed=1)
    trace = solve(p, SketchConfig(variant, rows=48, gap_tolerance=1e-9), seed=2)
    assert trace.status == "converged"
    assert all(b < a for a, b in zip(trace.losses, trace.losses[1:]))
    assert all(0 < s <= 1 for s in trace.steps[1:])


def test_undamped_increase_is_reported_as_divergence():
    p = generate_ar1_problem(300, 20, seed=0)
    trace = solve(p, SketchConfig("HD3HD2HD1", rows=20, line_search="none"), seed=0)
    assert trace.status == "diverged"
    assert trace.iterations == 0


def test_solve_is_deterministic():
    p = generate_ar1_problem(200, 8, seed=3)
    cfg = SketchConfig("GSkewCirc_D2HD1", rows=32)
    a, b = solve(p, cfg, seed=4), solve(p, cfg, seed=4)
    assert a.losses == b.losses and a.status == b.status


def test_reference_optimum_is_below_sketched_losses():
    p = generate_ar1_problem(200, 8, seed=5)
    f_star = reference_optimum(p)
    trace = solve(p, SketchConfig("HD3HD2HD1", rows=32), seed=0, f_star=f_star)
    assert min(trace.losses) >= f_star - 1e-9


def test_zero_hessian_fails_cleanly():
    p = LogisticProblem(np.zeros((5, 2)), np.ones(5))
    with pytest.raises(StepFailure):
        sketched_step(p, np.zeros(2))


def test_config_validation():
    with pytest.raises(DimensionError):
        SketchConfig("HD3HD2HD1", rows=3).rows_for(5)
    assert SketchConfig("hd3hd2hd1").rows_for(50) == 200
    with pytest.raises(ValueError):
        SketchConfig(line_search="wolfe")
    with pytest.raises(ValueError):
        LogisticProblem(np.ones((2, 2)), np.array([0.0, 1.0]))
    with pytest.raises(DimensionError):
        LogisticProblem(np.ones((2, 2)), np.array([1.0]))
