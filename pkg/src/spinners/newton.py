"""Newton sketch for unconstrained logistic regression.

Each iteration solves ``(B^T B) delta = -grad f(x)`` with ``B = S H^{1/2}``,
where ``H^{1/2} = diag(sqrt(s (1 - s))) A`` is the Hessian square root and
``S`` is a fresh random ``m x n`` sketch scaled so ``E[S^T S] = I``. The
exact variant uses ``S = I``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit

from . import seeding
from .data import ar1
from .errors import DimensionError, StepFailure
from .spinner import SpinnerSpec, Variant, stack
from .transforms import as_real_array, next_power_of_two, pad_to_power_of_two

log = logging.getLogger(__name__)

EXACT = "Exact"

Sketch = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class LogisticProblem:
    A: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(as_real_array(self.A, "A"))
        y = as_real_array(self.y, "y").reshape(-1)
        if A.shape[0] != y.shape[0]:
            raise DimensionError(f"A has {A.shape[0]} rows but y has {y.shape[0]} labels")
        if not np.isin(y, (-1.0, 1.0)).all():
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def _check(self, x) -> np.ndarray:
        x = as_real_array(x, "x").reshape(-1)
        if x.shape[0] != self.d:
            raise DimensionError(f"x has length {x.shape[0]}, problem has d={self.d}")
        return x


def loss(p: LogisticProblem, x) -> float:
    """``sum_i log(1 + exp(-y_i a_i^T x))``, evaluated without overflow."""
    x = p._check(x)
    return float(np.sum(np.logaddexp(0.0, -p.y * (p.A @ x))))


def gradient(p: LogisticProblem, x) -> np.ndarray:
    x = p._check(x)
    margins = p.y * (p.A @ x)
    return p.A.T @ ((expit(margins) - 1.0) * p.y)


def hessian_sqrt(p: LogisticProblem, x) -> np.ndarray:
    """``n x d`` matrix ``B`` with ``B^T B`` equal to the Hessian at ``x``."""
    x = p._check(x)
    s = expit(p.A @ x)
    return np.sqrt(s * (1.0 - s))[:, None] * p.A


def hessian(p: LogisticProblem, x) -> np.ndarray:
    x = p._check(x)
    s = expit(p.A @ x)
    return (p.A * (s * (1.0 - s))[:, None]).T @ p.A


def generate_ar1_problem(n: int, d: int, seed: int, rho: float = 0.99) -> LogisticProblem:
    ds = ar1(n, d, seed, rho)
    return LogisticProblem(ds.rows, ds.labels)


def make_sketch(variant: Variant | str, n: int, m: int, seed: int) -> Sketch:
    """Isotropic ``m x n`` sketch acting on the last axis.

    Structured sketches zero-pad inputs to the next power of two and stack
    blocks when ``m`` exceeds the padded length. All sketches are divided by
    ``sqrt(m)`` so that ``E[S^T S] = I``.
    """
    variant = Variant.parse(variant)
    size = n if variant is Variant.GAUSSIAN_DENSE else next_power_of_two(n)
    rows = min(m, size)
    op = stack(SpinnerSpec(variant, size, rows, seed=seed), m)
    if m == rows:
        op = op.blocks[0]
    norm = 1.0 / math.sqrt(m)

    def sketch(v: np.ndarray) -> np.ndarray:
        if size != n:
            v = pad_to_power_of_two(v, size)
        return norm * op.apply(v)

    return sketch


def sketched_step(p: LogisticProblem, x, sketch: Sketch | None = None) -> np.ndarray:
    """Newton direction from the sketched system; ``sketch=None`` is the exact step."""
    x = p._check(x)
    root = hessian_sqrt(p, x)
    if sketch is None:
        B = root
    else:
        # one fast transform per column of the Hessian root
        B = sketch(root.T).T
        if B.shape[0] < p.d:
            raise DimensionError(f"sketch has {B.shape[0]} rows, need at least d={p.d}")
    return _solve_normal(B.T @ B, -gradient(p, x))


def _solve_normal(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return cho_solve(cho_factor(G), rhs)
    except LinAlgError:
        pass
    ridge = 1e-10 * np.trace(G)
    try:
        return cho_solve(cho_factor(G + ridge * np.eye(G.shape[0])), rhs)
    except LinAlgError:
        raise StepFailure("sketched Hessian is singular even with a ridge; "
                          "increase the number of sketch rows") from None


@dataclass(frozen=True)
class SketchConfig:
    sketch: str = EXACT
    rows: int | None = None
    max_iters: int = 50
    gap_tolerance: float = 1e-10
    line_search: str = "backtracking"
    alpha: float = 0.1
    beta: float = 0.5

    def __post_init__(self):
        if self.sketch != EXACT:
            object.__setattr__(self, "sketch", Variant.parse(self.sketch).value)
        if self.line_search not in ("backtracking", "none"):
            raise ValueError(f"line_search must be 'backtracking' or 'none', got {self.line_search}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")

    def rows_for(self, d: int) -> int:
        """Sketch rows, defaulting to ``4 d``."""
        m = 4 * d if self.rows is None else self.rows
        if m < d:
            raise DimensionError(f"sketch needs m >= d, got m={m}, d={d}")
        return m

    def to_dict(self) -> dict:
        return {"sketch": self.sketch, "rows": self.rows, "max_iters": self.max_iters,
                "gap_tolerance": self.gap_tolerance, "line_search": self.line_search,
                "alpha": self.alpha, "beta": self.beta}


@dataclass
class NewtonTrace:
    iterates: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    f_star: float = float("nan")
    status: str = "running"

    @property
    def iterations(self) -> int:
        return len(self.losses) - 1

    @property
    def final_gap(self) -> float:
        return self.gaps[-1]

    def rows(self) -> list[dict]:
        return [{"iteration": t, "loss": f, "gap": g, "step": s, "seconds": sec}
                for t, (f, g, s, sec) in enumerate(zip(self.losses, self.gaps, self.steps,
                                                       self.seconds))]


def reference_optimum(p: LogisticProblem, max_iters: int = 100) -> float:
    """``f*`` from exact Newton run until the gap proxy ``lambda^2 / 2`` is below 1e-12."""
    x = np.zeros(p.d)
    f = loss(p, x)
    for _ in range(max_iters):
        g = gradient(p, x)
        step = sketched_step(p, x)
        decrement = float(-g @ step) / 2.0
        x, f_new, _ = _backtrack(p, x, f, g, step, 0.1, 0.5)
        if f_new >= f or decrement <= 1e-12:
            f = min(f, f_new)
            break
        f = f_new
    return f


def _backtrack(p, x, f, g, step, alpha, beta):
    slope = float(g @ step)
    s = 1.0
    while s > 1e-12:
        candidate = x + s * step
        f_new = loss(p, candidate)
        if f_new <= f + alpha * s * slope:
            return candidate, f_new, s
        s *= beta
    return x, f, 0.0


def solve(p: LogisticProblem, cfg: SketchConfig, seed: int = 0,
          f_star: float | None = None) -> NewtonTrace:
    """Run (sketched) Newton from ``x = 0``.

    Iteration ``t`` draws its sketch from ``derive_seed(seed, t)``. Stops
    once ``f(x) - f*`` reaches ``cfg.gap_tolerance``, after
    ``cfg.max_iters`` steps, when the line search cannot decrease the loss,
    or (without line search) when a full step increases it.
    """
    if f_star is None:
        f_star = reference_optimum(p)
    m = None if cfg.sketch == EXACT else cfg.rows_for(p.d)
    trace = NewtonTrace(f_star=f_star)
    x = np.zeros(p.d)
    f = loss(p, x)
    trace.iterates.append(x.copy())
    trace.losses.append(f)
    trace.gaps.append(f - f_star)
    trace.steps.append(0.0)
    trace.seconds.append(0.0)
    for t in range(cfg.max_iters):
        if f - f_star <= cfg.gap_tolerance:
            trace.status = "converged"
            return trace
        start = time.perf_counter()
        sketch = None if m is None else make_sketch(cfg.sketch, p.n, m, seeding.derive_seed(seed, t))
        g = gradient(p, x)
        step = sketched_step(p, x, sketch)
        if cfg.line_search == "backtracking":
            x_new, f_new, s = _backtrack(p, x, f, g, step, cfg.alpha, cfg.beta)
            if s == 0.0:
                trace.status = "stalled"
                log.info("line search could not decrease the loss at iteration %d", t)
                return trace
        else:
            x_new, s = x + step, 1.0
            f_new = loss(p, x_new)
            if f_new > f:
                trace.status = "diverged"
                log.warning("full Newton step increased the loss at iteration %d "
                            "(%.17g -> %.17g)", t, f, f_new)
                return trace
        elapsed = time.perf_counter() - start
        x, f = x_new, f_new
        trace.iterates.append(x.copy())
        trace.losses.append(f)
        trace.gaps.append(f - f_star)
        trace.steps.append(s)
        trace.seconds.append(elapsed)
    trace.status = "converged" if f - f_star <= cfg.gap_tolerance else "max_iters"
    return trace


def sketch_isotropy(variant: Variant | str, basis, m: int, sketches: int, seed: int) -> np.ndarray:
    """Average of ``(S Q)^T (S Q)`` over fresh sketches, ``Q`` with orthonormal columns.

    Isotropic sketches give approximately the identity.
    """
    Q = np.atleast_2d(as_real_array(basis, "basis"))
    n, d = Q.shape
    acc = np.zeros((d, d))
    for t in range(sketches):
        B = make_sketch(variant, n, m, seeding.derive_seed(seed, t))(Q.T).T
        acc += B.T @ B
    return acc / sketches
