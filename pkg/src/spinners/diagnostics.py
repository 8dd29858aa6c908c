"""Empirical checks of spinner behaviour and the matvec benchmark.

Benchmark baseline: a naive double-loop dense matvec compiled with numba,
not an optimized BLAS, so measured speedups show the O(n log n) vs O(n^2)
trend and are not comparable in magnitude with BLAS-backed numbers.
"""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit
from scipy import stats

from . import seeding
from .errors import DimensionError
from .spinner import SpinnerSpec, Variant, apply_m3, build, draw_m3_params, rademacher
from .transforms import as_real_array, fwht_normalized, is_power_of_two


@dataclass(frozen=True)
class BalancednessReport:
    n: int
    delta: float
    trials: int
    seed: int
    exceedances: int
    empirical_rate: float
    theory_bound: float


def balancedness_rate(n: int, delta: float | None = None, trials: int = 10_000, seed: int = 0,
                      batch: int = 256) -> BalancednessReport:
    """Rate at which ``||H D1 x||_inf > delta / sqrt(n)`` for a fresh D1 and unit x per trial.

    ``delta`` defaults to ``ln n``; the bound is ``min(1, 2 n exp(-delta^2 / 8))``.
    """
    if not is_power_of_two(n):
        raise DimensionError(f"n must be a power of two, got {n}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    delta = math.log(n) if delta is None else float(delta)
    gen = seeding.rng(seed)
    threshold = delta / math.sqrt(n)
    hits = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        x = gen.standard_normal((b, n))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        d1 = rademacher(gen, (b, n))
        hits += int((np.abs(fwht_normalized(d1 * x)).max(axis=1) > threshold).sum())
        done += b
    bound = min(1.0, 2.0 * n * math.exp(-delta * delta / 8.0)) if math.isfinite(delta) else 0.0
    return BalancednessReport(n, delta, trials, seed, hits, hits / trials, bound)


@dataclass(frozen=True, eq=False)
class CovarianceReport:
    variant: str
    n: int
    m: int
    d: int
    resamples: int
    seed: int
    covariance: np.ndarray
    max_off_diagonal: float
    max_diagonal_deviation: float

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "covariance"}
        out["covariance"] = self.covariance.tolist()
        return out


def projection_covariance(variant: Variant | str, n: int, m: int, basis, resamples: int,
                          seed: int = 0, batch: int = 1000) -> CovarianceReport:
    """Second-moment matrix of the stacked projections ``q' = (A x_1, ..., A x_d)``.

    ``M1`` and ``M2`` are fixed by ``seed``; only the ``M3`` parameters (the
    whole matrix, for the Gaussian baseline) are redrawn for each resample.
    The projections have zero mean by construction, so the covariance is
    estimated about zero.
    """
    variant = Variant.parse(variant)
    basis = np.atleast_2d(as_real_array(basis, "basis"))
    d = basis.shape[0]
    if basis.shape[1] != n:
        raise DimensionError(f"basis vectors have length {basis.shape[1]}, expected {n}")
    if m * d > n:
        raise DimensionError(f"m*d = {m * d} exceeds n = {n}")
    if resamples < 2:
        raise ValueError("need at least two resamples")
    sp = build(SpinnerSpec(variant, n, m, seed=seed))
    gen = seeding.rng(seed, 1)
    acc = np.zeros((m * d, m * d))
    v = None if variant is Variant.GAUSSIAN_DENSE else sp.mix(basis)
    done = 0
    while done < resamples:
        b = min(batch, resamples - done)
        if v is None:
            G = gen.standard_normal((b, m, n))
            q = np.einsum("bmn,dn->bdm", G, basis)
        else:
            params = draw_m3_params(variant, n, gen, (b,))
            q = sp.spec.scale * apply_m3(variant, params[:, None, :], v[None, :, :])[..., :m]
        q = q.reshape(b, m * d)
        acc += q.T @ q
        done += b
    cov = acc / resamples
    cov = (cov + cov.T) / 2.0
    off = cov - np.diag(np.diag(cov))
    return CovarianceReport(variant.value, n, m, d, resamples, seed, cov,
                            float(np.abs(off).max()) if m * d > 1 else 0.0,
                            float(np.abs(np.diag(cov) - 1.0).max()))


def ks_distance(samples_a, samples_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.asarray(samples_a, dtype=np.float64).reshape(-1)
    b = np.asarray(samples_b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    return float(stats.ks_2samp(a, b).statistic)


def projection_samples(variant: Variant | str, x, samples: int, seed: int = 0) -> np.ndarray:
    """First output coordinate of ``samples`` independently seeded spinners applied to ``x``."""
    x = as_real_array(x).reshape(-1)
    return np.array([
        build(SpinnerSpec(variant, x.shape[0], 1, seed=seeding.derive_seed(seed, s))).apply(x)[0]
        for s in range(samples)
    ])


@njit(cache=True)
def _naive_matvec(rows, n_out, x):
    # logical matrix row i is rows[i % len(rows)]
    stored, n = rows.shape
    out = np.empty(n_out)
    for i in range(n_out):
        r = rows[i % stored]
        acc = 0.0
        for j in range(n):
            acc += r[j] * x[j]
        out[i] = acc
    return out


class DenseBaseline:
    """Naive ``n_out x n`` dense matvec.

    Matrices larger than ``memory_bytes`` store only a block of Gaussian
    rows and reuse it cyclically; the loop still performs every one of the
    ``n_out * n`` multiply-adds, so timing matches a fully stored matrix
    that does not fit in memory.
    """

    def __init__(self, n_out: int, n: int, seed: int, memory_bytes: int = 512 * 2 ** 20):
        stored = max(1, min(n_out, memory_bytes // (8 * n)))
        self.rows = seeding.rng(seed).standard_normal((stored, n))
        self.n_out = n_out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _naive_matvec(self.rows, self.n_out, x)


@dataclass(frozen=True)
class BenchRow:
    variant: str
    n: int
    reps: int
    seed: int
    structured_ns: float
    dense_ns: float
    speedup: float


def _median_ns(fn, x, reps: int) -> float:
    fn(x)
    fn(x)
    times = []
    for _ in range(reps):
        start = time.perf_counter_ns()
        fn(x)
        times.append(time.perf_counter_ns() - start)
    return float(max(statistics.median(times), 1))


def bench_matvec(variant: Variant | str, sizes, reps: int = 20, seed: int = 0) -> list[BenchRow]:
    """Median single-call time of the variant's matvec against the naive dense baseline.

    Construction happens before timing. The GaussianDense variant is timed
    through the same naive kernel, which makes it a dense-vs-dense control.
    """
    variant = Variant.parse(variant)
    if reps < 10:
        raise ValueError("reps must be at least 10")
    rows = []
    for n in sizes:
        n = int(n)
        if not is_power_of_two(n):
            raise DimensionError(f"benchmark sizes must be powers of two, got {n}")
        x = seeding.rng(seed, n).standard_normal(n)
        if variant is Variant.GAUSSIAN_DENSE:
            op = DenseBaseline(n, n, seeding.derive_seed(seed, n, 1))
        else:
            op = build(SpinnerSpec(variant, n, seed=seeding.derive_seed(seed, n, 1))).apply
        baseline = DenseBaseline(n, n, seeding.derive_seed(seed, n, 2))
        s_ns = _median_ns(op, x, reps)
        d_ns = _median_ns(baseline, x, reps)
        rows.append(BenchRow(variant.value, n, reps, seed, s_ns, d_ns, d_ns / s_ns))
    return rows


def loglog_slope(sizes, times) -> float:
    """Least-squares slope of ``log(time)`` against ``log(n)``."""
    return float(np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)),
                            1)[0])
