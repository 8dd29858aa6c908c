"""Cross-polytope LSH with spinner rotations.

The hash of ``x`` is the nearest signed canonical direction ``+/- e_i`` to the
projection ``y = A x``, i.e. the index of ``max |y_i|`` together with the sign
of that coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import seeding
from .errors import DimensionError, DomainError
from .spinner import SpinnerSpec, StackedSpinner, StructuredSpinner, Variant, build, stack
from .transforms import as_real_array

DEFAULT_BUCKETS = 25
MAX_DISTANCE = 2.0


class SignedIndex(NamedTuple):
    index: int
    sign: int


@dataclass(frozen=True, eq=False)
class CrossPolytopeHasher:
    projector: StructuredSpinner | StackedSpinner

    def codes(self, X) -> np.ndarray:
        """Integer code ``2 * index + (sign < 0)`` for each row of ``X``."""
        X = as_real_array(X)
        if (np.abs(X).max(axis=-1) == 0).any():
            raise DomainError("cannot hash the zero vector")
        y = self.projector.apply(X)
        idx = np.argmax(np.abs(y), axis=-1)
        negative = np.take_along_axis(y, idx[..., None], axis=-1)[..., 0] < 0
        return 2 * idx + negative

    def hash(self, x) -> SignedIndex:
        code = int(self.codes(as_real_array(x).reshape(-1)))
        return SignedIndex(code // 2, -1 if code % 2 else 1)


HasherFactory = Callable[[int], CrossPolytopeHasher]


def hasher_factory(variant: Variant | str, n: int, rows: int) -> HasherFactory:
    """Seed -> hasher projecting onto ``rows`` coordinates (stacked if rows > n)."""
    variant = Variant.parse(variant)

    def make(seed: int) -> CrossPolytopeHasher:
        if rows <= n:
            return CrossPolytopeHasher(build(SpinnerSpec(variant, n, rows, seed=seed)))
        return CrossPolytopeHasher(stack(SpinnerSpec(variant, n, n, seed=seed), rows))

    return make


def hash(h: CrossPolytopeHasher, x) -> SignedIndex:  # noqa: A001 - mirrors the operation name
    return h.hash(x)


@dataclass(frozen=True, eq=False)
class CollisionCurve:
    bucket_edges: np.ndarray
    probabilities: np.ndarray
    counts: np.ndarray
    collisions: np.ndarray
    trials: int

    @property
    def empty(self) -> np.ndarray:
        """Buckets without pairs; their probability is NaN."""
        return self.counts == 0

    def rows(self) -> list[dict]:
        return [
            {"bucket_lo": float(lo), "bucket_hi": float(hi), "pairs": int(c),
             "collisions": int(k), "probability": float(p)}
            for lo, hi, c, k, p in zip(self.bucket_edges[:-1], self.bucket_edges[1:],
                                       self.counts, self.collisions, self.probabilities)
        ]


def pair_distances(X, Y) -> np.ndarray:
    """Euclidean distance between the unit-normalized rows of ``X`` and ``Y``."""
    X = np.atleast_2d(as_real_array(X, "X"))
    Y = np.atleast_2d(as_real_array(Y, "Y"))
    if X.shape != Y.shape:
        raise DimensionError(f"pair arrays differ in shape: {X.shape} vs {Y.shape}")
    nx = np.linalg.norm(X, axis=1, keepdims=True)
    ny = np.linalg.norm(Y, axis=1, keepdims=True)
    if (nx == 0).any() or (ny == 0).any():
        raise DomainError("pairs must not contain zero vectors")
    return np.linalg.norm(X / nx - Y / ny, axis=1)


def bucket_edges(buckets: int = DEFAULT_BUCKETS) -> np.ndarray:
    return np.linspace(0.0, MAX_DISTANCE, buckets + 1)


def collision_curve(X, Y, factory: HasherFactory, trials: int, seed: int = 0,
                    buckets: int = DEFAULT_BUCKETS) -> CollisionCurve:
    """Fraction of (pair, trial) events where ``x`` and ``y`` hash equally, per distance bucket.

    Trial ``t`` draws its hasher from ``derive_seed(seed, t)``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    X = np.atleast_2d(as_real_array(X, "X"))
    Y = np.atleast_2d(as_real_array(Y, "Y"))
    edges = bucket_edges(buckets)
    which = np.minimum((pair_distances(X, Y) / MAX_DISTANCE * buckets).astype(int), buckets - 1)
    counts = np.bincount(which, minlength=buckets)
    hits = np.zeros(buckets, dtype=np.int64)
    for t in range(trials):
        h = factory(seeding.derive_seed(seed, t))
        same = h.codes(X) == h.codes(Y)
        hits += np.bincount(which, weights=same, minlength=buckets).astype(np.int64)
    total = counts * trials
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(total > 0, hits / np.maximum(total, 1), np.nan)
    return CollisionCurve(edges, probs, counts, hits, trials)


@dataclass(frozen=True, eq=False)
class FamilyComparison:
    sup_difference: float
    differences: np.ndarray
    curve_a: CollisionCurve
    curve_b: CollisionCurve

    def rows(self) -> list[dict]:
        return [
            {"bucket_lo": float(lo), "bucket_hi": float(hi), "p_a": float(a), "p_b": float(b),
             "difference": float(dd)}
            for lo, hi, a, b, dd in zip(self.curve_a.bucket_edges[:-1],
                                        self.curve_a.bucket_edges[1:],
                                        self.curve_a.probabilities, self.curve_b.probabilities,
                                        self.differences)
        ]


def compare_curves(a: CollisionCurve, b: CollisionCurve) -> FamilyComparison:
    """Per-bucket ``p_a - p_b`` and the sup norm over buckets populated in both."""
    if a.bucket_edges.shape != b.bucket_edges.shape or not np.array_equal(a.bucket_edges,
                                                                          b.bucket_edges):
        raise DimensionError("collision curves use different buckets")
    diff = a.probabilities - b.probabilities
    finite = np.isfinite(diff)
    sup = float(np.abs(diff[finite]).max()) if finite.any() else float("nan")
    return FamilyComparison(sup, diff, a, b)


def compare_families(X, Y, factory_a: HasherFactory, factory_b: HasherFactory, trials: int,
                     seed_a: int = 0, seed_b: int | None = None,
                     buckets: int = DEFAULT_BUCKETS) -> FamilyComparison:
    seed_b = seed_a if seed_b is None else seed_b
    return compare_curves(collision_curve(X, Y, factory_a, trials, seed_a, buckets),
                          collision_curve(X, Y, factory_b, trials, seed_b, buckets))


def max_rise(curve: CollisionCurve) -> float:
    """Largest increase of the probability between consecutive populated buckets."""
    p = curve.probabilities[~curve.empty]
    return float(np.max(np.diff(p), initial=0.0))
