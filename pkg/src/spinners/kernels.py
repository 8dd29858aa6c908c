"""Random feature maps for the Gaussian and angular kernels.

Gaussian kernel features are ``(cos z, sin z) / sqrt(d')`` with
``z = A x / sigma``; their dot product is ``mean_k cos((A (x - y))_k / sigma)``,
an unbiased estimate of ``exp(-||x - y||^2 / (2 sigma^2))`` when the rows of
``A`` are standard Gaussian. Angular features are the signs of ``A x`` and
estimate ``1 - theta / pi`` through the Hamming distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import DimensionError, DomainError
from .spinner import SpinnerSpec, StackedSpinner, Variant, stack
from .transforms import as_real_array

# Bandwidths used for the G50C and USPST dataset profiles.
SIGMA_PROFILES = {"g50c": 17.4734, "uspst": 9.4338}


@dataclass(frozen=True)
class Kernel:
    kind: Literal["gaussian", "angular"]
    sigma: float | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.sigma is None or not self.sigma > 0 or not math.isfinite(self.sigma):
                raise ValueError(f"gaussian kernel needs a positive finite sigma, got {self.sigma}")
            object.__setattr__(self, "sigma", float(self.sigma))
        elif self.kind == "angular":
            object.__setattr__(self, "sigma", None)
        else:
            raise ValueError(f"unknown kernel {self.kind!r}")

    @classmethod
    def gaussian(cls, sigma: float) -> "Kernel":
        return cls("gaussian", sigma)

    @classmethod
    def angular(cls) -> "Kernel":
        return cls("angular")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


@dataclass(frozen=True, eq=False)
class FeatureMap:
    projector: StackedSpinner
    kernel: Kernel

    @property
    def n_features(self) -> int:
        """``d'``, the number of projections."""
        return self.projector.k

    def embed(self, x) -> np.ndarray:
        return embed(self, x)


def feature_map(variant: Variant | str, n: int, n_features: int, kernel: Kernel, seed: int,
                block_rows: int | None = None) -> FeatureMap:
    """Stack ``n_features`` projection rows of ``variant`` over inputs of length ``n``.

    Blocks have ``min(n, n_features)`` rows unless ``block_rows`` is given.
    """
    if n_features < 1:
        raise DimensionError(f"need at least one feature, got {n_features}")
    rows = min(n, n_features) if block_rows is None else block_rows
    projector = stack(SpinnerSpec(variant, n, rows, seed=seed), n_features)
    return FeatureMap(projector, kernel)


def _signs(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0, -1.0)


def _check_nonzero(x: np.ndarray) -> None:
    if (np.abs(x).max(axis=-1) == 0).any():
        raise DomainError("angular kernel is undefined for the zero vector")


def embed(fm: FeatureMap, x) -> np.ndarray:
    x = as_real_array(x)
    if fm.kernel.kind == "angular":
        _check_nonzero(x)
        return _signs(fm.projector.apply(x))
    z = fm.projector.apply(x) / fm.kernel.sigma
    return np.concatenate([np.cos(z), np.sin(z)], axis=-1) / math.sqrt(fm.n_features)


def gram_exact(X, kernel: Kernel) -> np.ndarray:
    """Exact Gram matrix; the diagonal is exactly one."""
    X = np.atleast_2d(as_real_array(X, "X"))
    if kernel.kind == "gaussian":
        sq = squareform(pdist(X, "sqeuclidean"))
        return np.exp(-sq / (2.0 * kernel.sigma ** 2))
    _check_nonzero(X)
    U = X / np.linalg.norm(X, axis=1, keepdims=True)
    # theta = 2 atan2(|u - v|, |u + v|) stays accurate near 0 and pi, where
    # arccos of a rounded cosine does not
    diff = squareform(pdist(U))
    summ = cdist(U, -U)
    theta = 2.0 * np.arctan2(diff, summ)
    K = 1.0 - theta / np.pi
    np.fill_diagonal(K, 1.0)
    return K


def gram_approx(fm: FeatureMap, X) -> np.ndarray:
    """Approximate Gram matrix from the feature map; exactly symmetric."""
    X = np.atleast_2d(as_real_array(X, "X"))
    F = embed(fm, X)
    if fm.kernel.kind == "angular":
        # signs agree on (d' + s_i.s_j) / 2 coordinates
        hamming = (fm.n_features - F @ F.T) / 2.0
        K = 1.0 - hamming / fm.n_features
    else:
        K = F @ F.T
    return (K + K.T) / 2.0


def gram_error(K, K_approx) -> float:
    """``||K - K_approx||_F / ||K||_F``."""
    K = np.asarray(K, dtype=np.float64)
    K_approx = np.asarray(K_approx, dtype=np.float64)
    if K.shape != K_approx.shape:
        raise DimensionError(f"shape mismatch {K.shape} vs {K_approx.shape}")
    denom = np.linalg.norm(K)
    if denom == 0:
        raise DomainError("exact Gram matrix is zero")
    return float(np.linalg.norm(K - K_approx) / denom)


def median_sigma(X) -> float:
    """Median pairwise distance divided by sqrt(2), a common bandwidth heuristic."""
    X = np.atleast_2d(as_real_array(X, "X"))
    return float(np.median(pdist(X)) / math.sqrt(2.0))


def error_curve(X, variant: Variant | str, kernel: Kernel, feature_counts, seeds,
                K: np.ndarray | None = None) -> list[dict]:
    """Mean and standard deviation of :func:`gram_error` per feature count.

    One feature map is drawn per seed, so duplicated feature counts give
    identical rows.
    """
    X = np.atleast_2d(as_real_array(X, "X"))
    if K is None:
        K = gram_exact(X, kernel)
    rows = []
    for count in feature_counts:
        errs = np.array([
            gram_error(K, gram_approx(feature_map(variant, X.shape[1], count, kernel, s), X))
            for s in seeds
        ])
        rows.append({
            "variant": Variant.parse(variant).value,
            "kernel": kernel.kind,
            "features": int(count),
            "mean_error": float(errs.mean()),
            "sd_error": float(errs.std(ddof=1)) if len(errs) > 1 else 0.0,
            "seeds": len(errs),
        })
    return rows
