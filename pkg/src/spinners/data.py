"""Dataset ingestion and synthetic data generators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky, toeplitz

from . import seeding
from .errors import DimensionError, NonFiniteError, SpinnerError


class CsvParseError(SpinnerError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyFileError(CsvParseError):
    pass


class RaggedRowError(CsvParseError):
    pass


class NonNumericError(CsvParseError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    rows: np.ndarray
    labels: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        if rows.ndim != 2 or rows.shape[1] == 0:
            raise DimensionError(f"dataset rows must form a non-empty 2-D array, got {rows.shape}")
        if not np.isfinite(rows).all():
            raise NonFiniteError("dataset contains NaN or infinite entries")
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.float64)
            if labels.shape != (rows.shape[0],):
                raise DimensionError("one label per row required")
            if not np.isin(labels, (-1.0, 1.0)).all():
                raise ValueError("labels must be -1 or +1")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


def load_csv(path, label_column: bool = False) -> Dataset:
    """Read comma-separated floats, one sample per line.

    With ``label_column`` the last column is an integer label in {-1, +1}
    (0 is accepted and mapped to -1). Blank lines are skipped.
    """
    path = Path(path)
    rows: list[list[float]] = []
    labels: list[float] = []
    width = None
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise NonNumericError(f"non-numeric cell {bad!r}", lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise NonNumericError("non-finite value", lineno)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise RaggedRowError(f"expected {width} columns, found {len(values)}", lineno)
            if label_column:
                if len(values) < 2:
                    raise RaggedRowError("label column leaves no features", lineno)
                label = values.pop()
                if label not in (-1.0, 0.0, 1.0):
                    raise NonNumericError(f"label {label} is not -1, 0 or +1", lineno)
                labels.append(1.0 if label == 1.0 else -1.0)
            rows.append(values)
    if not rows:
        raise EmptyFileError(f"{path} contains no data")
    return Dataset(np.array(rows), np.array(labels) if label_column else None,
                   {"source": "csv", "path": str(path), "label_column": label_column})


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_csv(ds: Dataset, path) -> None:
    """Write rows (and labels as a final column) with round-trip precision."""
    table = ds.rows if ds.labels is None else np.column_stack([ds.rows, ds.labels])
    with Path(path).open("w") as fh:
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _unit(gen: np.random.Generator, count: int, n: int) -> np.ndarray:
    z = gen.standard_normal((count, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def unit_sphere_pairs(angles, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random unit vector pairs ``(x_i, y_i)`` at the requested angles."""
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if n < 2:
        raise DimensionError("pairs at arbitrary angles need n >= 2")
    if ((angles < 0) | (angles > np.pi)).any():
        raise ValueError("angles must lie in [0, pi]")
    gen = seeding.rng(seed)
    x = _unit(gen, len(angles), n)
    z = gen.standard_normal((len(angles), n))
    z -= np.sum(z * x, axis=1, keepdims=True) * x
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    y = np.cos(angles)[:, None] * x + np.sin(angles)[:, None] * z
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    return x, y


def distance_pairs(count: int, n: int, seed: int, max_distance: float = 2.0,
                   distance: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Unit pairs with Euclidean distance uniform on ``[0, max_distance]``.

    A fixed ``distance`` puts every pair at that distance instead.
    """
    if count < 1:
        raise ValueError("count must be positive")
    gen = seeding.rng(seed, 0)
    if distance is None:
        dist = gen.uniform(0.0, max_distance, count)
    else:
        dist = np.full(count, float(distance))
    if ((dist < 0) | (dist > 2)).any():
        raise ValueError("distances between unit vectors lie in [0, 2]")
    return unit_sphere_pairs(2.0 * np.arcsin(dist / 2.0), n, seed)


def gaussian_blob(dim: int, count: int, seed: int, clusters: int = 2,
                  separation: float = 1.0) -> Dataset:
    """Points from ``clusters`` unit-covariance Gaussians with random centers.

    Centers are drawn from ``N(0, separation^2 I)``; the label is the
    cluster parity mapped to +/-1.
    """
    if dim < 1 or count < 1 or clusters < 1:
        raise ValueError("dim, count and clusters must be positive")
    gen = seeding.rng(seed)
    centers = separation * gen.standard_normal((clusters, dim))
    which = gen.integers(0, clusters, count)
    rows = centers[which] + gen.standard_normal((count, dim))
    return Dataset(rows, np.where(which % 2 == 0, 1.0, -1.0),
                   {"source": "synthetic", "kind": "gaussian_blob", "dim": dim, "count": count,
                    "clusters": clusters, "separation": separation, "seed": seed})


def ar1_covariance(d: int, rho: float = 0.99) -> np.ndarray:
    return toeplitz(rho ** np.arange(d))


def ar1(n: int, d: int, seed: int, rho: float = 0.99) -> Dataset:
    """Rows ``N(0, Sigma)`` with ``Sigma[i, j] = rho^|i - j|`` and uniform +/-1 labels."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    gen = seeding.rng(seed)
    chol = cholesky(ar1_covariance(d, rho), lower=True)
    rows = gen.standard_normal((n, d)) @ chol.T
    labels = np.where(gen.integers(0, 2, n) == 1, 1.0, -1.0)
    return Dataset(rows, labels, {"source": "synthetic", "kind": "ar1", "n": n, "d": d,
                                  "rho": rho, "seed": seed})


def synth(kind: str, seed: int, **params) -> Dataset:
    """Dispatch to a generator by name.

    ``unit_sphere_pairs`` returns the pairs interleaved: rows ``2i`` and
    ``2i + 1`` form pair ``i``.
    """
    if kind == "unit_sphere_pairs":
        x, y = unit_sphere_pairs(params["angles"], params["n"], seed)
        rows = np.empty((2 * len(x), x.shape[1]))
        rows[0::2], rows[1::2] = x, y
        return Dataset(rows, None, {"source": "synthetic", "kind": kind, "seed": seed,
                                    "angles": list(map(float, np.atleast_1d(params["angles"]))),
                                    "n": params["n"]})
    if kind == "gaussian_blob":
        return gaussian_blob(params["dim"], params["count"], seed,
                             params.get("clusters", 2), params.get("separation", 1.0))
    if kind == "ar1":
        return ar1(params["n"], params["d"], seed, params.get("rho", 0.99))
    raise ValueError(f"unknown synthetic kind {kind!r}")
