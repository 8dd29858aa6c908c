"""Fast structured matrix-vector products.

All transforms act along the last axis, so a ``(batch, n)`` array is
transformed row by row in one call. Inputs are validated (finite, right
length) before any work; outputs are fresh arrays and inputs are never
mutated.

Circulant convention: row ``i`` of ``C(r)`` is ``r`` cyclically shifted
right by ``i``, i.e. ``C[i, j] = r[(j - i) % n]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from numba import njit

from .errors import DimensionError, NonFiniteError

CirculantKind = Literal["circulant", "toeplitz", "skew_circulant"]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    if n < 1:
        raise DimensionError(f"length must be positive, got {n}")
    return 1 << (n - 1).bit_length()


def as_real_array(x, name: str = "x") -> np.ndarray:
    """``x`` as a float64 array, rejecting NaN/Inf and empty trailing axes."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise DimensionError(f"{name} must be at least one-dimensional")
    if arr.shape[-1] == 0:
        raise DimensionError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{name} contains NaN or infinite entries")
    return arr


def pad_to_power_of_two(x, size: int | None = None) -> np.ndarray:
    """Zero-pad the last axis to ``size`` (default: next power of two)."""
    x = as_real_array(x)
    n = x.shape[-1]
    target = next_power_of_two(n) if size is None else size
    if target < n:
        raise DimensionError(f"cannot pad length {n} down to {target}")
    if target == n:
        return x
    out = np.zeros(x.shape[:-1] + (target,))
    out[..., :n] = x
    return out


def fwht_normalized(x) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform ``H x`` (Sylvester ordering).

    ``H`` is symmetric with ``H @ H = I``, so the transform is its own
    inverse. Runs the radix-2 butterfly in place on a private copy.
    """
    x = as_real_array(x)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise DimensionError(f"Hadamard transform needs a power-of-two length, got {n}")
    y = np.array(x, dtype=np.float64, order="C", copy=True)
    _butterfly(y.reshape(-1, n))
    y *= 1.0 / math.sqrt(n)
    return y


@njit(cache=True)
def _butterfly(flat):
    batch, n = flat.shape
    for row in range(batch):
        v = flat[row]
        h = 1
        while h < n:
            for start in range(0, n, 2 * h):
                for j in range(start, start + h):
                    a = v[j]
                    b = v[j + h]
                    v[j] = a + b
                    v[j + h] = a - b
            h *= 2


def diag_matvec(d, x) -> np.ndarray:
    d = as_real_array(d, "d")
    x = as_real_array(x)
    if d.shape[-1] != x.shape[-1]:
        raise DimensionError(f"diagonal has length {d.shape[-1]}, vector has {x.shape[-1]}")
    return d * x


@dataclass(frozen=True, eq=False)
class CirculantSpec:
    """Generator of a circulant, Toeplitz or skew-circulant matrix.

    ``first_row`` is the generating vector ``r``. Toeplitz matrices also
    need ``first_col``; its entry 0 must equal ``first_row[0]``.
    """

    first_row: np.ndarray
    kind: CirculantKind = "circulant"
    first_col: np.ndarray | None = None

    def __post_init__(self):
        row = as_real_array(self.first_row, "first_row")
        if row.ndim != 1:
            raise DimensionError("first_row must be one-dimensional")
        row = _frozen(row)
        object.__setattr__(self, "first_row", row)
        if self.kind not in ("circulant", "toeplitz", "skew_circulant"):
            raise ValueError(f"unknown circulant kind {self.kind!r}")
        if self.kind == "toeplitz":
            if self.first_col is None:
                raise DimensionError("toeplitz spec needs first_col")
            col = as_real_array(self.first_col, "first_col")
            if col.shape != row.shape:
                raise DimensionError(
                    f"first_col has shape {col.shape}, first_row has {row.shape}")
            if col[0] != row[0]:
                raise DimensionError(
                    f"inconsistent corner entry: first_col[0]={col[0]} != first_row[0]={row[0]}")
            object.__setattr__(self, "first_col", _frozen(col))
        elif self.first_col is not None:
            raise DimensionError(f"first_col is only meaningful for toeplitz, not {self.kind}")

    @property
    def n(self) -> int:
        return self.first_row.shape[0]

    @cached_property
    def spectrum(self) -> np.ndarray:
        """Precomputed FFT of the generator (kind specific, internal)."""
        if self.kind == "circulant":
            return _circulant_spectrum(self.first_row)
        if self.kind == "skew_circulant":
            return _skew_spectrum(self.first_row)
        return _toeplitz_spectrum(self.first_col, self.first_row)

    def to_dense(self) -> np.ndarray:
        n = self.n
        i, j = np.indices((n, n))
        if self.kind == "circulant":
            return self.first_row[(j - i) % n].copy()
        if self.kind == "skew_circulant":
            return np.where(j >= i, 1.0, -1.0) * self.first_row[(j - i) % n]
        return np.where(i >= j, self.first_col[np.abs(i - j)], self.first_row[np.abs(j - i)])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _check_length(spec: CirculantSpec, x: np.ndarray) -> None:
    if x.shape[-1] != spec.n:
        raise DimensionError(f"vector has length {x.shape[-1]}, matrix is {spec.n}x{spec.n}")


def _check_kind(spec: CirculantSpec, kind: str) -> None:
    if spec.kind != kind:
        raise ValueError(f"expected a {kind} spec, got {spec.kind}")


# C[i, j] = r[(j - i) % n] equals the standard circulant with first column
# c[k] = r[-k % n], whose eigenvalues are conj(fft(r)) for real r.
def _circulant_spectrum(r: np.ndarray) -> np.ndarray:
    return np.conj(np.fft.rfft(r, axis=-1))


def _circulant_apply(spectrum: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    return np.fft.irfft(spectrum * np.fft.rfft(x, axis=-1), n=n, axis=-1)


def _skew_twiddle(n: int) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(n) / n)


# S = T^-1 C(r') T with T = diag(theta^j), theta = exp(i pi / n) and
# r'[k] = r[k] theta^-k; the complex circulant needs a full FFT.
def _skew_spectrum(r: np.ndarray) -> np.ndarray:
    n = r.shape[-1]
    twiddled = r * np.conj(_skew_twiddle(n))
    return np.conj(np.fft.fft(np.conj(twiddled), axis=-1))


def _skew_apply(spectrum: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    tw = _skew_twiddle(n)
    y = np.fft.ifft(spectrum * np.fft.fft(x * tw, axis=-1), axis=-1)
    return (y * np.conj(tw)).real


def _toeplitz_embedding(first_col: np.ndarray, first_row: np.ndarray) -> np.ndarray:
    """First row of the circulant of size 2 * next_pow2(n) embedding T."""
    n = first_col.shape[-1]
    size = 2 * next_power_of_two(n)
    # standard circulant first column: t_0..t_{n-1}, zeros, t_{-(n-1)}..t_{-1}
    col = np.zeros(first_col.shape[:-1] + (size,))
    col[..., :n] = first_col
    if n > 1:
        col[..., size - n + 1:] = first_row[..., :0:-1]
    return np.roll(col[..., ::-1], 1, axis=-1)


def _toeplitz_spectrum(first_col: np.ndarray, first_row: np.ndarray) -> np.ndarray:
    return _circulant_spectrum(_toeplitz_embedding(first_col, first_row))


def _toeplitz_apply(spectrum: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size = 2 * (spectrum.shape[-1] - 1)
    padded = pad_to_power_of_two(x, size)
    return _circulant_apply(spectrum, padded)[..., :n]


def circulant_matvec(spec: CirculantSpec, x) -> np.ndarray:
    _check_kind(spec, "circulant")
    x = as_real_array(x)
    _check_length(spec, x)
    return _circulant_apply(spec.spectrum, x)


def toeplitz_matvec(spec: CirculantSpec, x) -> np.ndarray:
    """``T x`` with ``T[i, j] = first_col[i - j]`` (i >= j), ``first_row[j - i]`` otherwise.

    The product is taken through a zero-padded circulant of size
    ``2 * next_power_of_two(n)``.
    """
    _check_kind(spec, "toeplitz")
    x = as_real_array(x)
    _check_length(spec, x)
    return _toeplitz_apply(spec.spectrum, x)


def skew_circulant_matvec(spec: CirculantSpec, x) -> np.ndarray:
    """Negacyclic product: ``S[i, j] = r[j - i]`` for j >= i, ``-r[n + j - i]`` below."""
    _check_kind(spec, "skew_circulant")
    x = as_real_array(x)
    _check_length(spec, x)
    return _skew_apply(spec.spectrum, x)


def structured_matvec(spec: CirculantSpec, x) -> np.ndarray:
    """Dispatch on ``spec.kind``."""
    if spec.kind == "circulant":
        return circulant_matvec(spec, x)
    if spec.kind == "toeplitz":
        return toeplitz_matvec(spec, x)
    return skew_circulant_matvec(spec, x)
