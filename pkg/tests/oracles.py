"""Independent dense reference implementations used by the tests.

Nothing here calls into the package's fast paths: matrices are built
entry by entry from their definitions.
"""
import math

import numpy as np

from spinners.spinner import StructuredSpinner, Variant


def sylvester(n: int) -> np.ndarray:
    """Unnormalized Hadamard matrix from the recursion H_2k = [[H, H], [H, -H]]."""
    H = np.array([[1.0]])
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    assert H.shape[0] == n
    return H


def hadamard_normalized(n: int) -> np.ndarray:
    return sylvester(n) / math.sqrt(n)


def circulant_dense(r) -> np.ndarray:
    n = len(r)
    C = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            C[i, j] = r[(j - i) % n]
    return C


def skew_dense(r) -> np.ndarray:
    n = len(r)
    S = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            S[i, j] = r[j - i] if j >= i else -r[n + j - i]
    return S


def toeplitz_dense(col, row) -> np.ndarray:
    n = len(col)
    T = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            T[i, j] = col[i - j] if i >= j else row[j - i]
    return T


def spinner_dense(sp: StructuredSpinner) -> np.ndarray:
    """``scale * M3 M2 M1`` truncated to ``m`` rows, from the realized random state."""
    n, m, v = sp.n, sp.m, sp.variant
    if v is Variant.GAUSSIAN_DENSE:
        return sp.spec.scale * np.array(sp.dense)
    H = hadamard_normalized(n)
    M1 = H @ np.diag(sp.d1)
    if v.hadamard_only:
        M2 = H @ np.diag(sp.d2)
        M3 = H @ np.diag(sp.m3_params)
    else:
        M2 = np.diag(sp.d2)
        g = sp.generator
        if v is Variant.GCIRC_D2HD1:
            M3 = circulant_dense(g.first_row)
        elif v is Variant.GSKEWCIRC_D2HD1:
            M3 = skew_dense(g.first_row)
        else:
            M3 = toeplitz_dense(g.first_col, g.first_row)
    return sp.spec.scale * (M3 @ M2 @ M1)[:m]
