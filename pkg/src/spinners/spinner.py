"""Structured spinner operators ``scale * M3 M2 M1``.

Each variant is built from three blocks:

* ``M1 = H D1`` balances its input so no coordinate carries much of the norm.
* ``M2`` (``H D2`` or ``D2``) spreads a set of inputs onto nearly orthogonal
  directions.
* ``M3`` carries the parameter vector ``r``: a random diagonal or a
  Gaussian circulant-type generator. Fitting ``r`` gives the adaptive
  setting of :func:`fit_to_target`.

An ``m x n`` operator keeps the first ``m`` rows of the square one;
:class:`StackedSpinner` stacks independent blocks to reach any row count.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import hadamard

from . import seeding
from .errors import DimensionError, SingularSystemError
from .transforms import (
    CirculantSpec,
    _circulant_apply,
    _circulant_spectrum,
    _skew_apply,
    _skew_spectrum,
    _toeplitz_apply,
    _toeplitz_spectrum,
    as_real_array,
    fwht_normalized,
    is_power_of_two,
)


class Variant(str, enum.Enum):
    HD3HD2HD1 = "HD3HD2HD1"
    HDG_HD2HD1 = "HDg_HD2HD1"
    GCIRC_D2HD1 = "Gcirc_D2HD1"
    GTOEPLITZ_D2HD1 = "GToeplitz_D2HD1"
    GSKEWCIRC_D2HD1 = "GSkewCirc_D2HD1"
    GAUSSIAN_DENSE = "GaussianDense"

    @classmethod
    def parse(cls, name: "str | Variant") -> "Variant":
        if isinstance(name, cls):
            return name
        lowered = str(name).lower()
        for v in cls:
            if v.value.lower() == lowered or v.name.lower() == lowered:
                return v
        raise ValueError(f"unknown spinner variant {name!r}; choose from {[v.value for v in cls]}")

    @property
    def uses_hadamard(self) -> bool:
        return self is not Variant.GAUSSIAN_DENSE

    @property
    def hadamard_only(self) -> bool:
        return self in (Variant.HD3HD2HD1, Variant.HDG_HD2HD1)

    @property
    def circulant_kind(self) -> str | None:
        return {
            Variant.GCIRC_D2HD1: "circulant",
            Variant.GTOEPLITZ_D2HD1: "toeplitz",
            Variant.GSKEWCIRC_D2HD1: "skew_circulant",
        }.get(self)


STRUCTURED = tuple(v for v in Variant if v is not Variant.GAUSSIAN_DENSE)


@dataclass(frozen=True)
class SpinnerSpec:
    """Declarative description of one ``m x n`` spinner block.

    ``scale`` defaults to ``sqrt(n)`` for the Hadamard-only variants, which
    gives every output entry unit variance like the Gaussian baseline; the
    Gaussian-generator variants already have it and default to 1.
    """

    variant: Variant
    n: int
    m: int | None = None
    seed: int = 0
    scale: float | None = None

    def __post_init__(self):
        variant = Variant.parse(self.variant)
        object.__setattr__(self, "variant", variant)
        n = int(self.n)
        m = n if self.m is None else int(self.m)
        if n < 1:
            raise DimensionError(f"n must be positive, got {n}")
        if not 1 <= m <= n:
            raise DimensionError(f"rows per block must satisfy 1 <= m <= n, got m={m}, n={n}")
        if variant.uses_hadamard and not is_power_of_two(n):
            raise DimensionError(f"{variant.value} needs a power-of-two n, got {n}; zero-pad first")
        scale = self.scale
        if scale is None:
            scale = math.sqrt(n) if variant.hadamard_only else 1.0
        if not math.isfinite(scale):
            raise DimensionError(f"scale must be finite, got {scale}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "seed", int(self.seed) & seeding.SEED_MASK)
        object.__setattr__(self, "scale", float(scale))

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "n": self.n, "m": self.m,
                "seed": self.seed, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "SpinnerSpec":
        return cls(variant=d["variant"], n=d["n"], m=d.get("m"), seed=d.get("seed", 0),
                   scale=d.get("scale"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpinnerSpec":
        return cls.from_dict(json.loads(text))


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StructuredSpinner:
    """Realized random state of one spinner block; immutable after :func:`build`.

    ``d3`` and ``g_diag`` are the two spellings of the ``M3`` diagonal; a
    fitted Hadamard-only spinner carries its real-valued parameters in
    ``g_diag``.
    """

    spec: SpinnerSpec
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    d3: np.ndarray | None = None
    g_diag: np.ndarray | None = None
    generator: CirculantSpec | None = None
    dense: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def variant(self) -> Variant:
        return self.spec.variant

    @property
    def m3_params(self) -> np.ndarray:
        """The parameter vector ``r`` defining ``M3``.

        For Toeplitz generators this is ``first_col`` followed by
        ``first_row[1:]`` (length ``2n - 1``).
        """
        if self.variant.hadamard_only:
            return self.g_diag if self.g_diag is not None else self.d3
        if self.variant is Variant.GTOEPLITZ_D2HD1:
            return np.concatenate([self.generator.first_col, self.generator.first_row[1:]])
        if self.variant is Variant.GAUSSIAN_DENSE:
            raise ValueError("GaussianDense has no M3 parameter vector")
        return self.generator.first_row

    def mix(self, x) -> np.ndarray:
        """``M2 M1 x``, the part of the operator that does not depend on ``r``."""
        x = self._check_input(x)
        if self.variant is Variant.GAUSSIAN_DENSE:
            raise ValueError("GaussianDense has no M2 M1 blocks")
        v = fwht_normalized(self.d1 * x)
        if self.variant.hadamard_only:
            return fwht_normalized(self.d2 * v)
        return self.d2 * v

    def apply(self, x) -> np.ndarray:
        """``scale * (M3 M2 M1 x)[:m]`` along the last axis."""
        if self.variant is Variant.GAUSSIAN_DENSE:
            x = self._check_input(x)
            return self.spec.scale * (x @ self.dense.T)
        v = self.mix(x)
        if self.generator is not None:
            out = _GENERATOR_APPLY[self.generator.kind](self.generator.spectrum, v)
        else:
            out = apply_m3(self.variant, self.m3_params, v)
        return self.spec.scale * out[..., : self.m]

    __call__ = apply

    def to_dense(self) -> np.ndarray:
        """The ``m x n`` matrix; column ``j`` is ``apply(e_j)``."""
        if self.variant is Variant.GAUSSIAN_DENSE and self.spec.scale == 1.0:
            return self.dense
        return np.ascontiguousarray(self.apply(np.eye(self.n)).T)

    def with_params(self, r) -> "StructuredSpinner":
        """Same ``M1``, ``M2`` and scale with ``M3`` rebuilt from ``r``."""
        return replace(self, **_m3_fields(self.variant, as_real_array(r, "r"), self.n))

    def _check_input(self, x) -> np.ndarray:
        x = as_real_array(x)
        if x.shape[-1] != self.n:
            raise DimensionError(f"input has length {x.shape[-1]}, spinner expects {self.n}")
        return x


def _m3_fields(variant: Variant, r: np.ndarray, n: int) -> dict:
    expected = 2 * n - 1 if variant is Variant.GTOEPLITZ_D2HD1 else n
    if r.shape != (expected,):
        raise DimensionError(f"{variant.value} takes {expected} M3 parameters, got shape {r.shape}")
    if variant.hadamard_only:
        return {"d3": None, "g_diag": _readonly(r)}
    if variant is Variant.GTOEPLITZ_D2HD1:
        row = np.concatenate([r[:1], r[n:]])
        return {"generator": CirculantSpec(row, "toeplitz", r[:n])}
    return {"generator": CirculantSpec(r, variant.circulant_kind)}


_GENERATOR_APPLY = {
    "circulant": _circulant_apply,
    "toeplitz": _toeplitz_apply,
    "skew_circulant": _skew_apply,
}


def apply_m3(variant: Variant, params: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Unscaled ``M3(params) v``; ``params`` and ``v`` broadcast on leading axes."""
    if variant.hadamard_only:
        return fwht_normalized(params * v)
    if variant is Variant.GCIRC_D2HD1:
        return _circulant_apply(_circulant_spectrum(params), v)
    if variant is Variant.GSKEWCIRC_D2HD1:
        return _skew_apply(_skew_spectrum(params), v)
    if variant is Variant.GTOEPLITZ_D2HD1:
        n = v.shape[-1]
        col = params[..., :n]
        row = np.concatenate([params[..., :1], params[..., n:]], axis=-1)
        return _toeplitz_apply(_toeplitz_spectrum(col, row), v)
    raise ValueError(f"{variant.value} has no M3 block")


def draw_m3_params(variant: Variant, n: int, gen: np.random.Generator,
                   shape: tuple = ()) -> np.ndarray:
    """Fresh random ``M3`` parameters: Rademacher for D3, Gaussian otherwise."""
    shape = tuple(shape)
    if variant is Variant.HD3HD2HD1:
        return rademacher(gen, shape + (n,))
    if variant is Variant.GTOEPLITZ_D2HD1:
        return gen.standard_normal(shape + (2 * n - 1,))
    if variant is Variant.GAUSSIAN_DENSE:
        raise ValueError("GaussianDense has no M3 parameters")
    return gen.standard_normal(shape + (n,))


def rademacher(gen: np.random.Generator, shape) -> np.ndarray:
    return np.where(gen.integers(0, 2, size=shape) == 1, 1.0, -1.0)


def build(spec: SpinnerSpec) -> StructuredSpinner:
    """Realize all random state of ``spec`` deterministically from its seed."""
    gen = seeding.rng(spec.seed)
    n, variant = spec.n, spec.variant
    if variant is Variant.GAUSSIAN_DENSE:
        return StructuredSpinner(spec, dense=_readonly(gen.standard_normal((spec.m, n))))
    d1 = _readonly(rademacher(gen, n))
    d2 = _readonly(rademacher(gen, n))
    params = draw_m3_params(variant, n, gen)
    sp = StructuredSpinner(spec, d1=d1, d2=d2)
    if variant is Variant.HD3HD2HD1:
        return replace(sp, d3=_readonly(params))
    return replace(sp, **_m3_fields(variant, params, n))


@dataclass(frozen=True, eq=False)
class StackedSpinner:
    """``k x n`` operator: independent blocks stacked vertically, truncated to ``k`` rows."""

    blocks: tuple[StructuredSpinner, ...]
    k: int
    _rows: int = field(init=False, repr=False)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise DimensionError("a stacked spinner needs at least one block")
        first = blocks[0].spec
        for b in blocks[1:]:
            if (b.spec.variant, b.spec.n, b.spec.m) != (first.variant, first.n, first.m):
                raise DimensionError("stacked blocks must share variant, n and m")
        total = first.m * len(blocks)
        if not (total - first.m) < self.k <= total:
            raise DimensionError(
                f"k={self.k} does not fit {len(blocks)} blocks of {first.m} rows")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "_rows", first.m)

    @property
    def n(self) -> int:
        return self.blocks[0].n

    @property
    def variant(self) -> Variant:
        return self.blocks[0].variant

    def apply(self, x) -> np.ndarray:
        out = np.concatenate([b.apply(x) for b in self.blocks], axis=-1)
        return out[..., : self.k]

    __call__ = apply

    def to_dense(self) -> np.ndarray:
        return np.vstack([b.to_dense() for b in self.blocks])[: self.k]


def block_seeds(seed: int, count: int) -> list[int]:
    """Seed of each stacked block; block 0 reuses ``seed`` itself."""
    return [seeding.derive_seed(seed, i) if i else seed for i in range(count)]


def stack(spec: SpinnerSpec, k: int) -> StackedSpinner:
    """Stack ``ceil(k / spec.m)`` independently seeded copies of ``spec``."""
    if k < 1:
        raise DimensionError(f"k must be positive, got {k}")
    count = -(-k // spec.m)
    blocks = [build(replace(spec, seed=s)) for s in block_seeds(spec.seed, count)]
    return StackedSpinner(tuple(blocks), k)


def stacked_apply(st: StackedSpinner, x) -> np.ndarray:
    return st.apply(x)


def apply(sp: StructuredSpinner, x) -> np.ndarray:
    return sp.apply(x)


def to_dense(sp: StructuredSpinner) -> np.ndarray:
    return sp.to_dense()


@dataclass(frozen=True, eq=False)
class FitResult:
    r: np.ndarray
    residual: float
    spinner: StructuredSpinner
    singular_values: np.ndarray


# Minimum ratio of the smallest to the largest Gram eigenvalue.
GRAM_RANK_TOL = 1e-12


def m3_design(sp: StructuredSpinner, basis) -> np.ndarray:
    """Rows ``(i, k)``: the linear map ``r -> (scale * M3(r) M2 M1 x_i)_k``.

    Shape ``(d * m, n)``, block ``i`` holding the ``m`` rows of basis vector
    ``i``.
    """
    basis = np.atleast_2d(as_real_array(basis, "basis"))
    v = sp.mix(basis)
    n, m, variant = sp.n, sp.m, sp.variant
    rows = []
    for vi in v:
        if variant.hadamard_only:
            block = hadamard(n)[:m] / math.sqrt(n) * vi
        elif variant is Variant.GCIRC_D2HD1:
            idx = (np.arange(m)[:, None] + np.arange(n)[None, :]) % n
            block = vi[idx]
        elif variant is Variant.GSKEWCIRC_D2HD1:
            s = np.arange(m)[:, None] + np.arange(n)[None, :]
            block = np.where(s >= n, -1.0, 1.0) * vi[s % n]
        else:
            raise ValueError(f"adaptive fitting is not supported for {variant.value}")
        rows.append(sp.spec.scale * block)
    return np.vstack(rows)


def fit_to_target(sp: StructuredSpinner, target, basis) -> FitResult:
    """Choose ``r`` so the spinner agrees with ``target`` on ``span(basis)``.

    ``M1`` and ``M2`` are kept from ``sp``. The ``m * d`` equations in the
    ``n`` unknowns of ``r`` are solved in the least-squares sense through an
    SVD; a Gram matrix whose smallest eigenvalue falls below
    ``GRAM_RANK_TOL`` times its largest is reported as
    :class:`SingularSystemError` rather than solved.

    Returns the fitted parameters, the largest per-basis-vector residual
    ``max_i ||spinner(r) x_i - target x_i||``, and the fitted spinner.
    """
    basis = np.atleast_2d(as_real_array(basis, "basis"))
    target = np.atleast_2d(as_real_array(target, "target"))
    n, m = sp.n, sp.m
    d = basis.shape[0]
    if basis.shape[1] != n:
        raise DimensionError(f"basis vectors have length {basis.shape[1]}, spinner expects {n}")
    if target.shape != (m, n):
        raise DimensionError(f"target must be {m}x{n}, got {target.shape}")
    gram = basis @ basis.T
    if np.abs(gram - np.eye(d)).max() > 1e-8:
        raise DimensionError("basis vectors are not orthonormal to 1e-8")
    if m * d > n:
        raise SingularSystemError(
            f"rank-deficient system: m*d = {m * d} equations exceed n = {n} unknowns, "
            f"so the equation Gram matrix is singular")
    design = m3_design(sp, basis)
    rhs = (basis @ target.T).reshape(-1)
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    if s[-1] ** 2 < GRAM_RANK_TOL * s[0] ** 2:
        raise SingularSystemError(
            f"rank-deficient system: smallest Gram eigenvalue {s[-1] ** 2:.3e} is below "
            f"{GRAM_RANK_TOL:g} of the largest {s[0] ** 2:.3e}")
    r = vt.T @ ((u.T @ rhs) / s)
    fitted = sp.with_params(r)
    residual = float(np.linalg.norm(fitted.apply(basis) - basis @ target.T, axis=1).max())
    return FitResult(r=_readonly(r), residual=residual, spinner=fitted, singular_values=s)
