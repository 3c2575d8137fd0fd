"""Sparse and dense sketching matrices.

A SparseSketch is a stack of CountSketch-style blocks: each block maps
every column to exactly one row with a signed value, so a fresh random
sketch is a single block and concatenation of sketches just appends
blocks. The per-column trainable mask decides which values gradient
updates may touch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, require_finite
from .seeding import rng_from


@dataclass(frozen=True, eq=False)
class SketchBlock:
    """One CountSketch block: column i hits row row_of[i] with value_of[i]."""

    m: int
    row_of: np.ndarray  # (n,) int64 in [0, m)
    value_of: np.ndarray  # (n,) float64
    trainable_mask: np.ndarray  # (n,) bool

    def __post_init__(self):
        n = self.row_of.shape[0]
        if self.value_of.shape[0] != n or self.trainable_mask.shape[0] != n:
            raise ValueError("block arrays must share length")
        if n and (self.row_of.min() < 0 or self.row_of.max() >= self.m):
            raise ValueError(f"row indices out of range [0, {self.m})")
        require_finite(self.value_of, "sketch values")


@dataclass(frozen=True, eq=False)
class SparseSketch:
    """Vertical stack of one-nonzero-per-column blocks over n input rows."""

    n: int
    blocks: tuple[SketchBlock, ...]

    def __post_init__(self):
        for b in self.blocks:
            if b.row_of.shape[0] != self.n:
                raise ValueError(f"block has {b.row_of.shape[0]} columns, expected {self.n}")

    @property
    def m(self) -> int:
        return sum(b.m for b in self.blocks)

    @property
    def row_of(self) -> np.ndarray:
        """Row index per stored value, in the stacked (offset) matrix."""
        parts, off = [], 0
        for b in self.blocks:
            parts.append(b.row_of + off)
            off += b.m
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    @property
    def col_of(self) -> np.ndarray:
        """Column index per stored value (0..n-1 within each block)."""
        parts = [np.arange(self.n, dtype=np.int64) for _ in self.blocks]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    @property
    def value_of(self) -> np.ndarray:
        parts = [b.value_of for b in self.blocks]
        return np.concatenate(parts) if parts else np.zeros(0)

    @property
    def trainable_mask(self) -> np.ndarray:
        parts = [b.trainable_mask for b in self.blocks]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)

    def with_values(self, new_values: np.ndarray) -> "SparseSketch":
        """Same pattern and masks, stored values replaced (stacked order)."""
        new_values = np.asarray(new_values, dtype=np.float64)
        if new_values.shape[0] != self.n * len(self.blocks):
            raise ValueError("value vector length does not match sketch")
        out, pos = [], 0
        for b in self.blocks:
            vals = new_values[pos : pos + self.n].copy()
            pos += self.n
            out.append(SketchBlock(b.m, b.row_of, vals, b.trainable_mask))
        return SparseSketch(self.n, tuple(out))


@dataclass(frozen=True, eq=False)
class DenseSketch:
    """Dense Gaussian sketching matrix (for comparison baselines)."""

    matrix: np.ndarray

    def __post_init__(self):
        require_finite(self.matrix, "dense sketch")

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


def sparse_random_sketch(m: int, n: int, seed: int) -> SparseSketch:
    """CountSketch: uniform row per column, value +-1, all trainable."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    rng = rng_from(seed)
    row_of = rng.integers(0, m, size=n)
    value_of = rng.integers(0, 2, size=n) * 2.0 - 1.0
    mask = np.ones(n, dtype=bool)
    return SparseSketch(n, (SketchBlock(m, row_of, value_of, mask),))


def dense_random_sketch(m: int, n: int, seed: int) -> DenseSketch:
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return DenseSketch(rng_from(seed).standard_normal((m, n)))


def identity_pattern_sketch(n: int) -> SparseSketch:
    """n x n sketch with row_of[i] = i and unit values (S = I)."""
    rows = np.arange(n, dtype=np.int64)
    return SparseSketch(n, (SketchBlock(n, rows, np.ones(n), np.ones(n, dtype=bool)),))


def empty_sketch(n: int) -> SparseSketch:
    """Sketch with zero rows; concatenating it is a no-op."""
    return SparseSketch(n, ())


def scatter_rows(values: np.ndarray, rows: np.ndarray, cols: np.ndarray, m: int,
                 a: np.ndarray) -> np.ndarray:
    """Accumulate values[j] * a[cols[j]] into output row rows[j].

    Loops in ascending j so each output row accumulates in ascending
    column order, matching matmul against the densified sketch bit for
    bit.
    """
    out = np.zeros((m, a.shape[1]))
    for j in range(rows.shape[0]):
        out[rows[j]] += values[j] * a[cols[j]]
    return out


def apply_sketch(s: SparseSketch | DenseSketch, a) -> np.ndarray:
    """Compute S @ a without densifying sparse sketches."""
    a = as_matrix(a)
    if s.n != a.shape[0]:
        raise ValueError(f"sketch has n={s.n} but matrix has {a.shape[0]} rows")
    if isinstance(s, DenseSketch):
        from .linalg import matmul

        return matmul(s.matrix, a)
    return scatter_rows(s.value_of, s.row_of, s.col_of, s.m, a)


def densify(s: SparseSketch) -> np.ndarray:
    out = np.zeros((s.m, s.n))
    off = 0
    for b in s.blocks:
        out[b.row_of + off, np.arange(s.n)] = b.value_of
        off += b.m
    return out


def concat_sketches(s1: SparseSketch, s2: SparseSketch) -> SparseSketch:
    """Stack s2's rows below s1's; blocks are kept separate."""
    if s1.n != s2.n:
        raise ValueError(f"column counts differ: {s1.n} vs {s2.n}")
    return SparseSketch(s1.n, s1.blocks + s2.blocks)


def sketches_equal(a: SparseSketch, b: SparseSketch) -> bool:
    if a.n != b.n or len(a.blocks) != len(b.blocks):
        return False
    for x, y in zip(a.blocks, b.blocks):
        if x.m != y.m:
            return False
        if not (np.array_equal(x.row_of, y.row_of)
                and np.array_equal(x.value_of, y.value_of)
                and np.array_equal(x.trainable_mask, y.trainable_mask)):
            return False
    return True
