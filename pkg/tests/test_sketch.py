import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrsketch.linalg import matmul
from lrsketch.sketch import (SketchBlock, SparseSketch, apply_sketch,
                             concat_sketches, dense_random_sketch, densify,
                             empty_sketch, identity_pattern_sketch,
                             sketches_equal, sparse_random_sketch)


class TestSparseRandomSketch:
    def test_single_row(self):
        s = sparse_random_sketch(1, 20, seed=0)
        assert np.all(s.row_of == 0)
        assert set(np.unique(s.value_of)) <= {-1.0, 1.0}

    def test_exactly_one_nonzero_per_column(self):
        s = sparse_random_sketch(5, 40, seed=1)
        assert np.count_nonzero(densify(s)) == 40

    def test_row_occupancy_near_uniform(self):
        s = sparse_random_sketch(4, 10000, seed=2)
        counts = np.bincount(s.row_of, minlength=4)
        assert counts.min() >= 2100 and counts.max() <= 2900

    def test_seed_determinism(self):
        assert sketches_equal(sparse_random_sketch(3, 10, 7),
                              sparse_random_sketch(3, 10, 7))

    def test_all_trainable(self):
        assert sparse_random_sketch(3, 10, 7).trainable_mask.all()

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            sparse_random_sketch(0, 5, 1)


class TestDenseRandomSketch:
    def test_determinism(self):
        a = dense_random_sketch(4, 6, seed=5)
        b = dense_random_sketch(4, 6, seed=5)
        assert np.array_equal(a.matrix, b.matrix)

    def test_mean_and_variance(self):
        s = dense_random_sketch(1000, 1000, seed=9)
        assert abs(s.matrix.mean()) < 0.01
        assert abs(s.matrix.var() - 1.0) < 0.02


class TestApplySketch:
    def test_identity_pattern(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((6, 4))
        assert np.array_equal(apply_sketch(identity_pattern_sketch(6), a), a)

    def test_hand_case(self):
        s = SparseSketch(2, (SketchBlock(1, np.array([0, 0]),
                                         np.array([1.0, -1.0]),
                                         np.ones(2, dtype=bool)),))
        out = apply_sketch(s, np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert np.array_equal(out, np.array([[-2.0, -2.0]]))

    def test_matches_densified_matmul_bitwise(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((8, 5))
        s = sparse_random_sketch(3, 8, seed=11)
        assert np.array_equal(apply_sketch(s, a), matmul(densify(s), a))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            apply_sketch(sparse_random_sketch(2, 4, 0), np.zeros((5, 3)))

    def test_dense_sketch_apply(self):
        d = dense_random_sketch(3, 6, seed=2)
        a = np.random.default_rng(3).standard_normal((6, 4))
        assert np.array_equal(apply_sketch(d, a), matmul(d.matrix, a))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        s = sparse_random_sketch(3, 8, seed=seed)
        a = rng.standard_normal((8, 5))
        b = rng.standard_normal((8, 5))
        lhs = apply_sketch(s, a + b)
        rhs = apply_sketch(s, a) + apply_sketch(s, b)
        assert np.abs(lhs - rhs).max() < 1e-12


class TestDensify:
    def test_hand_case(self):
        s = SparseSketch(2, (SketchBlock(2, np.array([0, 1]),
                                         np.array([1.0, -1.0]),
                                         np.ones(2, dtype=bool)),))
        assert np.array_equal(densify(s), np.array([[1.0, 0.0], [0.0, -1.0]]))

    def test_nonzero_count(self):
        s = sparse_random_sketch(4, 30, seed=3)
        assert np.count_nonzero(densify(s)) == 30

    def test_roundtrip_with_apply(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((10, 3))
        s = sparse_random_sketch(4, 10, seed=5)
        assert np.array_equal(matmul(densify(s), a), apply_sketch(s, a))


class TestConcatSketches:
    def test_empty_second(self):
        s1 = sparse_random_sketch(3, 6, seed=0)
        assert sketches_equal(concat_sketches(s1, empty_sketch(6)), s1)

    def test_densify_is_vstack(self):
        s1 = sparse_random_sketch(2, 6, seed=1)
        s2 = sparse_random_sketch(3, 6, seed=2)
        stacked = densify(concat_sketches(s1, s2))
        assert np.array_equal(stacked, np.vstack([densify(s1), densify(s2)]))

    def test_row_count_adds(self):
        s1 = sparse_random_sketch(2, 6, seed=1)
        s2 = sparse_random_sketch(3, 6, seed=2)
        assert concat_sketches(s1, s2).m == 5

    def test_column_mismatch(self):
        with pytest.raises(ValueError):
            concat_sketches(sparse_random_sketch(2, 6, 0), sparse_random_sketch(2, 7, 0))

    def test_blocks_keep_one_nonzero_per_column(self):
        s = concat_sketches(sparse_random_sketch(2, 6, 1), sparse_random_sketch(3, 6, 2))
        for b in s.blocks:
            assert b.row_of.shape == (6,)
            assert np.all((0 <= b.row_of) & (b.row_of < b.m))

    def test_masks_concatenate_per_source(self):
        s1 = sparse_random_sketch(2, 4, seed=1)
        b = s1.blocks[0]
        frozen = SparseSketch(4, (SketchBlock(b.m, b.row_of, b.value_of,
                                              np.zeros(4, dtype=bool)),))
        s = concat_sketches(s1, frozen)
        assert s.trainable_mask[:4].all() and not s.trainable_mask[4:].any()


class TestWithValues:
    def test_replaces_in_stacked_order(self):
        s = concat_sketches(sparse_random_sketch(2, 3, 1), sparse_random_sketch(2, 3, 2))
        new = np.arange(6.0)
        s2 = s.with_values(new)
        assert np.array_equal(s2.value_of, new)
        assert np.array_equal(s2.row_of, s.row_of)

    def test_length_checked(self):
        with pytest.raises(ValueError):
            sparse_random_sketch(2, 3, 1).with_values(np.zeros(5))


class TestValidation:
    def test_row_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            SketchBlock(2, np.array([0, 2]), np.ones(2), np.ones(2, dtype=bool))

    def test_non_finite_values(self):
        with pytest.raises(ValueError, match="non-finite"):
            SketchBlock(2, np.array([0, 1]), np.array([1.0, np.inf]),
                        np.ones(2, dtype=bool))
