import numpy as np
import pytest

from lrsketch.diffsvd import PowerSvdConfig
from lrsketch.seeding import derived_seed, rng_from
from lrsketch.sketch import sketches_equal, sparse_random_sketch
from lrsketch.trainer import (TrainConfig, TrainingDivergedError, report_to_csv,
                              train, train_mixed_joint, train_mixed_separate,
                              train_sketch)


@pytest.fixture(scope="module")
def small_train_set():
    # shared rank-2 structure plus noise, so a few SGD steps help
    rng = rng_from(1000)
    u0 = np.linalg.qr(rng.standard_normal((12, 2)))[0]
    v0 = np.linalg.qr(rng.standard_normal((9, 2)))[0]
    out = []
    for _ in range(6):
        u = np.linalg.qr(u0 + 0.05 * rng.standard_normal((12, 2)))[0]
        a = (u * np.array([1.0, 0.7])) @ v0.T
        a = a + 0.02 * rng.standard_normal((12, 9))
        out.append(a)
    return out


def quick_cfg(**kw):
    base = dict(k=2, lr=0.3, iterations=30, seed=5,
                power_cfg=PowerSvdConfig(t_iters=20))
    base.update(kw)
    return TrainConfig(**base)


class TestTrainSketch:
    def test_lr_zero_returns_initialization(self, small_train_set):
        sk, _ = train_sketch(small_train_set, 4, quick_cfg(lr=0.0, iterations=5))
        init = sparse_random_sketch(4, 12, derived_seed(5, 0))
        assert sketches_equal(sk, init)

    def test_zero_iterations_initial_equals_final(self, small_train_set):
        _, rep = train_sketch(small_train_set, 4, quick_cfg(iterations=0))
        assert rep.initial_loss == rep.final_loss
        assert rep.loss_history == ()

    def test_training_reduces_loss(self, small_train_set):
        _, rep = train_sketch(small_train_set, 4, quick_cfg(iterations=60))
        assert rep.final_loss < rep.initial_loss

    def test_pattern_preserved(self, small_train_set):
        cfg = quick_cfg()
        sk, _ = train_sketch(small_train_set, 4, cfg)
        init = sparse_random_sketch(4, 12, derived_seed(cfg.seed, 0))
        assert np.array_equal(sk.row_of, init.row_of)

    def test_seed_reproducibility(self, small_train_set):
        sk1, rep1 = train_sketch(small_train_set, 4, quick_cfg())
        sk2, rep2 = train_sketch(small_train_set, 4, quick_cfg())
        assert sketches_equal(sk1, sk2)
        assert rep1.loss_history == rep2.loss_history

    def test_values_finite(self, small_train_set):
        sk, _ = train_sketch(small_train_set, 4, quick_cfg())
        assert np.all(np.isfinite(sk.value_of))

    def test_history_length_matches_iterations(self, small_train_set):
        _, rep = train_sketch(small_train_set, 4, quick_cfg(iterations=17))
        assert len(rep.loss_history) == 17
        assert [it for it, _ in rep.loss_history] == list(range(1, 18))

    def test_divergence_aborts(self, small_train_set):
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingDivergedError):
                train_sketch(small_train_set, 4,
                             quick_cfg(lr=1e160, iterations=6))

    def test_inconsistent_rows_rejected(self):
        bad = [np.zeros((4, 3)), np.zeros((5, 3))]
        with pytest.raises(ValueError, match="rows"):
            train_sketch(bad, 2, quick_cfg())

    def test_batch_size_determinism(self, small_train_set):
        sk1, _ = train_sketch(small_train_set, 4, quick_cfg(batch_size=3))
        sk2, _ = train_sketch(small_train_set, 4, quick_cfg(batch_size=3))
        assert sketches_equal(sk1, sk2)


class TestMixedJoint:
    def test_learned_rows_zero_everything_frozen(self, small_train_set):
        cfg = quick_cfg(learned_rows=0, iterations=10)
        sk, _ = train_mixed_joint(small_train_set, 4, cfg)
        frozen = sparse_random_sketch(4, 12, derived_seed(cfg.seed, 3))
        assert np.array_equal(sk.value_of, frozen.value_of)
        assert not sk.trainable_mask.any()

    def test_masked_block_bit_unchanged(self, small_train_set):
        cfg = quick_cfg(learned_rows=2, iterations=40)
        sk, _ = train_mixed_joint(small_train_set, 4, cfg)
        frozen_init = sparse_random_sketch(2, 12, derived_seed(cfg.seed, 3))
        assert sk.blocks[1].value_of.tobytes() == frozen_init.value_of.tobytes()
        assert np.array_equal(sk.blocks[1].row_of, frozen_init.row_of)

    def test_trainable_block_moves(self, small_train_set):
        cfg = quick_cfg(learned_rows=2, iterations=40)
        sk, _ = train_mixed_joint(small_train_set, 4, cfg)
        init = sparse_random_sketch(2, 12, derived_seed(cfg.seed, 0))
        assert not np.array_equal(sk.blocks[0].value_of, init.value_of)

    def test_learned_rows_m_matches_plain_training(self, small_train_set):
        cfg = quick_cfg(learned_rows=4)
        sk_plain, rep_plain = train_sketch(small_train_set, 4, cfg)
        sk_mixed, rep_mixed = train_mixed_joint(small_train_set, 4, cfg)
        assert sketches_equal(sk_plain, sk_mixed)
        assert rep_plain.loss_history == rep_mixed.loss_history

    def test_learned_rows_validated(self, small_train_set):
        with pytest.raises(ValueError, match="learned_rows"):
            train_mixed_joint(small_train_set, 4, quick_cfg(learned_rows=5))


class TestMixedSeparate:
    def test_total_rows(self, small_train_set):
        sk, _ = train_mixed_separate(small_train_set, 5, quick_cfg(learned_rows=2))
        assert sk.m == 5

    def test_first_block_equals_standalone_training(self, small_train_set):
        cfg = quick_cfg(learned_rows=2)
        standalone, _ = train_sketch(small_train_set, 2, cfg)
        mixed, _ = train_mixed_separate(small_train_set, 5, cfg)
        assert mixed.blocks[0].value_of.tobytes() == standalone.value_of.tobytes()
        assert np.array_equal(mixed.blocks[0].row_of, standalone.row_of)

    def test_appended_block_frozen_random(self, small_train_set):
        cfg = quick_cfg(learned_rows=2)
        mixed, _ = train_mixed_separate(small_train_set, 5, cfg)
        frozen = sparse_random_sketch(3, 12, derived_seed(cfg.seed, 3))
        assert np.array_equal(mixed.blocks[1].value_of, frozen.value_of)
        assert not mixed.blocks[1].trainable_mask.any()

    def test_learned_rows_validated(self, small_train_set):
        with pytest.raises(ValueError, match="learned_rows"):
            train_mixed_separate(small_train_set, 4, quick_cfg(learned_rows=0))


class TestDispatch:
    def test_modes(self, small_train_set):
        for mode in ("learned", "mixed_joint", "mixed_separate"):
            cfg = quick_cfg(mode=mode, learned_rows=2, iterations=5)
            sk, _ = train(small_train_set, 4, cfg)
            assert sk.m == 4


class TestReportCsv:
    def test_row_count(self, small_train_set, tmp_path):
        _, rep = train_sketch(small_train_set, 4, quick_cfg(iterations=12))
        p = tmp_path / "report.csv"
        report_to_csv(rep, p)
        lines = p.read_text().strip().splitlines()
        assert lines[0] == "iteration,loss"
        assert len(lines) == 1 + 12


class TestConfigValidation:
    def test_bad_mode(self):
        with pytest.raises(ValueError, match="mode"):
            TrainConfig(k=1, mode="nope")

    def test_negative_lr(self):
        with pytest.raises(ValueError, match="lr"):
            TrainConfig(k=1, lr=-0.1)
