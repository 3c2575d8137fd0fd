#!/usr/bin/env python3
"""Excess error of jointly-trained mixed sketches as the trainable row
count varies from 0 (fully random) to m (fully learned).

Usage:
    python scripts/learned_rows_sweep.py [out_csv]

Writes a (series, x, y) plot-data CSV with x = trainable rows.
"""

import sys
from dataclasses import replace

from lrsketch.diffsvd import PowerSvdConfig
from lrsketch.evalbench import DatasetSpec, err_metric, generate_dataset, write_xy_csv
from lrsketch.seeding import derived_seed
from lrsketch.trainer import TrainConfig, train_mixed_joint

SPEC = DatasetSpec(name="spiked", kind="spiked", n=32, d=24, count_train=12,
                   count_test=8, spikes=3, decay=0.8, noise=0.1, drift=0.05,
                   seed=11)
K, M = 3, 6
TRAIN = TrainConfig(k=K, lr=1.0, iterations=200, seed=20260808,
                    power_cfg=PowerSvdConfig(t_iters=30), mode="mixed_joint")


def run(out_csv: str) -> None:
    train_set, test_set = generate_dataset(SPEC)
    rows = []
    for learned_rows in range(M + 1):
        cfg = replace(TRAIN, learned_rows=learned_rows,
                      seed=derived_seed(TRAIN.seed, learned_rows))
        sketch, rep = train_mixed_joint(train_set, M, cfg)
        err = err_metric(test_set, sketch, K)
        rows.append(("mixed_j", learned_rows, err))
        print(f"learned_rows={learned_rows}: train loss "
              f"{rep.initial_loss:.4f} -> {rep.final_loss:.4f}, excess error {err:.4f}")
    write_xy_csv(out_csv, rows)
    print(f"wrote {out_csv}")


if __name__ == "__main__":
    run(sys.argv[1] if len(sys.argv) > 1 else "runs/learned_rows_sweep.csv")
