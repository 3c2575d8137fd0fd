#!/usr/bin/env python3
"""Run the full gen-data -> train -> eval pipeline on a bundled config.

Usage:
    python scripts/run_spiked_benchmark.py [configs/spiked_small.json]

Results land under the config's out_dir: results.csv plus per-(dataset, k)
plot-data CSVs of excess error against sketch rows.
"""

import sys

from lrsketch.cli import main


def run(config_path: str) -> int:
    for command in ("gen-data", "train", "eval"):
        rc = main([command, "--config", config_path])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    cfg = sys.argv[1] if len(sys.argv) > 1 else "configs/spiked_small.json"
    sys.exit(run(cfg))
