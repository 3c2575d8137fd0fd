#!/usr/bin/env python3
"""Single-row-sketch theory report: random-direction quality vs stable
rank, plus the generalization-gap trend of the robust grid minimizer.

Usage:
    python scripts/theory_report.py [out_dir]
"""

import sys

from lrsketch.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "runs"
    sys.exit(main(["theory", "--out", out]))
