#!/usr/bin/env python3
"""Reproduce the gradient-variance sweep: dice vs L1/L2 over noise levels.

Writes out/sweep.csv and out/sweep.svg; the dice curve crosses L2 at
sigma_m(length) and stays below L1 everywhere.
"""

import pathlib
import sys

from bevlab.cli import main

OUT = pathlib.Path(__file__).resolve().parent.parent / "out"

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    sys.exit(
        main(
            [
                "sweep",
                "--lengths", "12",
                "--sigmas", ",".join(f"{0.05 + i * (2.0 - 0.05) / 19:.6f}" for i in range(20)),
                "--losses", "l1,l2,dice",
                "--trials", "500",
                "--steps", "2000",
                "--format", "csv+svg",
                "--log-y",
                "--deterministic",
                "--out", str(OUT / "sweep.csv"),
            ]
        )
    )
