#!/usr/bin/env python3
"""Desk-scale dice-vs-regression AP experiment: train the linear depth model
under L1, L2, and dice at a noise level beyond sigma_c and compare AP3D.

Writes out/theorem1.csv with the per-seed rows.
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
                "theorem1",
                "--length", "12",
                "--sigma", "0.5",
                "--seeds", "20",
                "--objects", "10000",
                "--deterministic",
                "--out", str(OUT / "theorem1.csv"),
            ]
        )
    )
