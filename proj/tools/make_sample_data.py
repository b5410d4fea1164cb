#!/usr/bin/env python3
"""Generate data/sample_hr.csv: 70 s of a synthetic pulse waveform at 100 Hz.

Each beat is a systolic Gaussian plus a smaller delayed dicrotic bump. RR
intervals follow a slow 9 s oscillation with jitter; beats 17 and 55 are
premature (0.53 s) and followed by a compensatory pause (1.12 s), so the
outlier filter has something to reject.
"""
import argparse
import math

import numpy as np


def generate(seed=20201, rate=100, n=7000):
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    beats = []
    tb = 0.37
    while tb < n / rate + 1:
        beats.append(tb)
        rr = 0.82 + 0.04 * math.sin(2 * math.pi * tb / 9.0) + rng.normal(0, 0.015)
        k = len(beats)
        if k in (17, 55):
            rr = 0.53
        elif k in (18, 56):
            rr = 1.12
        tb += rr
    x = np.full(n, 0.05)
    for b in beats:
        x += np.exp(-0.5 * ((t - b) / 0.055) ** 2) + 0.22 * np.exp(-0.5 * ((t - b - 0.24) / 0.09) ** 2)
    x += rng.normal(0, 0.004, n)
    return x


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/sample_hr.csv")
    ap.add_argument("--seed", type=int, default=20201)
    args = ap.parse_args()
    np.savetxt(args.out, generate(args.seed), fmt="%.6f", header="hr", comments="")


if __name__ == "__main__":
    main()
