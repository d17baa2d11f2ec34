#!/usr/bin/env python3
"""Eigenfrequency braiding along loops around the exceptional structures.

Writes one CSV per loop with columns (phi, re_w1, im_w1, re_w2, im_w2) for
the two positive-frequency bands, plus a summary of the loop vorticities.
Plot re/im trajectories against phi to see the half- and full-braids.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from excepta import topology as topo
from excepta.models import theoretical_builder

LOOPS = {
    "er_ring": topo.circle_path((0, 0.025, 0), (0, -1, 0), 0.1, 96),
    "upper_el": topo.circle_path((0.3, -0.12665235738358965, 0), (1, 0, 0), 0.05, 96),
    "lower_el": topo.circle_path((-0.3, -0.12665235738358965, 0), (1, 0, 0), 0.05, 96),
    "chain_point": topo.circle_path((0, -0.01, 0), (0, 1, 0), 0.1, 96),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="braiding_out")
    parser.add_argument("--dchi", type=float, default=-0.05)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    build = theoretical_builder(dchi=args.dchi)
    for name, loop in LOOPS.items():
        tb = topo.track_bands(build, loop)
        nu = topo.energy_vorticity(tb)
        phis = np.linspace(0.0, 2.0 * np.pi, len(tb.omegas))
        with open(out / f"{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["phi", "re_w1", "im_w1", "re_w2", "im_w2"])
            for phi, w in zip(phis, tb.omegas):
                writer.writerow([f"{v:.12g}" for v in (phi, w[0].real, w[0].imag, w[1].real, w[1].imag)])
        print(f"{name}: nu_12 = {nu:+.4f}, permutation {tb.permutation.tolist()}, {len(phis)} samples")


if __name__ == "__main__":
    main()
