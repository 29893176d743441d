"""Gap distribution of lattice directions against sqrt(n) mod 1.

Directions of (m - sqrt 2, n) with (m - sqrt 2)^2 + n^2 < 4900 taken modulo the
antipodal map, versus the fractional parts of sqrt(n), n <= 7765.

    python scripts/figstats.py --out results/figstats
"""
import argparse
import math
from pathlib import Path

import numpy as np
from scipy.stats import ks_2samp

from llg.directions import directions_2d, gap_distribution, normalized_gaps, sqrt_mod_one
from llg.io import write_csv, write_manifest
from llg.lattice import Irrational, ShellSpec, square_lattice


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=70.0)
    ap.add_argument("--n-sqrt", type=int, default=7765)
    ap.add_argument("--s-max", type=float, default=4.0)
    ap.add_argument("--out", default="results/figstats")
    args = ap.parse_args()

    out = Path(args.out)
    lattice = directions_2d(square_lattice(Irrational((-math.sqrt(2), 0.0))), ShellSpec(0, args.T),
                            half_plane=True)
    roots = sqrt_mod_one(args.n_sqrt)
    s = np.round(np.arange(0, args.s_max + 1e-9, 0.02), 6)
    p_lat, se_lat = gap_distribution(lattice, s)
    p_sqrt, se_sqrt = gap_distribution(roots, s)
    write_csv(out / "gaps.csv", ("s", "P_lattice", "stderr_lattice", "P_sqrt", "stderr_sqrt", "exp_minus_s"),
              zip(s, p_lat, se_lat, p_sqrt, se_sqrt, np.exp(-s)))
    ks = ks_2samp(normalized_gaps(lattice), normalized_gaps(roots)).statistic
    write_manifest(out / "manifest.json", {"T": args.T, "n_sqrt": args.n_sqrt, "N_lattice": lattice.N,
                                           "ks": float(ks)}, ["gaps.csv"])
    print(f"N_lattice = {lattice.N}, N_sqrt = {roots.N}, KS = {ks:.4f}")
    for x in (0.0, 0.5, 1.0, 2.0, 3.0):
        i = int(round(x / 0.02))
        print(f"s = {x:3.1f}   lattice {p_lat[i]:.4f}   sqrt {p_sqrt[i]:.4f}   poisson {math.exp(-x):.4f}")


if __name__ == "__main__":
    main()
