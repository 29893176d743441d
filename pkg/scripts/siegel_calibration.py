"""Mean lattice point counts in unit-area boxes for each random-lattice space.

The means should equal the box area (plus one when the anchor point of a fiber
sample lies in the box).  Prints z-scores and writes one CSV row per box.

    python scripts/siegel_calibration.py --n 100000 --boxes 20
"""
import argparse
import math
from pathlib import Path

import numpy as np

from llg.io import write_csv, write_manifest
from llg.lattice import Irrational, Rational
from llg.mc import box_mean_counts


def unit_boxes(rng, k):
    boxes = []
    while len(boxes) < k:
        w = math.exp(rng.uniform(math.log(0.25), math.log(4)))
        x0, y0 = rng.uniform(-4, 4, 2)
        b = [x0, x0 + w, y0, y0 + 1 / w]
        if not (b[0] <= 0 <= b[1] and b[2] <= 0 <= b[3]):
            boxes.append(b)
    return np.array(boxes)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10**5)
    ap.add_argument("--boxes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/siegel")
    args = ap.parse_args()

    boxes = unit_boxes(np.random.default_rng(args.seed), args.boxes)
    y = boxes[0, [0, 2]] + 0.25 / np.array([1.0, boxes[0, 1] - boxes[0, 0]])
    spaces = {"X1": {}, "X": {"alpha": Irrational((0.3, 0.7))}, "X(y)": {"y": y}}
    spaces.update({f"X_{q}": {"alpha": Rational((1, 0), q)} for q in range(2, 6)})
    rows = []
    for k, (name, kw) in enumerate(spaces.items()):
        est = box_mean_counts(boxes, args.n, seed=args.seed + 1 + k, **kw)
        z = []
        for j, e in enumerate(est):
            target = 1.0
            if "y" in kw and boxes[j, 0] <= y[0] < boxes[j, 1] and boxes[j, 2] <= y[1] < boxes[j, 3]:
                target += 1.0
            z.append((e.value - target) / e.stderr)
            rows.append((name, j, target, e.value, e.stderr, z[-1]))
        print(f"{name:6s} max |z| = {max(map(abs, z)):.2f}   mean z = {np.mean(z):+.2f}")
    out = Path(args.out)
    write_csv(out / "siegel.csv", ("space", "box", "target", "mean", "stderr", "z"), rows)
    write_manifest(out / "manifest.json", vars(args), ["siegel.csv"])


if __name__ == "__main__":
    main()
