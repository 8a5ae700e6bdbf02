"""Reproduce the split table and the class-weight arithmetic.

Builds a manifest with the published per-class counts of the 2019
dermoscopy ground truth, splits 80/20 stratified, and prints the per-class
table alongside the weights the loss will use. Also shows why the printed
VASC training count in the published table (502) cannot be right: the
row's own arithmetic forces 202.
"""

import numpy as np

from lesionflow.data import (
    CLASS_NAMES,
    Manifest,
    class_distribution,
    class_weights,
    stratified_split,
)

COUNTS = {
    "MEL": 4522, "NV": 12875, "BCC": 3323, "AK": 867,
    "BKL": 2624, "DF": 239, "VASC": 253, "SCC": 628,
}


def main():
    rows = []
    for c, name in enumerate(CLASS_NAMES):
        rows.extend((f"{name}_{i:05d}", c) for i in range(COUNTS[name]))
    m = Manifest(rows=rows, source_dir=".")
    split = stratified_split(m, 0.2, seed=0)
    train = class_distribution(split.train).counts
    val = class_distribution(split.val).counts

    print(f"{'class':<6} {'total':>6} {'train':>6} {'val':>5}")
    for c, name in enumerate(CLASS_NAMES):
        print(f"{name:<6} {train[c] + val[c]:>6} {train[c]:>6} {val[c]:>5}")
    print(f"{'all':<6} {train.sum() + val.sum():>6} {train.sum():>6} {val.sum():>5}")
    print()
    print("VASC train is 253 - 51 =", COUNTS["VASC"] - val[CLASS_NAMES.index('VASC')],
          "(a widely copied table prints 502, which contradicts its totals)")
    print()

    dist = class_distribution(m)
    w_min = class_weights(dist, "min_over_count").weights
    w_lit = class_weights(dist, "literal").weights
    print(f"{'class':<6} {'count':>6} {'min_over_count':>15} {'literal':>12}")
    for c, name in enumerate(CLASS_NAMES):
        print(f"{name:<6} {dist.counts[c]:>6} {w_min[c]:>15.6f} {w_lit[c]:>12.6f}")
    # the rarest class anchors the first mode at exactly 1
    assert w_min[np.argmin(dist.counts)] == 1.0
    print("\nrarest class (DF) carries weight 1.0; every other class is scaled")
    print("down by its frequency. the literal form divides by the dataset")
    print("total instead, which makes every weight equal and is kept only to")
    print("document that reading of the formula.")


if __name__ == "__main__":
    main()
