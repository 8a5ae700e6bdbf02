"""Average two prediction files and inspect the CSV round trip.

Two disagreeing "models" are combined by elementwise probability
averaging. Also shows the 6-decimal CSV discipline: rows are quantized so
they sum to exactly 1.000000, and a second write/read cycle is lossless.
"""

import tempfile
from pathlib import Path

import numpy as np

from lesionflow.data import CLASS_NAMES
from lesionflow.ensemble import (
    PredictionSet,
    average,
    read_predictions,
    write_predictions,
)


def show(tag, ps):
    print(tag)
    for image_id, row in zip(ps.image_ids, ps.probs):
        top = np.argmax(row)
        cells = " ".join(f"{v:.3f}" for v in row)
        print(f"  {image_id}: [{cells}] -> {CLASS_NAMES[top]}")


def main():
    ids = ("lesion_01", "lesion_02")
    confident_mel = np.array([
        [.70, .10, .05, .05, .04, .03, .02, .01],
        [.20, .60, .05, .05, .04, .03, .02, .01],
    ])
    confident_nv = np.array([
        [.30, .45, .10, .05, .04, .03, .02, .01],
        [.05, .80, .05, .04, .03, .01, .01, .01],
    ])
    one = PredictionSet(image_ids=ids, probs=confident_mel)
    two = PredictionSet(image_ids=ids, probs=confident_nv)

    show("model one", one)
    show("model two", two)
    combined = average([one, two])
    show("ensemble (mean)", combined)
    print("\nthe models disagree on lesion_01; the average keeps MEL ahead")
    print("because model one is more confident than model two.\n")

    with tempfile.TemporaryDirectory() as tmp:
        f1 = Path(tmp) / "a.csv"
        f2 = Path(tmp) / "b.csv"
        write_predictions(combined, f1)
        back = read_predictions(f1)
        write_predictions(back, f2)
        print("first file line 2: ", f1.read_text().splitlines()[1])
        print("rows sum to exactly one at 6 decimals:",
              all(abs(sum(float(v) for v in line.split(",")[1:]) - 1.0) < 1e-12
                  for line in f1.read_text().splitlines()[1:]))
        print("write -> read -> write is byte-identical:",
              f1.read_bytes() == f2.read_bytes())


if __name__ == "__main__":
    main()
