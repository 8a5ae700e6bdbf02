"""Train the small CNN twice on an imbalanced synthetic set and compare.

Run A uses uniform class weights with plain shuffled batches, run B uses
min_over_count weights with balanced batches. The dataset is three
intensity bands with a 20:5:1 class imbalance, so run A tends to ignore
the rare class while run B recovers it. Takes a few seconds on one core.
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from lesionflow.data import Manifest, stratified_split
from lesionflow.imaging import AugmentConfig, save_png_u8
from lesionflow.metrics import confusion, recall_per_class
from lesionflow.nn import TrainConfig, default_model_spec, evaluate, fit

AUG = AugmentConfig(resize_w=8, resize_h=8, center_crop=8, random_crop=8,
                    brightness_delta=0.0, flip_prob=0.5,
                    apply_color_constancy=False)


def build_dataset(root, counts=(1000, 100, 20), size=8, seed=7):
    means = (0.30, 0.50, 0.70)
    rng = np.random.default_rng(seed)
    d = Path(root) / "synth"
    d.mkdir()
    rows = []
    for c, n in enumerate(counts):
        for i in range(n):
            img = means[c] + rng.normal(0.0, 0.07) \
                + rng.normal(0.0, 0.08, (size, size, 3))
            save_png_u8(d / f"c{c}_{i}.png",
                        np.clip(np.round(img * 255), 0, 255).astype(np.uint8))
            rows.append((f"c{c}_{i}", c))
    return stratified_split(Manifest(rows=rows, source_dir=d, num_classes=3),
                            0.2, seed)


def train_and_report(split, weight_mode, sampler, tag):
    cfg = TrainConfig(lr0=2e-3, max_epochs=12, batch_size=32, seed=0,
                      sampler=sampler, weight_mode=weight_mode,
                      monitor="val_macro_recall")
    spec = default_model_spec(input_hw=8, num_classes=3)
    t0 = time.monotonic()
    ckpt, log = fit(spec, split.train, split.val, cfg, AUG)
    preds = evaluate(ckpt.spec, ckpt.params, split.val, AUG)
    cm = confusion(split.val.labels(), np.argmax(preds.probs, axis=1),
                   num_classes=3)
    rec = recall_per_class(cm)
    print(f"{tag:<28} macro recall {ckpt.metric_value:.3f}  "
          f"per-class recall {np.round(rec, 2)}  "
          f"({time.monotonic() - t0:.1f}s, best epoch {ckpt.epoch})")
    return ckpt.metric_value


def main():
    with tempfile.TemporaryDirectory() as tmp:
        split = build_dataset(tmp)
        counts = [sum(1 for _, c in split.train.rows if c == k) for k in range(3)]
        print(f"train counts per class: {counts} "
              f"(val {[sum(1 for _, c in split.val.rows if c == k) for k in range(3)]})")
        a = train_and_report(split, "uniform", "shuffled", "uniform + shuffled")
        b = train_and_report(split, "min_over_count", "balanced",
                             "weighted + balanced")
        print(f"\nweighted run improves macro recall by {b - a:+.3f}; the gap")
        print("comes almost entirely from the rare class, which the uniform")
        print("run is free to ignore at little cost to its loss.")


if __name__ == "__main__":
    main()
