"""Shared fixtures: tiny synthetic images and manifests on disk."""

import numpy as np
import pytest

from lesionflow.data import CLASS_NAMES, Manifest
from lesionflow.imaging import save_png_u8


def random_u8_image(rng, h=12, w=12):
    return rng.integers(0, 256, (h, w, 3)).astype(np.uint8)


def make_image_dir(tmp_path, rows, size=12, seed=0):
    """Write one random PNG per (image_id, label) row; returns the directory."""
    rng = np.random.default_rng(seed)
    d = tmp_path / "images"
    d.mkdir(exist_ok=True)
    for image_id, _ in rows:
        save_png_u8(d / f"{image_id}.png", random_u8_image(rng, size, size))
    return d


def onehot_csv(rows, num_classes=8):
    """Ground-truth CSV text for (image_id, label_index) rows."""
    header = "image," + ",".join(CLASS_NAMES[:num_classes])
    lines = [header]
    for image_id, label in rows:
        cells = ["1.0" if c == label else "0.0" for c in range(num_classes)]
        lines.append(image_id + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


@pytest.fixture
def tiny_dataset(tmp_path):
    """48 random 12x12 images over all 8 classes, with manifest on disk."""
    rows = [(f"img_{c}_{i}", c) for c in range(8) for i in range(6)]
    img_dir = make_image_dir(tmp_path, rows)
    truth = tmp_path / "truth.csv"
    truth.write_text(onehot_csv(rows), encoding="utf-8")
    manifest = Manifest(rows=rows, source_dir=img_dir)
    return {"rows": rows, "dir": img_dir, "truth": truth, "manifest": manifest}
