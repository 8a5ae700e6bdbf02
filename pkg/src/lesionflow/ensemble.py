"""Prediction sets, probability averaging, and submission-format CSV I/O.

A PredictionSet holds one probability row per image id. Averaging several
sets (the two-model ensemble case and beyond) is a plain elementwise mean,
which keeps rows on the simplex. CSV files use the same eight-class header
as the ground-truth manifest, with values rendered to six decimal places.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import CLASS_NAMES
from .errors import BadHeader, BadRow, EmptyInput, IdMismatch, NotNormalized

__all__ = [
    "PredictionSet",
    "average",
    "argmax_labels",
    "read_predictions",
    "write_predictions",
]

ROW_SUM_TOL = 1e-6          # rows this close to 1 are accepted as-is
ROW_SUM_RENORM_TOL = 1e-3   # up to here rows are renormalized with a warning


@dataclass
class PredictionSet:
    """Per-image class-probability rows in a fixed id order."""

    image_ids: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        self.image_ids = tuple(self.image_ids)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.probs.shape[0] != len(self.image_ids):
            raise ValueError(f"probs must be (n_images, n_classes), got {self.probs.shape}")
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValueError("duplicate image ids")
        if len(self.image_ids) and (self.probs.min() < 0.0 or self.probs.max() > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if len(self.image_ids):
            sums = self.probs.sum(axis=1)
            if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
                raise ValueError("every probability row must sum to 1 within 1e-6")

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    def __len__(self) -> int:
        return len(self.image_ids)

    def row(self, image_id: str) -> np.ndarray:
        return self.probs[self.image_ids.index(image_id)]


def average(sets: list[PredictionSet]) -> PredictionSet:
    """Elementwise mean of the probability rows, aligned by image id.

    All sets must cover exactly the same ids (order may differ); the output
    keeps the first set's order.
    """
    if len(sets) == 0:
        raise EmptyInput("need at least one prediction set")
    first = sets[0]
    acc = first.probs.copy()
    for other in sets[1:]:
        if other.num_classes != first.num_classes:
            raise IdMismatch("prediction sets disagree on the number of classes")
        if set(other.image_ids) != set(first.image_ids):
            raise IdMismatch("prediction sets cover different image ids")
        index = {image_id: i for i, image_id in enumerate(other.image_ids)}
        order = np.array([index[image_id] for image_id in first.image_ids], dtype=np.intp)
        acc += other.probs[order]
    return PredictionSet(image_ids=first.image_ids, probs=acc / len(sets))


def argmax_labels(s: PredictionSet) -> dict[str, int]:
    """Hard label per image: the class with maximal probability, ties going
    to the lowest class index."""
    winners = np.argmax(s.probs, axis=1)
    return {image_id: int(winners[i]) for i, image_id in enumerate(s.image_ids)}


def read_predictions(path: str | Path) -> PredictionSet:
    """Read a prediction CSV (`image,MEL,...,SCC`).

    Row sums within 1e-6 of 1 pass untouched; sums off by up to 1e-3 are
    renormalized with a warning; anything worse raises NotNormalized.
    """
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    expected = ["image", *CLASS_NAMES]
    if header is None or [h.strip() for h in header] != expected:
        raise BadHeader(f"expected header {','.join(expected)}")
    ids: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise BadRow(f"line {lineno}: expected {len(expected)} fields, got {len(row)}")
        image_id = row[0].strip()
        if image_id in seen:
            raise BadRow(f"line {lineno}: duplicate image id {image_id!r}")
        seen.add(image_id)
        try:
            values = np.array([float(cell) for cell in row[1:]], dtype=np.float64)
        except ValueError:
            raise BadRow(f"line {lineno}: non-numeric probability") from None
        if values.min() < 0.0 or values.max() > 1.0:
            raise BadRow(f"line {lineno}: probabilities outside [0, 1]")
        total = values.sum()
        if abs(total - 1.0) > ROW_SUM_RENORM_TOL:
            raise NotNormalized(f"line {lineno}: row sums to {total:.6f}")
        if abs(total - 1.0) > ROW_SUM_TOL:
            warnings.warn(
                f"prediction row {image_id!r} sums to {total:.6f}; renormalizing",
                stacklevel=2,
            )
            values = values / total
        ids.append(image_id)
        rows.append(values)
    probs = np.vstack(rows) if rows else np.zeros((0, len(CLASS_NAMES)))
    return PredictionSet(image_ids=tuple(ids), probs=probs)


def _quantize_row(values: np.ndarray) -> np.ndarray:
    """Quantize one probability row to 6-decimal units summing to exactly 1.

    Largest-remainder rounding: floor everything to the 1e-6 grid, then hand
    the leftover units to the cells with the largest fractional parts. Each
    emitted value stays within one grid unit of the input.
    """
    scaled = values * 1_000_000.0
    base = np.floor(scaled).astype(np.int64)
    remainder = scaled - base
    short = 1_000_000 - int(base.sum())
    if short > 0:
        order = np.argsort(-remainder, kind="stable")
        base[order[:short]] += 1
    elif short < 0:
        order = [i for i in np.argsort(remainder, kind="stable") if base[i] > 0]
        for i in order[:-short]:
            base[i] -= 1
    return base


def write_predictions(s: PredictionSet, path: str | Path) -> None:
    """Write a prediction CSV with 6-decimal values and LF line endings.

    Rows are quantized so they sum to exactly 1.000000 on the decimal grid;
    reading the file back reproduces each emitted value without triggering
    renormalization.
    """
    if s.num_classes != len(CLASS_NAMES):
        raise ValueError(f"prediction CSV format is {len(CLASS_NAMES)}-class, set has {s.num_classes}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("image," + ",".join(CLASS_NAMES) + "\n")
        for image_id, row in zip(s.image_ids, s.probs):
            units = _quantize_row(row)
            cells = ",".join(f"{u // 1_000_000}.{u % 1_000_000:06d}" for u in units)
            fh.write(f"{image_id},{cells}\n")
