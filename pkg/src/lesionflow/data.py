"""Manifest ingestion, class distributions, stratified splitting, class
weights, and batch sampling (plain shuffled and oversampling-balanced).

The canonical label set is the eight-class dermoscopy vocabulary in the
ground-truth CSV column order:

    index  0    1   2    3   4    5   6     7
    name   MEL  NV  BCC  AK  BKL  DF  VASC  SCC

Labels are stored as integer indices. Everything except the CSV formats is
parameterized by the number of classes, so small synthetic problems (3
classes, say) run through the same machinery; the CSV interfaces are always
eight-class.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadHeader,
    DuplicateId,
    MissingImageFile,
    NoSamples,
    NotOneHot,
    ZeroClassCount,
)

__all__ = [
    "CLASS_NAMES",
    "NUM_CLASSES",
    "label_index",
    "label_name",
    "Manifest",
    "ClassDistribution",
    "ClassWeights",
    "SplitAssignment",
    "BatchPlan",
    "parse_manifest",
    "load_manifest",
    "class_distribution",
    "stratified_split",
    "class_weights",
    "balanced_batches",
    "shuffled_batches",
    "grouped_positions",
    "resolve_image_path",
    "write_split_csv",
    "read_split_csv",
    "apply_split",
]

CLASS_NAMES = ("MEL", "NV", "BCC", "AK", "BKL", "DF", "VASC", "SCC")
NUM_CLASSES = len(CLASS_NAMES)

_NAME_TO_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}


def label_index(name: str) -> int:
    """Canonical index of a class name."""
    try:
        return _NAME_TO_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown class name {name!r}") from None


def label_name(index: int) -> str:
    """Canonical name of a class index."""
    return CLASS_NAMES[index]


@dataclass
class Manifest:
    """Labeled sample records: (image_id, label index) plus the directory
    where image files live."""

    rows: list[tuple[str, int]]
    source_dir: Path = field(default_factory=Path)
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        self.source_dir = Path(self.source_dir)
        for image_id, label in self.rows:
            if not 0 <= label < self.num_classes:
                raise ValueError(f"label {label} for {image_id!r} out of range")

    def __len__(self) -> int:
        return len(self.rows)

    def image_ids(self) -> list[str]:
        return [image_id for image_id, _ in self.rows]

    def labels(self) -> np.ndarray:
        return np.array([label for _, label in self.rows], dtype=np.int64)


@dataclass
class ClassDistribution:
    """Per-class sample counts n_c and their total N."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or (self.counts < 0).any():
            raise ValueError("counts must be a 1-D array of non-negative integers")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def num_classes(self) -> int:
        return len(self.counts)


@dataclass
class ClassWeights:
    """Per-class loss weights and the mode that produced them."""

    weights: np.ndarray
    mode: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if (self.weights <= 0.0).any():
            raise ValueError("class weights must be positive")


@dataclass
class SplitAssignment:
    """Disjoint train/validation partition of a source manifest."""

    train: Manifest
    val: Manifest
    seed: int
    val_fraction: float


@dataclass
class BatchPlan:
    """One epoch's batches as lists of sample indices.

    For the ``shuffled`` strategy, indices address manifest rows directly.
    For ``balanced``, indices address the grouped-by-class ordering (class
    0's samples first, then class 1's, ...); map them to manifest rows with
    :func:`grouped_positions`.
    """

    batches: list[np.ndarray]
    batch_size: int
    strategy: str


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def parse_manifest(csv_bytes: bytes | str, source_dir: str | Path) -> Manifest:
    """Parse a ground-truth CSV (`image,MEL,NV,BCC,AK,BKL,DF,VASC,SCC`).

    Each row must be one-hot over the eight label columns; "1" and "1.0"
    both count as one. Rows come back in file order.
    """
    if isinstance(csv_bytes, bytes):
        text = csv_bytes.decode("utf-8")
    else:
        text = csv_bytes
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise BadHeader("empty manifest CSV") from None
    expected = ["image", *CLASS_NAMES]
    if [h.strip() for h in header] != expected:
        raise BadHeader(f"expected header {','.join(expected)}, got {','.join(header)}")

    rows: list[tuple[str, int]] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise NotOneHot(f"line {lineno}: expected {len(expected)} fields, got {len(row)}")
        image_id = row[0].strip()
        if image_id in seen:
            raise DuplicateId(f"line {lineno}: duplicate image id {image_id!r}")
        seen.add(image_id)
        ones = []
        for c, cell in enumerate(row[1:]):
            try:
                value = float(cell)
            except ValueError:
                raise NotOneHot(f"line {lineno}: non-numeric label cell {cell!r}") from None
            if value == 1.0:
                ones.append(c)
            elif value != 0.0:
                raise NotOneHot(f"line {lineno}: label cell {cell!r} is neither 0 nor 1")
        if len(ones) != 1:
            raise NotOneHot(f"line {lineno}: row has {len(ones)} ones, expected exactly 1")
        rows.append((image_id, ones[0]))
    return Manifest(rows=rows, source_dir=Path(source_dir))


def load_manifest(path: str | Path, source_dir: str | Path | None = None) -> Manifest:
    """Read a ground-truth CSV from disk; image files default to its directory."""
    path = Path(path)
    return parse_manifest(path.read_bytes(), source_dir if source_dir is not None else path.parent)


def class_distribution(m: Manifest) -> ClassDistribution:
    """Count manifest rows per class."""
    counts = np.bincount(m.labels(), minlength=m.num_classes) if len(m) else np.zeros(m.num_classes, dtype=np.int64)
    return ClassDistribution(counts=counts)


def stratified_split(m: Manifest, val_fraction: float, seed: int) -> SplitAssignment:
    """Per-class shuffled split: the first round(val_fraction * n_c) samples
    of each class (round half up) go to validation.

    Classes are processed in canonical order with a single seeded generator,
    so the result is a pure function of (manifest, fraction, seed). Rows keep
    their source order inside each subset. Empty classes contribute nothing.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    labels = m.labels()
    val_positions: list[int] = []
    for c in range(m.num_classes):
        positions = np.flatnonzero(labels == c)
        if len(positions) == 0:
            continue
        n_val = _round_half_up(val_fraction * len(positions))
        perm = rng.permutation(len(positions))
        val_positions.extend(int(p) for p in positions[perm[:n_val]])
    val_set = set(val_positions)
    train_rows = [row for i, row in enumerate(m.rows) if i not in val_set]
    val_rows = [row for i, row in enumerate(m.rows) if i in val_set]
    make = lambda rows: Manifest(rows=rows, source_dir=m.source_dir, num_classes=m.num_classes)
    return SplitAssignment(train=make(train_rows), val=make(val_rows), seed=seed, val_fraction=val_fraction)


def class_weights(
    d: ClassDistribution,
    mode: str = "min_over_count",
    custom: np.ndarray | None = None,
) -> ClassWeights:
    """Compute per-class loss weights.

    Modes:
      min_over_count  (default) w_c = min_i(n_i) / n_c; the rarest class
                      gets exactly 1.0 and frequent classes get small weights.
      literal         w_c = min_i(n_i) / N for every class. This is the
                      imbalance formula taken verbatim, kept selectable to
                      document that it is class-independent.
      uniform         w_c = 1.
      custom          caller-supplied positive values.
    """
    counts = d.counts
    if mode == "min_over_count":
        if (counts == 0).any():
            raise ZeroClassCount("min_over_count mode needs every class count > 0")
        w = counts.min() / counts.astype(np.float64)
    elif mode == "literal":
        if (counts == 0).any():
            raise ZeroClassCount("literal mode needs every class count > 0")
        w = np.full(d.num_classes, counts.min() / d.total, dtype=np.float64)
    elif mode == "uniform":
        w = np.ones(d.num_classes, dtype=np.float64)
    elif mode == "custom":
        if custom is None:
            raise ValueError("custom mode needs explicit weights")
        w = np.asarray(custom, dtype=np.float64)
        if w.shape != (d.num_classes,):
            raise ValueError(f"custom weights must have shape ({d.num_classes},)")
    else:
        raise ValueError(f"unknown weight mode {mode!r}")
    return ClassWeights(weights=w, mode=mode)


def grouped_positions(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Map grouped-by-class indices to original row positions.

    Entry g of the result is the manifest row position of the g-th sample in
    the ordering that lists all of class 0's rows first (in row order), then
    class 1's, and so on. Balanced batch plans index this ordering.
    """
    labels = np.asarray(labels)
    return np.concatenate(
        [np.flatnonzero(labels == c) for c in range(num_classes)]
        or [np.array([], dtype=np.intp)]
    )


def balanced_batches(
    train_size_per_class,
    batch_size: int,
    num_batches: int,
    seed: int,
) -> BatchPlan:
    """Build oversampling-balanced batches.

    Batch slots are assigned round-robin over the nonempty classes in
    canonical order, so per-batch class counts differ by at most one. Each
    slot is then filled by a uniform draw with replacement from that class's
    samples; rare classes get oversampled as a consequence. Indices follow
    the grouped-by-class convention (see :class:`BatchPlan`).
    """
    counts = np.asarray(train_size_per_class, dtype=np.int64)
    if batch_size < 1 or num_batches < 1:
        raise ValueError("batch_size and num_batches must be positive")
    nonempty = np.flatnonzero(counts > 0)
    if len(nonempty) == 0:
        raise NoSamples("all classes are empty")
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    slot_classes = nonempty[np.arange(batch_size) % len(nonempty)]
    rng = np.random.default_rng(seed)
    batches = []
    for _ in range(num_batches):
        within = rng.integers(0, counts[slot_classes])
        batches.append(offsets[slot_classes] + within)
    return BatchPlan(batches=batches, batch_size=batch_size, strategy="balanced")


def shuffled_batches(n: int, batch_size: int, seed: int) -> BatchPlan:
    """Chunk a seeded permutation of range(n) into batches; the last batch
    may be short. Every index appears exactly once."""
    if n < 1:
        raise ValueError("n must be positive")
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    perm = np.random.default_rng(seed).permutation(n)
    batches = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    return BatchPlan(batches=batches, batch_size=batch_size, strategy="shuffled")


_IMAGE_EXTENSIONS = ("", ".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG")


def resolve_image_path(source_dir: str | Path, image_id: str) -> Path:
    """Locate the file for an image id, trying PNG/JPEG extensions."""
    source_dir = Path(source_dir)
    for ext in _IMAGE_EXTENSIONS:
        candidate = source_dir / f"{image_id}{ext}"
        if candidate.is_file():
            return candidate
    raise MissingImageFile(f"no image file for id {image_id!r} under {source_dir}")


def write_split_csv(split: SplitAssignment, path: str | Path) -> None:
    """Write the `image,subset` CSV: training rows first, then validation,
    each block in source order. LF line endings."""
    order = {image_id: "train" for image_id, _ in split.train.rows}
    order.update({image_id: "val" for image_id, _ in split.val.rows})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("image,subset\n")
        for image_id, subset in order.items():
            fh.write(f"{image_id},{subset}\n")


def read_split_csv(path: str | Path) -> dict[str, str]:
    """Read a split CSV back into {image_id: "train" | "val"}."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["image", "subset"]:
        raise BadHeader("expected header image,subset")
    assignment = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2 or row[1] not in ("train", "val"):
            raise BadHeader(f"line {lineno}: malformed split row {row!r}")
        if row[0] in assignment:
            raise DuplicateId(f"line {lineno}: duplicate image id {row[0]!r}")
        assignment[row[0]] = row[1]
    return assignment


def apply_split(m: Manifest, assignment: dict[str, str]) -> tuple[Manifest, Manifest]:
    """Partition a manifest into (train, val) by a split-CSV assignment."""
    train_rows, val_rows = [], []
    for image_id, label in m.rows:
        subset = assignment.get(image_id)
        if subset == "train":
            train_rows.append((image_id, label))
        elif subset == "val":
            val_rows.append((image_id, label))
        else:
            raise ValueError(f"image id {image_id!r} missing from the split assignment")
    make = lambda rows: Manifest(rows=rows, source_dir=m.source_dir, num_classes=m.num_classes)
    return make(train_rows), make(val_rows)
