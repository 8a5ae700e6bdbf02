"""The training loop: weighted loss, Adam, plateau scheduling, best checkpoint.

Determinism contract: every random draw comes from a generator seeded by
(cfg.seed, purpose tag, position), so two runs with identical configs and
data produce bit-identical logs and checkpoints. Each image in a batch owns
its own derived augmentation seed, which also makes per-image work order
independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..data import (
    CLASS_NAMES,
    ClassWeights,
    Manifest,
    class_distribution,
    class_weights,
    balanced_batches,
    grouped_positions,
    resolve_image_path,
    shuffled_batches,
)
from ..ensemble import PredictionSet
from ..errors import EmptyTraining, ShapeMismatch
from ..imaging import AugmentConfig, augment_eval, augment_train, load_image
from ..metrics import accuracy, confusion, macro_average, recall_per_class
from .checkpoint import Checkpoint
from .layers import forward, loss_and_grad
from .loss import softmax
from .model import ModelSpec, Params, clone_params, init_params
from .optim import adam_step, init_adam_state, plateau_reduction_epochs

__all__ = [
    "TrainConfig",
    "EpochLog",
    "plateau_schedule",
    "fit",
    "evaluate",
    "write_training_log",
]

SAMPLERS = ("shuffled", "balanced")
MONITORS = ("val_accuracy", "val_macro_recall")

# domain tags keep the derived generators for init / batch plans / per-image
# augmentation statistically independent even under equal seeds
_INIT_TAG = 0x1717
_PLAN_TAG = 0x2A2A
_AUG_TAG = 0x3C3C


@dataclass(frozen=True)
class TrainConfig:
    """Everything the fit loop needs besides the data and the model."""

    lr0: float = 1e-4
    plateau_factor: float = 0.5
    plateau_patience: int = 2
    max_epochs: int = 30
    batch_size: int = 32
    sampler: str = "shuffled"
    weight_mode: str = "min_over_count"
    seed: int = 0
    monitor: str = "val_accuracy"
    # Adam knobs, standard defaults
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # optional per-class multiplicative overrides on top of weight_mode,
    # keyed by class name, e.g. {"MEL": 2.0}
    weight_overrides: dict | None = None

    def __post_init__(self):
        if not (0.0 < self.plateau_factor < 1.0):
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.plateau_patience < 1:
            raise ValueError("plateau_patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.monitor not in MONITORS:
            raise ValueError(f"monitor must be one of {MONITORS}")
        if self.lr0 <= 0.0:
            raise ValueError("lr0 must be positive")


@dataclass
class EpochLog:
    """One row of the training log.

    `lr` is the learning rate the optimizer used during this epoch; a
    plateau reduction triggered by this epoch's metric takes effect from
    the next epoch on.
    """

    epoch: int
    train_loss: float
    val_accuracy: float
    val_macro_recall: float
    lr: float


def plateau_schedule(history, lr: float, cfg: TrainConfig) -> float:
    """New learning rate after the latest epoch in `history`.

    The history is the full monitored-metric sequence so far; a reduction
    fires when the best value is at least `plateau_patience` epochs old and
    no reduction has happened since the later of (best epoch, last
    reduction). Stateless: past reductions are re-derived from the history.
    """
    history = list(history)
    if not history:
        raise ValueError("history must be nonempty")
    fired = plateau_reduction_epochs(history, cfg.plateau_patience)
    return lr * cfg.plateau_factor if len(history) in fired else lr


class _ImageStore:
    """Decoded-image cache keyed by resolved path; FIFO eviction.

    Desk-scale datasets fit comfortably; the cap only matters if someone
    points the loop at a big directory.
    """

    def __init__(self, cap: int = 4096):
        self.cap = cap
        self._cache: dict[str, np.ndarray] = {}

    def get(self, source_dir, image_id: str) -> np.ndarray:
        path = str(resolve_image_path(source_dir, image_id))
        img = self._cache.get(path)
        if img is None:
            img = load_image(path)
            if len(self._cache) >= self.cap:
                self._cache.pop(next(iter(self._cache)))
            self._cache[path] = img
        return img


def _aug_rng(seed: int, epoch: int, batch_idx: int, slot_idx: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed, _AUG_TAG, epoch, batch_idx, slot_idx])
    )


def _class_names_for(num_classes: int) -> tuple:
    if num_classes == len(CLASS_NAMES):
        return tuple(CLASS_NAMES)
    return tuple(f"class_{i}" for i in range(num_classes))


def _resolve_weights(train: Manifest, cfg: TrainConfig) -> ClassWeights:
    dist = class_distribution(train)
    w = class_weights(dist, cfg.weight_mode)
    if cfg.weight_overrides:
        names = _class_names_for(train.num_classes)
        values = w.weights.copy()
        for name, mult in cfg.weight_overrides.items():
            if name not in names:
                raise ValueError(f"weight override for unknown class {name!r}")
            values[names.index(name)] *= float(mult)
        w = class_weights(dist, "custom", custom=values)
    return w


def _predict_probs(spec: ModelSpec, params: Params, m: Manifest,
                   aug: AugmentConfig, store: _ImageStore,
                   batch_size: int = 64) -> np.ndarray:
    """Deterministic eval-path probabilities for every manifest row, in order."""
    rows = m.rows
    out = np.empty((len(rows), spec.output_features), dtype=np.float64)
    for start in range(0, len(rows), batch_size):
        chunk = rows[start:start + batch_size]
        xs = []
        for image_id, _ in chunk:
            img = store.get(m.source_dir, image_id)
            xs.append(augment_eval(img, aug).transpose(2, 0, 1))
        logits = forward(spec, params, np.stack(xs))
        out[start:start + len(chunk)] = softmax(logits)
    return out


def fit(spec: ModelSpec, train: Manifest, val: Manifest, cfg: TrainConfig,
        aug: AugmentConfig) -> tuple[Checkpoint, list[EpochLog]]:
    """Train with the weighted loss; return (best checkpoint, per-epoch log).

    Per epoch: build the batch plan for cfg.sampler, augment each drawn
    image with its own derived seed, run forward/backward/adam_step, then
    evaluate on the validation manifest and update the learning rate by the
    plateau rule. The checkpoint tracks the best monitored metric under
    strict improvement, so the first epoch attaining the maximum wins.
    """
    if cfg.max_epochs < 1:
        raise EmptyTraining("max_epochs must be >= 1")
    if not train.rows:
        raise EmptyTraining("training manifest is empty")
    if not val.rows:
        raise EmptyTraining("validation manifest is empty")
    if train.num_classes != val.num_classes:
        raise ShapeMismatch(
            f"train has {train.num_classes} classes, val has {val.num_classes}"
        )
    num_classes = train.num_classes
    spec.validate(num_classes)

    weights = _resolve_weights(train, cfg)
    labels = train.labels()
    val_labels = val.labels()
    dist = class_distribution(train)
    grouped = grouped_positions(labels, num_classes)
    n_train = len(train.rows)
    num_batches = math.ceil(n_train / cfg.batch_size)

    params = init_params(spec, np.random.SeedSequence([cfg.seed, _INIT_TAG]))
    state = init_adam_state(params, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    store = _ImageStore()

    lr = cfg.lr0
    history: list[float] = []
    log: list[EpochLog] = []
    best_metric = -np.inf
    best: Checkpoint | None = None

    for epoch in range(1, cfg.max_epochs + 1):
        plan_seed = np.random.SeedSequence([cfg.seed, _PLAN_TAG, epoch])
        if cfg.sampler == "balanced":
            plan = balanced_batches(dist.counts, cfg.batch_size, num_batches, plan_seed)
            batches = [grouped[b] for b in plan.batches]
        else:
            plan = shuffled_batches(n_train, cfg.batch_size, plan_seed)
            batches = plan.batches

        loss_sum = 0.0
        seen = 0
        for batch_idx, positions in enumerate(batches):
            xs = []
            for slot_idx, pos in enumerate(positions):
                image_id, _ = train.rows[pos]
                rng = _aug_rng(cfg.seed, epoch, batch_idx, slot_idx)
                img = store.get(train.source_dir, image_id)
                xs.append(augment_train(img, aug, rng).transpose(2, 0, 1))
            batch = np.stack(xs)
            y = labels[positions]
            loss, grads = loss_and_grad(spec, params, batch, y, weights)
            params, state = adam_step(params, grads, state, lr)
            loss_sum += loss * len(positions)
            seen += len(positions)
        train_loss = loss_sum / seen

        probs = _predict_probs(spec, params, val, aug, store)
        preds = np.argmax(probs, axis=1)
        cm = confusion(val_labels, preds, num_classes=num_classes)
        val_acc = accuracy(cm)
        val_mrec = macro_average(recall_per_class(cm), cm.supports)

        metric = val_acc if cfg.monitor == "val_accuracy" else val_mrec
        history.append(metric)
        log.append(EpochLog(epoch, train_loss, val_acc, val_mrec, lr))

        if metric > best_metric:
            best_metric = metric
            best = Checkpoint(
                spec=spec,
                params=clone_params(params),
                epoch=epoch,
                monitor=cfg.monitor,
                metric_value=float(metric),
                class_names=_class_names_for(num_classes),
                seed=cfg.seed,
                weight_mode=cfg.weight_mode,
            )
        lr = plateau_schedule(history, lr, cfg)

    assert best is not None
    return best, log


def evaluate(spec: ModelSpec, params: Params, m: Manifest,
             aug: AugmentConfig, batch_size: int = 64) -> PredictionSet:
    """Deterministic predictions for a manifest: augment_eval, forward, softmax."""
    if not m.rows:
        raise EmptyTraining("manifest is empty")
    probs = _predict_probs(spec, params, m, aug, _ImageStore(), batch_size)
    return PredictionSet(image_ids=tuple(m.image_ids()), probs=probs)


def write_training_log(log: list[EpochLog], path) -> None:
    lines = ["epoch,train_loss,val_accuracy,val_macro_recall,lr"]
    for row in log:
        lines.append(
            f"{row.epoch},{row.train_loss:.10g},{row.val_accuracy:.10g},"
            f"{row.val_macro_recall:.10g},{row.lr:.10g}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
