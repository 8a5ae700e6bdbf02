"""Command line surface for the pipeline.

Subcommands: preprocess, split, train, eval, ensemble. Every run writes its
effective configuration to the output directory before doing any work, logs
to stderr, and produces byte-identical primary outputs given identical
inputs, flags, and seed.

Exit codes: 0 success, 1 partial failure (some items skipped), 2 usage,
config, or data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    CLASS_NAMES,
    Manifest,
    apply_split,
    class_distribution,
    load_manifest,
    read_split_csv,
    stratified_split,
    write_split_csv,
)
from .ensemble import average, read_predictions, write_predictions
from .errors import LesionFlowError
from .imaging import AugmentConfig, augment_eval, load_image, save_png_float
from .metrics import confusion, report
from .nn import (
    TrainConfig,
    default_model_spec,
    evaluate,
    fit,
    load_checkpoint,
    save_checkpoint,
    write_training_log,
)

log = logging.getLogger("lesionflow")

# Flat config keys with their documented defaults. A JSON config file may
# set any of these; command line flags win over the file.
DEFAULTS = {
    # preprocessing / augmentation
    "resize_w": 600,
    "resize_h": 450,
    "center_crop": 320,
    "random_crop": 224,
    "brightness_delta": 0.1,
    "flip_prob": 0.5,
    "apply_color_constancy": True,
    "standardize": False,
    # training
    "lr0": 1e-4,
    "plateau_factor": 0.5,
    "plateau_patience": 2,
    "max_epochs": 30,
    "batch_size": 32,
    "sampler": "shuffled",
    "weight_mode": "min_over_count",
    "monitor": "val_accuracy",
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "weight_overrides": None,
    # splitting
    "val_fraction": 0.2,
    # shared
    "seed": 0,
    "eval_batch_size": 64,
}

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class ConfigError(LesionFlowError):
    """Bad config file, unknown key, or unusable input path."""


@dataclass
class RunConfig:
    """The merged, fully resolved configuration for one command run."""

    values: dict
    out_dir: Path
    command: str

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def aug(self) -> AugmentConfig:
        v = self.values
        return AugmentConfig(
            resize_w=int(v["resize_w"]),
            resize_h=int(v["resize_h"]),
            center_crop=int(v["center_crop"]),
            random_crop=int(v["random_crop"]),
            brightness_delta=float(v["brightness_delta"]),
            flip_prob=float(v["flip_prob"]),
            apply_color_constancy=bool(v["apply_color_constancy"]),
            standardize=bool(v["standardize"]),
        )

    def train(self) -> TrainConfig:
        v = self.values
        return TrainConfig(
            lr0=float(v["lr0"]),
            plateau_factor=float(v["plateau_factor"]),
            plateau_patience=int(v["plateau_patience"]),
            max_epochs=int(v["max_epochs"]),
            batch_size=int(v["batch_size"]),
            sampler=str(v["sampler"]),
            weight_mode=str(v["weight_mode"]),
            seed=int(v["seed"]),
            monitor=str(v["monitor"]),
            beta1=float(v["beta1"]),
            beta2=float(v["beta2"]),
            eps=float(v["eps"]),
            weight_overrides=v["weight_overrides"],
        )

    def echo(self, extra: dict | None = None) -> None:
        """Write the effective config to the out dir; call before any work."""
        payload = {"command": self.command, **self.values}
        if extra:
            payload.update(extra)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        text = json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
        (self.out_dir / "config.json").write_text(text, encoding="utf-8")
        log.info("effective config written to %s", self.out_dir / "config.json")


def _resolve_config(args, command: str) -> RunConfig:
    merged = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            file_cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in file_cfg.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed
    if getattr(args, "val_frac", None) is not None:
        merged["val_fraction"] = args.val_frac
    return RunConfig(values=merged, out_dir=Path(args.out), command=command)


def _stratified_limit(m: Manifest, limit: int) -> Manifest:
    """Trim a manifest to ~limit rows, keeping class proportions.

    Largest-remainder allocation over the class counts, capped by what each
    class actually has; every nonempty class keeps at least one row. Rows
    retain manifest order, so the result is deterministic without an RNG.
    """
    if limit >= len(m.rows):
        return m
    counts = class_distribution(m).counts
    total = counts.sum()
    quotas = np.zeros(m.num_classes, dtype=np.int64)
    exact = counts * (limit / total)
    quotas = np.floor(exact).astype(np.int64)
    quotas[counts > 0] = np.maximum(quotas[counts > 0], 1)
    quotas = np.minimum(quotas, counts)
    remainder = exact - quotas
    while quotas.sum() < limit and (quotas < counts).any():
        candidates = np.flatnonzero(quotas < counts)
        pick = candidates[np.argmax(remainder[candidates])]
        quotas[pick] += 1
        remainder[pick] = -1.0
    while quotas.sum() > limit:
        candidates = np.flatnonzero(quotas > 1)
        if len(candidates) == 0:
            break
        pick = candidates[np.argmax(quotas[candidates])]
        quotas[pick] -= 1
    taken = np.zeros(m.num_classes, dtype=np.int64)
    rows = []
    for image_id, label in m.rows:
        if taken[label] < quotas[label]:
            rows.append((image_id, label))
            taken[label] += 1
    return Manifest(rows=rows, source_dir=m.source_dir, num_classes=m.num_classes)


def _write_split_summary(split, path: Path) -> None:
    """Per-class train/val counts as CSV, classes in canonical order."""
    train_counts = class_distribution(split.train).counts
    val_counts = class_distribution(split.val).counts
    lines = ["subset," + ",".join(CLASS_NAMES) + ",total"]
    for name, counts in (("train", train_counts), ("val", val_counts),
                         ("total", train_counts + val_counts)):
        lines.append(name + "," + ",".join(str(int(c)) for c in counts)
                     + f",{int(counts.sum())}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _labels_by_id(m: Manifest) -> dict[str, int]:
    return {image_id: label for image_id, label in m.rows}


def _write_reports(y_true, y_pred, out_dir: Path, stem: str = "report") -> None:
    cm = confusion(y_true, y_pred, num_classes=len(CLASS_NAMES),
                   class_names=CLASS_NAMES)
    lines = ["class," + ",".join(CLASS_NAMES)]
    for i, name in enumerate(CLASS_NAMES):
        lines.append(name + "," + ",".join(str(int(c)) for c in cm.counts[i]))
    (out_dir / "confusion.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    rep = report(cm)
    (out_dir / f"{stem}.json").write_text(rep.to_json() + "\n", encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(rep.to_text() + "\n", encoding="utf-8")


def cmd_preprocess(args) -> int:
    run = _resolve_config(args, "preprocess")
    input_dir = Path(args.input_dir)
    if not input_dir.is_dir():
        raise ConfigError(f"input dir {input_dir} does not exist or is not a directory")
    run.echo({"input_dir": str(input_dir)})
    aug = run.aug()
    files = sorted(p for p in input_dir.iterdir()
                   if p.suffix.lower() in _IMAGE_SUFFIXES and p.is_file())
    failures = 0
    entries = []
    for path in files:
        out_name = path.stem + ".png"
        try:
            img = load_image(path)
            processed = augment_eval(img, aug)
            save_png_float(run.out_dir / out_name, processed)
            entries.append((path.stem, out_name))
        except Exception as exc:
            failures += 1
            log.error("skipping %s: %s", path.name, exc)
    lines = ["image,file"] + [f"{image_id},{name}" for image_id, name in entries]
    (run.out_dir / "processed.csv").write_text("\n".join(lines) + "\n",
                                               encoding="utf-8")
    log.info("preprocessed %d files, %d failed", len(entries), failures)
    return 1 if failures else 0


def cmd_split(args) -> int:
    run = _resolve_config(args, "split")
    run.echo({"manifest": str(args.manifest)})
    m = load_manifest(args.manifest)
    split = stratified_split(m, float(run.values["val_fraction"]), run.seed)
    train_counts = class_distribution(split.train).counts
    val_counts = class_distribution(split.val).counts
    for c, name in enumerate(CLASS_NAMES):
        if train_counts[c] + val_counts[c] > 0 and (train_counts[c] == 0
                                                    or val_counts[c] == 0):
            log.warning("class %s has an empty subset (train %d, val %d)",
                        name, train_counts[c], val_counts[c])
    write_split_csv(split, run.out_dir / "splits.csv")
    _write_split_summary(split, run.out_dir / "split_summary.csv")
    log.info("split %d rows into %d train / %d val",
             len(m.rows), len(split.train.rows), len(split.val.rows))
    return 0


def cmd_train(args) -> int:
    run = _resolve_config(args, "train")
    images = args.images or str(Path(args.manifest).parent)
    run.echo({"manifest": str(args.manifest), "images": images,
              "splits": str(args.splits) if args.splits else None,
              "limit": args.limit})
    m = load_manifest(args.manifest, images)
    if args.limit is not None:
        if args.limit < 2:
            raise ConfigError("--limit must be at least 2")
        m = _stratified_limit(m, args.limit)
        log.info("limited manifest to %d rows", len(m.rows))
    if args.splits:
        train_m, val_m = apply_split(m, read_split_csv(args.splits))
    else:
        split = stratified_split(m, float(run.values["val_fraction"]), run.seed)
        write_split_csv(split, run.out_dir / "splits.csv")
        train_m, val_m = split.train, split.val
        log.info("no --splits given; wrote a fresh stratified split")
    aug = run.aug()
    tcfg = run.train()
    spec = default_model_spec(input_hw=aug.random_crop, num_classes=m.num_classes)
    log.info("training on %d rows, validating on %d rows, %d epochs max",
             len(train_m.rows), len(val_m.rows), tcfg.max_epochs)
    ckpt, epoch_log = fit(spec, train_m, val_m, tcfg, aug)
    save_checkpoint(run.out_dir / "checkpoint.lfckpt", ckpt)
    write_training_log(epoch_log, run.out_dir / "training_log.csv")
    log.info("best %s %.6f at epoch %d", ckpt.monitor, ckpt.metric_value, ckpt.epoch)
    return 0


def cmd_eval(args) -> int:
    run = _resolve_config(args, "eval")
    images = args.images or str(Path(args.manifest).parent)
    run.echo({"checkpoint": str(args.checkpoint), "manifest": str(args.manifest),
              "images": images,
              "splits": str(args.splits) if args.splits else None,
              "subset": args.subset})
    ckpt = load_checkpoint(args.checkpoint)
    m = load_manifest(args.manifest, images)
    if args.splits:
        train_m, val_m = apply_split(m, read_split_csv(args.splits))
        m = val_m if args.subset == "val" else train_m
    if not m.rows:
        raise ConfigError("nothing to evaluate after subset selection")
    preds = evaluate(ckpt.spec, ckpt.params, m, run.aug(),
                     batch_size=int(run.values["eval_batch_size"]))
    write_predictions(preds, run.out_dir / "predictions.csv")
    y_true = m.labels()
    y_pred = np.argmax(preds.probs, axis=1)
    _write_reports(y_true, y_pred, run.out_dir)
    log.info("evaluated %d rows", len(m.rows))
    return 0


def cmd_ensemble(args) -> int:
    run = _resolve_config(args, "ensemble")
    run.echo({"predictions": [str(p) for p in args.predictions],
              "truth": str(args.truth) if args.truth else None})
    sets = [read_predictions(p) for p in args.predictions]
    combined = average(sets)
    write_predictions(combined, run.out_dir / "ensemble_predictions.csv")
    if args.truth:
        truth = _labels_by_id(load_manifest(args.truth))
        missing = [i for i in combined.image_ids if i not in truth]
        if missing:
            raise ConfigError(
                f"{len(missing)} prediction ids missing from ground truth, "
                f"first: {missing[0]!r}")
        y_true = np.array([truth[i] for i in combined.image_ids])
        y_pred = np.argmax(combined.probs, axis=1)
        _write_reports(y_true, y_pred, run.out_dir)
    log.info("averaged %d prediction sets over %d images",
             len(sets), len(combined.image_ids))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesionflow",
        description="Deterministic skin lesion classification pipeline.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, default_out: str) -> None:
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (default: config value or 0)")
        p.add_argument("--config", default=None,
                       help="JSON config file with flat keys; flags override it")
        p.add_argument("--out", default=default_out,
                       help=f"output directory (default: {default_out})")

    p = sub.add_parser("preprocess",
                       help="apply the deterministic eval pipeline to a directory")
    p.add_argument("input_dir", help="directory of PNG/JPEG images")
    common(p, "preprocess_out")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", help="stratified train/val split of a manifest")
    p.add_argument("manifest", help="ground-truth CSV (one-hot label columns)")
    p.add_argument("--val-frac", type=float, default=None, dest="val_frac",
                   help="validation fraction (default 0.2)")
    common(p, "split_out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the small CNN with the weighted loss")
    p.add_argument("manifest", help="ground-truth CSV")
    p.add_argument("--images", default=None,
                   help="image directory (default: manifest's directory)")
    p.add_argument("--splits", default=None,
                   help="existing splits.csv; omit to split in-run")
    p.add_argument("--limit", type=int, default=None,
                   help="stratified subsample size for smoke runs")
    common(p, "train_out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="write predictions and reports for a checkpoint")
    p.add_argument("checkpoint", help="checkpoint file from train")
    p.add_argument("manifest", help="ground-truth CSV")
    p.add_argument("--images", default=None,
                   help="image directory (default: manifest's directory)")
    p.add_argument("--splits", default=None, help="splits.csv to select a subset")
    p.add_argument("--subset", choices=("train", "val"), default="val",
                   help="which subset to evaluate when --splits is given")
    common(p, "eval_out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble", help="average prediction CSVs")
    p.add_argument("predictions", nargs="+", help="two or more prediction CSVs")
    p.add_argument("--truth", default=None,
                   help="ground-truth CSV for a classification report")
    common(p, "ensemble_out")
    p.set_defaults(func=cmd_ensemble)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "ensemble" and len(args.predictions) < 2:
        parser.error("ensemble needs at least two prediction files")
    try:
        return args.func(args)
    except LesionFlowError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    except ValueError as exc:
        # validation errors from config values (bad sampler, fractions, ...)
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
