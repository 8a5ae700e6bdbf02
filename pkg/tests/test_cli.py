"""Subcommand behavior: exit codes, outputs, and byte determinism."""

import json

import numpy as np
import pytest
from conftest import make_image_dir, onehot_csv

from lesionflow import cli
from lesionflow.cli import _stratified_limit
from lesionflow.data import Manifest, class_distribution
from lesionflow.ensemble import PredictionSet, read_predictions, write_predictions


SMALL_CFG = {
    "resize_w": 10,
    "resize_h": 10,
    "center_crop": 9,
    "random_crop": 8,
    "brightness_delta": 0.05,
    "apply_color_constancy": False,
    "lr0": 1e-3,
    "max_epochs": 2,
    "batch_size": 8,
    "eval_batch_size": 16,
}


def write_cfg(tmp_path, extra=None, name="cfg.json"):
    cfg = dict(SMALL_CFG)
    if extra:
        cfg.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def dataset_on_disk(tmp_path, per_class=6):
    rows = [(f"img_{c}_{i}", c) for c in range(8) for i in range(per_class)]
    img_dir = make_image_dir(tmp_path, rows, size=10)
    truth = img_dir / "truth.csv"
    truth.write_text(onehot_csv(rows), encoding="utf-8")
    return rows, img_dir, truth


# ---------------------------------------------------------------- preprocess

def test_preprocess_writes_outputs_and_listing(tmp_path):
    rows, img_dir, _ = dataset_on_disk(tmp_path, per_class=1)
    out = tmp_path / "pre"
    code = cli.main(["preprocess", str(img_dir), "--out", str(out),
                     "--config", write_cfg(tmp_path)])
    assert code == 0
    assert (out / "config.json").exists()
    listing = (out / "processed.csv").read_text(encoding="utf-8").splitlines()
    assert listing[0] == "image,file"
    assert len(listing) == 1 + len(rows)
    for line in listing[1:]:
        image_id, name = line.split(",")
        assert (out / name).exists()


def test_preprocess_skips_corrupt_file_with_exit_1(tmp_path):
    rows, img_dir, _ = dataset_on_disk(tmp_path, per_class=1)
    (img_dir / "broken.png").write_bytes(b"this is not a png")
    out = tmp_path / "pre"
    code = cli.main(["preprocess", str(img_dir), "--out", str(out),
                     "--config", write_cfg(tmp_path)])
    assert code == 1
    listing = (out / "processed.csv").read_text(encoding="utf-8")
    assert "broken" not in listing
    assert len(listing.splitlines()) == 1 + len(rows)


def test_preprocess_empty_dir_succeeds(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    out = tmp_path / "pre"
    code = cli.main(["preprocess", str(empty), "--out", str(out)])
    assert code == 0
    assert (out / "processed.csv").read_text(encoding="utf-8") == "image,file\n"


def test_preprocess_missing_dir_is_config_error(tmp_path):
    code = cli.main(["preprocess", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "pre")])
    assert code == 2


# --------------------------------------------------------------------- split

def test_split_writes_assignment_and_summary(tmp_path):
    rows, img_dir, truth = dataset_on_disk(tmp_path)
    out = tmp_path / "split"
    code = cli.main(["split", str(truth), "--out", str(out), "--seed", "0"])
    assert code == 0
    lines = (out / "splits.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "image,subset"
    assert len(lines) == 1 + len(rows)
    summary = (out / "split_summary.csv").read_text(encoding="utf-8").splitlines()
    assert summary[0].startswith("subset,MEL,NV,")
    total_row = summary[3].split(",")
    assert total_row[0] == "total"
    assert total_row[-1] == str(len(rows))
    # 6 per class at 0.2 -> round-half-up(1.2) = 1 val each
    val_row = summary[2].split(",")
    assert val_row[1:-1] == ["1"] * 8
    assert val_row[-1] == "8"


def test_split_same_seed_same_bytes(tmp_path):
    _, _, truth = dataset_on_disk(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["split", str(truth), "--out", str(out_a), "--seed", "4"]) == 0
    assert cli.main(["split", str(truth), "--out", str(out_b), "--seed", "4"]) == 0
    assert (out_a / "splits.csv").read_bytes() == (out_b / "splits.csv").read_bytes()


def test_flag_overrides_config_file(tmp_path):
    _, _, truth = dataset_on_disk(tmp_path)
    cfg = write_cfg(tmp_path, {"seed": 7, "val_fraction": 0.5})
    out = tmp_path / "split"
    code = cli.main(["split", str(truth), "--out", str(out),
                     "--config", cfg, "--seed", "3"])
    assert code == 0
    echoed = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert echoed["command"] == "split"
    assert echoed["seed"] == 3
    assert echoed["val_fraction"] == 0.5


def test_unknown_config_key_named_in_error(tmp_path, caplog):
    _, _, truth = dataset_on_disk(tmp_path)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"resize_q": 5}), encoding="utf-8")
    code = cli.main(["split", str(truth), "--out", str(tmp_path / "o"),
                     "--config", str(bad)])
    assert code == 2
    assert "resize_q" in caplog.text


def test_bad_config_value_is_exit_2(tmp_path):
    rows, img_dir, truth = dataset_on_disk(tmp_path)
    cfg = write_cfg(tmp_path, {"sampler": "roulette"})
    code = cli.main(["train", str(truth), "--out", str(tmp_path / "t"),
                     "--config", cfg])
    assert code == 2


def test_missing_manifest_is_exit_2(tmp_path):
    code = cli.main(["split", str(tmp_path / "nothing.csv"),
                     "--out", str(tmp_path / "o")])
    assert code == 2


# --------------------------------------------------------------------- train

def train_once(tmp_path, out_name, extra_args=()):
    _, img_dir, truth = dataset_on_disk(tmp_path)
    out = tmp_path / out_name
    code = cli.main(["train", str(truth), "--out", str(out),
                     "--config", write_cfg(tmp_path), "--seed", "0",
                     *extra_args])
    return code, out


def test_train_produces_checkpoint_and_log(tmp_path):
    code, out = train_once(tmp_path, "train")
    assert code == 0
    assert (out / "checkpoint.lfckpt").exists()
    assert (out / "splits.csv").exists()
    log_lines = (out / "training_log.csv").read_text(encoding="utf-8").splitlines()
    assert log_lines[0] == "epoch,train_loss,val_accuracy,val_macro_recall,lr"
    assert len(log_lines) == 1 + SMALL_CFG["max_epochs"]


def test_train_runs_are_byte_identical(tmp_path):
    code_a, out_a = train_once(tmp_path, "ta")
    code_b, out_b = train_once(tmp_path, "tb")
    assert code_a == code_b == 0
    for name in ("checkpoint.lfckpt", "training_log.csv", "splits.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_train_accepts_existing_splits(tmp_path):
    _, img_dir, truth = dataset_on_disk(tmp_path)
    split_out = tmp_path / "split"
    assert cli.main(["split", str(truth), "--out", str(split_out)]) == 0
    out = tmp_path / "train"
    code = cli.main(["train", str(truth), "--out", str(out),
                     "--config", write_cfg(tmp_path),
                     "--splits", str(split_out / "splits.csv")])
    assert code == 0
    assert not (out / "splits.csv").exists()
    assert (out / "checkpoint.lfckpt").exists()


def test_train_limit_smoke_run(tmp_path):
    _, img_dir, truth = dataset_on_disk(tmp_path)
    out = tmp_path / "train"
    cfg = write_cfg(tmp_path, {"val_fraction": 0.5})
    code = cli.main(["train", str(truth), "--out", str(out),
                     "--config", cfg, "--limit", "16"])
    assert code == 0
    with open(out / "splits.csv", encoding="utf-8") as fh:
        n_rows = len(fh.read().splitlines()) - 1
    assert n_rows == 16


def test_train_limit_below_two_rejected(tmp_path):
    _, _, truth = dataset_on_disk(tmp_path)
    code = cli.main(["train", str(truth), "--out", str(tmp_path / "t"),
                     "--config", write_cfg(tmp_path), "--limit", "1"])
    assert code == 2


def test_stratified_limit_respects_proportions():
    rows = [(f"a{i}", 0) for i in range(12)]
    rows += [(f"b{i}", 1) for i in range(6)]
    rows += [(f"c{i}", 2) for i in range(3)]
    m = Manifest(rows=rows, source_dir=".", num_classes=3)
    trimmed = _stratified_limit(m, 7)
    counts = class_distribution(trimmed).counts
    assert counts.tolist() == [4, 2, 1]
    # every nonempty class keeps at least one row even when tiny
    skewed = Manifest(rows=[(f"x{i}", 0) for i in range(8)]
                      + [("y0", 1), ("z0", 2)],
                      source_dir=".", num_classes=3)
    trimmed = _stratified_limit(skewed, 5)
    counts = class_distribution(trimmed).counts
    assert counts.tolist() == [3, 1, 1]
    # limit >= size is a no-op
    assert _stratified_limit(m, 100) is m


# ---------------------------------------------------------------------- eval

def test_eval_writes_predictions_and_reports(tmp_path):
    code, train_out = train_once(tmp_path, "train")
    assert code == 0
    truth = tmp_path / "images" / "truth.csv"
    out = tmp_path / "eval"
    code = cli.main(["eval", str(train_out / "checkpoint.lfckpt"), str(truth),
                     "--out", str(out), "--config", write_cfg(tmp_path),
                     "--splits", str(train_out / "splits.csv")])
    assert code == 0
    preds = read_predictions(out / "predictions.csv")
    assert len(preds.image_ids) == 8  # val subset: 1 per class
    for name in ("confusion.csv", "report.json", "report.txt"):
        assert (out / name).exists()
    rep = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert 0.0 <= rep["accuracy"] <= 1.0


def test_eval_is_byte_deterministic(tmp_path):
    code, train_out = train_once(tmp_path, "train")
    assert code == 0
    truth = tmp_path / "images" / "truth.csv"
    outs = []
    for name in ("e1", "e2"):
        out = tmp_path / name
        code = cli.main(["eval", str(train_out / "checkpoint.lfckpt"), str(truth),
                         "--out", str(out), "--config", write_cfg(tmp_path)])
        assert code == 0
        outs.append(out)
    a = (outs[0] / "predictions.csv").read_bytes()
    b = (outs[1] / "predictions.csv").read_bytes()
    assert a == b


def test_eval_empty_subset_is_exit_2(tmp_path):
    code, train_out = train_once(tmp_path, "train")
    assert code == 0
    rows, _, truth = dataset_on_disk(tmp_path)
    all_train = tmp_path / "all_train.csv"
    all_train.write_text(
        "image,subset\n" + "".join(f"{i},train\n" for i, _ in rows),
        encoding="utf-8")
    code = cli.main(["eval", str(train_out / "checkpoint.lfckpt"),
                     str(tmp_path / "images" / "truth.csv"),
                     "--out", str(tmp_path / "e"),
                     "--config", write_cfg(tmp_path),
                     "--splits", str(all_train), "--subset", "val"])
    assert code == 2


def test_eval_corrupt_checkpoint_is_exit_2(tmp_path):
    _, _, truth = dataset_on_disk(tmp_path)
    fake = tmp_path / "fake.lfckpt"
    fake.write_bytes(b"garbage")
    code = cli.main(["eval", str(fake), str(truth),
                     "--out", str(tmp_path / "e")])
    assert code == 2


# ------------------------------------------------------------------ ensemble

def synthetic_prediction_files(tmp_path, seed=0):
    rng = np.random.default_rng(seed)
    ids = tuple(f"img_{i}" for i in range(5))
    paths = []
    sets = []
    for k in range(2):
        raw = rng.uniform(0.05, 1.0, size=(5, 8))
        probs = raw / raw.sum(axis=1, keepdims=True)
        ps = PredictionSet(image_ids=ids, probs=probs)
        path = tmp_path / f"preds_{k}.csv"
        write_predictions(ps, path)
        paths.append(str(path))
        sets.append(read_predictions(path))
    return ids, paths, sets


def test_ensemble_averages_files(tmp_path):
    ids, paths, sets = synthetic_prediction_files(tmp_path)
    out = tmp_path / "ens"
    code = cli.main(["ensemble", *paths, "--out", str(out)])
    assert code == 0
    combined = read_predictions(out / "ensemble_predictions.csv")
    want = (sets[0].probs + sets[1].probs) / 2.0
    assert combined.image_ids == ids
    assert np.abs(combined.probs - want).max() <= 1e-6


def test_ensemble_with_truth_writes_report(tmp_path):
    ids, paths, _ = synthetic_prediction_files(tmp_path)
    truth = tmp_path / "truth.csv"
    truth.write_text(onehot_csv([(i, k % 8) for k, i in enumerate(ids)]),
                     encoding="utf-8")
    out = tmp_path / "ens"
    code = cli.main(["ensemble", *paths, "--truth", str(truth),
                     "--out", str(out)])
    assert code == 0
    assert (out / "report.json").exists()
    assert (out / "confusion.csv").exists()


def test_ensemble_missing_truth_id_is_exit_2(tmp_path):
    ids, paths, _ = synthetic_prediction_files(tmp_path)
    truth = tmp_path / "truth.csv"
    truth.write_text(onehot_csv([(i, 0) for i in ids[:-1]]), encoding="utf-8")
    code = cli.main(["ensemble", *paths, "--truth", str(truth),
                     "--out", str(tmp_path / "ens")])
    assert code == 2


def test_ensemble_single_file_is_usage_error(tmp_path):
    ids, paths, _ = synthetic_prediction_files(tmp_path)
    with pytest.raises(SystemExit) as info:
        cli.main(["ensemble", paths[0], "--out", str(tmp_path / "ens")])
    assert info.value.code == 2
