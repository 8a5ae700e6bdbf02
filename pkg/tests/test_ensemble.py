"""Prediction averaging and the prediction CSV format."""

import numpy as np
import pytest

from lesionflow.ensemble import (
    PredictionSet,
    argmax_labels,
    average,
    read_predictions,
    write_predictions,
)
from lesionflow.errors import BadHeader, BadRow, EmptyInput, IdMismatch, NotNormalized

HEADER = "image,MEL,NV,BCC,AK,BKL,DF,VASC,SCC"


def simplex_rows(rng, n, c=8):
    raw = rng.random((n, c)) + 1e-3
    return raw / raw.sum(axis=1, keepdims=True)


def make_set(rng, n, c=8, prefix="im"):
    return PredictionSet(
        image_ids=tuple(f"{prefix}{i}" for i in range(n)),
        probs=simplex_rows(rng, n, c),
    )


# --------------------------------------------------------- PredictionSet

def test_prediction_set_validates_row_sums():
    with pytest.raises(ValueError):
        PredictionSet(image_ids=("a",), probs=np.array([[0.5, 0.1, 0, 0, 0, 0, 0, 0]]))


def test_prediction_set_rejects_duplicates_and_bad_range():
    good = np.full((2, 8), 0.125)
    with pytest.raises(ValueError):
        PredictionSet(image_ids=("a", "a"), probs=good)
    bad = good.copy()
    bad[0, 0] = -0.1
    bad[0, 1] = 0.35
    with pytest.raises(ValueError):
        PredictionSet(image_ids=("a", "b"), probs=bad)


# ---------------------------------------------------------------- average

def test_average_of_single_set_is_that_set():
    s = make_set(np.random.default_rng(0), 5)
    out = average([s])
    assert out.image_ids == s.image_ids
    assert np.array_equal(out.probs, s.probs)


def test_average_of_identical_copies_is_unchanged():
    s = make_set(np.random.default_rng(1), 4)
    out = average([s, s, s])
    assert np.allclose(out.probs, s.probs, atol=1e-15)


def test_average_two_rows_by_hand():
    a = np.zeros((1, 8))
    a[0, 0], a[0, 1] = 0.8, 0.2
    b = np.zeros((1, 8))
    b[0, 0], b[0, 1] = 0.4, 0.6
    out = average([
        PredictionSet(image_ids=("x",), probs=a),
        PredictionSet(image_ids=("x",), probs=b),
    ])
    assert out.probs[0, 0] == pytest.approx(0.6, abs=1e-15)
    assert out.probs[0, 1] == pytest.approx(0.4, abs=1e-15)
    assert out.probs[0, 2:].sum() == 0.0


def test_average_aligns_rows_by_image_id():
    rng = np.random.default_rng(2)
    s1 = make_set(rng, 4)
    # same rows, listed in reverse order
    s2 = PredictionSet(image_ids=tuple(reversed(s1.image_ids)),
                       probs=s1.probs[::-1].copy())
    out = average([s1, s2])
    assert out.image_ids == s1.image_ids
    assert np.allclose(out.probs, s1.probs, atol=1e-15)


def test_average_order_of_sets_does_not_matter():
    rng = np.random.default_rng(3)
    sets = [make_set(np.random.default_rng(s), 6) for s in range(3)]
    a = average(sets)
    b = average(sets[::-1])
    assert a.image_ids == b.image_ids
    assert np.allclose(a.probs, b.probs, atol=1e-12)
    assert rng is not None


def test_average_output_stays_on_simplex():
    sets = [make_set(np.random.default_rng(s + 10), 7) for s in range(4)]
    out = average(sets)
    assert np.abs(out.probs.sum(axis=1) - 1.0).max() < 1e-9
    assert out.probs.min() >= 0.0


def test_average_rejects_mismatched_ids_and_empty_input():
    s1 = make_set(np.random.default_rng(4), 3)
    s2 = make_set(np.random.default_rng(5), 3, prefix="other")
    with pytest.raises(IdMismatch):
        average([s1, s2])
    with pytest.raises(EmptyInput):
        average([])


def test_average_rejects_class_count_mismatch():
    s1 = make_set(np.random.default_rng(6), 3, c=8)
    s2 = make_set(np.random.default_rng(7), 3, c=4)
    with pytest.raises(IdMismatch):
        average([s1, s2])


# ----------------------------------------------------------- hard labels

def test_argmax_labels_onehot_and_scan():
    probs = np.zeros((2, 8))
    probs[0, 0] = 1.0
    probs[1, 1], probs[1, 0], probs[1, 2] = 0.7, 0.1, 0.2
    s = PredictionSet(image_ids=("a", "b"), probs=probs)
    labels = argmax_labels(s)
    assert labels == {"a": 0, "b": 1}


def test_argmax_uniform_row_ties_to_lowest_index():
    s = PredictionSet(image_ids=("u",), probs=np.full((1, 8), 0.125))
    assert argmax_labels(s)["u"] == 0


def test_argmax_invariant_under_self_averaging():
    s = make_set(np.random.default_rng(8), 10)
    assert argmax_labels(average([s, s])) == argmax_labels(s)


# ------------------------------------------------------------ CSV format

def test_write_then_read_preserves_six_decimal_values(tmp_path):
    s = make_set(np.random.default_rng(9), 12)
    path = tmp_path / "p.csv"
    write_predictions(s, path)
    back = read_predictions(path)
    assert back.image_ids == s.image_ids
    assert np.abs(back.probs - s.probs).max() <= 1e-6 + 1e-12
    # a second round trip is lossless: emitted values are already on the grid
    path2 = tmp_path / "p2.csv"
    write_predictions(back, path2)
    assert np.array_equal(read_predictions(path2).probs, back.probs)


def test_written_rows_sum_to_exactly_one_on_the_grid(tmp_path):
    s = make_set(np.random.default_rng(10), 30)
    path = tmp_path / "q.csv"
    write_predictions(s, path)
    for line in path.read_text().splitlines()[1:]:
        cells = line.split(",")[1:]
        units = [round(float(c) * 1_000_000) for c in cells]
        assert sum(units) == 1_000_000
        for c in cells:
            whole, frac = c.split(".")
            assert len(frac) == 6


def test_written_file_uses_lf_endings_and_expected_header(tmp_path):
    s = make_set(np.random.default_rng(11), 2)
    path = tmp_path / "r.csv"
    write_predictions(s, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode().splitlines()[0] == HEADER


def test_read_rejects_wrong_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("image,A,B\nx,0.5,0.5\n")
    with pytest.raises(BadHeader):
        read_predictions(path)


def test_read_rejects_malformed_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "\nx,0.5,0.5\n")
    with pytest.raises(BadRow):
        read_predictions(path)
    path.write_text(HEADER + "\nx,a,b,c,d,e,f,g,h\n")
    with pytest.raises(BadRow):
        read_predictions(path)
    row = "x," + ",".join(["0.125"] * 8)
    path.write_text(HEADER + f"\n{row}\n{row}\n")
    with pytest.raises(BadRow):
        read_predictions(path)


def test_read_rejects_row_summing_to_half(tmp_path):
    path = tmp_path / "half.csv"
    cells = ",".join(["0.0625"] * 8)  # sums to 0.5
    path.write_text(HEADER + f"\nx,{cells}\n")
    with pytest.raises(NotNormalized):
        read_predictions(path)


def test_read_renormalizes_slightly_off_row_with_warning(tmp_path):
    path = tmp_path / "off.csv"
    values = [0.1254] + [0.125] * 7  # sums to 1.0004
    path.write_text(HEADER + "\nx," + ",".join(f"{v:.6f}" for v in values) + "\n")
    with pytest.warns(UserWarning):
        s = read_predictions(path)
    assert abs(s.probs[0].sum() - 1.0) < 1e-12


def test_read_accepts_rows_within_tight_tolerance_silently(tmp_path):
    import warnings
    path = tmp_path / "ok.csv"
    path.write_text(HEADER + "\nx," + ",".join(["0.125000"] * 8) + "\n")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        s = read_predictions(path)
    assert s.probs[0].sum() == 1.0


def test_write_rejects_non_eight_class_sets(tmp_path):
    s = make_set(np.random.default_rng(12), 3, c=4)
    with pytest.raises(ValueError):
        write_predictions(s, tmp_path / "x.csv")
