import numpy as np
import pytest
from scipy import ndimage

from lfdepth import evaluation as ev
from lfdepth import plotting


def test_rmse_examples(rng):
    gt = rng.random((5, 6))
    assert ev.rmse(gt, gt) == 0.0
    assert ev.rmse(gt + 0.1, gt) == pytest.approx(0.1)
    mask = np.zeros(gt.shape, dtype=bool)
    mask[0, 0] = True
    assert ev.rmse(gt + np.where(mask, 2.0, 0.0), gt, mask) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ev.rmse(gt, gt, np.zeros(gt.shape, dtype=bool))
    with pytest.raises(ValueError):
        ev.rmse(gt, gt[:2])


def test_fmeasure_examples(rng):
    gt = rng.random((12, 12)) > 0.8
    for tol in (0, 1, 2):
        assert ev.fmeasure_binary(gt, gt, tol) == 1.0
    assert ev.fmeasure_binary(np.zeros_like(gt), gt, 1) == 0.0
    line = np.zeros((9, 9), dtype=bool)
    line[:, 4] = True
    thick = ndimage.binary_dilation(line, np.ones((3, 3), dtype=bool))
    assert ev.fmeasure_binary(thick, line, 1) == 1.0
    assert ev.fmeasure_binary(thick, line, 0) == pytest.approx(2 * (1 / 3) / (1 + 1 / 3))
    with pytest.raises(ValueError):
        ev.fmeasure_binary(line, line, -1)


def _textbook_f(pred, gt):
    tp = np.sum(pred & gt)
    fp = np.sum(pred & ~gt)
    fn = np.sum(~pred & gt)
    if tp == 0:
        return 0.0
    p, r = tp / (tp + fp), tp / (tp + fn)
    return 2 * p * r / (p + r)


def test_fmeasure_tol0_matches_confusion_counts(rng):
    for _ in range(50):
        pred = rng.random((8, 9)) > 0.6
        gt = rng.random((8, 9)) > 0.6
        assert ev.fmeasure_binary(pred, gt, 0) == pytest.approx(_textbook_f(pred, gt))


def test_selection_fmeasure_examples():
    gt = np.zeros((1, 1, 2, 2), dtype=bool)
    gt[0, 0, 0] = True
    region = np.ones((1, 1), dtype=bool)
    assert ev.selection_fmeasure(gt, gt, region) == 1.0
    allv = np.ones_like(gt)
    assert ev.selection_fmeasure(allv, gt, region) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        ev.selection_fmeasure(gt, gt, ~region)


def test_boundary_from_disparity():
    d = np.zeros((4, 6))
    d[:, 3:] = 0.2
    assert ev.boundary_from_disparity(d, 0.0)[:, 2:4].all()
    assert ev.boundary_from_disparity(d, 0.0).sum() == 8
    assert not ev.boundary_from_disparity(d, 0.25).any()
    assert ev.boundary_from_disparity(d, 0.2).sum() == 8


def test_evaluate_and_csv(tmp_path):
    gt = np.zeros((10, 10))
    gt[:, 5:] = 1.0
    pred = gt.copy()
    pred[0, 0] = 0.5
    b = ev.boundary_from_disparity(gt, 0.0)
    rep = ev.evaluate("s", pred, gt, 2, gt_boundary=b, pred_boundary=b)
    assert rep.rmse == pytest.approx(0.05)
    assert rep.rmse_band == 0.0 and rep.rmse_interior > 0
    assert rep.boundary_f == 1.0 and rep.selection_f is None
    ev.write_csv(tmp_path / "m.csv", [rep])
    rows = ev.read_csv(tmp_path / "m.csv")
    assert ("s", "rmse", 0.05) in rows
    assert {r[1] for r in rows} == {"rmse", "rmse_band", "rmse_interior", "boundary_f"}
    text = ev.summary([rep])
    assert "1 px" in text and "s: rmse=0.0500" in text


def test_occlusion_band():
    b = np.zeros((9, 9), dtype=bool)
    b[4, 4] = True
    assert ev.occlusion_band(b, 2).sum() == 25
    assert ev.occlusion_band(b, 0).sum() == 1


def test_plots_write_files(tmp_path, rng):
    d = rng.random((12, 14))
    plotting.overview(tmp_path / "o.png", rng.random((12, 14, 3)), d, d, d > 0.5, (0, 1), d)
    plotting.metric_bars(tmp_path / "m.png", [("rmse", 0.1), ("boundary_f", 0.9)])
    plotting.view_mask(tmp_path / "v.png", rng.random((9, 9)) > 0.5, rng.random((9, 9)) > 0.5, "p")
    for name in ("o.png", "m.png", "v.png"):
        assert (tmp_path / name).read_bytes()[:4] == b"\x89PNG"
