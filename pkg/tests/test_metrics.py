import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfcycle.lightfield import LightField
from lfcycle.metrics import (PSNR_CAP, EvalReport, ViewRecord, evaluate, psnr, ssim,
                             synthesized_coords)


def test_psnr_identical_is_inf():
    a = np.random.default_rng(0).uniform(size=(8, 8, 3))
    assert psnr(a, a) == math.inf


def test_psnr_one_level_offset():
    a = np.random.default_rng(1).uniform(0, 0.9, size=(16, 16, 3))
    assert psnr(a, a + 1 / 255) == pytest.approx(20 * math.log10(255), abs=1e-9)
    assert abs(psnr(a, a + 1 / 255) - 48.13) <= 0.01


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_psnr_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=(2, 7, 9, 3))
    mse = sum((x - y) ** 2 for x, y in zip(a.ravel().tolist(), b.ravel().tolist())) / a.size
    assert abs(psnr(a, b) - 10 * math.log10(1 / mse)) < 1e-9


def test_ssim_identity():
    a = np.random.default_rng(2).uniform(size=(24, 24, 3))
    assert abs(ssim(a, a) - 1.0) <= 1e-12


def test_ssim_constant_closed_form():
    c1 = (0.01) ** 2
    val = ssim(np.zeros((16, 16, 3)), np.ones((16, 16, 3)))
    assert abs(val - c1 / (1 + c1)) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_ssim_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=(2, 16, 16, 3))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_matches_skimage():
    skm = pytest.importorskip("skimage.metrics")
    rng = np.random.default_rng(3)
    a = rng.uniform(size=(32, 40, 3))
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    ref = skm.structural_similarity(a, b, channel_axis=-1, data_range=1.0, gaussian_weights=True,
                                    sigma=1.5, use_sample_covariance=False)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-6)


def test_ssim_too_small():
    with pytest.raises(ValueError, match="window"):
        ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))


# ---------------------------------------------------------------- evaluate


def rand_lf(rows, cols, seed, h=16, w=16):
    return LightField(np.random.default_rng(seed).uniform(size=(rows, cols, h, w, 3)))


@pytest.mark.parametrize("alpha,count", [(2, 56), (4, 72)])
def test_record_counts(alpha, count):
    gt = rand_lf(9, 9, 0)
    rep = evaluate(gt, gt, alpha)
    assert len(rep.records) == count
    assert all(r.ssim == pytest.approx(1.0, abs=1e-12) for r in rep.records)
    assert all(r.psnr == math.inf for r in rep.records)
    assert rep.mean_psnr == PSNR_CAP


@given(rows=st.integers(1, 12), cols=st.integers(1, 12), alpha=st.sampled_from([2, 4]))
def test_synthesized_coords_enumeration(rows, cols, alpha):
    kept = len(range(0, rows, alpha)) * len(range(0, cols, alpha))
    coords = synthesized_coords(rows, cols, alpha)
    assert len(coords) == rows * cols - kept
    assert all(t % alpha or s % alpha for t, s in coords)


def test_aggregates_recompute_exactly():
    gt = rand_lf(5, 5, 1)
    recon = LightField(np.clip(np.asarray(gt.views) + 0.02, 0, 1))
    rep = evaluate(recon, gt, 2, margin=1)
    assert rep.check_consistency()
    assert rep.mean_psnr == float(np.mean([r.psnr for r in rep.records]))
    assert rep.mean_ssim == float(np.mean([r.ssim for r in rep.records]))


def test_evaluate_shape_mismatch_and_margin():
    with pytest.raises(ValueError, match="shapes"):
        evaluate(rand_lf(3, 3, 0), rand_lf(5, 5, 0), 2)
    with pytest.raises(ValueError, match="margin"):
        evaluate(rand_lf(3, 3, 0), rand_lf(3, 3, 0), 2, margin=8)


def test_report_dict_roundtrip_and_csv_agree():
    gt = rand_lf(3, 3, 2)
    recon = LightField(np.clip(np.asarray(gt.views) * 0.97, 0, 1))
    views = np.array(recon.views)
    views[0, 1] = gt.view(0, 1)  # one exact view: PSNR is infinite
    rep = evaluate(LightField(views), gt, 2, dataset="toy")
    d = json.loads(json.dumps(rep.to_dict()))
    back = EvalReport.from_dict(d)
    assert back.records[0].psnr == math.inf
    assert [(r.t, r.s, r.psnr, r.ssim) for r in back.records] == [(r.t, r.s, r.psnr, r.ssim) for r in rep.records]
    rows = [line.split(",") for line in rep.to_csv().strip().split("\n")[1:]]
    for rec, row in zip(rep.records, rows):
        assert abs(float(row[2]) - rec.psnr) <= 1e-9 or (math.isinf(rec.psnr) and float(row[2]) == rec.psnr)
        assert abs(float(row[3]) - rec.ssim) <= 1e-9
    assert float(rows[-1][2]) == rep.mean_psnr
    assert rep.meta["dataset"] == "toy" and rep.meta["alpha"] == 2


def test_view_record_fields():
    r = ViewRecord(1, 2, 30.0, 0.9)
    assert (r.t, r.s) == (1, 2)


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(11)
    img = rng.uniform(0.1, 0.9, size=(32, 32, 3))
    noise = rng.choice([-1.0, 1.0], size=img.shape)
    vals = [psnr(img, img + a / 255 * noise) for a in (1, 2, 4, 8)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), scale=st.floats(0.0, 1.0))
def test_ssim_bounded_by_one(seed, scale):
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=(16, 16, 3))
    b = np.clip(a + scale * rng.standard_normal(a.shape), 0, 1)
    v = ssim(a, b)
    assert v <= 1.0 + 1e-12
    if np.abs(a - b).max() > 1e-3:
        assert v < 1.0
