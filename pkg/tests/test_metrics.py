import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import quadrant_ids
from oracles import naive_boundary, naive_co, naive_ev, naive_recall, naive_ue, naive_ue_levin
from pixelcommunities.imageio import LabImage, Labeling
from pixelcommunities.metrics import (MetricReport, boundary_pixels, boundary_recall,
                                      compactness, default_tolerance, evaluate,
                                      explained_variation, ue_levin, undersegmentation_error)


def L(ids):
    return Labeling.from_ids(np.asarray(ids))


def lab_l_channel(values):
    v = np.asarray(values, dtype=np.float64)
    return LabImage(np.stack([v, np.zeros_like(v), np.zeros_like(v)], axis=-1))


def split_at(h, w, col):
    return L(np.broadcast_to(np.arange(w)[None, :] > col, (h, w)).astype(int))


# --- boundary pixels ---------------------------------------------------------

def test_boundary_single_region():
    assert not boundary_pixels(L(np.zeros((4, 5)))).any()


def test_boundary_left_right():
    assert boundary_pixels(L([[0, 1], [0, 1]])).tolist() == [[True, False], [True, False]]


def test_boundary_quadrants():
    mask = boundary_pixels(L(quadrant_ids(4)))
    assert mask.tolist() == naive_boundary(quadrant_ids(4).tolist())
    assert mask.tolist() == [[False, True, False, False],
                             [True, True, True, True],
                             [False, True, False, False],
                             [False, True, False, False]]
    assert int(mask.sum()) == 7


# --- recall --------------------------------------------------------------------

def test_recall_identity():
    gt = L(quadrant_ids(8))
    assert boundary_recall(gt, gt, 0) == 1.0


def test_recall_single_region_seg():
    assert boundary_recall(L(quadrant_ids(8)), L(np.zeros((8, 8))), 3) == 0.0


def test_recall_shifted_column():
    gt, seg = split_at(6, 10, 2), split_at(6, 10, 4)
    assert boundary_recall(gt, seg, 1) == 0.0
    assert boundary_recall(gt, seg, 2) == 1.0
    assert naive_recall(gt.ids.tolist(), seg.ids.tolist(), 1) == 0.0
    assert naive_recall(gt.ids.tolist(), seg.ids.tolist(), 2) == 1.0


def test_recall_no_gt_boundary():
    assert boundary_recall(L(np.zeros((3, 3))), L(quadrant_ids(3)), 0) == 1.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        boundary_recall(L(np.zeros((3, 3))), L(np.zeros((3, 4))), 1)
    with pytest.raises(ValueError):
        undersegmentation_error(L(np.zeros((3, 3))), L(np.zeros((4, 3))))
    with pytest.raises(ValueError):
        ue_levin(L(np.zeros((3, 3))), L(np.zeros((4, 3))))


def test_default_tolerance():
    assert default_tolerance(481, 321) == 1
    assert default_tolerance(1000, 1000) == 4


# --- UE ------------------------------------------------------------------------------

def test_ue_identity_and_singletons():
    gt = L(quadrant_ids(6))
    assert undersegmentation_error(gt, gt) == 0.0
    assert undersegmentation_error(gt, L(np.arange(36).reshape(6, 6))) == 0.0


def test_ue_one_region_over_aaab():
    assert undersegmentation_error(L([[0, 0, 0, 1]]), L([[0, 0, 0, 0]])) == 0.5


def test_ue_levin_examples():
    gt = L(quadrant_ids(6))
    assert ue_levin(gt, gt) == 0.0
    assert ue_levin(gt, L(np.arange(36).reshape(6, 6))) == 0.0
    assert ue_levin(L([[0, 0, 0, 1]]), L([[0, 0, 0, 0]])) == pytest.approx(5 / 3, abs=1e-12)


# --- EV ------------------------------------------------------------------------------

def test_ev_examples():
    img = lab_l_channel([[0, 0, 10, 10]])
    assert explained_variation(img, L([[0, 0, 1, 1]])) == pytest.approx(1.0, abs=1e-12)
    assert explained_variation(img, L([[0, 1, 1, 1]])) == pytest.approx(1 / 3, abs=1e-12)
    assert explained_variation(img, L([[0, 0, 0, 0]])) == pytest.approx(0.0, abs=1e-12)
    assert explained_variation(img, L([[0, 1, 2, 3]])) == pytest.approx(1.0, abs=1e-12)


def test_ev_flat_image():
    assert explained_variation(LabImage(np.full((3, 3, 3), 7.0)), L(np.zeros((3, 3)))) == 1.0


def test_ev_flat_image_inexact_values():
    # the mean of a constant 0.1 is not exactly 0.1, the variance must not become noise
    img = LabImage(np.full((8, 8, 3), 0.1) + np.array([0.0, 1 / 3, -2 / 7]))
    rng = np.random.default_rng(0)
    assert explained_variation(img, L(rng.integers(0, 4, (8, 8)))) == 1.0


# --- CO ------------------------------------------------------------------------------

@pytest.mark.parametrize("s", [1, 2, 5, 9])
def test_co_square(s):
    assert compactness(L(np.zeros((s, s)))) == pytest.approx(math.pi / 4, abs=1e-12)


@pytest.mark.parametrize("n", [1, 3, 10])
def test_co_strip(n):
    assert compactness(L(np.zeros((1, n)))) == pytest.approx(4 * math.pi * n / (2 * n + 2) ** 2, abs=1e-12)


def test_co_tiling():
    ids = (np.arange(16)[:, None] // 4) * 4 + np.arange(16)[None, :] // 4
    assert compactness(L(ids)) == pytest.approx(math.pi / 4, abs=1e-12)


def test_co_range():
    rng = np.random.default_rng(0)
    co = compactness(L(rng.integers(0, 5, (10, 10))))
    assert 0 < co <= 1


# --- oracle agreement and properties ---------------------------------------------------

def random_instance(seed, h=8, w=8):
    rng = np.random.default_rng(seed)
    img = LabImage(rng.uniform(-50, 100, (h, w, 3)))
    gt = L(rng.integers(0, rng.integers(1, 6), (h, w)))
    seg = L(rng.integers(0, rng.integers(1, 10), (h, w)))
    return img, gt, seg


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 3))
def test_metrics_match_oracles(seed, tol):
    img, gt, seg = random_instance(seed)
    g, s = gt.ids.tolist(), seg.ids.tolist()
    pix = img.pixels.tolist()
    assert boundary_recall(gt, seg, tol) == pytest.approx(naive_recall(g, s, tol), abs=1e-9)
    assert undersegmentation_error(gt, seg) == pytest.approx(naive_ue(g, s), abs=1e-9)
    assert ue_levin(gt, seg) == pytest.approx(naive_ue_levin(g, s), abs=1e-9)
    assert explained_variation(img, seg) == pytest.approx(naive_ev(pix, s), abs=1e-9)
    assert compactness(seg) == pytest.approx(naive_co(s), abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_refinement_monotone(seed):
    img, gt, seg = random_instance(seed)
    rng = np.random.default_rng(seed + 1)
    target = int(rng.integers(seg.region_count))
    mask = (seg.ids == target) & (rng.random(seg.ids.shape) < 0.5)
    finer = L(np.where(mask, seg.region_count, seg.ids))
    assert explained_variation(img, finer) >= explained_variation(img, seg) - 1e-12
    assert undersegmentation_error(gt, finer) <= undersegmentation_error(gt, seg) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_ranges_and_tol_monotone(seed):
    img, gt, seg = random_instance(seed)
    recs = [boundary_recall(gt, seg, t) for t in range(5)]
    assert all(a <= b for a, b in zip(recs, recs[1:]))
    assert all(0 <= r <= 1 for r in recs)
    assert 0 <= undersegmentation_error(gt, seg) <= 1
    assert 0 <= explained_variation(img, seg) <= 1
    assert 0 < compactness(seg) <= 1
    assert ue_levin(gt, seg) >= 0


# --- evaluate --------------------------------------------------------------------------

def test_evaluate_identity():
    img, gt, _ = random_instance(1)
    rep = evaluate(img, gt, gt, 1)
    assert (rep.rec, rep.ue, rep.ue_levin) == (1.0, 0.0, 0.0)
    assert rep.k_actual == gt.region_count


@pytest.mark.parametrize("seed", range(5))
def test_evaluate_singletons(seed):
    img, gt, _ = random_instance(seed, 4, 4)
    seg = L(np.arange(16).reshape(4, 4))
    rep = evaluate(img, gt, seg, 0)
    assert rep.ue == naive_ue(gt.ids.tolist(), seg.ids.tolist()) == 0.0
    assert rep.ev == pytest.approx(1.0, abs=1e-12)
    assert rep.rec == naive_recall(gt.ids.tolist(), seg.ids.tolist(), 0) == 1.0


def test_evaluate_quadrants(quadrants, quadrant_gt):
    rep = evaluate(quadrants, quadrant_gt, quadrant_gt, 2)
    assert rep.rec == 1.0 and rep.ue == 0.0


def test_csv_row():
    rep = MetricReport(0.5, 0.25, 1.0, 0.75, 0.125, 7, 1)
    assert rep.csv_row("img", 10) == ["img", "10", "7", "0.5000000000", "0.2500000000",
                                      "1.0000000000", "0.7500000000", "0.1250000000"]
