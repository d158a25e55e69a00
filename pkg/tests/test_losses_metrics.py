import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glassdepth import autodiff as ad
from glassdepth.errors import ContractError, DimensionError, UndefinedLossError
from glassdepth.geometry import PoseSE3, rotation_about_axis
from glassdepth.losses import depth_completion_loss, log_l1, log_l1_pairwise
from glassdepth.metrics import (
    DEPTH_COLUMNS, MetricReport, add_2cm, add_metric, depth_metrics, mean_report, normal_metrics,
)

from oracles import add_oracle, depth_metrics_oracle, normal_metrics_oracle, \
    pairwise_log_l1_oracle


def T(a):
    return ad.Tensor(np.asarray(a, dtype=np.float64), dtype=np.float64)


# --- log-L1 pairwise loss -----------------------------------------------------

def test_pairwise_worked_example():
    assert log_l1_pairwise(T([1.0, 4.0]), np.array([1.0, 2.0])).item() == \
        pytest.approx(math.log(2) / 2, abs=1e-12)
    assert math.log(2) / 2 == pytest.approx(0.34657, abs=1e-5)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0, 10.0])
def test_pairwise_scale_invariant(c):
    r = np.random.default_rng(0)
    gt = r.uniform(0.3, 3.0, size=(6, 6))
    assert abs(log_l1_pairwise(T(c * gt), gt).item()) < 1e-6
    pred = gt * r.uniform(0.8, 1.2, size=gt.shape)
    assert log_l1_pairwise(T(c * pred), gt).item() == \
        pytest.approx(log_l1_pairwise(T(pred), gt).item(), abs=1e-6)


@given(st.integers(0, 100_000))
def test_pairwise_exact_matches_enumeration(seed):
    r = np.random.default_rng(seed)
    gt = np.where(r.uniform(size=(4, 5)) < 0.3, 0.0, r.uniform(0.2, 3.0, size=(4, 5)))
    if not np.any(gt):
        gt[0, 0] = 1.0
    pred = r.uniform(0.1, 3.0, size=(4, 5))
    assert log_l1_pairwise(T(pred), gt).item() == \
        pytest.approx(pairwise_log_l1_oracle(pred, gt), rel=1e-10, abs=1e-12)


def test_pairwise_sampled_converges():
    r = np.random.default_rng(5)
    gt = r.uniform(0.5, 2.0, size=50)
    pred = gt * np.exp(r.normal(0, 0.2, size=50))
    exact = log_l1_pairwise(T(pred), gt).item()
    for seed in range(10):
        sampled = log_l1_pairwise(T(pred), gt, 10 ** 5, np.random.default_rng(seed)).item()
        assert abs(sampled - exact) < 0.01 * exact


def test_pairwise_errors_and_floor():
    with pytest.raises(UndefinedLossError):
        log_l1_pairwise(T([1.0, 2.0]), np.zeros(2))
    with pytest.raises(ContractError):
        log_l1_pairwise(T([1.0]), np.ones(1), pair_budget="many")
    with pytest.raises(ContractError):
        log_l1_pairwise(T([1.0, 2.0]), np.ones(3))
    # predictions below the floor are clamped, keeping the value finite
    assert np.isfinite(log_l1_pairwise(T([0.0, 1.0]), np.ones(2)).item())


def test_pointwise_and_combined_loss():
    gt = np.array([[1.0, 2.0], [0.0, 4.0]])
    pred = np.array([[2.0, 2.0], [9.0, 4.0]])
    assert log_l1(T(pred), gt).item() == pytest.approx(math.log(2) / 3)
    batch = T(pred[None, None])
    total = depth_completion_loss(batch, gt[None], log_l1_weight=0.5).item()
    expected = log_l1_pairwise(T(pred), gt).item() + 0.5 * math.log(2) / 3
    assert total == pytest.approx(expected)


# --- depth metrics --------------------------------------------------------------

def test_two_pixel_worked_example():
    gt = np.array([[1.1, 1.9]])
    pred = np.array([[1.0, 2.0]])
    r = depth_metrics(pred, gt, np.ones((1, 2)), eval_size=None)
    assert r.rmse == pytest.approx(0.1) and r.mae == pytest.approx(0.1)
    assert r.rel == pytest.approx((0.1 / 1.1 + 0.1 / 1.9) / 2)
    assert r.rel == pytest.approx(0.07177, abs=1e-5)
    assert (r.delta_105, r.delta_110, r.delta_125) == (0.0, 0.5, 1.0)
    assert r.count == 2


def test_perfect_prediction():
    r = np.random.default_rng(0)
    gt = r.uniform(0.5, 2, size=(48, 64))
    rep = depth_metrics(gt, gt, np.ones_like(gt))
    assert rep.row() == (0.0, 0.0, 1.0, 1.0, 1.0, 0.0)
    assert DEPTH_COLUMNS == ("RMSE", "MAE", "delta_1.05", "delta_1.10", "delta_1.25", "REL")


@pytest.mark.parametrize("mode", ["only-valid", "all"])
def test_depth_metrics_match_oracle(mode):
    r = np.random.default_rng(11)
    for _ in range(100):
        gt = np.where(r.uniform(size=(16, 16)) < 0.1, 0.0, r.uniform(0.2, 3.0, size=(16, 16)))
        pred = np.where(r.uniform(size=(16, 16)) < 0.2, 0.0,
                        gt * r.uniform(0.7, 1.3, size=(16, 16)) + r.uniform(0, 0.1, (16, 16)))
        mask = r.uniform(size=(16, 16)) < 0.6
        got = depth_metrics(pred, gt, mask, mode, eval_size=None)
        want = depth_metrics_oracle(pred, gt, mask, mode)
        np.testing.assert_allclose(got.row(), want, atol=1e-6)
        assert got.mae <= got.rmse + 1e-15
        assert got.delta_105 <= got.delta_110 <= got.delta_125


def test_resize_then_evaluate():
    r = np.random.default_rng(3)
    gt = r.uniform(0.5, 2, size=(48, 64))
    pred = gt + 0.01
    rep = depth_metrics(pred, gt, np.ones_like(gt))
    assert rep.count == 144 * 256
    assert rep.rmse == pytest.approx(0.01)


def test_only_valid_dominates_all_on_half_empty_prediction():
    r = np.random.default_rng(4)
    gt = r.uniform(0.5, 1.5, size=(48, 64))
    pred = gt * r.uniform(0.97, 1.03, size=gt.shape)
    pred[:, ::2] = 0.0
    mask = np.ones_like(gt)
    valid = depth_metrics(pred, gt, mask, "only-valid")
    every = depth_metrics(pred, gt, mask, "all")
    for col in ("rmse", "mae", "rel"):
        assert getattr(valid, col) < getattr(every, col)
    for col in ("delta_105", "delta_110", "delta_125"):
        assert getattr(valid, col) > getattr(every, col)


def test_empty_set_and_errors():
    rep = depth_metrics(np.ones((4, 4)), np.zeros((4, 4)), eval_size=None)
    assert rep.empty and all(math.isnan(v) for v in rep.row())
    with pytest.raises(ContractError):
        depth_metrics(np.ones((2, 2)), np.ones((2, 2)), mode="some")
    with pytest.raises(DimensionError):
        depth_metrics(np.ones((2, 2)), np.ones((2, 3)))


def test_mean_report_is_unweighted():
    a = MetricReport(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 10, "all")
    b = MetricReport(3.0, 3.0, 3.0, 1.0, 1.0, 1.0, 1000, "all")
    m = mean_report([a, b, MetricReport.undefined("all")])
    assert m.rmse == 2.0 and m.delta_110 == 0.5 and m.count == 1010
    assert mean_report([]) is None


# --- normal metrics -----------------------------------------------------------

def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def test_normal_metric_examples():
    n = _unit(np.random.default_rng(0).normal(size=(5, 5, 3)))
    rep = normal_metrics(n, n)
    assert rep.mean == pytest.approx(0.0, abs=1e-6) and rep.median == pytest.approx(0.0, abs=1e-6)
    assert rep.row()[2:] == (1.0, 1.0, 1.0)
    a = np.zeros((3, 3, 3))
    a[..., 0] = 1
    b = np.zeros((3, 3, 3))
    b[..., 1] = 1
    rep = normal_metrics(a, b)
    assert rep.mean == pytest.approx(90.0) and rep.row()[2:] == (0.0, 0.0, 0.0)
    assert normal_metrics(a, b, np.zeros((3, 3))).empty


def test_half_aligned_half_twenty_degrees():
    gt = np.zeros((2, 2, 3))
    gt[..., 2] = 1
    pred = gt.copy()
    t = math.radians(20)
    pred[1] = [math.sin(t), 0.0, math.cos(t)]
    rep = normal_metrics(pred, gt)
    want = normal_metrics_oracle(pred, gt, np.ones((2, 2), bool))
    np.testing.assert_allclose(rep.row(), want, atol=1e-9)
    assert rep.mean == pytest.approx(10.0) and rep.median == pytest.approx(10.0)
    assert rep.row()[2:] == (0.5, 1.0, 1.0)


def test_normal_metrics_match_oracle():
    r = np.random.default_rng(8)
    for _ in range(100):
        gt = _unit(r.normal(size=(16, 16, 3)))
        pred = _unit(gt + r.normal(0, 0.4, size=gt.shape))
        pred[r.uniform(size=(16, 16)) < 0.1] = 0.0
        mask = r.uniform(size=(16, 16)) < 0.7
        got = normal_metrics(pred, gt, mask)
        np.testing.assert_allclose(got.row(), normal_metrics_oracle(pred, gt, mask), atol=1e-6)
        assert got.within_11_25 <= got.within_22_5 <= got.within_30


# --- ADD ----------------------------------------------------------------------

def test_add_examples():
    pts = np.random.default_rng(0).normal(size=(30, 3))
    pose = PoseSE3(rotation_about_axis([0, 1, 0], 0.3), [0.1, 0.2, 0.5])
    assert add_metric(pts, pose, pose) == 0.0
    shifted = PoseSE3(pose.rotation, pose.translation + [0.03, 0, 0])
    assert add_metric(pts, pose, shifted) == pytest.approx(0.03, abs=1e-12)
    with pytest.raises(ContractError):
        add_metric(np.zeros((0, 3)), pose, pose)


def test_add_matches_oracle():
    r = np.random.default_rng(9)
    for _ in range(100):
        pts = r.normal(size=(20, 3)) * 0.05
        a = PoseSE3(rotation_about_axis(r.normal(size=3), r.uniform(-3, 3)), r.normal(size=3))
        b = PoseSE3(rotation_about_axis(r.normal(size=3), r.uniform(-3, 3)), r.normal(size=3))
        want = add_oracle(pts, a.rotation, a.translation, b.rotation, b.translation)
        assert add_metric(pts, a, b) == pytest.approx(want, abs=1e-9)


def test_add_2cm_strict():
    assert add_2cm([0.01, 0.02, 0.03, 0.019999]) == 0.5
    with pytest.raises(ContractError):
        add_2cm([])
