import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gradcheck import directional_errors
from auxabsa.corpus import AspectInventory
from auxabsa.detector import (
    AspectDetector,
    DetectorError,
    bce_loss,
    combined_loss,
    lca_loss,
    predict_scores,
    threshold_select,
)

SEMEVAL6 = AspectInventory(["atmosphere", "drinks", "food", "location", "restaurant", "service"])


def test_lca_hand_values():
    assert float(lca_loss([1, 0], [0.8, 0.3])) == pytest.approx(0.6065306597, abs=1e-9)
    assert float(lca_loss([1, 1, 0, 0], [0.9, 0.6, 0.2, 0.4])) == pytest.approx(0.6480416907, abs=1e-9)


def test_lca_empty_label_sets():
    assert float(lca_loss([1, 1, 1], [0.2, 0.5, 0.9])) == 0.0
    assert float(lca_loss([0, 0], [0.2, 0.5])) == 0.0


def test_lca_shape_mismatch():
    with pytest.raises(DetectorError):
        lca_loss([1, 0], [0.5, 0.5, 0.5])


def test_bce_values():
    assert float(bce_loss([1], [1 - 1e-12])) == pytest.approx(0.0, abs=1e-9)
    assert float(bce_loss([1, 0], [0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-12)
    assert float(bce_loss([1, 0], [0.8, 0.3])) == pytest.approx(0.2899092476, abs=1e-9)


def test_bce_logit_form_matches_probability_form():
    z = torch.tensor([2.0, -1.0, 0.3], dtype=torch.float64)
    y = torch.tensor([1.0, 0.0, 1.0], dtype=torch.float64)
    assert float(bce_loss(y, z, logits=True)) == pytest.approx(float(bce_loss(y, z.sigmoid())), abs=1e-12)
    # stable far into saturation
    assert torch.isfinite(bce_loss([1.0], torch.tensor([-800.0], dtype=torch.float64), logits=True))


def test_combined_endpoints_and_value():
    y, s = [1, 0], [0.8, 0.3]
    assert float(combined_loss(y, s, 0.0)) == pytest.approx(float(bce_loss(y, s)), abs=1e-15)
    assert float(combined_loss(y, s, 1.0)) == pytest.approx(float(lca_loss(y, s)), abs=1e-15)
    assert float(combined_loss(y, s, 0.2)) == pytest.approx(0.35323353, abs=1e-8)


def test_combined_errors():
    with pytest.raises(DetectorError):
        combined_loss(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(DetectorError):
        combined_loss([1], [0.5], alpha=1.5)


def _batch(rng, C, B):
    y = rng.integers(0, 2, size=(B, C))
    s = rng.uniform(0.01, 0.99, size=(B, C))
    return y, s


def test_loss_oracle_equivalence():
    rng = np.random.default_rng(1)
    for _ in range(300):
        C, B = rng.integers(1, 9), rng.integers(1, 5)
        y, s = _batch(rng, C, B)
        alpha = rng.uniform()
        for yi, si in zip(y, s):
            assert abs(float(lca_loss(yi, si)) - oracles.lca(yi.tolist(), si.tolist())) < 1e-12
            assert abs(float(bce_loss(yi, si)) - oracles.bce(yi.tolist(), si.tolist())) < 1e-12
        expected = oracles.combined(list(zip(y.tolist(), s.tolist())), alpha)
        assert abs(float(combined_loss(y, s, alpha)) - expected) < 1e-12


@settings(max_examples=100, deadline=None)
@given(C=st.integers(2, 6), seed=st.integers(0, 10**6), bump=st.floats(1e-3, 1.0))
def test_lca_decreases_when_positive_score_rises(C, seed, bump):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=C)
    y[0], y[1] = 1, 0
    s = rng.uniform(0, 1, size=C)
    higher = s.copy()
    higher[0] += bump
    assert float(lca_loss(y, higher)) < float(lca_loss(y, s))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_combined_affine_in_alpha(seed):
    rng = np.random.default_rng(seed)
    y, s = _batch(rng, 5, 3)
    l0, l1 = float(combined_loss(y, s, 0.0)), float(combined_loss(y, s, 1.0))
    for a in (0.2, 0.5, 0.9):
        assert float(combined_loss(y, s, a)) == pytest.approx((1 - a) * l0 + a * l1, abs=1e-12)


def test_combined_gradient_wrt_logits():
    rng = np.random.default_rng(4)
    for _ in range(5):
        y = torch.tensor(rng.integers(0, 2, size=(3, 6)), dtype=torch.float64)
        z = torch.tensor(rng.normal(size=(3, 6)), dtype=torch.float64, requires_grad=True)
        combined_loss(y, z, 0.2, logits=True).backward()
        d = torch.tensor(rng.normal(size=(3, 6)), dtype=torch.float64)
        f = lambda t: float(combined_loss(y, t, 0.2, logits=True))
        numeric = oracles.central_difference(f, z.detach(), d)
        analytic = float((z.grad * d).sum())
        assert abs(analytic - numeric) / max(abs(analytic), 1e-8) < 1e-4


def test_threshold_select():
    assert threshold_select([0.9, 0.1], 0.5) == {0}
    assert threshold_select([0.5, 0.5], 0.5) == frozenset()
    assert threshold_select([0.9, 0.1], 0.5, AspectInventory(["a", "b"])) == {"a"}
    with pytest.raises(DetectorError):
        threshold_select([0.2], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.floats(0.01, 0.98), st.floats(0.001, 0.5))
def test_threshold_monotone(scores, t1, gap):
    t2 = min(t1 + gap, 0.99)
    assert threshold_select(scores, t2) <= threshold_select(scores, t1)


def test_zero_head_gives_half():
    torch.manual_seed(0)
    det = AspectDetector(SEMEVAL6, zero_head=True)
    out = predict_scores("After all that, they complained to me about the small tip.", SEMEVAL6, det)
    assert out.scores == (0.5,) * 6
    assert out.predicted == ()
    assert len(out.scores) == SEMEVAL6.C


def test_inventory_mismatch():
    det = AspectDetector(SEMEVAL6)
    with pytest.raises(DetectorError):
        predict_scores("x", AspectInventory(["food"]), det)


def test_predicted_matches_threshold_and_order():
    torch.manual_seed(1)
    det = AspectDetector(SEMEVAL6, threshold=0.45)
    for out in det.predict(["the soup was hot", "the waiter and the wine were both cold"]):
        chosen = {SEMEVAL6.names[i] for i, s in enumerate(out.scores) if s > 0.45}
        assert set(out.predicted) == chosen
        ranked = [out.scores[SEMEVAL6.index(a)] for a in out.predicted]
        assert ranked == sorted(ranked, reverse=True)


def test_detector_gradcheck_toy_encoder():
    torch.manual_seed(0)
    det = AspectDetector(SEMEVAL6).double().eval()
    seqs = det.sequences(["the soup was hot", "i found the waiter really slow", "the patio was loud"])
    labels = [[0, 0, 1, 0, 0, 0], [0, 0, 0, 0, 0, 1], [1, 0, 0, 0, 0, 0]]
    loss = lambda: det.loss(seqs, labels)
    for group in (det.encoder_parameters(), det.head_parameters()):
        assert max(directional_errors(det, loss, group)) < 1e-4
