import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gradcheck import directional_errors
from auxabsa.sentiment import PolarityDistribution, SentimentPredictor, cross_entropy, predict_polarity
from auxabsa.templating import PairedText

FOOD_PRICE = PairedText("what do you think of quality, and price of the food?",
                         "The food is delicious, but it's too expensive")


def test_cross_entropy_values():
    assert float(cross_entropy("positive", [1.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    assert float(cross_entropy("neutral", [1 / 3] * 3)) == pytest.approx(math.log(3), abs=1e-12)
    assert float(cross_entropy("positive", [0.7, 0.2, 0.1])) == pytest.approx(0.3566749439, abs=1e-9)
    # floor keeps the loss finite
    assert float(cross_entropy("negative", [1.0, 0.0, 0.0])) == pytest.approx(-math.log(1e-12))


def test_cross_entropy_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        B = rng.integers(1, 6)
        p = rng.dirichlet(np.ones(3), size=B)
        g = rng.integers(0, 3, size=B)
        assert abs(float(cross_entropy(g.tolist(), p)) - oracles.xent(g.tolist(), p.tolist())) < 1e-12


def test_zero_head_uniform():
    torch.manual_seed(0)
    m = SentimentPredictor(zero_head=True)
    d = predict_polarity(FOOD_PRICE, m)
    assert d.p == pytest.approx((1 / 3,) * 3, abs=1e-12)


def test_distribution_sums_to_one():
    torch.manual_seed(0)
    m = SentimentPredictor()
    for d in m.predict([FOOD_PRICE, PairedText("a", "b")]):
        assert abs(sum(d.p) - 1) < 1e-6
        assert min(d.p) >= 0
        assert d.argmax in ("positive", "negative", "neutral")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.floats(-50, 50))
def test_softmax_shift_invariance(z, c):
    z = torch.tensor(z, dtype=torch.float64)
    assert torch.allclose(z.softmax(-1), (z + c).softmax(-1), atol=1e-9, rtol=0)


def test_distribution_as_dict_order():
    d = PolarityDistribution((0.1, 0.7, 0.2))
    assert list(d.as_dict()) == ["positive", "negative", "neutral"]
    assert d.argmax == "negative"


def test_sentiment_gradcheck_toy_encoder():
    torch.manual_seed(0)
    m = SentimentPredictor().double().eval()
    seqs = [m.tokenize(FOOD_PRICE), m.tokenize(PairedText("what do you think of NULL of it?", "it was hot"))]
    loss = lambda: m.loss(seqs, ["negative", "positive"])
    for group in (m.encoder_parameters(), m.head_parameters()):
        assert max(directional_errors(m, loss, group)) < 1e-4
