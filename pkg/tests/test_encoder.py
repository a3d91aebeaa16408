import numpy as np
import pytest
import torch

from auxabsa.corpus import AspectInventory
from auxabsa.detector import AspectDetector
from auxabsa.encoder import (
    CLS_ID,
    SEP_ID,
    EncoderSpec,
    EncodingError,
    PretrainedTokenizer,
    ToyEncoder,
    ToyTokenizer,
    encode,
    save_checkpoint,
)
from auxabsa.sentiment import SentimentPredictor
from auxabsa.templating import PairedText, build_detector_input

SEMEVAL6 = AspectInventory(["atmosphere", "drinks", "food", "location", "restaurant", "service"])
tok = ToyTokenizer()


def test_detector_aspect_positions():
    t = tok.tokenize_pair(build_detector_input(SEMEVAL6, "the tip was small"), 128)
    assert t.aspect_positions == [1, 2, 3, 4, 5, 6]
    assert t.segment_boundary == 8
    assert t.special_positions == [0, 7, len(t) - 1]
    assert t.token_ids[0] == CLS_ID and t.token_ids[7] == SEP_ID


def test_multi_token_aspect_uses_first_piece():
    inv = AspectInventory(["transit-location", "general"])
    t = tok.tokenize_pair(build_detector_input(inv, "x"), 32)
    # "transit", "-", "location" precede "general"
    assert t.aspect_positions == [1, 4]


def test_truncation_trims_second_segment():
    long = " ".join(f"w{i}" for i in range(500))
    t = tok.tokenize_pair(PairedText("what do you think of food of it?", long), 128)
    assert len(t) == 128
    assert t.token_ids[-1] == SEP_ID


def test_first_segment_never_truncated():
    with pytest.raises(EncodingError):
        tok.tokenize_pair(PairedText(" ".join(["a"] * 130), "b"), 128)


def test_hashing_is_deterministic():
    assert tok.ids("food food") == [tok.ids("food")[0]] * 2
    assert tok.ids("Food") == tok.ids("food")


def test_eval_determinism_and_shape():
    torch.manual_seed(0)
    enc = ToyEncoder(dim=32).eval()
    t = tok.tokenize_pair(PairedText("a b c d e f", "g h i j k l m n o p"), 128)
    assert len(t) == 19
    t.token_ids, t.segment_boundary = t.token_ids[:17], 8
    h1, h2 = encode(enc, t), encode(enc, t)
    assert h1.shape == (17, 32)
    assert torch.equal(h1, h2)
    assert torch.isfinite(h1).all()


def test_perturbing_token_changes_its_row():
    torch.manual_seed(0)
    enc = ToyEncoder(dim=32).eval()
    t = tok.tokenize_pair(PairedText("food", "the soup was hot"), 128)
    h = encode(enc, t)
    t.token_ids[4] = tok.ids("cold")[0]
    h2 = encode(enc, t)
    assert not torch.allclose(h[4], h2[4])


def test_out_of_vocab_id():
    enc = ToyEncoder(dim=32)
    t = tok.tokenize_pair(PairedText("a", "b"), 16)
    t.token_ids[1] = enc.vocab_size
    with pytest.raises(EncodingError):
        encode(enc, t)


def test_padding_does_not_change_hidden_states():
    torch.manual_seed(0)
    m = SentimentPredictor().eval()
    short = m.tokenize(PairedText("what do you think of NULL of it?", "ok"))
    long = m.tokenize(PairedText("what do you think of NULL of it?", "a much longer second segment here"))
    alone = m(([short]))[0]
    batched = m([short, long])[0]
    assert torch.allclose(alone, batched, atol=1e-6)


def test_checkpoint_round_trip(tmp_path):
    torch.manual_seed(3)
    det = AspectDetector(SEMEVAL6)
    save_checkpoint(det, tmp_path / "det", {"seed": 3})
    loaded = AspectDetector.load(tmp_path / "det")
    s = ["the soup was hot", "service was slow"]
    assert [o.scores for o in loaded.predict(s)] == [o.scores for o in det.predict(s)]
    import json

    manifest = json.loads((tmp_path / "det" / "manifest.json").read_text())
    assert manifest["encoder"]["name"] == "toy"
    assert manifest["inventory"] == list(SEMEVAL6.names)
    assert manifest["provenance"] == {"seed": 3}
    assert "head.weight" in manifest["parameter_shapes"]


def test_spec_validation():
    with pytest.raises(EncodingError):
        EncoderSpec(name="gpt")
    with pytest.raises(EncodingError):
        EncoderSpec(dim=0)


def _tiny_bert(tmp_path):
    """A randomly initialised BERT with a hand-written vocabulary (no downloads)."""
    from transformers import BertConfig, BertModel, BertTokenizerFast

    words = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "what", "do", "you", "think", "of",
             "food", "service", "the", "soup", "was", "hot", "it", "?", ",", "and", "null", "##s", "drink"]
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "vocab.txt").write_text("\n".join(words) + "\n")
    hf_tok = BertTokenizerFast.from_pretrained(tmp_path / "src", do_lower_case=True)
    hf_tok.save_pretrained(tmp_path / "src")
    cfg = BertConfig(vocab_size=len(words), hidden_size=16, num_hidden_layers=1, num_attention_heads=2,
                     intermediate_size=32, max_position_embeddings=64)
    torch.manual_seed(0)
    BertModel(cfg).save_pretrained(tmp_path / "src")
    return str(tmp_path / "src")


def test_pretrained_adapter_offline(tmp_path):
    source = _tiny_bert(tmp_path)
    spec = EncoderSpec(name="bert-base", max_length=32, source=source)
    inv = AspectInventory(["drinks", "food", "service"])
    torch.manual_seed(0)
    det = AspectDetector(inv, spec)
    assert isinstance(det.tokenizer, PretrainedTokenizer)
    assert det.spec.dim == 16
    t = det.sequences(["the soup was hot"])[0]
    # "drinks" -> "drink", "##s": the second aspect starts two pieces later
    assert t.aspect_positions == [1, 3, 4]
    assert t.token_ids[0] == det.tokenizer.hf.cls_token_id
    out = det.predict(["the soup was hot"])[0]
    assert len(out.scores) == 3

    save_checkpoint(det, tmp_path / "ckpt")
    again = AspectDetector.load(tmp_path / "ckpt")
    assert again.predict(["the soup was hot"])[0].scores == out.scores


def test_pretrained_sentiment_offline(tmp_path):
    spec = EncoderSpec(name="bert-base", max_length=32, source=_tiny_bert(tmp_path))
    torch.manual_seed(0)
    sp = SentimentPredictor(spec)
    d = sp.predict([PairedText("what do you think of food of it?", "the soup was hot")])[0]
    assert abs(sum(d.p) - 1) < 1e-9
