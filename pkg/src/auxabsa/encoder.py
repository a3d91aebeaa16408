"""Text encoders: paired-text tokenization and L x D hidden states.

Two backends share one contract:

* ``toy`` -- hashed word embeddings, learned positions and two pre-norm
  self-attention blocks. Small enough for float64 finite-difference checks
  and for CPU overfitting tests; needs no downloads.
* ``bert-base`` / ``deberta-base`` / ``roberta-base`` -- HuggingFace
  backbones. Weights are fetched (or read from ``$AUXABSA_CACHE``) by
  ``transformers``.
"""
from __future__ import annotations

import json
import math
import os
import re
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .templating import PairedText

CACHE_ENV = "AUXABSA_CACHE"
CHECKPOINT_FORMAT = 1

PRETRAINED_IDS = {
    "bert-base": "bert-base-uncased",
    "deberta-base": "microsoft/deberta-base",
    "roberta-base": "roberta-base",
}
ENCODER_NAMES = ("toy",) + tuple(PRETRAINED_IDS)

TOY_BUCKETS = 8192
PAD_ID, CLS_ID, SEP_ID = 0, 1, 2
TOY_SPECIALS = 3
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderSpec:
    name: str = "toy"
    dim: int = 32
    max_length: int = 128
    # HF model id or local directory; defaults to PRETRAINED_IDS[name]
    source: str | None = None

    def __post_init__(self):
        if self.name not in ENCODER_NAMES:
            raise EncodingError(f"unknown encoder {self.name!r}; expected one of {ENCODER_NAMES}")
        if self.dim <= 0:
            raise EncodingError("encoder width must be positive")

    @property
    def pretrained_source(self) -> str:
        return self.source or PRETRAINED_IDS[self.name]

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TokenSequence:
    token_ids: list[int]
    segment_boundary: int
    special_positions: list[int]
    aspect_positions: list[int] | None = None

    def __len__(self):
        return len(self.token_ids)


def _assemble(a_pieces, b_ids, p: PairedText, max_length: int, build):
    """Shared truncation and aspect-position logic.

    ``a_pieces`` are ``(id, start, end)`` with character offsets into
    ``p.segment_a``; ``build(a_ids, b_ids)`` adds special tokens.
    """
    if max_length < 8:
        raise EncodingError("max_length must be at least 8")
    n_special = len(build([], []))
    budget = max_length - n_special
    if len(a_pieces) > budget:
        raise EncodingError(
            f"first segment needs {len(a_pieces)} tokens but only {budget} fit in max_length={max_length}"
        )
    b_ids = list(b_ids[: budget - len(a_pieces)])
    a_ids = [t for t, _, _ in a_pieces]

    # locate segments inside the special-token layout with negative sentinels
    layout = build([-2] * len(a_ids), [-3] * len(b_ids))
    a_start = layout.index(-2) if a_ids else None
    ids = build(a_ids, b_ids)
    specials = [i for i, v in enumerate(layout) if v >= 0]
    if b_ids:
        boundary = layout.index(-3)
    else:
        # empty second segment after truncation: boundary after the first separator
        boundary = (a_start or 0) + len(a_ids) + 1

    aspect_positions = _aspect_positions(a_pieces, p.aspects, a_start)
    return TokenSequence(ids, boundary, specials, aspect_positions)


def _aspect_positions(a_pieces, aspects, a_start):
    """Index of the first token of each aspect name inside the full sequence."""
    if aspects is None:
        return None
    positions = []
    start = 0
    for name in aspects:
        end = start + len(name)
        hit = next((k for k, (_, s, e) in enumerate(a_pieces) if e > start and s < end), None)
        if hit is None:
            raise EncodingError(f"aspect {name!r} produced no tokens")
        positions.append(a_start + hit)
        start = end + 1
    return positions


class ToyTokenizer:
    """Lowercased word/punctuation tokens hashed into a fixed bucket range."""

    vocab_size = TOY_BUCKETS + TOY_SPECIALS
    pad_id = PAD_ID

    def pieces(self, text: str) -> list[tuple[int, int, int]]:
        out = []
        for m in _TOKEN_RE.finditer(text.lower()):
            bucket = zlib.crc32(m.group().encode("utf-8")) % TOY_BUCKETS
            out.append((bucket + TOY_SPECIALS, m.start(), m.end()))
        return out

    def ids(self, text: str) -> list[int]:
        return [t for t, _, _ in self.pieces(text)]

    @staticmethod
    def build(a_ids, b_ids):
        return [CLS_ID, *a_ids, SEP_ID, *b_ids, SEP_ID]

    def tokenize_pair(self, p: PairedText, max_length: int = 128) -> TokenSequence:
        return _assemble(self.pieces(p.segment_a), self.ids(p.segment_b), p, max_length, self.build)


class PretrainedTokenizer:
    """Adapter over a HuggingFace fast tokenizer."""

    def __init__(self, hf_tokenizer):
        if not getattr(hf_tokenizer, "is_fast", False):
            raise EncodingError("a fast tokenizer is required for aspect offsets")
        self.hf = hf_tokenizer
        self.vocab_size = len(hf_tokenizer)
        self.pad_id = hf_tokenizer.pad_token_id or 0

    def tokenize_pair(self, p: PairedText, max_length: int = 128) -> TokenSequence:
        if max_length < 8:
            raise EncodingError("max_length must be at least 8")
        n_a = len(self.hf(p.segment_a, add_special_tokens=False)["input_ids"])
        budget = max_length - self.hf.num_special_tokens_to_add(pair=True)
        if n_a > budget:
            raise EncodingError(
                f"first segment needs {n_a} tokens but only {budget} fit in max_length={max_length}"
            )
        enc = self.hf(p.segment_a, p.segment_b, truncation="only_second", max_length=max_length,
                      return_offsets_mapping=True)
        seq_ids = enc.sequence_ids()
        ids = list(enc["input_ids"])
        a_idx = [i for i, s in enumerate(seq_ids) if s == 0]
        b_idx = [i for i, s in enumerate(seq_ids) if s == 1]
        specials = [i for i, s in enumerate(seq_ids) if s is None]
        boundary = b_idx[0] if b_idx else a_idx[-1] + 2
        a_pieces = [(ids[i], *enc["offset_mapping"][i]) for i in a_idx]
        return TokenSequence(ids, boundary, specials, _aspect_positions(a_pieces, p.aspects, a_idx[0]))


def collate(seqs: Sequence[TokenSequence], pad_id: int = PAD_ID):
    """Right-pad a batch; returns ``(input_ids, attention_mask)`` tensors."""
    width = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), width), pad_id, dtype=torch.long)
    mask = torch.zeros((len(seqs), width), dtype=torch.long)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = torch.tensor(s.token_ids, dtype=torch.long)
        mask[i, : len(s)] = 1
    return ids, mask


class SelfAttentionBlock(nn.Module):
    def __init__(self, dim: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(nn.Linear(dim, 2 * dim), nn.GELU(), nn.Linear(2 * dim, dim))
        self.drop = nn.Dropout(dropout)

    def forward(self, x, attention_mask):
        B, L, D = x.shape
        h = self.norm1(x)
        q, k, v = self.qkv(h).view(B, L, 3, self.n_heads, D // self.n_heads).unbind(2)
        q, k, v = (t.transpose(1, 2) for t in (q, k, v))
        att = q @ k.transpose(-1, -2) / math.sqrt(D // self.n_heads)
        att = att.masked_fill(attention_mask[:, None, None, :] == 0, float("-inf"))
        att = self.drop(att.softmax(-1))
        h = (att @ v).transpose(1, 2).reshape(B, L, D)
        x = x + self.drop(self.out(h))
        return x + self.drop(self.ff(self.norm2(x)))


class ToyEncoder(nn.Module):
    def __init__(self, dim: int = 32, max_length: int = 128, n_layers: int = 2, n_heads: int = 4,
                 dropout: float = 0.0, vocab_size: int = ToyTokenizer.vocab_size):
        super().__init__()
        self.vocab_size = vocab_size
        self.tok = nn.Embedding(vocab_size, dim, padding_idx=PAD_ID)
        self.pos = nn.Embedding(max_length, dim)
        self.blocks = nn.ModuleList(SelfAttentionBlock(dim, n_heads, dropout) for _ in range(n_layers))
        self.norm = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)
        nn.init.normal_(self.tok.weight, std=0.5)
        nn.init.normal_(self.pos.weight, std=0.1)

    def forward(self, input_ids, attention_mask):
        positions = torch.arange(input_ids.shape[1], device=input_ids.device)
        x = self.drop(self.tok(input_ids) + self.pos(positions)[None])
        for block in self.blocks:
            x = block(x, attention_mask)
        return self.norm(x)


class PretrainedEncoder(nn.Module):
    def __init__(self, backbone):
        super().__init__()
        self.backbone = backbone
        self.vocab_size = backbone.config.vocab_size

    def forward(self, input_ids, attention_mask):
        return self.backbone(input_ids=input_ids, attention_mask=attention_mask).last_hidden_state


def build_encoder(spec: EncoderSpec, dropout: float = 0.0, backbone_dir: str | os.PathLike | None = None):
    """Return ``(tokenizer, encoder_module, spec)`` for an encoder spec.

    ``dropout`` is applied by the task heads, not here; pretrained backbones
    keep the dropout of their own config.

    For pretrained backbones the returned spec carries the actual hidden width.
    ``backbone_dir`` loads config and tokenizer from a checkpoint instead of
    the hub (weights then come from the checkpoint's state dict).
    """
    if spec.name == "toy":
        # ``dropout`` is a head setting; the toy backbone itself runs without dropout
        return ToyTokenizer(), ToyEncoder(spec.dim, spec.max_length), spec

    from transformers import AutoConfig, AutoModel, AutoTokenizer

    if backbone_dir is not None:
        tok = AutoTokenizer.from_pretrained(backbone_dir)
        backbone = AutoModel.from_config(AutoConfig.from_pretrained(backbone_dir))
    else:
        cache = os.environ.get(CACHE_ENV)
        tok = AutoTokenizer.from_pretrained(spec.pretrained_source, cache_dir=cache)
        backbone = AutoModel.from_pretrained(spec.pretrained_source, cache_dir=cache)
    spec = EncoderSpec(spec.name, backbone.config.hidden_size, spec.max_length, spec.source)
    return PretrainedTokenizer(tok), PretrainedEncoder(backbone), spec


def encode(encoder: nn.Module, t: TokenSequence) -> torch.Tensor:
    """Hidden states (L x D) for a single token sequence."""
    ids = torch.tensor(t.token_ids, dtype=torch.long)
    if ids.numel() and (ids.min() < 0 or ids.max() >= encoder.vocab_size):
        raise EncodingError(f"token id out of range [0, {encoder.vocab_size})")
    mask = torch.ones_like(ids)
    return encoder(ids[None], mask[None])[0]


class EncoderModel(nn.Module):
    """Base for task models: a tokenizer, an encoder and a task head."""

    kind = "base"

    def __init__(self, spec: EncoderSpec, dropout: float, backbone_dir=None):
        super().__init__()
        self.tokenizer, self.encoder, self.spec = build_encoder(spec, dropout, backbone_dir)
        self.dropout = dropout
        self.drop = nn.Dropout(dropout)

    def encoder_parameters(self):
        return list(self.encoder.parameters())

    def head_parameters(self):
        enc = {id(p) for p in self.encoder.parameters()}
        return [p for p in self.parameters() if id(p) not in enc]

    def tokenize(self, p: PairedText) -> TokenSequence:
        return self.tokenizer.tokenize_pair(p, self.spec.max_length)

    def batch_tensors(self, seqs: Sequence[TokenSequence]):
        ids, mask = collate(seqs, self.tokenizer.pad_id)
        if ids.max() >= self.encoder.vocab_size:
            raise EncodingError(f"token id out of range [0, {self.encoder.vocab_size})")
        return ids, mask

    def manifest(self) -> dict:
        return {}


def save_checkpoint(model: EncoderModel, path, provenance: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    state = {k: v.detach().cpu().contiguous() for k, v in model.state_dict().items()}
    manifest = {
        "format_version": CHECKPOINT_FORMAT,
        "kind": model.kind,
        "encoder": model.spec.to_json(),
        "dropout": model.dropout,
        "parameter_shapes": {k: list(v.shape) for k, v in state.items()},
        "provenance": provenance or {},
        **model.manifest(),
    }
    torch.save(state, path / "weights.pt")
    if isinstance(model.encoder, PretrainedEncoder):
        model.encoder.backbone.config.save_pretrained(path / "backbone")
        model.tokenizer.hf.save_pretrained(path / "backbone")
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    manifest = json.loads((Path(path) / "manifest.json").read_text())
    if manifest.get("format_version") != CHECKPOINT_FORMAT:
        raise EncodingError(f"{path}: unsupported checkpoint format {manifest.get('format_version')}")
    return manifest


def load_state(model: EncoderModel, path) -> EncoderModel:
    state = torch.load(Path(path) / "weights.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model


def backbone_dir_for(path, spec: EncoderSpec):
    d = Path(path) / "backbone"
    return d if spec.name != "toy" and d.exists() else None
