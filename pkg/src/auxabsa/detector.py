"""Multi-label aspect detector with a label-correlation-aware training loss.

The aspect names are placed in the first input segment; one shared
``D -> 1`` projection scores each aspect at the hidden state of its first
sub-token, and a sigmoid turns that into a per-aspect probability.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .corpus import AspectInventory
from .encoder import EncoderModel, EncoderSpec, backbone_dir_for, load_state, read_manifest
from .templating import build_detector_input, order_by_score


class DetectorError(ValueError):
    pass


def _tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def lca_loss(y, scores) -> torch.Tensor:
    """Label-correlation-aware loss, per example over the last axis.

    For negatives ``p`` and positives ``q``, averages ``exp(s_p - s_q)`` over
    all ``(p, q)`` pairs. Zero when either label set is empty.
    """
    y, scores = _tensor(y), _tensor(scores)
    if y.shape != scores.shape:
        raise DetectorError(f"label/score shape mismatch: {tuple(y.shape)} vs {tuple(scores.shape)}")
    pos = y > 0.5
    neg = ~pos
    diff = scores[..., :, None] - scores[..., None, :]
    pairs = (neg[..., :, None] & pos[..., None, :]).to(scores.dtype)
    total = (diff.exp() * pairs).sum((-1, -2))
    n_pairs = neg.sum(-1) * pos.sum(-1)
    return torch.where(n_pairs > 0, total / n_pairs.clamp(min=1), torch.zeros_like(total))


def bce_loss(y, scores, logits: bool = False) -> torch.Tensor:
    """Binary cross-entropy averaged over the label axis.

    With ``logits=True`` the scores are pre-sigmoid values and the stable
    log-sum-exp form is used.
    """
    y, scores = _tensor(y), _tensor(scores)
    y = y.to(scores.dtype)
    if logits:
        per_label = F.binary_cross_entropy_with_logits(scores, y, reduction="none")
    else:
        per_label = F.binary_cross_entropy(scores, y, reduction="none")
    return per_label.mean(-1)


def combined_loss(y, scores, alpha: float = 0.2, logits: bool = False) -> torch.Tensor:
    """``(1 - alpha) * BCE + alpha * LCA``, each averaged over the batch.

    ``y`` and ``scores`` are ``(C,)`` for one example or ``(B, C)`` for a batch.
    The correlation term always sees probabilities.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DetectorError(f"alpha must lie in [0, 1], got {alpha}")
    y, scores = _tensor(y), _tensor(scores)
    if scores.dim() == 1:
        y, scores = y[None], scores[None]
    if scores.shape[0] == 0:
        raise DetectorError("combined_loss on an empty batch")
    probs = scores.sigmoid() if logits else scores
    bce = bce_loss(y, scores, logits=logits).mean()
    lca = lca_loss(y, probs).mean()
    return (1.0 - alpha) * bce + alpha * lca


def threshold_select(scores, tau: float = 0.5, inventory: AspectInventory | None = None) -> frozenset:
    """Indices (or names, given an inventory) whose score is strictly above ``tau``."""
    if not 0.0 < tau < 1.0:
        raise DetectorError(f"threshold must lie in (0, 1), got {tau}")
    idx = [i for i, s in enumerate(np.asarray(scores, dtype=float)) if s > tau]
    if inventory is None:
        return frozenset(idx)
    return frozenset(inventory.names[i] for i in idx)


@dataclass(frozen=True)
class DetectorOutput:
    scores: tuple[float, ...]
    # thresholded aspects, highest score first, ties in inventory order
    predicted: tuple[str, ...]
    threshold: float


class AspectDetector(EncoderModel):
    kind = "detector"

    def __init__(self, inventory: AspectInventory, spec: EncoderSpec = EncoderSpec(),
                 dropout: float = 0.2, threshold: float = 0.5, alpha: float = 0.2,
                 zero_head: bool = False, backbone_dir=None):
        if inventory.C < 1:
            raise DetectorError("detector needs at least one aspect")
        super().__init__(spec, dropout, backbone_dir)
        self.inventory = inventory
        self.threshold = threshold
        self.alpha = alpha
        self.head = nn.Linear(self.spec.dim, 1)
        if zero_head:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)

    def sequences(self, sentences: Sequence[str]):
        return [self.tokenize(build_detector_input(self.inventory, s)) for s in sentences]

    def forward(self, seqs) -> torch.Tensor:
        """Pre-sigmoid aspect scores, shape ``(B, C)``."""
        ids, mask = self.batch_tensors(seqs)
        hidden = self.encoder(ids, mask)
        pos = torch.tensor([s.aspect_positions for s in seqs], dtype=torch.long)
        at_aspects = hidden.gather(1, pos[..., None].expand(-1, -1, hidden.shape[-1]))
        return self.head(self.drop(at_aspects)).squeeze(-1)

    def loss(self, seqs, labels) -> torch.Tensor:
        logits = self(seqs)
        y = torch.as_tensor(labels, dtype=logits.dtype)
        return combined_loss(y, logits, self.alpha, logits=True)

    @torch.no_grad()
    def predict(self, sentences: Sequence[str], batch_size: int = 32) -> list[DetectorOutput]:
        was_training = self.training
        self.eval()
        out = []
        for i in range(0, len(sentences), batch_size):
            probs = self(self.sequences(sentences[i : i + batch_size])).sigmoid().double().numpy()
            for row in probs:
                chosen = threshold_select(row, self.threshold, self.inventory)
                ordered = order_by_score(chosen, row, self.inventory)
                out.append(DetectorOutput(tuple(float(v) for v in row), tuple(ordered), self.threshold))
        self.train(was_training)
        return out

    def manifest(self) -> dict:
        return {"inventory": list(self.inventory.names), "threshold": self.threshold, "alpha": self.alpha}

    @classmethod
    def load(cls, path) -> "AspectDetector":
        m = read_manifest(path)
        if m["kind"] != cls.kind:
            raise DetectorError(f"{path} holds a {m['kind']!r} checkpoint, not a detector")
        spec = EncoderSpec(**m["encoder"])
        model = cls(AspectInventory(m["inventory"]), spec, m["dropout"], m["threshold"], m["alpha"],
                    backbone_dir=backbone_dir_for(path, spec))
        return load_state(model, path)


def predict_scores(sentence: str, inventory: AspectInventory, model: AspectDetector) -> DetectorOutput:
    if inventory.names != model.inventory.names:
        raise DetectorError(
            f"inventory {list(inventory.names)} does not match the model's {list(model.inventory.names)}"
        )
    return model.predict([sentence])[0]
