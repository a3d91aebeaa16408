"""Three-way polarity classifier over (auxiliary question, sentence) pairs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .corpus import POLARITIES
from .encoder import EncoderModel, EncoderSpec, backbone_dir_for, load_state, read_manifest
from .templating import PairedText

LOG_FLOOR = 1e-12


class SentimentError(ValueError):
    pass


@dataclass(frozen=True)
class PolarityDistribution:
    p: tuple[float, float, float]

    @property
    def argmax(self) -> str:
        return POLARITIES[int(np.argmax(self.p))]

    def as_dict(self) -> dict:
        return dict(zip(POLARITIES, self.p))


def polarity_index(label) -> int:
    if isinstance(label, str):
        return POLARITIES.index(label)
    return int(label)


def cross_entropy(labels, probs) -> torch.Tensor:
    """Mean of ``-log p[gold]`` with the log floored at 1e-12.

    ``labels`` are class names or indices; ``probs`` is ``(3,)`` or ``(B, 3)``.
    """
    probs = probs if isinstance(probs, torch.Tensor) else torch.as_tensor(np.asarray(probs, dtype=np.float64))
    if probs.dim() == 1:
        probs, labels = probs[None], [labels]
    idx = torch.tensor([polarity_index(l) for l in labels], dtype=torch.long)
    gold = probs.gather(1, idx[:, None]).squeeze(1)
    return -gold.clamp(min=LOG_FLOOR).log().mean()


class SentimentPredictor(EncoderModel):
    kind = "sentiment"

    def __init__(self, spec: EncoderSpec = EncoderSpec(), dropout: float = 0.1,
                 zero_head: bool = False, backbone_dir=None):
        super().__init__(spec, dropout, backbone_dir)
        self.head = nn.Linear(self.spec.dim, len(POLARITIES))
        if zero_head:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)

    def forward(self, seqs) -> torch.Tensor:
        """Pre-softmax class scores from the sequence-start state, shape ``(B, 3)``."""
        ids, mask = self.batch_tensors(seqs)
        hidden = self.encoder(ids, mask)
        return self.head(self.drop(hidden[:, 0]))

    def loss(self, seqs, labels) -> torch.Tensor:
        idx = torch.tensor([polarity_index(l) for l in labels], dtype=torch.long)
        return F.cross_entropy(self(seqs), idx)

    @torch.no_grad()
    def predict(self, inputs: Sequence[PairedText], batch_size: int = 32) -> list[PolarityDistribution]:
        was_training = self.training
        self.eval()
        out = []
        for i in range(0, len(inputs), batch_size):
            seqs = [self.tokenize(p) for p in inputs[i : i + batch_size]]
            for row in self(seqs).double().softmax(-1).numpy():
                out.append(PolarityDistribution(tuple(float(v) for v in row)))
        self.train(was_training)
        return out

    def manifest(self) -> dict:
        return {"classes": list(POLARITIES)}

    @classmethod
    def load(cls, path) -> "SentimentPredictor":
        m = read_manifest(path)
        if m["kind"] != cls.kind:
            raise SentimentError(f"{path} holds a {m['kind']!r} checkpoint, not a sentiment predictor")
        if tuple(m["classes"]) != POLARITIES:
            raise SentimentError(f"{path}: unexpected class order {m['classes']}")
        spec = EncoderSpec(**m["encoder"])
        return load_state(cls(spec, m["dropout"], backbone_dir=backbone_dir_for(path, spec)), path)


def predict_polarity(p: PairedText, model: SentimentPredictor) -> PolarityDistribution:
    return model.predict([p])[0]
