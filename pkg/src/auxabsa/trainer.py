"""Shared optimization loop for the detector and the sentiment predictor.

Adam with two parameter groups (encoder, head), optional warmup followed by
linear decay, global-norm clipping, and selection of the epoch with the best
dev F1-macro.
"""
from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .corpus import AbsaRecord, AspectInventory, SplitBundle
from .detector import AspectDetector
from .metrics import binarize, detection_report, sentiment_report
from .sentiment import SentimentPredictor
from .templating import AspectMode, build_sentiment_input, build_sentiment_query

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparameters:
    max_length: int = 128
    dropout: float = 0.2
    batch_size: int = 32
    eval_batch_size: int = 32
    encoder_lr: float = 2e-5
    head_lr: float = 1e-3
    alpha: float = 0.2
    warmup_fraction: float = 0.0
    weight_decay_mode: str = "none"
    epochs: int = 20
    seed: int = 0
    threshold: float = 0.5
    grad_clip: float = 1.0

    def __post_init__(self):
        if self.batch_size <= 0 or self.eval_batch_size <= 0:
            raise ValueError("batch sizes must be positive")
        if self.encoder_lr <= 0 or self.head_lr <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.weight_decay_mode not in ("none", "linear"):
            raise ValueError(f"unknown weight_decay_mode {self.weight_decay_mode!r}")

    @classmethod
    def detector(cls, **overrides) -> "Hyperparameters":
        return cls(**{"dropout": 0.2, "alpha": 0.2, **overrides})

    @classmethod
    def sentiment(cls, **overrides) -> "Hyperparameters":
        return cls(**{"dropout": 0.1, "warmup_fraction": 0.1, "weight_decay_mode": "linear", **overrides})

    def to_json(self) -> dict:
        return asdict(self)


def lr_schedule(step: int, total_steps: int, base_lr: float, warmup_fraction: float) -> float:
    """Linear warmup to ``base_lr`` then linear decay to 0 at ``total_steps``."""
    if total_steps < 1:
        raise ValueError("total_steps must be at least 1")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = warmup_fraction * total_steps
    if step < warmup:
        return base_lr * step / warmup
    return base_lr * (total_steps - step) / (total_steps - warmup)


@dataclass
class SentimentFraming:
    """How records become sentiment-predictor inputs."""

    mode: str = "right"
    inventory: AspectInventory | None = None
    null_target: str = "it"

    def query(self, record: AbsaRecord, aspects: Sequence[str] | None = None) -> str:
        if self.mode == "none":
            m = AspectMode.none()
        elif self.mode == "all":
            if self.inventory is None:
                raise EvaluationError("mode 'all' needs an aspect inventory")
            m = AspectMode.all(self.inventory)
        else:
            if aspects is None:
                order = self.inventory.names if self.inventory else sorted(record.aspects)
                aspects = [a for a in order if a in record.aspects]
            m = AspectMode.right(aspects)
        return build_sentiment_query(m, record.target, self.null_target)

    def inputs(self, record: AbsaRecord, aspects: Sequence[str] | None = None):
        return build_sentiment_input(self.query(record, aspects), record.sentence)


def _require_polarity(records: Sequence[AbsaRecord]):
    missing = [r.id for r in records if r.polarity is None]
    if missing:
        raise EvaluationError(f"records without polarity: {missing[:20]}{' ...' if len(missing) > 20 else ''}")


def _examples(model, records: Sequence[AbsaRecord], framing: SentimentFraming | None):
    if isinstance(model, AspectDetector):
        seqs = model.sequences([r.sentence for r in records])
        labels = [model.inventory.encode(r.aspects) for r in records]
    else:
        _require_polarity(records)
        seqs = [model.tokenize(framing.inputs(r)) for r in records]
        labels = [r.polarity for r in records]
    return seqs, labels


def evaluate(model, records: Sequence[AbsaRecord], task: str | None = None,
             framing: SentimentFraming | None = None, batch_size: int = 32) -> dict:
    """Metric report for a detector (``detect``) or sentiment predictor (``sentiment``)."""
    task = task or ("detect" if isinstance(model, AspectDetector) else "sentiment")
    if not records:
        raise EvaluationError("cannot evaluate on zero records")
    if task == "detect":
        outputs = model.predict([r.sentence for r in records], batch_size)
        gold = binarize([r.aspects for r in records], model.inventory)
        pred = binarize([o.predicted for o in outputs], model.inventory)
        return detection_report(gold, pred)
    if task == "sentiment":
        _require_polarity(records)
        framing = framing or SentimentFraming()
        dists = model.predict([framing.inputs(r) for r in records], batch_size)
        return sentiment_report([r.polarity for r in records], [d.argmax for d in dists])
    raise EvaluationError(f"unknown task {task!r}")


@dataclass
class TrainResult:
    model: torch.nn.Module
    best_epoch: int
    dev_metrics: dict
    log: list[dict] = field(default_factory=list)


def _round(x: float) -> float:
    return float(f"{x:.10g}")


def _full_loss(model, seqs, labels, batch_size) -> float:
    was_training = model.training
    model.eval()
    total = 0.0
    with torch.no_grad():
        for b in range(0, len(seqs), batch_size):
            chunk = slice(b, b + batch_size)
            total += float(model.loss(seqs[chunk], labels[chunk])) * len(seqs[chunk])
    model.train(was_training)
    return total / len(seqs)


def train(model, bundle: SplitBundle, hp: Hyperparameters, framing: SentimentFraming | None = None,
          log_path=None, checkpoint_dir=None, provenance: dict | None = None,
          monitor_train: bool = False) -> TrainResult:
    """Fit ``model`` on ``bundle.train``; keep the epoch with the best dev F1-macro.

    The loss follows the model type: combined BCE + correlation loss for an
    :class:`AspectDetector`, cross-entropy for a :class:`SentimentPredictor`.
    With ``monitor_train`` every epoch also logs the dropout-free loss over
    the whole training split (``train_eval_loss``).
    """
    from .encoder import save_checkpoint

    if not bundle.train:
        raise ValueError("training split is empty")
    if isinstance(model, SentimentPredictor):
        framing = framing or SentimentFraming()
        train_records = [r for r in bundle.train if r.polarity is not None]
        dev_records = [r for r in bundle.dev if r.polarity is not None]
    elif isinstance(model, AspectDetector):
        model.alpha, model.threshold = hp.alpha, hp.threshold
        train_records, dev_records = list(bundle.train), list(bundle.dev)
    else:
        raise TypeError(f"cannot train {type(model).__name__}")
    if not train_records:
        raise ValueError("no usable training records")

    torch.manual_seed(hp.seed)
    gen = torch.Generator().manual_seed(hp.seed)
    seqs, labels = _examples(model, train_records, framing)
    n = len(seqs)
    steps_per_epoch = math.ceil(n / hp.batch_size)
    total_steps = max(1, hp.epochs * steps_per_epoch)

    groups = [
        {"params": model.encoder_parameters(), "lr": hp.encoder_lr},
        {"params": model.head_parameters(), "lr": hp.head_lr},
    ]
    optimizer = torch.optim.Adam(groups)
    if hp.weight_decay_mode == "linear":
        factor = lambda s: lr_schedule(min(s, total_steps), total_steps, 1.0, hp.warmup_fraction)
    else:
        warm = hp.warmup_fraction * total_steps
        factor = lambda s: min(1.0, s / warm) if warm > 0 else 1.0
    scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, factor)

    def dev_score(metrics):
        return metrics["f1_macro"]

    best_state = copy.deepcopy(model.state_dict())
    best_epoch, best_metrics = 0, {}
    if dev_records:
        best_metrics = evaluate(model, dev_records, framing=framing, batch_size=hp.eval_batch_size)
    history = []
    step = 0
    for epoch in range(1, hp.epochs + 1):
        model.train()
        order = torch.randperm(n, generator=gen).tolist()
        losses = []
        for b in range(0, n, hp.batch_size):
            idx = order[b : b + hp.batch_size]
            loss = model.loss([seqs[i] for i in idx], [labels[i] for i in idx])
            if not torch.isfinite(loss):
                ids = [train_records[i].id for i in idx]
                raise TrainingAborted(f"non-finite loss at step {step} (epoch {epoch}); batch ids {ids}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), hp.grad_clip)
            optimizer.step()
            scheduler.step()
            losses.append(loss.item())
            step += 1
        entry = {"epoch": epoch, "train_loss": _round(float(np.mean(losses))),
                 "lr": [_round(g["lr"]) for g in optimizer.param_groups]}
        if monitor_train:
            entry["train_eval_loss"] = _round(_full_loss(model, seqs, labels, hp.eval_batch_size))
        if dev_records:
            metrics = evaluate(model, dev_records, framing=framing, batch_size=hp.eval_batch_size)
            entry["dev"] = {k: _round(v) for k, v in metrics.items()}
            if best_epoch == 0 or dev_score(metrics) > dev_score(best_metrics):
                best_epoch, best_metrics = epoch, metrics
                best_state = copy.deepcopy(model.state_dict())
        else:
            best_epoch, best_state = epoch, copy.deepcopy(model.state_dict())
        history.append(entry)
        log.info("epoch %d loss %.4f dev %s", epoch, entry["train_loss"], entry.get("dev"))

    model.load_state_dict(best_state)
    model.eval()
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        with open(log_path, "w", encoding="utf-8") as fh:
            for entry in history:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    if checkpoint_dir is not None:
        prov = {**(provenance or {}), "hyperparameters": hp.to_json(), "best_epoch": best_epoch}
        if framing is not None and isinstance(model, SentimentPredictor):
            prov["training_mode"] = framing.mode
        save_checkpoint(model, checkpoint_dir, prov)
    return TrainResult(model, best_epoch, best_metrics, history)
