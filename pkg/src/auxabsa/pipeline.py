"""Detector + sentiment predictor composition and the aspect-mode baselines.

Modes:

``predicted``
    the detector picks the aspects that go into the auxiliary question
``right``
    gold aspects
``all``
    the whole aspect inventory
``none``
    the literal ``NULL``
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import AbsaRecord, AspectInventory
from .detector import AspectDetector
from .metrics import sentiment_report
from .sentiment import PolarityDistribution, SentimentPredictor
from .templating import (
    AspectMode,
    PairedText,
    build_sentiment_input,
    build_sentiment_query,
)

EVAL_MODES = ("predicted", "right", "all", "none")
FALLBACKS = ("none_mode", "all_mode")


class PipelineError(ValueError):
    pass


@dataclass
class PipelineConfig:
    mode: str = "predicted"
    fallback: str = "none_mode"
    null_target: str = "it"
    # inventory used by all-mode and by the all_mode fallback
    inventory: AspectInventory | None = None

    def __post_init__(self):
        if self.mode not in EVAL_MODES:
            raise PipelineError(f"unknown mode {self.mode!r}; expected one of {EVAL_MODES}")
        if self.fallback not in FALLBACKS:
            raise PipelineError(f"unknown fallback {self.fallback!r}")


def _mode_input(sentence, target, mode: AspectMode, null_target) -> PairedText:
    return build_sentiment_input(build_sentiment_query(mode, target, null_target), sentence)


def predicted_mode(aspects: Sequence[str], cfg: PipelineConfig, inventory: AspectInventory) -> AspectMode:
    if aspects:
        return AspectMode.right(aspects)
    if cfg.fallback == "all_mode":
        return AspectMode.all(cfg.inventory or inventory)
    return AspectMode.none()


def big_model_input(sentence: str, target: str, detector: AspectDetector,
                    cfg: PipelineConfig | None = None) -> tuple[tuple[str, ...], PairedText]:
    cfg = cfg or PipelineConfig()
    aspects = detector.predict([sentence])[0].predicted
    mode = predicted_mode(aspects, cfg, detector.inventory)
    return aspects, _mode_input(sentence, target, mode, cfg.null_target)


def big_model_predict(sentence: str, target: str, detector: AspectDetector, predictor: SentimentPredictor,
                      cfg: PipelineConfig | None = None) -> tuple[tuple[str, ...], PolarityDistribution]:
    """Detect aspects, phrase them as the auxiliary question, classify polarity."""
    cfg = cfg or PipelineConfig()
    if cfg.inventory is not None and cfg.inventory.names != detector.inventory.names:
        raise PipelineError("configured inventory does not match the detector checkpoint")
    aspects, paired = big_model_input(sentence, target, detector, cfg)
    return aspects, predictor.predict([paired])[0]


def baseline_input(sentence: str, target: str, mode: str, gold_or_inventory=None,
                   null_target: str = "it") -> PairedText:
    if mode == "right":
        if not gold_or_inventory:
            raise PipelineError("right mode needs a non-empty gold aspect list")
        m = AspectMode.right(list(gold_or_inventory))
    elif mode == "all":
        if not isinstance(gold_or_inventory, AspectInventory):
            raise PipelineError("all mode needs an AspectInventory")
        m = AspectMode.all(gold_or_inventory)
    elif mode == "none":
        m = AspectMode.none()
    else:
        raise PipelineError(f"unknown baseline mode {mode!r}")
    return _mode_input(sentence, target, m, null_target)


def baseline_predict(sentence: str, target: str, gold_or_inventory, mode: str,
                     predictor: SentimentPredictor, null_target: str = "it") -> PolarityDistribution:
    return predictor.predict([baseline_input(sentence, target, mode, gold_or_inventory, null_target)])[0]


def _gold_order(record: AbsaRecord, inventory: AspectInventory | None):
    order = inventory.names if inventory is not None else sorted(record.aspects)
    return [a for a in order if a in record.aspects]


def cross_domain_eval(records: Sequence[AbsaRecord], predictor: SentimentPredictor, mode: str,
                      detector: AspectDetector | None = None, inventory: AspectInventory | None = None,
                      cfg: PipelineConfig | None = None) -> tuple[dict, list[dict]]:
    """Run one mode over every record.

    Returns the ``{f1_micro, f1_macro}`` report and one dump row per record
    (``id, mode, aspects_used, distribution, argmax, gold``).
    """
    cfg = cfg or PipelineConfig(mode=mode, inventory=inventory)
    if mode not in EVAL_MODES:
        raise PipelineError(f"unknown mode {mode!r}")
    if not records:
        raise PipelineError("no records to evaluate")
    missing = [r.id for r in records if r.polarity is None]
    if missing:
        raise PipelineError(f"records without gold polarity: {missing[:20]}")
    if mode == "predicted" and detector is None:
        raise PipelineError("predicted mode needs a detector checkpoint")
    inventory = inventory or cfg.inventory or (detector.inventory if detector is not None else None)
    if mode == "all" and inventory is None:
        raise PipelineError("all mode needs an aspect inventory")

    if mode == "predicted":
        if inventory.names != detector.inventory.names:
            raise PipelineError("evaluation inventory does not match the detector checkpoint")
        detected = [o.predicted for o in detector.predict([r.sentence for r in records])]
        modes = [predicted_mode(a, cfg, detector.inventory) for a in detected]
    elif mode == "right":
        empty = [r.id for r in records if not r.aspects]
        if empty:
            raise PipelineError(f"right mode needs gold aspects; missing for {empty[:20]}")
        modes = [AspectMode.right(_gold_order(r, inventory)) for r in records]
    elif mode == "all":
        modes = [AspectMode.all(inventory)] * len(records)
    else:
        modes = [AspectMode.none()] * len(records)

    inputs = [_mode_input(r.sentence, r.target, m, cfg.null_target) for r, m in zip(records, modes)]
    dists = predictor.predict(inputs)
    report = sentiment_report([r.polarity for r in records], [d.argmax for d in dists])
    dump = [
        {
            "id": r.id,
            "mode": mode,
            "aspects_used": list(m.aspects) if m.kind != "none" else [],
            "distribution": d.as_dict(),
            "argmax": d.argmax,
            "gold": r.polarity,
        }
        for r, m, d in zip(records, modes, dists)
    ]
    return report, dump
