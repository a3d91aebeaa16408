"""Paired-text inputs for the aspect detector and the sentiment predictor.

The sentiment query reproduces the auxiliary question format::

    what do you think of quality, and price of the food?
    what do you think of quality, price and atmosphere of the food?
    what do you think of NULL of the food?

Special tokens are added by the encoder's tokenizer, never here.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import NULL_TARGET, AspectInventory

MODES = ("right", "all", "none")
NULL_ASPECT = "NULL"


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PairedText:
    segment_a: str
    segment_b: str
    # set only for detector inputs: aspect names in segment_a order
    aspects: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.segment_a or not self.segment_b:
            raise TemplateError("both segments of a paired input must be non-empty")


@dataclass(frozen=True)
class AspectMode:
    kind: str
    aspects: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in MODES:
            raise TemplateError(f"unknown aspect mode {self.kind!r}")
        object.__setattr__(self, "aspects", tuple(self.aspects))
        if self.kind == "none" and self.aspects:
            raise TemplateError("mode 'none' takes no aspects")

    @classmethod
    def right(cls, aspects: Sequence[str]) -> "AspectMode":
        return cls("right", tuple(aspects))

    @classmethod
    def all(cls, inventory: AspectInventory) -> "AspectMode":
        return cls("all", inventory.names)

    @classmethod
    def none(cls) -> "AspectMode":
        return cls("none")


def build_detector_input(inventory: AspectInventory, sentence: str) -> PairedText:
    if inventory.C < 1:
        raise TemplateError("detector input needs a non-empty aspect inventory")
    return PairedText(" ".join(inventory.names), sentence, aspects=inventory.names)


def join_aspects(aspects: Sequence[str]) -> str:
    # two items keep the printed "a, and b" form; longer lists use "a, b and c"
    if len(aspects) == 1:
        return aspects[0]
    if len(aspects) == 2:
        return f"{aspects[0]}, and {aspects[1]}"
    return ", ".join(aspects[:-1]) + f" and {aspects[-1]}"


def render_target(target: str, null_target: str = "it") -> str:
    if not target or target == NULL_TARGET:
        return null_target
    return target


def build_sentiment_query(mode: AspectMode, target: str, null_target: str = "it") -> str:
    target = render_target(target, null_target)
    if mode.kind == "none":
        aspects = NULL_ASPECT
    else:
        if not mode.aspects:
            raise TemplateError(f"mode {mode.kind!r} needs at least one aspect; use mode 'none'")
        aspects = join_aspects(mode.aspects)
    return f"what do you think of {aspects} of {target}?"


def build_sentiment_input(query: str, sentence: str) -> PairedText:
    return PairedText(query, sentence)


def order_by_score(aspects, scores, inventory: AspectInventory) -> list[str]:
    """Sort aspects by descending detector score, ties in inventory order."""
    return sorted(aspects, key=lambda a: (-scores[inventory.index(a)], inventory.index(a)))


def render_with_specials(p: PairedText, cls: str = "[CLS]", sep: str = "[SEP]") -> str:
    """Human-readable BERT-style rendering, e.g. for reports."""
    return f"{cls} {p.segment_a} {sep} {p.segment_b} {sep}"
