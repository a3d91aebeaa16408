"""Dataset ingestion: SemEval ABSA XML and Sentihood JSON to canonical records.

Every downstream module consumes :class:`AbsaRecord` lists, serialized as
JSON Lines with the keys ``id, sentence, target, aspects, polarity,
domain_tag``.

Record ids have the form ``<sentence id>#<group index>`` so that records
produced from the same sentence can be regrouped without an extra field.
"""
from __future__ import annotations

import json
import random
import re
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

POLARITIES = ("positive", "negative", "neutral")
NULL_TARGET = "NULL"


class CorpusError(ValueError):
    pass


def normalize_text(text: str) -> str:
    return re.sub(r"\s+", " ", unicodedata.normalize("NFC", text)).strip()


@dataclass(frozen=True)
class AbsaRecord:
    id: str
    sentence: str
    target: str
    aspects: frozenset[str]
    polarity: str | None = None
    domain_tag: str = ""

    def __post_init__(self):
        sentence = normalize_text(self.sentence)
        if not sentence:
            raise CorpusError(f"record {self.id!r}: empty sentence")
        object.__setattr__(self, "sentence", sentence)
        object.__setattr__(self, "aspects", frozenset(self.aspects))
        if self.polarity is not None and self.polarity not in POLARITIES:
            raise CorpusError(f"record {self.id!r}: bad polarity {self.polarity!r}")

    @property
    def sentence_id(self) -> str:
        return self.id.rsplit("#", 1)[0]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "sentence": self.sentence,
            "target": self.target,
            "aspects": sorted(self.aspects),
            "polarity": self.polarity,
            "domain_tag": self.domain_tag,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "AbsaRecord":
        return cls(
            id=obj["id"],
            sentence=obj["sentence"],
            target=obj["target"],
            aspects=frozenset(obj["aspects"]),
            polarity=obj["polarity"],
            domain_tag=obj["domain_tag"],
        )


@dataclass(frozen=True)
class AspectInventory:
    """Ordered aspect names; position ``i`` is label index ``i``."""

    names: tuple[str, ...]

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise CorpusError(f"duplicate aspect names in {names}")
        object.__setattr__(self, "names", names)

    @property
    def C(self) -> int:
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name):
        return name in self.names

    def index(self, name: str) -> int:
        return self.names.index(name)

    def encode(self, aspects: Iterable[str]) -> list[int]:
        """Binary label vector for an aspect set."""
        aspects = set(aspects)
        unknown = aspects - set(self.names)
        if unknown:
            raise CorpusError(f"aspects {sorted(unknown)} not in inventory {list(self.names)}")
        return [int(n in aspects) for n in self.names]


@dataclass
class SplitBundle:
    train: list[AbsaRecord]
    dev: list[AbsaRecord]
    test: list[AbsaRecord]
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.dev), len(self.test)

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "train": [r.id for r in self.train],
            "dev": [r.id for r in self.dev],
            "test": [r.id for r in self.test],
        }


def default_aspect_map() -> dict:
    text = resources.files("auxabsa").joinpath("data/aspect_map.json").read_text()
    return json.loads(text)


def _map_category(category: str, schema_year: int, aspect_map: Mapping) -> str:
    if schema_year == 2014:
        table = aspect_map["2014"]
        key = category
    else:
        table = aspect_map["entity"]
        key = category.split("#", 1)[0]
    if key not in table:
        raise CorpusError(f"unknown aspect category {category!r} (SemEval {schema_year})")
    return table[key]


def _group_polarity(polarities: Sequence[str]) -> str | None:
    # a (sentence, target) group whose opinions disagree has no single polarity;
    # it stays available for aspect detection only
    distinct = set(polarities)
    return distinct.pop() if len(distinct) == 1 else None


def parse_semeval(
    xml_document: str, schema_year: int, aspect_map: Mapping | None = None
) -> list[AbsaRecord]:
    if schema_year not in (2014, 2015, 2016):
        raise CorpusError(f"unsupported SemEval schema year {schema_year}")
    aspect_map = aspect_map or default_aspect_map()
    try:
        root = ET.fromstring(xml_document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise CorpusError(f"malformed XML at line {line}, column {col}: {exc}") from exc

    tag = f"semeval{schema_year}"
    records = []
    for n, sent in enumerate(root.iter("sentence")):
        sid = sent.get("id") or str(n)
        text_el = sent.find("text")
        if text_el is None or not normalize_text(text_el.text or ""):
            continue
        text = text_el.text

        groups: dict[str, tuple[list[str], list[str]]] = {}
        if schema_year == 2014:
            opinions = [
                (NULL_TARGET, c.get("category"), c.get("polarity"))
                for c in sent.iter("aspectCategory")
            ]
        else:
            opinions = [
                (o.get("target") or NULL_TARGET, o.get("category"), o.get("polarity"))
                for o in sent.iter("Opinion")
            ]
        for target, category, polarity in opinions:
            if category is None or polarity is None:
                raise CorpusError(f"sentence {sid}: opinion without category/polarity")
            aspect = _map_category(category, schema_year, aspect_map)
            if polarity == "conflict":
                continue
            if polarity not in POLARITIES:
                raise CorpusError(f"sentence {sid}: unknown polarity {polarity!r}")
            aspects, pols = groups.setdefault(target, ([], []))
            aspects.append(aspect)
            pols.append(polarity)

        if not groups and not opinions:
            records.append(AbsaRecord(f"{sid}#0", text, NULL_TARGET, frozenset(), None, tag))
        for k, (target, (aspects, pols)) in enumerate(groups.items()):
            records.append(
                AbsaRecord(f"{sid}#{k}", text, target, frozenset(aspects), _group_polarity(pols), tag)
            )
    return records


def parse_sentihood(json_document: str, domain_tag: str = "sentihood") -> list[AbsaRecord]:
    try:
        entries = json.loads(json_document)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(entries, list):
        raise CorpusError("Sentihood document must be a JSON list")

    def need(obj, key, idx):
        if key not in obj:
            raise CorpusError(f"Sentihood record {idx}: missing key {key!r}")
        return obj[key]

    records = []
    for idx, entry in enumerate(entries):
        text = need(entry, "text", idx)
        opinions = need(entry, "opinions", idx)
        sid = str(entry.get("id", idx))
        groups: dict[str, tuple[list[str], list[str]]] = {}
        for op in opinions:
            target = need(op, "target_entity", idx)
            aspect = need(op, "aspect", idx)
            sentiment = need(op, "sentiment", idx).lower()
            if sentiment not in POLARITIES:
                raise CorpusError(f"Sentihood record {idx}: unknown sentiment {sentiment!r}")
            aspects, pols = groups.setdefault(target, ([], []))
            aspects.append(aspect)
            pols.append(sentiment)
        if not groups:
            records.append(AbsaRecord(f"{sid}#0", text, NULL_TARGET, frozenset(), None, domain_tag))
        for k, (target, (aspects, pols)) in enumerate(groups.items()):
            records.append(
                AbsaRecord(f"{sid}#{k}", text, target, frozenset(aspects), _group_polarity(pols), domain_tag)
            )
    return records


def filter_single_target(records: Sequence[AbsaRecord]) -> list[AbsaRecord]:
    targets: dict[str, set[str]] = {}
    for r in records:
        targets.setdefault(r.sentence_id, set()).add(r.target)
    return [r for r in records if len(targets[r.sentence_id]) == 1]


def split(records: Sequence[AbsaRecord], seed: int) -> SplitBundle:
    n = len(records)
    if n < 10:
        raise CorpusError(f"need at least 10 records to split, got {n}")
    shuffled = list(records)
    random.Random(seed).shuffle(shuffled)
    n_held = n // 10
    n_train = n - 2 * n_held
    return SplitBundle(
        train=shuffled[:n_train],
        dev=shuffled[n_train : n_train + n_held],
        test=shuffled[n_train + n_held :],
        seed=seed,
    )


def aspect_inventory(records: Iterable[AbsaRecord]) -> AspectInventory:
    names = set()
    for r in records:
        names.update(r.aspects)
    return AspectInventory(sorted(names))


def with_polarity(records: Iterable[AbsaRecord]) -> list[AbsaRecord]:
    return [r for r in records if r.polarity is not None]


def write_jsonl(records: Iterable[AbsaRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")


def read_jsonl(path) -> list[AbsaRecord]:
    with open(path, encoding="utf-8") as fh:
        return [AbsaRecord.from_json(json.loads(line)) for line in fh if line.strip()]


FORMATS = ("semeval2014", "semeval2015", "semeval2016", "sentihood", "jsonl")


def load_dataset(path, fmt: str) -> list[AbsaRecord]:
    """Read a dataset file in one of :data:`FORMATS`."""
    if fmt not in FORMATS:
        raise CorpusError(f"unknown dataset format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    if fmt == "jsonl":
        return read_jsonl(path)
    text = path.read_text(encoding="utf-8")
    try:
        if fmt == "sentihood":
            return parse_sentihood(text)
        return parse_semeval(text, int(fmt[-4:]))
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from exc
