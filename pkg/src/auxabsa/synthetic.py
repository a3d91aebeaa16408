"""Synthetic two-domain corpus where polarity depends on the aspect.

Adjectives flip polarity across aspects ("hot" soup is good, a hot room is
not), so a sentence alone is ambiguous and the auxiliary question decides.

* The *neighbourhood* domain (Sentihood JSON) repeats identical sentences
  such as ``"LOCATION1 was hot"`` under different aspects.
* The *restaurant* domain (SemEval-2016 XML) names a concrete noun
  ("the soup was hot") that reveals the aspect to a detector trained there,
  but whose words never occur in the neighbourhood domain.
"""
from __future__ import annotations

import json
import random
from importlib import resources
from xml.sax.saxutils import quoteattr, escape

ASPECTS = ("atmosphere", "drinks", "food", "service")
ENTITY = {"atmosphere": "AMBIENCE", "drinks": "DRINKS", "food": "FOOD", "service": "SERVICE"}

POLARITY_TABLE = {
    "hot": {"food": "positive", "drinks": "negative", "atmosphere": "negative", "service": "neutral"},
    "cold": {"food": "negative", "drinks": "positive", "atmosphere": "neutral", "service": "negative"},
    "loud": {"food": "neutral", "drinks": "neutral", "atmosphere": "positive", "service": "negative"},
    "slow": {"food": "positive", "drinks": "neutral", "atmosphere": "positive", "service": "negative"},
    "light": {"food": "neutral", "drinks": "positive", "atmosphere": "positive", "service": "neutral"},
    "sharp": {"food": "positive", "drinks": "negative", "atmosphere": "neutral", "service": "positive"},
}
ADJECTIVES = tuple(POLARITY_TABLE)

NOUNS = {
    "food": ("soup", "pasta", "steak", "bread"),
    "drinks": ("coffee", "wine", "juice", "beer"),
    "atmosphere": ("patio", "music", "room", "decor"),
    "service": ("waiter", "staff", "host", "server"),
}

NEIGHBOURHOOD_TEMPLATES = (
    "{loc} was {adj}",
    "people say {loc} is {adj}",
    "honestly {loc} felt {adj} to me",
    "i think {loc} is really {adj}",
    "{loc} is {adj} these days",
    "my friends found {loc} quite {adj}",
)
RESTAURANT_TEMPLATES = (
    "the {noun} was {adj}",
    "honestly, the {noun} is {adj}.",
    "i found the {noun} really {adj}",
    "we thought the {noun} was quite {adj}",
)


def neighbourhood_json(n: int, seed: int = 0) -> str:
    """Sentihood-format document with ``n`` single-opinion entries."""
    rng = random.Random(seed)
    entries = []
    for i in range(n):
        aspect, adj = rng.choice(ASPECTS), rng.choice(ADJECTIVES)
        loc = rng.choice(("LOCATION1", "LOCATION2"))
        text = rng.choice(NEIGHBOURHOOD_TEMPLATES).format(loc=loc, adj=adj)
        entries.append({
            "id": f"nb{i}",
            "text": text,
            "opinions": [{"target_entity": loc, "aspect": aspect,
                          "sentiment": POLARITY_TABLE[adj][aspect].capitalize()}],
        })
    return json.dumps(entries, indent=1)


def restaurant_xml(n: int, seed: int = 0, pair_rate: float = 0.15) -> str:
    """SemEval-2016-format document with ``n`` sentences.

    A ``pair_rate`` share mentions two aspects under an implicit target;
    these train the detector on multi-label inputs.
    """
    rng = random.Random(seed)
    lines = ['<?xml version="1.0" encoding="UTF-8"?>', "<Reviews>", ' <Review rid="synthetic">', "  <sentences>"]
    for i in range(n):
        adj = rng.choice(ADJECTIVES)
        if rng.random() < pair_rate:
            a1, a2 = rng.sample(ASPECTS, 2)
            n1, n2 = rng.choice(NOUNS[a1]), rng.choice(NOUNS[a2])
            text = f"the {n1} and the {n2} were both {adj}"
            opinions = [("NULL", a1, POLARITY_TABLE[adj][a1]), ("NULL", a2, POLARITY_TABLE[adj][a2])]
        else:
            aspect = rng.choice(ASPECTS)
            noun = rng.choice(NOUNS[aspect])
            text = rng.choice(RESTAURANT_TEMPLATES).format(noun=noun, adj=adj)
            opinions = [(noun, aspect, POLARITY_TABLE[adj][aspect])]
        lines.append(f'   <sentence id="rs{i}">')
        lines.append(f"    <text>{escape(text)}</text>")
        lines.append("    <Opinions>")
        for target, aspect, pol in opinions:
            lines.append(
                f"     <Opinion target={quoteattr(target)} category=\"{ENTITY[aspect]}#GENERAL\" "
                f"polarity=\"{pol}\"/>"
            )
        lines.append("    </Opinions>")
        lines.append("   </sentence>")
    lines += ["  </sentences>", " </Review>", "</Reviews>", ""]
    return "\n".join(lines)


FIXTURE_SIZE = 64
FIXTURE_SEED = 2023


def fixture_path(name: str):
    """Path of a bundled fixture: ``restaurants.xml`` or ``neighbourhoods.json``."""
    return resources.files("auxabsa").joinpath(f"data/fixture/{name}")


def write_fixtures(directory) -> None:
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "restaurants.xml").write_text(restaurant_xml(FIXTURE_SIZE, FIXTURE_SEED))
    (d / "neighbourhoods.json").write_text(neighbourhood_json(FIXTURE_SIZE, FIXTURE_SEED) + "\n")
