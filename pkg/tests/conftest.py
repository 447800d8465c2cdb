"""Shared fixtures: tiny corpora, record builders, synthetic archives."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from polads.ingest import AdRecord, Dataset, Label, parse_record


def make_record(id: str = "a1", title: str = "Title", message: str = "message text",
                political: int = 3, not_political: int = 1,
                advertiser: str = "adv1", created_at: str = "2018-05-01T12:00:00",
                targets: str = "[]", probability: float = 0.9) -> AdRecord:
    return parse_record({
        "id": id, "title": title, "message": message,
        "political": political, "not_political": not_political,
        "political_probability": probability, "advertiser": advertiser,
        "created_at": created_at, "targets": targets,
    })


def write_corpus(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


def corpus_row(id: str, political: int = 3, not_political: int = 1,
               advertiser: str = "adv1", message: str = "vote for change",
               title: str = "", targets: str = "[]",
               created_at: str = "2018-05-01T12:00:00") -> dict:
    return {
        "id": id, "title": title, "message": message,
        "political": political, "not_political": not_political,
        "political_probability": 0.8, "advertiser": advertiser,
        "created_at": created_at, "targets": targets,
    }


POLITICAL_WORDS = ("vote", "election", "senate", "congress", "trump",
                   "campaign", "democrat", "republican", "ballot", "governor")
SHOPPING_WORDS = ("shoes", "sale", "discount", "coffee", "recipe", "travel",
                  "fitness", "gadget", "fashion", "streaming")
FILLER_WORDS = ("today", "new", "join", "best", "official", "free", "now",
                "great", "local", "online")
REGIONS = ("Texas", "California", "Florida", "Minnesota", "New York")
POLITICAL_INTERESTS = ("Barack Obama", "Bernie Sanders", "Democratic Party")
OTHER_INTERESTS = ("Cooking", "Soccer", "Movies")


def synthetic_corpus(path: Path, n_advertisers: int = 12,
                     ads_per_advertiser: int = 10, seed: int = 0,
                     political_fraction: float = 0.75) -> Path:
    """A learnable archive: political ads use political vocabulary and
    heavier targeting, every advertiser carries both classes."""
    rng = np.random.default_rng(seed)
    rows = []
    for a in range(n_advertisers):
        adv = f"advertiser-{a:02d}"
        for k in range(ads_per_advertiser):
            political = rng.random() < political_fraction
            if political:
                # targeting correlates with the label but does not separate
                # it; the ad text carries the reliable signal
                words = list(rng.choice(POLITICAL_WORDS, size=4, replace=False))
                targets = [{"target": "Region", "segment": str(rng.choice(REGIONS))}]
                if rng.random() < 0.7:
                    targets.append({"target": "Interest",
                                    "segment": str(rng.choice(POLITICAL_INTERESTS))})
                if rng.random() < 0.5:
                    targets.append({"target": "MinAge", "segment": "18"})
                votes = (int(rng.integers(3, 9)), int(rng.integers(0, 2)))
            else:
                words = list(rng.choice(SHOPPING_WORDS, size=4, replace=False))
                targets = []
                if rng.random() < 0.3:
                    targets.append({"target": "Region",
                                    "segment": str(rng.choice(REGIONS))})
                if rng.random() < 0.4:
                    targets.append({"target": "Interest",
                                    "segment": str(rng.choice(OTHER_INTERESTS))})
                if rng.random() < 0.3:
                    targets.append({"target": "MinAge",
                                    "segment": str(rng.integers(21, 45))})
                votes = (int(rng.integers(0, 2)), int(rng.integers(3, 9)))
            words += list(rng.choice(FILLER_WORDS, size=3, replace=False))
            rows.append(corpus_row(
                id=f"{adv}-ad{k}", advertiser=adv,
                political=votes[0], not_political=votes[1],
                title=" ".join(words[:2]), message=" ".join(words[2:]),
                targets=json.dumps(targets),
            ))
    return write_corpus(path, rows)


@pytest.fixture
def synthetic_corpus_path(tmp_path) -> Path:
    return synthetic_corpus(tmp_path / "corpus.ndjson")


@pytest.fixture
def tiny_dataset() -> Dataset:
    records = [
        (make_record(id="p1", political=5, not_political=0, advertiser="A",
                     targets='[{"target":"Region","segment":"Texas"},'
                             '{"target":"Interest","segment":"Barack Obama"},'
                             '{"target":"MinAge","segment":"18"}]'),
         Label.POLITICAL),
        (make_record(id="p2", political=2, not_political=1, advertiser="A",
                     targets='[{"target":"Region","segment":"Texas"},'
                             '{"target":"Interest","segment":"Barack Obama"}]'),
         Label.POLITICAL),
        (make_record(id="p3", political=4, not_political=0, advertiser="B",
                     targets='[{"target":"Interest","segment":"Bernie Sanders"}]'),
         Label.POLITICAL),
        (make_record(id="n1", political=0, not_political=3, advertiser="C",
                     targets='[{"target":"Region","segment":"Ohio"}]'),
         Label.NON_POLITICAL),
    ]
    return Dataset.from_records(records)
