"""Archive ingestion: parse newline-delimited ad records, derive labels
from crowd votes, deduplicate by ad id, and compute dataset aggregates.

Input schema (one JSON object per line): id, title, message, political,
not_political, political_probability, advertiser, created_at, targets.
The `political_probability` field is the archive classifier's own score;
it is carried through for audit output but never used as a feature.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import BadVoteCount, EmptyDataset, MalformedRecord

log = logging.getLogger(__name__)


class Label(Enum):
    """Political is the positive class for every metric in this package."""

    NON_POLITICAL = 0
    POLITICAL = 1


@dataclass(frozen=True)
class AdRecord:
    """One archived ad."""

    id: str
    title: str
    message: str
    political_votes: int
    not_political_votes: int
    political_probability: float
    advertiser: str
    created_at: datetime | None
    targets_raw: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "message": self.message,
            "political": self.political_votes,
            "not_political": self.not_political_votes,
            "political_probability": self.political_probability,
            "advertiser": self.advertiser,
            "created_at": self.created_at.isoformat() if self.created_at else None,
            "targets": self.targets_raw,
        }


@dataclass(frozen=True)
class Dataset:
    """Labeled, deduplicated records; immutable once built."""

    records: tuple[tuple[AdRecord, Label], ...]
    advertisers: frozenset[str]

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> list[Label]:
        return [label for _, label in self.records]

    @staticmethod
    def from_records(records: Iterable[tuple[AdRecord, Label]]) -> "Dataset":
        recs = tuple(records)
        seen: set[str] = set()
        for rec, _ in recs:
            if rec.id in seen:
                raise ValueError(f"duplicate ad id {rec.id!r} in dataset")
            seen.add(rec.id)
        return Dataset(recs, frozenset(r.advertiser for r, _ in recs))


@dataclass
class IngestSummary:
    """Counts from one load_corpus run."""

    lines: int = 0
    parsed: int = 0
    malformed: int = 0
    duplicates_dropped: int = 0
    skipped_tied_votes: int = 0
    kept: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _parse_timestamp(value) -> datetime | None:
    if value in (None, ""):
        return None
    text = str(value).strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        log.warning("unparseable created_at %r, treated as unknown", value)
        return None


def _parse_votes(raw: dict, key: str, line: int | None) -> int:
    value = raw.get(key, 0)
    if value is None:
        value = 0
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadVoteCount(f"field {key!r} must be an integer, got {value!r}", line)
    if value < 0:
        raise BadVoteCount(f"field {key!r} is negative: {value}", line)
    return value


def parse_record(raw: str | dict, line: int | None = None) -> AdRecord:
    """Parse one JSON object into an AdRecord.

    Missing title becomes the empty string, missing vote fields become 0.
    Raises MalformedRecord for bad JSON, an empty id, or a record whose title
    and message are both empty; BadVoteCount for invalid vote fields.
    """
    if isinstance(raw, str):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON: {exc}", line) from exc
    else:
        obj = raw
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object", line)

    ad_id = obj.get("id")
    if not isinstance(ad_id, str) or not ad_id:
        raise MalformedRecord("missing or empty id", line)

    title = obj.get("title") or ""
    message = obj.get("message") or ""
    if not isinstance(title, str) or not isinstance(message, str):
        raise MalformedRecord("title/message must be strings", line)
    if not title and not message:
        raise MalformedRecord("title and message are both empty", line)

    probability = obj.get("political_probability", 0.0)
    if probability is None:
        probability = 0.0
    if not isinstance(probability, (int, float)) or not 0.0 <= float(probability) <= 1.0:
        raise MalformedRecord(
            f"political_probability out of [0, 1]: {probability!r}", line)

    targets = obj.get("targets", "")
    if targets is None:
        targets = ""
    if not isinstance(targets, str):
        # some archive dumps inline the array instead of JSON-encoding it
        targets = json.dumps(targets)

    return AdRecord(
        id=ad_id,
        title=title,
        message=message,
        political_votes=_parse_votes(obj, "political", line),
        not_political_votes=_parse_votes(obj, "not_political", line),
        political_probability=float(probability),
        advertiser=str(obj.get("advertiser") or ""),
        created_at=_parse_timestamp(obj.get("created_at")),
        targets_raw=targets,
    )


def derive_label(rec: AdRecord) -> Label | None:
    """Majority vote: more 'political' votes means Political, fewer means
    NonPolitical, a tie (including 0-0) means the record is skipped."""
    if rec.political_votes > rec.not_political_votes:
        return Label.POLITICAL
    if rec.political_votes < rec.not_political_votes:
        return Label.NON_POLITICAL
    return None


def load_corpus(path: str | Path, strict: bool = False) -> tuple[Dataset, IngestSummary]:
    """Read newline-delimited JSON ads, label and deduplicate them.

    Duplicate ids keep the record with the latest created_at (ties keep the
    later line). With strict=False malformed lines are logged and counted;
    with strict=True the first malformed line raises.
    """
    summary = IngestSummary()
    by_id: dict[str, AdRecord] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            summary.lines += 1
            try:
                rec = parse_record(line, line=lineno)
            except MalformedRecord as exc:
                if strict:
                    raise
                summary.malformed += 1
                log.warning("skipping malformed record: %s", exc)
                continue
            summary.parsed += 1
            prev = by_id.get(rec.id)
            if prev is not None:
                summary.duplicates_dropped += 1
                if _supersedes(prev, rec):
                    continue
            by_id[rec.id] = rec

    labeled: list[tuple[AdRecord, Label]] = []
    for rec in by_id.values():
        label = derive_label(rec)
        if label is None:
            summary.skipped_tied_votes += 1
        else:
            labeled.append((rec, label))
    summary.kept = len(labeled)
    log.info("ingest: %d lines, %d kept, %d tied votes skipped, "
             "%d duplicates dropped, %d malformed",
             summary.lines, summary.kept, summary.skipped_tied_votes,
             summary.duplicates_dropped, summary.malformed)
    return Dataset.from_records(labeled), summary


def _supersedes(prev: AdRecord, new: AdRecord) -> bool:
    """True when the already-stored record outranks the new duplicate."""
    if prev.created_at is None:
        return False
    if new.created_at is None:
        return True
    return prev.created_at > new.created_at


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write the dataset back in the ingest format (round-trips exactly)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec, _ in ds.records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


@dataclass
class StatsReport:
    """Aggregates mirroring the archive's descriptive charts: counts are over
    political ads; the class ratio covers the whole dataset."""

    n_ads: int
    n_advertisers: int
    n_political: int
    n_non_political: int
    class_ratio: float
    attribute_counts: dict[str, int]
    region_counts: dict[str, int]
    top_interests: list[tuple[str, int]]
    top_k: int

    def to_json(self) -> dict:
        return {
            "n_ads": self.n_ads,
            "n_advertisers": self.n_advertisers,
            "n_political": self.n_political,
            "n_non_political": self.n_non_political,
            "class_ratio_political_to_non": self.class_ratio,
            "political_ads_per_attribute": self.attribute_counts,
            "political_ads_per_region": self.region_counts,
            "top_interests": [{"interest": k, "count": c} for k, c in self.top_interests],
            "top_k": self.top_k,
        }


def corpus_stats(ds: Dataset, top_k: int = 10) -> StatsReport:
    """Per-attribute, per-region and top-interest counts over political ads."""
    # imported here: targeting depends on errors only, but stats sits on top
    # of both parsers
    from .targeting import normalized_targets_for

    if len(ds) == 0:
        raise EmptyDataset("cannot compute statistics of an empty dataset")

    attribute_counts: dict[str, int] = {}
    region_counts: dict[str, int] = {}
    interest_counts: dict[str, int] = {}
    n_political = 0
    for rec, label in ds.records:
        if label is not Label.POLITICAL:
            continue
        n_political += 1
        nt = normalized_targets_for(rec)
        attrs = {a for a, _ in nt.categorical}
        if nt.min_age is not None or nt.max_age is not None:
            attrs.add("Age")
        for attr in attrs:
            attribute_counts[attr] = attribute_counts.get(attr, 0) + 1
        for attr, value in nt.categorical:
            if attr == "Region":
                region_counts[value] = region_counts.get(value, 0) + 1
            elif attr == "Interest":
                interest_counts[value] = interest_counts.get(value, 0) + 1

    n_non = len(ds) - n_political
    ratio = n_political / n_non if n_non else float(n_political)
    top = sorted(interest_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return StatsReport(
        n_ads=len(ds),
        n_advertisers=len(ds.advertisers),
        n_political=n_political,
        n_non_political=n_non,
        class_ratio=ratio,
        attribute_counts=dict(sorted(attribute_counts.items(),
                                     key=lambda kv: (-kv[1], kv[0]))),
        region_counts=dict(sorted(region_counts.items(),
                                  key=lambda kv: (-kv[1], kv[0]))),
        top_interests=top,
        top_k=top_k,
    )
