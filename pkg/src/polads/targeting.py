"""Targeting payload parsing and one-hot encoding.

The raw `targets` field is a JSON array of {"target": ..., "segment": ...}
pairs. Normalization drops the redundant or near-empty attributes (State,
Engaged with Content, Language), turns MinAge/MaxAge into numeric fields
with an Age-range fallback, and keeps everything else as categorical
(attribute, value) pairs. The encoder then assigns one binary column per
seen pair, one missing-indicator column per attribute (the `_0` columns),
and two numeric age columns where -1.0 marks an absent age.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import EmptyTrainingSet, MalformedTargets
from .ingest import AdRecord
from .sparse import SparseVector

log = logging.getLogger(__name__)

# Attributes removed outright during normalization. State duplicates Region;
# the other two are too sparse to carry signal.
DROPPED_ATTRIBUTES = frozenset({"State", "Engaged with Content", "Language"})

# Attribute inventory of the archive feed. Missing-indicator columns exist
# for these even when a training sample never uses the attribute.
CANONICAL_ATTRIBUTES = (
    "Activity", "Agency", "City", "Employer", "Gender", "Interest",
    "Job Title", "Like", "List", "Region", "Retargeting", "School",
    "Segment", "Website",
)

MIN_AGE_LIMIT = 13
MAX_AGE_LIMIT = 120
AGE_MISSING = -1.0

_AGE_RANGE_RE = re.compile(r"^\s*(\d+)\s*(?:-|–|to)\s*(\d+)\s*$")
_AGE_OPEN_RE = re.compile(r"^\s*(\d+)\s*(?:\+|and\s+(?:older|up)|or\s+older)\s*$",
                          re.IGNORECASE)

_ENCODER_SCHEMA = 1


@dataclass(frozen=True)
class TargetingSpec:
    """Raw (target, segment) pairs in payload order, duplicates preserved."""

    entries: tuple[tuple[str, str | None], ...]


@dataclass(frozen=True)
class NormalizedTargets:
    """Cleaned targeting attributes for one ad."""

    min_age: int | None = None
    max_age: int | None = None
    categorical: frozenset[tuple[str, str]] = field(default_factory=frozenset)


def parse_targets(raw: str) -> TargetingSpec:
    """Parse the JSON targets payload. An empty payload is a valid empty spec;
    anything unparseable raises MalformedTargets."""
    if raw is None or raw.strip() == "":
        return TargetingSpec(())
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedTargets(f"targets payload is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise MalformedTargets("targets payload is not a JSON array")
    entries: list[tuple[str, str | None]] = []
    for item in data:
        if not isinstance(item, dict):
            raise MalformedTargets("targets entry is not an object")
        target = item.get("target")
        if not isinstance(target, str) or not target.strip():
            continue
        segment = item.get("segment")
        if segment is not None and not isinstance(segment, str):
            segment = str(segment)
        entries.append((target.strip(), segment))
    return TargetingSpec(tuple(entries))


def _parse_age(value: str | None, what: str) -> int | None:
    if value is None:
        return None
    try:
        age = int(value.strip())
    except ValueError:
        log.warning("unparseable %s value %r, treated as missing", what, value)
        return None
    if not MIN_AGE_LIMIT <= age <= MAX_AGE_LIMIT:
        log.warning("%s value %d outside [%d, %d], treated as missing",
                    what, age, MIN_AGE_LIMIT, MAX_AGE_LIMIT)
        return None
    return age


def _parse_age_range(value: str | None) -> tuple[int | None, int | None]:
    if not value:
        return None, None
    m = _AGE_RANGE_RE.match(value)
    if m:
        return _parse_age(m.group(1), "Age"), _parse_age(m.group(2), "Age")
    m = _AGE_OPEN_RE.match(value)
    if m:
        return _parse_age(m.group(1), "Age"), None
    log.warning("unparseable Age range %r, treated as missing", value)
    return None, None


def normalize_targets(spec: TargetingSpec) -> NormalizedTargets:
    """Drop redundant attributes and resolve ages.

    MinAge/MaxAge win; an Age range entry only fills whichever limit they
    left absent. Values are whitespace-trimmed, case preserved. An entry
    without a segment keeps the attribute with an empty value.
    """
    min_age: int | None = None
    max_age: int | None = None
    age_fallback: tuple[int | None, int | None] = (None, None)
    pairs: set[tuple[str, str]] = set()
    for target, segment in spec.entries:
        if target in DROPPED_ATTRIBUTES:
            continue
        if target == "MinAge":
            min_age = min_age if min_age is not None else _parse_age(segment, "MinAge")
        elif target == "MaxAge":
            max_age = max_age if max_age is not None else _parse_age(segment, "MaxAge")
        elif target == "Age":
            age_fallback = _parse_age_range(segment)
        else:
            pairs.add((target, (segment or "").strip()))
    if min_age is None:
        min_age = age_fallback[0]
    if max_age is None:
        max_age = age_fallback[1]
    if min_age is not None and max_age is not None and max_age < min_age:
        log.warning("age range inverted (%d > %d), both treated as missing",
                    min_age, max_age)
        min_age = max_age = None
    return NormalizedTargets(min_age=min_age, max_age=max_age,
                             categorical=frozenset(pairs))


def normalized_targets_for(rec: AdRecord) -> NormalizedTargets:
    """Parse and normalize one record's payload; unparseable payloads yield
    all-missing targets with a logged warning."""
    try:
        spec = parse_targets(rec.targets_raw)
    except MalformedTargets as exc:
        log.warning("ad %s: %s; targeting features set to all-missing", rec.id, exc)
        spec = TargetingSpec(())
    return normalize_targets(spec)


@dataclass
class TargetEncoder:
    """Column layout learned from the training partition.

    Columns 0 and 1 are MinAge and MaxAge. After them, attributes appear in
    sorted order, each as its sorted value columns followed by its missing
    indicator (named `<attribute>_0`).
    """

    value_columns: dict[tuple[str, str], int]
    missing_columns: dict[str, int]
    attributes: tuple[str, ...]

    MIN_AGE_COL = 0
    MAX_AGE_COL = 1

    @property
    def dim(self) -> int:
        return 2 + len(self.value_columns) + len(self.missing_columns)

    def feature_names(self) -> list[str]:
        names = [""] * self.dim
        names[self.MIN_AGE_COL] = "MinAge"
        names[self.MAX_AGE_COL] = "MaxAge"
        for (attr, value), col in self.value_columns.items():
            names[col] = f"{attr}_{value}" if value else attr
        for attr, col in self.missing_columns.items():
            names[col] = f"{attr}_0"
        return names

    def to_json(self) -> dict:
        return {
            "schema_version": _ENCODER_SCHEMA,
            "kind": "target-encoder",
            "attributes": list(self.attributes),
            "values": [
                {"attribute": a, "value": v, "column": c}
                for (a, v), c in sorted(self.value_columns.items(),
                                        key=lambda kv: kv[1])
            ],
            "missing": [
                {"attribute": a, "column": c}
                for a, c in sorted(self.missing_columns.items(),
                                   key=lambda kv: kv[1])
            ],
        }

    @staticmethod
    def from_json(doc: dict) -> "TargetEncoder":
        if doc.get("schema_version") != _ENCODER_SCHEMA or doc.get("kind") != "target-encoder":
            raise ValueError("not a target-encoder document")
        return TargetEncoder(
            value_columns={(e["attribute"], e["value"]): e["column"]
                           for e in doc["values"]},
            missing_columns={e["attribute"]: e["column"] for e in doc["missing"]},
            attributes=tuple(doc["attributes"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1),
                              encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "TargetEncoder":
        return TargetEncoder.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_target_encoder(train: Sequence[NormalizedTargets]) -> TargetEncoder:
    """Allocate columns from the training partition only."""
    if not train:
        raise EmptyTrainingSet("no targeting rows to fit the encoder on")
    by_attr: dict[str, set[str]] = {a: set() for a in CANONICAL_ATTRIBUTES}
    for nt in train:
        for attr, value in nt.categorical:
            by_attr.setdefault(attr, set()).add(value)
    value_columns: dict[tuple[str, str], int] = {}
    missing_columns: dict[str, int] = {}
    col = 2
    for attr in sorted(by_attr):
        for value in sorted(by_attr[attr]):
            value_columns[(attr, value)] = col
            col += 1
        missing_columns[attr] = col
        col += 1
    return TargetEncoder(value_columns=value_columns,
                         missing_columns=missing_columns,
                         attributes=tuple(sorted(by_attr)))


def encode_targets(nt: NormalizedTargets, enc: TargetEncoder) -> SparseVector:
    """Binary one-hot vector plus the two numeric age columns.

    Values unseen at fit time set no value column but still clear the
    attribute's missing indicator; absent ages carry the -1.0 sentinel.
    """
    pairs: list[tuple[int, float]] = [
        (enc.MIN_AGE_COL, float(nt.min_age) if nt.min_age is not None else AGE_MISSING),
        (enc.MAX_AGE_COL, float(nt.max_age) if nt.max_age is not None else AGE_MISSING),
    ]
    present: set[str] = set()
    for attr, value in nt.categorical:
        present.add(attr)
        col = enc.value_columns.get((attr, value))
        if col is not None:
            pairs.append((col, 1.0))
    for attr, col in enc.missing_columns.items():
        if attr not in present:
            pairs.append((col, 1.0))
    return SparseVector.from_pairs(pairs, enc.dim)
