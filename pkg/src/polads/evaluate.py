"""Advertiser-disjoint evaluation: train/test splits, precision/recall/F1,
and the paired bootstrap significance test.

The split unit is the advertiser, never the ad: a seeded shuffle sends the
first ceil(fraction * n) advertisers (and all their ads) to the test side.
The bootstrap resamples advertisers with replacement until the resample
first reaches the original ad count, re-splits, retrains both systems and
records the F1 difference; the reported p-value is the add-one one-sided
(#{delta <= 0} + 1) / (B + 1).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import BootstrapError, InsufficientGroups, LengthMismatch
from .ingest import AdRecord, Dataset, Label

log = logging.getLogger(__name__)

LabeledRecords = Sequence[tuple[AdRecord, Label]]


# ---------------------------------------------------------------------------
# splitting

@dataclass(frozen=True)
class SplitPlan:
    """Which advertisers form the held-out test side."""

    train_advertisers: frozenset[str]
    test_advertisers: frozenset[str]
    seed: int
    test_fraction: float


def plan_split(advertisers: Sequence[str], fraction: float, seed: int) -> SplitPlan:
    """Seeded shuffle of the advertiser list; the first ceil(fraction * n)
    advertisers become the test side (clamped so both sides are non-empty)."""
    unique = sorted(set(advertisers))
    if len(unique) < 2:
        raise InsufficientGroups("need at least 2 advertisers to split")
    if not 0.0 < fraction < 1.0:
        raise ValueError("test fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(unique))
    n_test = min(max(int(math.ceil(fraction * len(unique))), 1), len(unique) - 1)
    test = frozenset(unique[int(i)] for i in order[:n_test])
    train = frozenset(unique) - test
    return SplitPlan(train_advertisers=train, test_advertisers=test,
                     seed=seed, test_fraction=fraction)


def split_records(records: LabeledRecords, plan: SplitPlan,
                  ) -> tuple[list[tuple[AdRecord, Label]], list[tuple[AdRecord, Label]]]:
    train = [(r, l) for r, l in records if r.advertiser in plan.train_advertisers]
    test = [(r, l) for r, l in records if r.advertiser in plan.test_advertisers]
    return train, test


def split_by_advertiser(ds: Dataset, fraction: float = 0.2, seed: int = 0,
                        ) -> tuple[Dataset, Dataset]:
    """Advertiser-disjoint train/test datasets; every ad follows its advertiser."""
    plan = plan_split([r.advertiser for r, _ in ds.records], fraction, seed)
    train, test = split_records(ds.records, plan)
    return Dataset.from_records(train), Dataset.from_records(test)


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class MetricsReport:
    """Precision/recall/F1 as percentages, political as the positive class."""

    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "degenerate": self.degenerate,
        }


def harmonic_f1(precision: float, recall: float) -> float:
    """F1 from precision and recall on the same scale (e.g. percentages)."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(pred: Sequence[Label], truth: Sequence[Label]) -> MetricsReport:
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} labels")
    if len(pred) == 0:
        raise LengthMismatch("cannot score zero predictions")
    tp = fp = fn = tn = 0
    for p, t in zip(pred, truth):
        if p is Label.POLITICAL:
            if t is Label.POLITICAL:
                tp += 1
            else:
                fp += 1
        elif t is Label.POLITICAL:
            fn += 1
        else:
            tn += 1
    degenerate = (tp + fp == 0) or (tp + fn == 0)
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    return MetricsReport(precision=precision, recall=recall,
                         f1=harmonic_f1(precision, recall),
                         tp=tp, fp=fp, fn=fn, tn=tn, degenerate=degenerate)


# ---------------------------------------------------------------------------
# paired bootstrap

class TrainableSystem(Protocol):
    """Anything that can be retrained from scratch and asked for labels."""

    def fit(self, records: LabeledRecords) -> None: ...

    def predict(self, records: Sequence[AdRecord]) -> list[Label]: ...


@dataclass(frozen=True)
class BootstrapVerdict:
    b: int
    deltas: tuple[float, ...]
    p_value: float
    alpha: float
    significant: bool

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "alpha": self.alpha,
            "p_value": self.p_value,
            "significant": self.significant,
            "deltas": list(self.deltas),
        }


def _resample_advertisers(records: LabeledRecords, rng: np.random.Generator,
                          ) -> list[tuple[AdRecord, Label]]:
    """Draw advertisers with replacement, keeping each one's ads intact,
    until the resampled ad count first reaches the original size."""
    by_adv: dict[str, list[tuple[AdRecord, Label]]] = {}
    for rec, label in records:
        by_adv.setdefault(rec.advertiser, []).append((rec, label))
    advertisers = sorted(by_adv)
    target = len(records)
    sample: list[tuple[AdRecord, Label]] = []
    while len(sample) < target:
        adv = advertisers[int(rng.integers(len(advertisers)))]
        sample.extend(by_adv[adv])
    return sample


def _resample_ads(records: LabeledRecords, rng: np.random.Generator,
                  ) -> list[tuple[AdRecord, Label]]:
    picks = rng.integers(len(records), size=len(records))
    return [records[int(i)] for i in picks]


def _f1_of(system: TrainableSystem, test: LabeledRecords) -> float:
    preds = system.predict([rec for rec, _ in test])
    return compute_metrics(preds, [label for _, label in test]).f1


def paired_bootstrap(ds: Dataset | LabeledRecords, system_a: TrainableSystem,
                     system_b: TrainableSystem, b: int = 1000,
                     alpha: float = 0.05, seed: int = 0,
                     test_fraction: float = 0.2,
                     resample_unit: str = "advertisers") -> BootstrapVerdict:
    """One-sided paired bootstrap of F1(system_b) - F1(system_a).

    Each iteration resamples the corpus (advertiser clusters by default, ads
    with resample_unit="ads"), re-splits it by advertiser, retrains both
    systems on the train side and scores the test side. Training failures
    surface as BootstrapError with the iteration index.
    """
    records = list(ds.records) if isinstance(ds, Dataset) else list(ds)
    if b < 1:
        raise ValueError("b must be at least 1")
    if resample_unit not in ("advertisers", "ads"):
        raise ValueError(f"unknown resample unit {resample_unit!r}")
    if len({rec.advertiser for rec, _ in records}) < 2:
        raise InsufficientGroups("bootstrap needs at least 2 advertisers")

    seeds = np.random.SeedSequence(seed).spawn(b)
    deltas: list[float] = []
    for i in range(b):
        rng = np.random.default_rng(seeds[i])
        try:
            if resample_unit == "advertisers":
                sample = _resample_advertisers(records, rng)
            else:
                sample = _resample_ads(records, rng)
            plan = plan_split([rec.advertiser for rec, _ in sample],
                              test_fraction, int(rng.integers(2 ** 31)))
            train, test = split_records(sample, plan)
            system_a.fit(train)
            system_b.fit(train)
            delta = _f1_of(system_b, test) - _f1_of(system_a, test)
        except Exception as exc:
            raise BootstrapError(i, exc) from exc
        deltas.append(delta)
        log.debug("bootstrap %d/%d: delta F1 = %.4f", i + 1, b, delta)

    non_positive = sum(1 for d in deltas if d <= 0)
    p_value = (non_positive + 1) / (b + 1)
    return BootstrapVerdict(b=b, deltas=tuple(deltas), p_value=p_value,
                            alpha=alpha, significant=p_value < alpha)
