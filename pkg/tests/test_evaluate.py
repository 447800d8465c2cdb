"""Splits, metrics (including the published-table consistency values), and
the paired bootstrap."""

import numpy as np
import pytest

from polads.errors import BootstrapError, InsufficientGroups, LengthMismatch
from polads.evaluate import (compute_metrics, harmonic_f1, paired_bootstrap,
                             plan_split, split_by_advertiser)
from polads.ingest import Dataset, Label

from conftest import make_record

P, N = Label.POLITICAL, Label.NON_POLITICAL


def dataset_of(spec: dict[str, list[Label]]) -> Dataset:
    """spec: advertiser -> label sequence."""
    records = []
    for adv, labels in spec.items():
        for i, label in enumerate(labels):
            votes = (3, 0) if label is P else (0, 3)
            records.append((make_record(id=f"{adv}-{i}", political=votes[0],
                                        not_political=votes[1], advertiser=adv),
                            label))
    return Dataset.from_records(records)


class TestSplit:
    def test_five_advertisers_fraction_point_two(self):
        ds = dataset_of({f"a{i}": [P, N] for i in range(5)})
        train, test = split_by_advertiser(ds, fraction=0.2, seed=0)
        assert len(test.advertisers) == 1
        assert not (train.advertisers & test.advertisers)
        assert train.advertisers | test.advertisers == ds.advertisers

    def test_same_seed_same_split(self):
        ds = dataset_of({f"a{i}": [P, N] for i in range(8)})
        s1 = split_by_advertiser(ds, fraction=0.25, seed=7)
        s2 = split_by_advertiser(ds, fraction=0.25, seed=7)
        assert s1[1].advertisers == s2[1].advertisers
        assert [r.id for r, _ in s1[0].records] == [r.id for r, _ in s2[0].records]

    def test_unit_is_advertisers_not_ads(self):
        # 10 advertisers of very unequal size: the test side holds all ads
        # of exactly 2 advertisers, not 20% of the ads
        sizes = [1, 1, 1, 1, 1, 1, 1, 1, 20, 20]
        ds = dataset_of({f"a{i}": [P] * s + [N] for i, s in enumerate(sizes)})
        train, test = split_by_advertiser(ds, fraction=0.2, seed=3)
        assert len(test.advertisers) == 2
        expected = sum(sizes[int(a[1:])] + 1 for a in test.advertisers)
        assert len(test) == expected

    def test_every_ad_follows_its_advertiser(self):
        ds = dataset_of({f"a{i}": [P, N, P] for i in range(6)})
        train, test = split_by_advertiser(ds, fraction=0.3, seed=1)
        for rec, _ in test.records:
            assert rec.advertiser in test.advertisers
        for rec, _ in train.records:
            assert rec.advertiser not in test.advertisers

    def test_single_advertiser_rejected(self):
        ds = dataset_of({"only": [P, N, P, N]})
        with pytest.raises(InsufficientGroups):
            split_by_advertiser(ds, fraction=0.2, seed=0)

    def test_plan_disjoint_over_many_seeds(self):
        advertisers = [f"a{i}" for i in range(23)]
        for seed in range(200):
            plan = plan_split(advertisers, 0.2, seed)
            assert not (plan.train_advertisers & plan.test_advertisers)
            assert plan.train_advertisers | plan.test_advertisers == set(advertisers)
            assert len(plan.test_advertisers) >= 1
            assert len(plan.train_advertisers) >= 1


class TestMetrics:
    @pytest.mark.parametrize("precision,recall,f1", [
        (88.75, 96.65, 92.53),
        (90.33, 99.25, 94.58),
        (90.83, 99.68, 95.05),
    ])
    def test_published_table_consistency(self, precision, recall, f1):
        assert harmonic_f1(precision, recall) == pytest.approx(f1, abs=0.01)

    def test_perfect_classifier(self):
        pred = [P, N, P]
        report = compute_metrics(pred, pred)
        assert (report.precision, report.recall, report.f1) == (100.0, 100.0, 100.0)

    def test_confusion_counts(self):
        pred = [P, P, N, N]
        truth = [P, N, P, N]
        r = compute_metrics(pred, truth)
        assert (r.tp, r.fp, r.fn, r.tn) == (1, 1, 1, 1)
        assert r.n == 4

    def test_zero_denominator_degenerate(self):
        r = compute_metrics([N, N], [N, N])
        assert r.degenerate and r.precision == 0.0 and r.f1 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            compute_metrics([P], [P, N])

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        pred = [P if b else N for b in rng.random(40) < 0.6]
        truth = [P if b else N for b in rng.random(40) < 0.5]
        base = compute_metrics(pred, truth)
        order = rng.permutation(40)
        shuffled = compute_metrics([pred[i] for i in order],
                                   [truth[i] for i in order])
        assert shuffled == base


class ConstantSystem:
    """Predicts one label for everything."""

    def __init__(self, label: Label):
        self.label = label

    def fit(self, records):
        pass

    def predict(self, records):
        return [self.label] * len(records)


class OracleSystem:
    """Looks the true label up by ad id (test fixture only)."""

    def __init__(self, ds: Dataset):
        self.truth = {rec.id: label for rec, label in ds.records}

    def fit(self, records):
        pass

    def predict(self, records):
        return [self.truth[rec.id] for rec in records]


class FailingSystem(ConstantSystem):
    def __init__(self):
        super().__init__(P)

    def fit(self, records):
        raise RuntimeError("boom")


@pytest.fixture
def bootstrap_ds():
    # every advertiser has both classes, so every test side has both
    return dataset_of({f"a{i}": [P, P, N] for i in range(20)})


class TestPairedBootstrap:
    def test_identical_systems_p_one(self, bootstrap_ds):
        sys_a = ConstantSystem(P)
        sys_b = ConstantSystem(P)
        verdict = paired_bootstrap(bootstrap_ds, sys_a, sys_b, b=20, seed=4)
        assert all(d == 0.0 for d in verdict.deltas)
        assert verdict.p_value == 1.0
        assert not verdict.significant

    def test_dominant_system_minimal_p(self, bootstrap_ds):
        sys_a = ConstantSystem(P)
        sys_b = OracleSystem(bootstrap_ds)
        b = 100
        verdict = paired_bootstrap(bootstrap_ds, sys_a, sys_b, b=b, seed=4)
        assert all(d > 0 for d in verdict.deltas)
        assert verdict.p_value == pytest.approx(1 / (b + 1))
        assert verdict.significant

    def test_b_one_p_values(self, bootstrap_ds):
        worse = paired_bootstrap(bootstrap_ds, ConstantSystem(P),
                                 OracleSystem(bootstrap_ds), b=1, seed=0)
        same = paired_bootstrap(bootstrap_ds, ConstantSystem(P),
                                ConstantSystem(P), b=1, seed=0)
        assert worse.p_value == pytest.approx(0.5)
        assert same.p_value == pytest.approx(1.0)

    def test_reproducible_deltas(self, bootstrap_ds):
        kwargs = dict(b=10, seed=99)
        v1 = paired_bootstrap(bootstrap_ds, ConstantSystem(P),
                              OracleSystem(bootstrap_ds), **kwargs)
        v2 = paired_bootstrap(bootstrap_ds, ConstantSystem(P),
                              OracleSystem(bootstrap_ds), **kwargs)
        assert v1.deltas == v2.deltas

    def test_resample_size_first_reaches_original(self, bootstrap_ds):
        from polads.evaluate import _resample_advertisers
        rng = np.random.default_rng(0)
        records = list(bootstrap_ds.records)
        for _ in range(25):
            sample = _resample_advertisers(records, rng)
            assert len(sample) >= len(records)
            # removing the last drawn advertiser drops it below the target
            assert len(sample) - 3 < len(records)

    def test_ads_resample_unit(self, bootstrap_ds):
        verdict = paired_bootstrap(bootstrap_ds, ConstantSystem(P),
                                   OracleSystem(bootstrap_ds), b=10, seed=1,
                                   resample_unit="ads")
        assert verdict.p_value == pytest.approx(1 / 11)

    def test_training_error_carries_iteration(self, bootstrap_ds):
        with pytest.raises(BootstrapError) as err:
            paired_bootstrap(bootstrap_ds, FailingSystem(),
                             ConstantSystem(P), b=3, seed=0)
        assert err.value.iteration == 0

    def test_p_value_formula_monotonicity(self):
        def p_of(non_positive, b=50):
            return (non_positive + 1) / (b + 1)
        values = [p_of(k) for k in range(50, -1, -1)]
        assert all(a > b for a, b in zip(values, values[1:]))
