"""Feature assembly, the two systems, and bundle round-trips."""

import json

import pytest

from polads.errors import IncompatibleBundles
from polads.evaluate import compute_metrics, split_by_advertiser
from polads.gbdt import GbdtParams
from polads.ingest import Label, load_corpus
from polads.pipeline import (FeatureConfig, FeaturePipeline,
                             MnbSystem, check_bundles_comparable,
                             check_corpus_matches, corpus_digest,
                             fresh_system_like, load_bundle, make_system,
                             save_bundle)

P, N = Label.POLITICAL, Label.NON_POLITICAL

SMALL_PARAMS = GbdtParams(n_trees=8, learning_rate=0.3, max_leaves=4,
                          min_samples_leaf=1, seed=0)


@pytest.fixture
def corpus(synthetic_corpus_path):
    ds, _ = load_corpus(synthetic_corpus_path)
    return ds


class TestFeaturePipeline:
    def test_text_plus_targets_layout(self, corpus):
        config = FeatureConfig(use_targets=True, min_df=1)
        pipe = FeaturePipeline.fit([r for r, _ in corpus.records], config)
        assert pipe.dim == pipe.text_dim + pipe.encoder.dim
        names = pipe.feature_names()
        assert len(names) == pipe.dim
        assert "MinAge" in names
        assert pipe.is_text_column(0)
        assert not pipe.is_text_column(pipe.text_dim)

    def test_text_only_has_no_encoder(self, corpus):
        config = FeatureConfig(use_targets=False, min_df=1)
        pipe = FeaturePipeline.fit([r for r, _ in corpus.records], config)
        assert pipe.encoder is None
        assert pipe.dim == pipe.text_dim

    def test_encode_width_matches(self, corpus):
        config = FeatureConfig(use_targets=True, min_df=1)
        recs = [r for r, _ in corpus.records]
        pipe = FeaturePipeline.fit(recs, config)
        vec = pipe.encode(recs[0])
        assert vec.dim == pipe.dim


def train_test(corpus):
    return split_by_advertiser(corpus, fraction=0.2, seed=0)


class TestSystems:
    def test_mnb_learns_the_signal(self, corpus):
        train, test = train_test(corpus)
        system = MnbSystem(min_df=1)
        system.fit(list(train.records))
        metrics = compute_metrics(system.predict([r for r, _ in test.records]),
                                  [l for _, l in test.records])
        assert metrics.f1 > 80.0

    @pytest.mark.parametrize("kind", ["gbm-text", "gbm-text+targets"])
    def test_gbdt_learns_the_signal(self, corpus, kind):
        train, test = train_test(corpus)
        system = make_system(kind, FeatureConfig(min_df=1), SMALL_PARAMS)
        system.fit(list(train.records))
        metrics = compute_metrics(system.predict([r for r, _ in test.records]),
                                  [l for _, l in test.records])
        assert metrics.f1 > 80.0

    def test_gbdt_mode_controls_encoder(self, corpus):
        train, _ = train_test(corpus)
        with_targets = make_system("gbm-text+targets", FeatureConfig(min_df=1),
                                   SMALL_PARAMS)
        with_targets.fit(list(train.records))
        assert with_targets.features.encoder is not None
        text_only = make_system("gbm-text", FeatureConfig(min_df=1), SMALL_PARAMS)
        text_only.fit(list(train.records))
        assert text_only.features.encoder is None

    def test_refit_is_deterministic(self, corpus):
        train, _ = train_test(corpus)
        a = make_system("gbm-text+targets", FeatureConfig(min_df=1), SMALL_PARAMS)
        b = make_system("gbm-text+targets", FeatureConfig(min_df=1), SMALL_PARAMS)
        a.fit(list(train.records))
        b.fit(list(train.records))
        assert json.dumps(a.model.to_json(), sort_keys=True) == \
            json.dumps(b.model.to_json(), sort_keys=True)


class TestBundles:
    def fitted(self, corpus, kind="gbm-text+targets"):
        train, _ = train_test(corpus)
        system = make_system(kind, FeatureConfig(min_df=1), SMALL_PARAMS)
        system.fit(list(train.records))
        return system

    def test_round_trip_predictions(self, corpus, tmp_path):
        system = self.fitted(corpus)
        save_bundle(tmp_path / "b", system, seed=0, test_fraction=0.2,
                    corpus_sha256="x" * 64)
        loaded = load_bundle(tmp_path / "b")
        records = [r for r, _ in corpus.records][:20]
        assert loaded.system.predict_proba(records) == \
            pytest.approx(system.predict_proba(records), abs=0)

    def test_mnb_bundle_has_no_encoder_file(self, corpus, tmp_path):
        system = self.fitted(corpus, kind="mnb")
        save_bundle(tmp_path / "b", system, seed=0, test_fraction=0.2,
                    corpus_sha256="x" * 64)
        assert not (tmp_path / "b" / "encoder.json").exists()
        assert (tmp_path / "b" / "vectorizer.json").exists()

    def test_overwrite_refused_without_force(self, corpus, tmp_path):
        system = self.fitted(corpus, kind="mnb")
        save_bundle(tmp_path / "b", system, seed=0, test_fraction=0.2,
                    corpus_sha256="x" * 64)
        with pytest.raises(FileExistsError):
            save_bundle(tmp_path / "b", system, seed=0, test_fraction=0.2,
                        corpus_sha256="x" * 64)
        save_bundle(tmp_path / "b", system, seed=0, test_fraction=0.2,
                    corpus_sha256="x" * 64, force=True)

    def test_fresh_system_like_retrains_identically(self, corpus, tmp_path):
        system = self.fitted(corpus)
        bundle = save_bundle(tmp_path / "b", system, seed=0, test_fraction=0.2,
                             corpus_sha256="y" * 64)
        clone = fresh_system_like(bundle)
        train, _ = train_test(corpus)
        clone.fit(list(train.records))
        assert json.dumps(clone.model.to_json(), sort_keys=True) == \
            json.dumps(system.model.to_json(), sort_keys=True)

    def test_incompatible_bundles_detected(self, corpus, tmp_path):
        system = self.fitted(corpus)
        a = save_bundle(tmp_path / "a", system, seed=0, test_fraction=0.2,
                        corpus_sha256="z" * 64)
        b = save_bundle(tmp_path / "b", system, seed=1, test_fraction=0.2,
                        corpus_sha256="z" * 64)
        with pytest.raises(IncompatibleBundles):
            check_bundles_comparable(a, b)

    def test_corpus_hash_checked(self, corpus, tmp_path, synthetic_corpus_path):
        system = self.fitted(corpus)
        sha = corpus_digest(synthetic_corpus_path)
        bundle = save_bundle(tmp_path / "b", system, seed=0, test_fraction=0.2,
                             corpus_sha256=sha)
        check_corpus_matches(bundle, sha)
        with pytest.raises(IncompatibleBundles):
            check_corpus_matches(bundle, "0" * 64)
