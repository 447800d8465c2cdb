"""End-to-end systems: feature assembly, the two classifiers behind one
fit/predict interface, and self-contained model bundles on disk.

A bundle directory holds config.json (the reproducibility snapshot),
vectorizer.json, encoder.json (when targeting features are on), model.json
and metadata.json. Everything except metadata.json is byte-deterministic
for a fixed config and corpus.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import IncompatibleBundles
from .gbdt import (GbdtEnsemble, GbdtParams, compute_class_weights,
                   grid_search_cv, predict_proba_batch, train_gbdt)
from .ingest import AdRecord, Label
from .naive_bayes import MnbModel, predict_mnb, train_mnb
from .sparse import SparseVector, concat
from .targeting import (TargetEncoder, encode_targets, fit_target_encoder,
                        normalized_targets_for)
from .text import (TfIdfVectorizer, TokenStream, build_text, fit_vectorizer,
                   load_stop_words, tokenize_and_stem, transform)

log = logging.getLogger(__name__)

SYSTEMS = ("mnb", "gbm-text", "gbm-text+targets")

_BUNDLE_SCHEMA = 1


@dataclass(frozen=True)
class FeatureConfig:
    """How records become vectors."""

    use_targets: bool = True
    ngram_max: int = 2
    min_df: int = 2
    stop_words_path: str | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_json(doc: dict) -> "FeatureConfig":
        return FeatureConfig(**doc)


class FeaturePipeline:
    """Fitted text vectorizer plus optional target encoder; text columns come
    first, targeting columns follow."""

    def __init__(self, config: FeatureConfig, vectorizer: TfIdfVectorizer,
                 encoder: TargetEncoder | None):
        self.config = config
        self.vectorizer = vectorizer
        self.encoder = encoder
        self._stop = load_stop_words(config.stop_words_path)

    @property
    def text_dim(self) -> int:
        return self.vectorizer.dim

    @property
    def dim(self) -> int:
        return self.text_dim + (self.encoder.dim if self.encoder else 0)

    def feature_names(self) -> list[str]:
        names = list(self.vectorizer.feature_names())
        if self.encoder:
            names.extend(self.encoder.feature_names())
        return names

    def is_text_column(self, index: int) -> bool:
        return index < self.text_dim

    def tokens_for(self, rec: AdRecord) -> TokenStream:
        return tokenize_and_stem(build_text(rec.title, rec.message), self._stop)

    def encode(self, rec: AdRecord) -> SparseVector:
        text_vec = transform(self.tokens_for(rec), self.vectorizer)
        if not self.encoder:
            return text_vec
        target_vec = encode_targets(normalized_targets_for(rec), self.encoder)
        return concat([text_vec, target_vec])

    def encode_many(self, records: Sequence[AdRecord]) -> list[SparseVector]:
        return [self.encode(rec) for rec in records]

    @staticmethod
    def fit(records: Sequence[AdRecord], config: FeatureConfig) -> "FeaturePipeline":
        stop = load_stop_words(config.stop_words_path)
        docs = [tokenize_and_stem(build_text(r.title, r.message), stop)
                for r in records]
        vectorizer = fit_vectorizer(docs, ngram_max=config.ngram_max,
                                    min_df=config.min_df)
        encoder = None
        if config.use_targets:
            encoder = fit_target_encoder([normalized_targets_for(r) for r in records])
        return FeaturePipeline(config, vectorizer, encoder)


class MnbSystem:
    """The baseline: unigram TF-IDF over ad text only, Multinomial NB."""

    kind = "mnb"

    def __init__(self, alpha: float = 1.0, min_df: int = 2,
                 balanced_priors: bool = False,
                 stop_words_path: str | None = None):
        self.alpha = alpha
        self.min_df = min_df
        self.balanced_priors = balanced_priors
        self.stop_words_path = stop_words_path
        self.features: FeaturePipeline | None = None
        self.model: MnbModel | None = None

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(use_targets=False, ngram_max=1, min_df=self.min_df,
                             stop_words_path=self.stop_words_path)

    def fit(self, records: Sequence[tuple[AdRecord, Label]]) -> None:
        recs = [r for r, _ in records]
        labels = [l for _, l in records]
        self.features = FeaturePipeline.fit(recs, self.feature_config())
        X = self.features.encode_many(recs)
        self.model = train_mnb(X, labels, alpha=self.alpha,
                               balanced_priors=self.balanced_priors)

    def predict_proba(self, records: Sequence[AdRecord]) -> list[float]:
        assert self.features and self.model, "system is not fitted"
        return [predict_mnb(self.model, x)
                for x in self.features.encode_many(records)]

    def predict(self, records: Sequence[AdRecord]) -> list[Label]:
        return [Label.POLITICAL if p >= 0.5 else Label.NON_POLITICAL
                for p in self.predict_proba(records)]

    def settings(self) -> dict:
        return {"alpha": self.alpha, "min_df": self.min_df,
                "balanced_priors": self.balanced_priors}


class GbdtSystem:
    """The boosted-tree classifier over text (and optionally targeting)
    features, trained with inverse-frequency class weights."""

    def __init__(self, feature_config: FeatureConfig, params: GbdtParams):
        self.kind = "gbm-text+targets" if feature_config.use_targets else "gbm-text"
        self.config = feature_config
        self.params = params
        self.features: FeaturePipeline | None = None
        self.model: GbdtEnsemble | None = None

    def fit(self, records: Sequence[tuple[AdRecord, Label]]) -> None:
        recs = [r for r, _ in records]
        labels = [l for _, l in records]
        self.features = FeaturePipeline.fit(recs, self.config)
        X = self.features.encode_many(recs)
        weights = compute_class_weights(labels).per_sample(labels)
        self.model = train_gbdt(X, labels, weights, self.params,
                                feature_names=self.features.feature_names())

    def tune(self, records: Sequence[tuple[AdRecord, Label]],
             grid: Sequence[GbdtParams], k: int = 5, seed: int = 0) -> GbdtParams:
        """Grid search on advertiser-grouped folds; updates self.params."""
        recs = [r for r, _ in records]
        labels = [l for _, l in records]
        features = FeaturePipeline.fit(recs, self.config)
        X = features.encode_many(recs)
        best = grid_search_cv(X, labels, [r.advertiser for r in recs],
                              grid, k=k, seed=seed)
        self.params = best
        return best

    def predict_proba(self, records: Sequence[AdRecord]) -> list[float]:
        assert self.features and self.model, "system is not fitted"
        X = self.features.encode_many(records)
        return [float(p) for p in predict_proba_batch(self.model, X)]

    def predict(self, records: Sequence[AdRecord]) -> list[Label]:
        return [Label.POLITICAL if p >= 0.5 else Label.NON_POLITICAL
                for p in self.predict_proba(records)]

    def settings(self) -> dict:
        return {"params": self.params.to_json()}


def make_system(kind: str, feature_config: FeatureConfig,
                params: GbdtParams, nb_alpha: float = 1.0,
                nb_balanced_priors: bool = False) -> MnbSystem | GbdtSystem:
    if kind == "mnb":
        return MnbSystem(alpha=nb_alpha, min_df=feature_config.min_df,
                         balanced_priors=nb_balanced_priors,
                         stop_words_path=feature_config.stop_words_path)
    if kind == "gbm-text":
        return GbdtSystem(replace(feature_config, use_targets=False), params)
    if kind == "gbm-text+targets":
        return GbdtSystem(replace(feature_config, use_targets=True), params)
    raise ValueError(f"unknown system {kind!r}; expected one of {SYSTEMS}")


# ---------------------------------------------------------------------------
# bundles

def corpus_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")


@dataclass
class Bundle:
    """A trained system plus the snapshot needed to reproduce or rescore it."""

    system: MnbSystem | GbdtSystem
    config: dict
    path: Path | None = None

    @property
    def kind(self) -> str:
        return self.config["system"]


def save_bundle(directory: str | Path, system: MnbSystem | GbdtSystem,
                seed: int, test_fraction: float, corpus_sha256: str,
                force: bool = False, extra: dict | None = None) -> Bundle:
    directory = Path(directory)
    if directory.exists() and any(directory.iterdir()):
        if not force:
            raise FileExistsError(
                f"{directory} already holds a bundle; pass --force to overwrite")
    directory.mkdir(parents=True, exist_ok=True)
    assert system.features is not None and system.model is not None, \
        "cannot save an unfitted system"

    config = {
        "schema_version": _BUNDLE_SCHEMA,
        "system": system.kind,
        "seed": seed,
        "test_fraction": test_fraction,
        "corpus_sha256": corpus_sha256,
        "feature": system.features.config.to_json(),
        "settings": system.settings(),
    }
    if extra:
        config.update(extra)
    _write_json(directory / "config.json", config)
    system.features.vectorizer.save(directory / "vectorizer.json")
    if system.features.encoder is not None:
        system.features.encoder.save(directory / "encoder.json")
    system.model.save(directory / "model.json")
    _write_json(directory / "metadata.json", {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "polads_version": __version__,
    })
    log.info("bundle written to %s", directory)
    return Bundle(system=system, config=config, path=directory)


def load_bundle(directory: str | Path) -> Bundle:
    directory = Path(directory)
    config = json.loads((directory / "config.json").read_text(encoding="utf-8"))
    if config.get("schema_version") != _BUNDLE_SCHEMA:
        raise IncompatibleBundles(f"unknown bundle schema in {directory}")
    feature_config = FeatureConfig.from_json(config["feature"])
    vectorizer = TfIdfVectorizer.load(directory / "vectorizer.json")
    encoder = None
    if (directory / "encoder.json").exists():
        encoder = TargetEncoder.load(directory / "encoder.json")
    features = FeaturePipeline(feature_config, vectorizer, encoder)

    kind = config["system"]
    settings = config.get("settings", {})
    if kind == "mnb":
        system = MnbSystem(alpha=settings.get("alpha", 1.0),
                           min_df=feature_config.min_df,
                           balanced_priors=settings.get("balanced_priors", False),
                           stop_words_path=feature_config.stop_words_path)
        system.model = MnbModel.load(directory / "model.json")
    else:
        system = GbdtSystem(feature_config,
                            GbdtParams.from_json(settings["params"]))
        system.model = GbdtEnsemble.load(directory / "model.json")
    system.features = features
    return Bundle(system=system, config=config, path=directory)


def fresh_system_like(bundle: Bundle) -> MnbSystem | GbdtSystem:
    """An unfitted copy configured exactly as the bundle's system (for the
    bootstrap, which retrains from scratch on every resample)."""
    settings = bundle.config.get("settings", {})
    feature_config = FeatureConfig.from_json(bundle.config["feature"])
    if bundle.kind == "mnb":
        return MnbSystem(alpha=settings.get("alpha", 1.0),
                         min_df=feature_config.min_df,
                         balanced_priors=settings.get("balanced_priors", False),
                         stop_words_path=feature_config.stop_words_path)
    return GbdtSystem(feature_config, GbdtParams.from_json(settings["params"]))


def check_bundles_comparable(a: Bundle, b: Bundle) -> None:
    """Two bundles can be compared when they were trained against the same
    corpus under the same split settings."""
    for key in ("corpus_sha256", "seed", "test_fraction"):
        if a.config.get(key) != b.config.get(key):
            raise IncompatibleBundles(
                f"bundles disagree on {key}: "
                f"{a.config.get(key)!r} vs {b.config.get(key)!r}")


def check_corpus_matches(bundle: Bundle, corpus_sha256: str) -> None:
    recorded = bundle.config.get("corpus_sha256")
    if recorded != corpus_sha256:
        raise IncompatibleBundles(
            "corpus does not match the one the bundle was trained on "
            f"({corpus_sha256[:12]} vs {str(recorded)[:12]})")
