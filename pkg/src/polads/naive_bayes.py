"""Multinomial Naive Bayes in log space, the archive's baseline classifier."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NegativeFeature, SingleClassTraining
from .ingest import Label
from .sparse import SparseVector

log = logging.getLogger(__name__)

_MODEL_SCHEMA = 1

# class axis order used throughout: [NON_POLITICAL, POLITICAL]
_CLASSES = (Label.NON_POLITICAL, Label.POLITICAL)


@dataclass
class MnbModel:
    """log_prior[c] and log_likelihood[c, f] over the fixed class order
    (non-political, political); alpha is the Laplace smoothing constant."""

    log_prior: np.ndarray
    log_likelihood: np.ndarray
    alpha: float

    @property
    def dim(self) -> int:
        return self.log_likelihood.shape[1]

    def to_json(self) -> dict:
        return {
            "schema_version": _MODEL_SCHEMA,
            "kind": "multinomial-nb",
            "alpha": self.alpha,
            "log_prior": [float(v) for v in self.log_prior],
            "log_likelihood": [[float(v) for v in row] for row in self.log_likelihood],
        }

    @staticmethod
    def from_json(doc: dict) -> "MnbModel":
        if doc.get("schema_version") != _MODEL_SCHEMA or doc.get("kind") != "multinomial-nb":
            raise ValueError("not a multinomial-nb document")
        return MnbModel(
            log_prior=np.asarray(doc["log_prior"], dtype=np.float64),
            log_likelihood=np.asarray(doc["log_likelihood"], dtype=np.float64),
            alpha=float(doc["alpha"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True),
                              encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "MnbModel":
        return MnbModel.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_mnb(X: Sequence[SparseVector], y: Sequence[Label],
              alpha: float = 1.0, balanced_priors: bool = False) -> MnbModel:
    """Fit smoothed per-class feature distributions.

    log_likelihood[c, f] = ln((count(f, c) + alpha) / (sum_f count(f, c) + alpha * F)),
    log_prior[c] = ln(N_c / N). With balanced_priors=True both priors are
    ln(1/2) regardless of class counts (the Eq.-1 reweighting ablation).
    """
    if len(X) != len(y) or len(X) == 0:
        raise ValueError("X and y must be equal-length and non-empty")
    dim = X[0].dim
    counts = np.zeros((2, dim), dtype=np.float64)
    n_docs = np.zeros(2, dtype=np.float64)
    for vec, label in zip(X, y):
        if vec.dim != dim:
            raise DimensionMismatch("feature vectors of mixed widths")
        if np.any(vec.values < 0):
            raise NegativeFeature("multinomial NB requires nonnegative features")
        c = _CLASSES.index(label)
        np.add.at(counts[c], vec.indices, vec.values)
        n_docs[c] += 1
    if np.any(n_docs == 0):
        raise SingleClassTraining("both classes must appear in training data")

    totals = counts.sum(axis=1, keepdims=True)
    log_likelihood = np.log(counts + alpha) - np.log(totals + alpha * dim)
    if balanced_priors:
        log_prior = np.full(2, math.log(0.5))
    else:
        log_prior = np.log(n_docs) - math.log(len(X))
    return MnbModel(log_prior=log_prior, log_likelihood=log_likelihood, alpha=alpha)


def predict_log_posterior(m: MnbModel, x: SparseVector) -> np.ndarray:
    """Normalized per-class log posterior via log-sum-exp."""
    if x.dim != m.dim:
        raise DimensionMismatch(f"vector width {x.dim} != model width {m.dim}")
    joint = m.log_prior + m.log_likelihood[:, x.indices] @ x.values
    peak = joint.max()
    logz = peak + math.log(np.exp(joint - peak).sum())
    return joint - logz


def predict_mnb(m: MnbModel, x: SparseVector) -> float:
    """P(political | x)."""
    return float(math.exp(predict_log_posterior(m, x)[1]))


def predict_label(m: MnbModel, x: SparseVector) -> Label:
    return Label.POLITICAL if predict_mnb(m, x) >= 0.5 else Label.NON_POLITICAL
