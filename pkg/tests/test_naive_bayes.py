"""Multinomial NB: hand-computed posteriors and log-space robustness."""

import math

import numpy as np
import pytest

from polads.errors import NegativeFeature, SingleClassTraining
from polads.ingest import Label
from polads.naive_bayes import (MnbModel, predict_label, predict_mnb, train_mnb)
from polads.sparse import SparseVector

P, N = Label.POLITICAL, Label.NON_POLITICAL


def vec(dim, **cols):
    return SparseVector.from_pairs(
        ((int(k[1:]), v) for k, v in cols.items()), dim)


@pytest.fixture
def hand_model():
    # class P doc has one "vote" (col 0), class N doc has one "shoe" (col 1)
    X = [vec(2, c0=1.0), vec(2, c1=1.0)]
    return train_mnb(X, [P, N], alpha=1.0)


class TestTrain:
    def test_hand_likelihoods(self, hand_model):
        # count(vote|P)=1, total(P)=1, F=2 -> (1+1)/(1+2) = 2/3
        lik = np.exp(hand_model.log_likelihood)
        assert lik[1, 0] == pytest.approx(2 / 3)
        assert lik[1, 1] == pytest.approx(1 / 3)

    def test_equal_priors(self, hand_model):
        assert hand_model.log_prior == pytest.approx([math.log(0.5)] * 2)

    def test_likelihoods_sum_to_one(self, hand_model):
        sums = np.exp(hand_model.log_likelihood).sum(axis=1)
        assert sums == pytest.approx([1.0, 1.0], abs=1e-9)

    def test_smoothing_floor_never_zero(self):
        # col 2 unseen in either class: likelihood = alpha/(T_c + alpha*F)
        X = [vec(3, c0=1.0), vec(3, c1=1.0)]
        m = train_mnb(X, [P, N], alpha=1.0)
        lik = np.exp(m.log_likelihood)
        assert lik[0, 2] == pytest.approx(1 / 4)
        assert lik[1, 2] == pytest.approx(1 / 4)
        assert np.all(lik > 0)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassTraining):
            train_mnb([vec(2, c0=1.0)], [P], alpha=1.0)

    def test_negative_features_rejected(self):
        with pytest.raises(NegativeFeature):
            train_mnb([vec(2, c0=-1.0), vec(2, c1=1.0)], [P, N])

    def test_balanced_priors_flag(self):
        X = [vec(2, c0=1.0)] * 3 + [vec(2, c1=1.0)]
        m = train_mnb(X, [P, P, P, N], balanced_priors=True)
        assert m.log_prior == pytest.approx([math.log(0.5)] * 2)


class TestPredict:
    def test_empty_input_returns_prior(self):
        X = [vec(2, c0=1.0)] * 3 + [vec(2, c1=1.0)]
        m = train_mnb(X, [P, P, P, N])
        assert predict_mnb(m, vec(2)) == pytest.approx(0.75)

    def test_hand_posterior(self, hand_model):
        # P(P | vote) = (0.5 * 2/3) / (0.5 * 2/3 + 0.5 * 1/3) = 2/3
        assert predict_mnb(hand_model, vec(2, c0=1.0)) == pytest.approx(2 / 3)

    def test_scaling_moves_posterior_monotonically(self, hand_model):
        p1 = predict_mnb(hand_model, vec(2, c0=1.0))
        p2 = predict_mnb(hand_model, vec(2, c0=2.0))
        prior = predict_mnb(hand_model, vec(2))
        assert (p1 - prior) > 0 and (p2 - p1) > 0

    def test_posteriors_sum_to_one(self, hand_model):
        from polads.naive_bayes import predict_log_posterior
        post = np.exp(predict_log_posterior(hand_model, vec(2, c0=3.0, c1=1.0)))
        assert post.sum() == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= post[1] <= 1.0

    def test_symmetric_feature_leaves_posterior_unchanged(self):
        X = [vec(3, c0=1.0, c2=1.0), vec(3, c1=1.0, c2=1.0)]
        m = train_mnb(X, [P, N])
        with_common = predict_mnb(m, vec(3, c0=1.0, c2=5.0))
        without = predict_mnb(m, vec(3, c0=1.0))
        assert with_common == pytest.approx(without, abs=1e-12)

    def test_no_underflow_on_long_documents(self, hand_model):
        x = vec(2, c0=7000.0, c1=3000.0)  # 10^4 tokens
        p = predict_mnb(hand_model, x)
        assert math.isfinite(p) and 0.0 <= p <= 1.0

    def test_predict_label_threshold(self, hand_model):
        assert predict_label(hand_model, vec(2, c0=1.0)) is P
        assert predict_label(hand_model, vec(2, c1=1.0)) is N


def test_model_round_trip(tmp_path, hand_model):
    path = tmp_path / "mnb.json"
    hand_model.save(path)
    loaded = MnbModel.load(path)
    x = vec(2, c0=2.0, c1=1.0)
    assert predict_mnb(loaded, x) == predict_mnb(hand_model, x)
