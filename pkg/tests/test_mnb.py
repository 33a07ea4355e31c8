import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from checkin_advisor.errors import BadParams, EmptyClass, EmptyCorpus
from checkin_advisor.mnb import (
    identify_user,
    predict_mnb,
    prediction_from_log_scores,
    train_identification,
    train_mnb,
)
from checkin_advisor.trace import (
    AttributeSchema,
    LabeledCheckIn,
    SynthConfig,
    Trace,
    corpus_from_records,
    synth_corpus,
)

from conftest import make_checkin, make_trace

TOY_LIKELIHOODS = {"f1": {"v1": 4 / 7, "v2": 2 / 7, "v3": 1 / 7},
                   "f2": {"v1": 1 / 7, "v2": 2 / 7, "v3": 4 / 7}}
TOY_FLOOR = 1 / 7  # alpha / (4 + alpha * 3)


def brute_force_scores(venues, priors=(0.5, 0.5)):
    """Independent oracle: direct product enumeration over the toy model."""
    out = []
    for ci, cls in enumerate(("f1", "f2")):
        prod = priors[ci]
        for v in venues:
            prod *= TOY_LIKELIHOODS[cls].get(v, TOY_FLOOR)
        out.append(prod)
    return out


class TestTrainMnb:
    def test_toy_parameters(self, toy_model):
        np.testing.assert_allclose(np.exp(toy_model.log_priors), [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(
            np.exp(toy_model.log_likelihoods[0]), [4 / 7, 2 / 7, 1 / 7], atol=1e-12
        )
        np.testing.assert_allclose(
            np.exp(toy_model.log_likelihoods[1]), [1 / 7, 2 / 7, 4 / 7], atol=1e-12
        )
        assert toy_model.suppressed == frozenset()
        assert toy_model.trained_on == 8

    def test_empty_corpus(self):
        schema = AttributeSchema(name="s", classes=("a", "b"))
        corpus = corpus_from_records(schema, [])
        with pytest.raises(EmptyCorpus):
            train_mnb(corpus)

    def test_empty_class(self):
        schema = AttributeSchema(name="s", classes=("a", "b"))
        records = [LabeledCheckIn(make_checkin("v1", "u1", 0), "a")]
        corpus = corpus_from_records(schema, records)
        with pytest.raises(EmptyClass):
            train_mnb(corpus)

    def test_bad_alpha(self, toy_corpus):
        with pytest.raises(BadParams):
            train_mnb(toy_corpus, alpha=0.0)

    def test_kmin_suppression(self):
        # v1 visited by a single f1 user; k_min=2 zeroes that cell
        schema = AttributeSchema(name="s", classes=("a", "b"))
        records = (
            [LabeledCheckIn(make_checkin("v1", "u1", 0), "a")]
            + [LabeledCheckIn(make_checkin("v2", u, i + 1), "a") for i, u in enumerate(["u1", "u2"])]
            + [LabeledCheckIn(make_checkin("v2", u, i + 10), "b") for i, u in enumerate(["u3", "u4"])]
        )
        corpus = corpus_from_records(schema, records)
        model = train_mnb(corpus, alpha=1.0, k_min=2)
        assert ("v1", "a") in model.suppressed
        # zeroed before smoothing: count 0, class-a total drops to 2
        denom = 2 + 1.0 * 2
        assert math.exp(model.log_likelihood("v1", 0)) == pytest.approx(1.0 / denom)

    def test_kmin_counts_zero_cells_as_suppressed(self, toy_corpus):
        model = train_mnb(toy_corpus, alpha=1.0, k_min=99)
        assert len(model.suppressed) == len(model.vocabulary) * model.schema.m

    def test_normalization_invariant(self, toy_model):
        for row in np.exp(toy_model.log_likelihoods):
            assert row.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.exp(toy_model.log_priors).sum() == pytest.approx(1.0, abs=1e-9)


class TestPredictMnb:
    def test_toy_trace(self, toy_model):
        pred = predict_mnb(toy_model, make_trace(["v1", "v2"]))
        assert pred.predicted == "f1"
        assert pred.posterior[0] == pytest.approx(0.8, abs=1e-9)
        assert pred.posterior[1] == pytest.approx(0.2, abs=1e-9)

    def test_empty_trace_gives_priors(self, toy_model):
        pred = predict_mnb(toy_model, make_trace([]))
        assert pred.posterior == pytest.approx((0.5, 0.5), abs=1e-12)
        assert pred.predicted == "f1"  # tie broken by schema order

    def test_unseen_venue_floors(self, toy_model):
        pred = predict_mnb(toy_model, make_trace(["v9"]))
        assert pred.posterior[0] == pytest.approx(0.5, abs=1e-9)

    def test_exhaustive_oracle_equivalence(self, toy_model):
        """Every trace of length <= 4 over the 3-venue vocabulary agrees with
        direct product enumeration."""
        venues = ["v1", "v2", "v3"]
        checked = 0
        for n in range(5):
            for combo in itertools.product(venues, repeat=n):
                pred = predict_mnb(toy_model, make_trace(list(combo)))
                oracle = brute_force_scores(combo)
                for score, prod in zip(pred.scores, oracle):
                    assert abs(score - math.log(prod)) < 1e-9
                assert pred.predicted == ("f1", "f2")[int(np.argmax(oracle))] or (
                    oracle[0] == oracle[1] and pred.predicted == "f1"
                )
                checked += 1
        assert checked == 1 + 3 + 9 + 27 + 81

    @given(venues=st.lists(st.sampled_from(["v1", "v2", "v3", "v9"]), min_size=1, max_size=8))
    @settings(max_examples=150)
    def test_permutation_invariance(self, toy_model, venues):
        base = predict_mnb(toy_model, make_trace(venues))
        shuffled = predict_mnb(toy_model, make_trace(list(reversed(venues))))
        assert base.posterior == pytest.approx(shuffled.posterior, abs=1e-9)
        if abs(base.scores[0] - base.scores[1]) > 1e-9:  # argmax stable off ties
            assert base.predicted == shuffled.predicted

    @given(
        venues=st.lists(st.sampled_from(["v1", "v2", "v3"]), max_size=6),
        shift=st.floats(min_value=-50, max_value=50, allow_nan=False),
    )
    @settings(max_examples=100)
    def test_scale_invariance(self, toy_model, venues, shift):
        pred = predict_mnb(toy_model, make_trace(venues))
        shifted = prediction_from_log_scores(
            pred.classes, [s + shift for s in pred.scores], pred.n_used
        )
        assert shifted.predicted == pred.predicted
        assert shifted.posterior == pytest.approx(pred.posterior, abs=1e-9)

    def test_monotonicity(self, toy_model):
        # appending a check-in more likely under f1 strictly raises posterior(f1)
        base = predict_mnb(toy_model, make_trace(["v2"]))
        more = predict_mnb(toy_model, make_trace(["v2", "v1"]))
        assert more.posterior[0] > base.posterior[0]

    def test_posterior_sums_to_one(self, toy_model):
        for venues in (["v1"], ["v1", "v3", "v2"], [], ["v9", "v9"]):
            pred = predict_mnb(toy_model, make_trace(venues))
            assert sum(pred.posterior) == pytest.approx(1.0, abs=1e-9)


class TestIdentification:
    def test_single_user_posterior_one(self):
        schema_records = [LabeledCheckIn(make_checkin("v1", "solo", i), "x") for i in range(3)]
        corpus = corpus_from_records(
            AttributeSchema(name="s", classes=("x", "y")),
            schema_records + [LabeledCheckIn(make_checkin("v2", "solo2", 9), "y")],
        )
        sub = corpus_from_records(corpus.schema, schema_records)
        # single enrolled user via identification training on a one-user slice
        model = train_identification(sub)
        ranked = identify_user(model, make_trace(["v1"], user=None))
        assert ranked == [("solo", 1.0)]

    def test_empty_trace_ranks_by_prior(self):
        schema = AttributeSchema(name="s", classes=("a", "b"))
        records = [LabeledCheckIn(make_checkin("v1", "heavy", i), "a") for i in range(5)]
        records += [LabeledCheckIn(make_checkin("v2", "light", 10), "b")]
        corpus = corpus_from_records(schema, records)
        model = train_identification(corpus)
        ranked = identify_user(model, Trace(checkins=()))
        assert [u for u, _ in ranked] == ["heavy", "light"]
        assert ranked[0][1] == pytest.approx(5 / 6)

    def test_verbatim_trace_identifies_user(self):
        config = SynthConfig(m=5, users_per_class=1, checkins_per_user=12,
                             vocab_size=40, concentration=0.05)
        hits = 0
        for seed in range(10):
            corpus, _ = synth_corpus(config, seed=seed)
            by_user = {}
            for r in corpus.records:
                by_user.setdefault(r.checkin.pseudonym, []).append(r)
            train_records, probes = [], []
            for user, recs in by_user.items():
                train_records.extend(recs[:-4])
                probes.append((user, recs[-4:]))
            model = train_identification(
                corpus_from_records(corpus.schema, train_records, corpus.granularity)
            )
            for user, recs in probes:
                trace = Trace(checkins=tuple(r.checkin for r in recs), pseudonym=user)
                if identify_user(model, trace)[0][0] == user:
                    hits += 1
        assert hits / 50 > 0.7

    def test_determinism(self, toy_corpus):
        m1 = train_identification(toy_corpus)
        m2 = train_identification(toy_corpus)
        np.testing.assert_array_equal(m1.log_likelihoods, m2.log_likelihoods)
