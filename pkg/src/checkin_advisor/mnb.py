"""Multinomial Naive Bayes for attribute inference and user identification.

The classifier scores a trace C = {c_1..c_n} per class f as
log P(f) + sum_i log P(c_i|f) and predicts the argmax. All arithmetic stays
in log space: raw likelihood products underflow after a few dozen check-ins.

Likelihoods use additive smoothing, P(c|f) = (count(c,f) + alpha) /
(total(f) + alpha * |V|). Cells supported by fewer than ``k_min`` distinct
users are zeroed before smoothing and recorded in ``suppressed`` so that no
downstream statistic can expose a near-unique user's trace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BadParams, EmptyClass, EmptyCorpus
from .trace import AttributeSchema, IdentitySchema, LabeledCorpus, Trace, VENUE


@dataclass(frozen=True)
class Prediction:
    """Per-class log scores plus their softmax posterior."""

    classes: tuple[str, ...]
    scores: tuple[float, ...]
    posterior: tuple[float, ...]
    predicted: str
    n_used: int

    @property
    def predicted_index(self) -> int:
        return self.classes.index(self.predicted)

    @property
    def posterior_top(self) -> float:
        return self.posterior[self.predicted_index]


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    ex = np.exp(shifted)
    return ex / ex.sum()


def prediction_from_log_scores(
    classes: tuple[str, ...], scores, n_used: int
) -> Prediction:
    """Normalize log scores into a Prediction; ties go to the first class."""
    arr = np.asarray(scores, dtype=float)
    post = softmax(arr)
    idx = int(np.argmax(arr))
    return Prediction(
        classes=tuple(classes),
        scores=tuple(float(s) for s in arr),
        posterior=tuple(float(p) for p in post),
        predicted=classes[idx],
        n_used=n_used,
    )


def prediction_from_probabilities(
    classes: tuple[str, ...], probs, n_used: int
) -> Prediction:
    """Wrap an already-normalized class distribution (vote fractions)."""
    arr = np.asarray(probs, dtype=float)
    total = arr.sum()
    if total <= 0:
        arr = np.full(len(arr), 1.0 / len(arr))
    else:
        arr = arr / total
    with np.errstate(divide="ignore"):
        scores = np.log(arr)
    idx = int(np.argmax(arr))
    return Prediction(
        classes=tuple(classes),
        scores=tuple(float(s) for s in scores),
        posterior=tuple(float(p) for p in arr),
        predicted=classes[idx],
        n_used=n_used,
    )


@dataclass(frozen=True)
class MnbModel:
    schema: AttributeSchema
    vocabulary: tuple[str, ...]
    granularity: str
    log_priors: np.ndarray            # (m,)
    log_likelihoods: np.ndarray       # (m, |V|)
    log_floor: np.ndarray             # (m,) score of an unseen feature per class
    alpha: float
    k_min: int
    suppressed: frozenset[tuple[str, str]]   # (feature_id, class)
    trained_on: int

    kind = "mnb"

    @cached_property
    def vocab_index(self) -> dict[str, int]:
        return {fid: j for j, fid in enumerate(self.vocabulary)}

    @property
    def is_identification(self) -> bool:
        return isinstance(self.schema, IdentitySchema)

    @property
    def priors(self) -> np.ndarray:
        return np.exp(self.log_priors)

    def log_likelihood(self, feature_id: str, class_index: int) -> float:
        """Per-feature log likelihood, falling back to the smoothing floor
        for out-of-vocabulary features."""
        j = self.vocab_index.get(feature_id)
        if j is None:
            return float(self.log_floor[class_index])
        return float(self.log_likelihoods[class_index, j])

    def is_suppressed(self, feature_id: str, label: str) -> bool:
        return (feature_id, label) in self.suppressed


def train_mnb(
    corpus: LabeledCorpus, alpha: float = 1.0, k_min: int = 0
) -> MnbModel:
    """Fit priors and smoothed likelihoods from per-check-in records.

    Priors are record-count proportional. With ``k_min`` > 0, every
    (feature, class) cell backed by fewer than k_min distinct users has its
    raw count zeroed before smoothing; the class total shrinks accordingly.
    """
    if alpha <= 0:
        raise BadParams("alpha must be positive")
    if k_min < 0:
        raise BadParams("k_min must be non-negative")
    if not corpus.records:
        raise EmptyCorpus("cannot train on an empty corpus")

    schema = corpus.schema
    m, v = schema.m, len(corpus.vocabulary)
    counts = np.zeros((m, v))
    class_records = np.zeros(m)
    cell_users: dict[tuple[int, int], set[str]] = {}

    for r in corpus.records:
        ci = schema.index_of(r.label)
        j = corpus.vocab_index[r.checkin.feature_id(corpus.granularity)]
        counts[ci, j] += 1
        class_records[ci] += 1
        if k_min > 0:
            cell_users.setdefault((ci, j), set()).add(r.checkin.pseudonym)

    for ci, label in enumerate(schema.classes):
        if class_records[ci] == 0:
            raise EmptyClass(label)

    suppressed: set[tuple[str, str]] = set()
    if k_min > 0:
        for ci, label in enumerate(schema.classes):
            for j, fid in enumerate(corpus.vocabulary):
                if len(cell_users.get((ci, j), ())) < k_min:
                    counts[ci, j] = 0.0
                    suppressed.add((fid, label))

    denom = counts.sum(axis=1) + alpha * v
    log_likelihoods = np.log(counts + alpha) - np.log(denom)[:, None]
    log_floor = np.log(alpha) - np.log(denom)
    log_priors = np.log(class_records) - np.log(class_records.sum())

    return MnbModel(
        schema=schema,
        vocabulary=corpus.vocabulary,
        granularity=corpus.granularity,
        log_priors=log_priors,
        log_likelihoods=log_likelihoods,
        log_floor=log_floor,
        alpha=float(alpha),
        k_min=int(k_min),
        suppressed=frozenset(suppressed),
        trained_on=len(corpus.records),
    )


def predict_mnb(model: MnbModel, trace: Trace) -> Prediction:
    """Score a trace; the empty trace yields the prior distribution."""
    scores = model.log_priors.copy()
    for c in trace.checkins:
        fid = c.feature_id(model.granularity)
        j = model.vocab_index.get(fid)
        if j is None:
            scores += model.log_floor
        else:
            scores += model.log_likelihoods[:, j]
    return prediction_from_log_scores(model.schema.classes, scores, trace.n)


def train_identification(
    corpus: LabeledCorpus, alpha: float = 1.0, k_min: int = 0,
    schema_name: str = "identification",
) -> MnbModel:
    """Train a user identification model: one class per enrolled pseudonym.

    The corpus labels are ignored; records are relabeled by their pseudonym.
    Priors end up proportional to per-user check-in counts.
    """
    if not corpus.records:
        raise EmptyCorpus("cannot train on an empty corpus")
    schema = IdentitySchema(name=schema_name, classes=corpus.users)
    from .trace import LabeledCheckIn, corpus_from_records

    relabeled = corpus_from_records(
        schema,
        [LabeledCheckIn(checkin=r.checkin, label=r.checkin.pseudonym) for r in corpus.records],
        corpus.granularity,
    )
    return train_mnb(relabeled, alpha=alpha, k_min=k_min)


def identify_user(model: MnbModel, checkins: Trace) -> list[tuple[str, float]]:
    """Posterior over enrolled users, most likely first.

    Ties keep enrollment (schema) order; the scoring is exactly the
    attribute-inference machinery with pseudonyms as classes.
    """
    pred = predict_mnb(model, checkins)
    order = sorted(
        range(len(pred.classes)), key=lambda i: (-pred.posterior[i], i)
    )
    return [(pred.classes[i], pred.posterior[i]) for i in order]
