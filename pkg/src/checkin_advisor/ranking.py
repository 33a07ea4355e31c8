"""Model-specific feature relevance scoring.

Instance-level rankers answer "why this prediction" for one trace; global
rankers summarize what a model learned per class. Every ranking is sorted by
score descending with feature-id tie-breaks, so output order is always
deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    EmptyTrace,
    KindMismatch,
    MissingCorpus,
    SingleClassStore,
    UnknownClass,
)
from .mnb import MnbModel, predict_mnb
from .trace import FeatureVector, LabeledCorpus, Trace
from .vectors import VectorModel, predict_any, predict_vector, tree_importances

LIKELIHOOD = "likelihood"
ACCURACY_GAIN = "accuracy_gain"
CONTRIBUTION = "contribution"
KNN_MARGIN = "knn_margin"
INFO_GAIN = "info_gain"
COEFFICIENT = "coefficient"
GINI_IMPORTANCE = "gini_importance"
SVM_WEIGHT = "svm_weight"

METHODS = (
    LIKELIHOOD, ACCURACY_GAIN, CONTRIBUTION, KNN_MARGIN,
    INFO_GAIN, COEFFICIENT, GINI_IMPORTANCE, SVM_WEIGHT,
)

# Extension point for ranking methods the registry does not ship (cluster
# matching entropy, Relief weights, ...). Keyed by method name; callables
# receive (model, corpus, top_k) and return {class: RankedFactors}.
EXTENSION_RANKERS: dict[str, Callable] = {}


@dataclass(frozen=True)
class FeatureScore:
    feature_id: str
    score: float
    method: str

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"score for {self.feature_id!r} is not finite")
        if self.method not in METHODS:
            raise ValueError(f"unknown ranking method {self.method!r}")


@dataclass(frozen=True)
class RankedFactors:
    target_class: str | None
    entries: tuple[FeatureScore, ...]
    truncated_at: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for a, b in zip(self.entries, self.entries[1:]):
            if b.score > a.score:
                raise ValueError("entries must be sorted by score descending")

    @property
    def feature_ids(self) -> tuple[str, ...]:
        return tuple(e.feature_id for e in self.entries)


def rank_scores(
    target_class: str | None,
    scored: Iterable[tuple[str, float]],
    method: str,
    top_k: int | None = None,
) -> RankedFactors:
    """Sort (feature_id, score) pairs descending, ties by feature id."""
    entries = [FeatureScore(fid, float(s), method) for fid, s in scored]
    entries.sort(key=lambda e: (-e.score, e.feature_id))
    if top_k is not None:
        entries = entries[: max(0, top_k)]
    return RankedFactors(
        target_class=target_class,
        entries=tuple(entries),
        truncated_at=top_k,
    )


# -- instance rankers -----------------------------------------------------------

def rank_instance_likelihood(
    model: MnbModel, trace: Trace, target: str, top_k: int | None = None
) -> RankedFactors:
    """Per-check-in likelihood P(c_i | target), most discriminating first.

    Repeat visits produce one entry per occurrence.
    """
    if target not in model.schema.classes:
        raise UnknownClass(f"{target!r} is not a class of {model.schema.name!r}")
    ci = model.schema.index_of(target)
    scored = [
        (c.feature_id(model.granularity), math.exp(model.log_likelihood(c.feature_id(model.granularity), ci)))
        for c in trace.checkins
    ]
    return rank_scores(target, scored, LIKELIHOOD, top_k)


def occlusion_gains(model, trace: Trace) -> list[tuple[int, str, float]]:
    """Leave-one-out posterior drops for the full-trace predicted class.

    Returns (checkin index, feature id, gain) triples; the predicted class is
    fixed from the full trace before any removal.
    """
    if trace.n == 0:
        raise EmptyTrace("occlusion ranking needs a non-empty trace")
    full = predict_any(model, trace)
    target_idx = full.predicted_index
    base = full.posterior[target_idx]
    granularity = model.granularity
    out = []
    for i, c in enumerate(trace.checkins):
        reduced = Trace(
            checkins=trace.checkins[:i] + trace.checkins[i + 1:],
            pseudonym=trace.pseudonym,
        )
        part = predict_any(model, reduced)
        out.append((i, c.feature_id(granularity), base - part.posterior[target_idx]))
    return out


def rank_instance_occlusion(
    model, trace: Trace, top_k: int | None = None
) -> RankedFactors:
    """Accuracy-gain ranking: how much each check-in props up the prediction."""
    gains = occlusion_gains(model, trace)
    full = predict_any(model, trace)
    return rank_scores(
        full.predicted, [(fid, g) for _, fid, g in gains], ACCURACY_GAIN, top_k
    )


def rank_instance_contribution(
    model: VectorModel, fv: FeatureVector, top_k: int | None = None
) -> RankedFactors:
    """Logistic regression: coefficient times count for present features."""
    if not isinstance(model, VectorModel) or model.kind != "logistic_regression":
        raise KindMismatch("contribution ranking needs a logistic_regression model")
    pred = predict_vector(model, fv)
    row = np.asarray(model.parameters["coef"])[pred.predicted_index]
    scored = [
        (model.vocabulary[j], float(row[j]) * count)
        for j, count in fv.counts.items()
        if count != 0
    ]
    return rank_scores(pred.predicted, scored, CONTRIBUTION, top_k)


def rank_instance_knn_margin(
    model: VectorModel, fv: FeatureVector, top_k: int | None = None
) -> RankedFactors:
    """Nearest-hit / nearest-miss coordinate margins for a kNN model."""
    if not isinstance(model, VectorModel) or model.kind != "knn":
        raise KindMismatch("knn margin ranking needs a knn model")
    pred = predict_vector(model, fv)
    Xs = np.asarray(model.parameters["X"])
    ys = np.asarray(model.parameters["y"])
    x = fv.dense(len(model.vocabulary))
    hit_mask = ys == pred.predicted_index
    if not hit_mask.any() or hit_mask.all():
        raise SingleClassStore("need stored points both of and outside the predicted class")
    d = np.sqrt(np.square(Xs - x).sum(axis=1))

    def nearest(mask):
        cand = np.flatnonzero(mask)
        return Xs[cand[np.argmin(d[cand])]]

    hit = nearest(hit_mask)
    miss = nearest(~hit_mask)
    scored = [
        (model.vocabulary[j], float(abs(x[j] - miss[j]) - abs(x[j] - hit[j])))
        for j in range(len(model.vocabulary))
    ]
    return rank_scores(pred.predicted, scored, KNN_MARGIN, top_k)


# -- global rankers ---------------------------------------------------------------

def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def class_entropy(corpus: LabeledCorpus) -> float:
    """Entropy (bits) of the user-level class distribution."""
    labels = [corpus.user_label(u) for u in corpus.users]
    counts = np.asarray(
        [labels.count(c) for c in corpus.schema.classes], dtype=float
    )
    return _entropy(counts)


def info_gain_scores(corpus: LabeledCorpus, k_min: int = 0) -> list[tuple[str, float]]:
    """H(class) - H(class | feature presence), computed over users.

    Features visited by fewer than ``k_min`` distinct users are skipped.
    """
    users = corpus.users
    labels = {u: corpus.user_label(u) for u in users}
    class_idx = {c: i for i, c in enumerate(corpus.schema.classes)}
    m = corpus.schema.m
    base_counts = np.zeros(m)
    for u in users:
        base_counts[class_idx[labels[u]]] += 1
    h_class = _entropy(base_counts)

    presence: dict[str, set[str]] = {fid: set() for fid in corpus.vocabulary}
    for r in corpus.records:
        presence[r.checkin.feature_id(corpus.granularity)].add(r.checkin.pseudonym)

    n = len(users)
    out = []
    for fid in corpus.vocabulary:
        present_users = presence[fid]
        if k_min > 0 and len(present_users) < k_min:
            continue
        pc = np.zeros(m)
        for u in present_users:
            pc[class_idx[labels[u]]] += 1
        ac = base_counts - pc
        np_, na = pc.sum(), ac.sum()
        h_cond = (np_ * _entropy(pc) + na * _entropy(ac)) / n
        out.append((fid, h_class - h_cond))
    return out


def rank_global(
    model,
    corpus: LabeledCorpus | None = None,
    top_k: int | None = None,
    method: str | None = None,
) -> dict[str, RankedFactors]:
    """Per-class global feature relevance.

    MNB defaults to log-likelihood discriminativeness against the best
    competing class; ``method=INFO_GAIN`` switches to corpus-based information
    gain (one shared ranking). Suppressed cells never appear.
    """
    if method in EXTENSION_RANKERS:
        return EXTENSION_RANKERS[method](model, corpus, top_k)

    classes = model.schema.classes
    if isinstance(model, MnbModel):
        if method == INFO_GAIN:
            if corpus is None:
                raise MissingCorpus("info_gain needs the training corpus")
            shared = rank_scores(
                None, info_gain_scores(corpus, model.k_min), INFO_GAIN, top_k
            )
            return {c: shared for c in classes}
        out = {}
        ll = model.log_likelihoods
        for ci, c in enumerate(classes):
            others = [i for i in range(len(classes)) if i != ci]
            if others:
                competitor = ll[others].max(axis=0)
            else:
                competitor = np.zeros(ll.shape[1])
            scored = [
                (fid, float(ll[ci, j] - competitor[j]))
                for j, fid in enumerate(model.vocabulary)
                if not model.is_suppressed(fid, c)
            ]
            out[c] = rank_scores(c, scored, LIKELIHOOD, top_k)
        return out

    if not isinstance(model, VectorModel):
        raise KindMismatch(f"no global ranking for {type(model).__name__}")

    if model.kind == "logistic_regression":
        W = np.asarray(model.parameters["coef"])
        return {
            c: rank_scores(
                c,
                [(fid, float(abs(W[ci, j]))) for j, fid in enumerate(model.vocabulary)],
                COEFFICIENT,
                top_k,
            )
            for ci, c in enumerate(classes)
        }
    if model.kind == "linear_svm":
        out = {}
        for ci, c in enumerate(classes):
            agg = np.zeros(len(model.vocabulary))
            for pair in model.parameters["pairs"]:
                if ci in pair["classes"]:
                    agg = np.maximum(agg, np.abs(np.asarray(pair["w"])))
            out[c] = rank_scores(
                c,
                [(fid, float(agg[j])) for j, fid in enumerate(model.vocabulary)],
                SVM_WEIGHT,
                top_k,
            )
        return out
    if model.kind == "decision_tree":
        imp = tree_importances(
            model.parameters["nodes"],
            len(model.vocabulary),
            model.parameters["total_samples"],
        )
    elif model.kind == "random_forest":
        imp = np.zeros(len(model.vocabulary))
        for nodes in model.parameters["trees"]:
            imp += tree_importances(
                nodes, len(model.vocabulary), model.parameters["total_samples"]
            )
        imp /= len(model.parameters["trees"])
    else:
        raise KindMismatch(f"no global ranking for kind {model.kind!r}")
    shared = rank_scores(
        None,
        [(fid, float(imp[j])) for j, fid in enumerate(model.vocabulary)],
        GINI_IMPORTANCE,
        top_k,
    )
    return {c: shared for c in classes}
