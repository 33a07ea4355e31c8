"""Vector classifiers over per-user bag-of-locations vectors.

Each user contributes one training point: the count vector of their
check-ins, labeled with their class. Five kinds are supported:
logistic_regression, linear_svm (one-vs-one pairs), decision_tree,
random_forest, knn. Training is deterministic given (corpus, params, seed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BadParams, DegenerateFit, EmptyCorpus, VocabularyMismatch
from .mnb import MnbModel, Prediction, prediction_from_log_scores, prediction_from_probabilities, predict_mnb
from .trace import AttributeSchema, FeatureVector, LabeledCorpus, Trace, per_user_vectors, to_feature_vector

KINDS = ("logistic_regression", "linear_svm", "decision_tree", "random_forest", "knn")


@dataclass(frozen=True)
class VectorParams:
    """Shared training configuration; kind-specific fields are ignored by
    kinds that do not use them."""

    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    max_depth: int = 4
    n_trees: int = 10
    k: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1:
            raise BadParams("learning_rate must be positive and epochs >= 1")
        if self.l2 < 0 or self.max_depth < 1 or self.n_trees < 1 or self.k < 1:
            raise BadParams("l2 >= 0, max_depth/n_trees/k >= 1 required")


@dataclass(frozen=True)
class VectorModel:
    kind: str
    schema: AttributeSchema
    vocabulary: tuple[str, ...]
    granularity: str
    params: VectorParams
    parameters: dict

    suppressed: frozenset = frozenset()

    @property
    def is_identification(self) -> bool:
        return False


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _fit_logistic(X: np.ndarray, y: np.ndarray, m: int, p: VectorParams) -> dict:
    n, v = X.shape
    W = np.zeros((m, v))
    b = np.zeros(m)
    Y = np.zeros((n, m))
    Y[np.arange(n), y] = 1.0
    for _ in range(p.epochs):
        probs = _softmax_rows(X @ W.T + b)
        G = (probs - Y) / n
        W -= p.learning_rate * (G.T @ X + p.l2 * W)
        b -= p.learning_rate * G.sum(axis=0)
    return {"coef": W.tolist(), "intercept": b.tolist()}


def _fit_svm_pairs(X: np.ndarray, y: np.ndarray, m: int, p: VectorParams) -> dict:
    """One weight vector per class pair, hinge loss subgradient descent."""
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            mask = (y == i) | (y == j)
            Xp = X[mask]
            yp = np.where(y[mask] == i, 1.0, -1.0)
            w = np.zeros(X.shape[1])
            b = 0.0
            if len(Xp):
                for _ in range(p.epochs):
                    margins = yp * (Xp @ w + b)
                    viol = margins < 1.0
                    gw = -(yp[viol, None] * Xp[viol]).sum(axis=0) / len(Xp) + 2 * p.l2 * w
                    gb = -yp[viol].sum() / len(Xp)
                    w -= p.learning_rate * gw
                    b -= p.learning_rate * gb
            pairs.append({"classes": [i, j], "w": w.tolist(), "b": float(b)})
    return {"pairs": pairs}


# -- decision tree -------------------------------------------------------------

def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.square(p).sum())


def _best_split(X: np.ndarray, y: np.ndarray, idx: np.ndarray, m: int,
                feature_ids: np.ndarray):
    """Exhaustive search over candidate thresholds; first best wins so the
    result is deterministic."""
    parent_counts = np.bincount(y[idx], minlength=m)
    parent_gini = _gini(parent_counts)
    n = len(idx)
    best = None  # (decrease, feature, threshold, left_idx, right_idx)
    for f in feature_ids:
        col = X[idx, f]
        values = np.unique(col)
        if len(values) < 2:
            continue
        for t in (values[:-1] + values[1:]) / 2.0:
            left = idx[col <= t]
            right = idx[col > t]
            lc = np.bincount(y[left], minlength=m)
            rc = np.bincount(y[right], minlength=m)
            child = (len(left) * _gini(lc) + len(right) * _gini(rc)) / n
            decrease = parent_gini - child
            if decrease > 1e-12 and (best is None or decrease > best[0] + 1e-12):
                best = (float(decrease), int(f), float(t), left, right)
    return best


def _grow_tree(X, y, idx, m, depth, max_depth, nodes, rng=None, n_sub=None):
    counts = np.bincount(y[idx], minlength=m)
    node = {
        "feature": None,
        "threshold": None,
        "left": -1,
        "right": -1,
        "impurity_decrease": 0.0,
        "samples": int(len(idx)),
        "class_counts": [int(c) for c in counts],
    }
    nodes.append(node)
    me = len(nodes) - 1
    if depth >= max_depth or len(idx) < 2 or _gini(counts) == 0.0:
        return me
    if rng is not None and n_sub is not None and n_sub < X.shape[1]:
        feats = np.sort(rng.choice(X.shape[1], size=n_sub, replace=False))
    else:
        feats = np.arange(X.shape[1])
    best = _best_split(X, y, idx, m, feats)
    if best is None:
        return me
    decrease, f, t, left, right = best
    node["feature"] = f
    node["threshold"] = t
    node["impurity_decrease"] = decrease
    node["left"] = _grow_tree(X, y, left, m, depth + 1, max_depth, nodes, rng, n_sub)
    node["right"] = _grow_tree(X, y, right, m, depth + 1, max_depth, nodes, rng, n_sub)
    return me


def _tree_posterior(nodes: list[dict], x: np.ndarray, m: int) -> np.ndarray:
    i = 0
    while nodes[i]["feature"] is not None:
        i = nodes[i]["left"] if x[nodes[i]["feature"]] <= nodes[i]["threshold"] else nodes[i]["right"]
    counts = np.asarray(nodes[i]["class_counts"], dtype=float)
    total = counts.sum()
    return counts / total if total > 0 else np.full(m, 1.0 / m)


def tree_importances(nodes: list[dict], v: int, total_samples: int) -> np.ndarray:
    """Gini importance: (node samples / total) * impurity decrease, summed
    per split feature."""
    out = np.zeros(v)
    for nd in nodes:
        if nd["feature"] is not None:
            out[nd["feature"]] += nd["samples"] / total_samples * nd["impurity_decrease"]
    return out


# -- training / prediction -------------------------------------------------------

def train_vector_classifier(
    kind: str, corpus: LabeledCorpus, params: VectorParams | None = None
) -> VectorModel:
    if kind not in KINDS:
        raise BadParams(f"unknown classifier kind {kind!r}")
    params = params or VectorParams()
    if not corpus.records:
        raise EmptyCorpus("cannot train on an empty corpus")
    users, X, y = per_user_vectors(corpus)
    m = corpus.schema.m
    if len(set(y.tolist())) < 2:
        raise DegenerateFit("all users share one class after aggregation")

    if kind == "logistic_regression":
        parameters = _fit_logistic(X, y, m, params)
    elif kind == "linear_svm":
        parameters = _fit_svm_pairs(X, y, m, params)
    elif kind == "decision_tree":
        nodes: list[dict] = []
        _grow_tree(X, y, np.arange(len(y)), m, 0, params.max_depth, nodes)
        parameters = {"nodes": nodes, "total_samples": len(y)}
    elif kind == "random_forest":
        rng = np.random.default_rng(params.seed)
        n_sub = max(1, int(math.isqrt(X.shape[1])))
        trees = []
        for _ in range(params.n_trees):
            boot = rng.integers(0, len(y), size=len(y))
            nodes = []
            _grow_tree(X[boot], y[boot], np.arange(len(boot)), m, 0,
                       params.max_depth, nodes, rng=rng, n_sub=n_sub)
            trees.append(nodes)
        parameters = {"trees": trees, "total_samples": len(y)}
    else:  # knn
        if params.k > len(users):
            raise BadParams(
                f"k={params.k} exceeds the {len(users)} stored training users"
            )
        parameters = {"X": X.tolist(), "y": [int(c) for c in y], "k": params.k}

    return VectorModel(
        kind=kind,
        schema=corpus.schema,
        vocabulary=corpus.vocabulary,
        granularity=corpus.granularity,
        params=params,
        parameters=parameters,
    )


def _check_vocab(model: VectorModel, fv: FeatureVector) -> np.ndarray:
    v = len(model.vocabulary)
    if any(j >= v for j in fv.counts):
        raise VocabularyMismatch("feature index outside the model vocabulary")
    return fv.dense(v)


def predict_vector(model: VectorModel, fv: FeatureVector) -> Prediction:
    x = _check_vocab(model, fv)
    classes = model.schema.classes
    m = len(classes)
    if model.kind == "logistic_regression":
        W = np.asarray(model.parameters["coef"])
        b = np.asarray(model.parameters["intercept"])
        return prediction_from_log_scores(classes, W @ x + b, fv.total)
    if model.kind == "linear_svm":
        logits = np.zeros(m)
        for pair in model.parameters["pairs"]:
            i, j = pair["classes"]
            margin = float(np.asarray(pair["w"]) @ x + pair["b"])
            logits[i] += margin
            logits[j] -= margin
        return prediction_from_log_scores(classes, logits, fv.total)
    if model.kind == "decision_tree":
        post = _tree_posterior(model.parameters["nodes"], x, m)
        return prediction_from_probabilities(classes, post, fv.total)
    if model.kind == "random_forest":
        post = np.zeros(m)
        for nodes in model.parameters["trees"]:
            post += _tree_posterior(nodes, x, m)
        return prediction_from_probabilities(classes, post / len(model.parameters["trees"]), fv.total)
    # knn: vote fractions of the k nearest stored users
    Xs = np.asarray(model.parameters["X"])
    ys = np.asarray(model.parameters["y"])
    d = np.sqrt(np.square(Xs - x).sum(axis=1))
    order = np.lexsort((np.arange(len(d)), d))[: model.parameters["k"]]
    votes = np.bincount(ys[order], minlength=m).astype(float)
    return prediction_from_probabilities(classes, votes / votes.sum(), fv.total)


def predict_any(model, trace: Trace) -> Prediction:
    """Score a trace with either model family."""
    if isinstance(model, MnbModel):
        return predict_mnb(model, trace)
    fv = to_feature_vector(trace, model.vocabulary, model.granularity)
    return predict_vector(model, fv)
