"""Shared application layer between the CLI and the HTTP service.

Both surfaces must emit byte-identical structured payloads for identical
inputs, so payload construction lives here and serialization goes through
``wire.dumps`` in exactly one place on each side.
"""
from __future__ import annotations

from .errors import BadParams
from . import wire
from .explain import (
    HowToTarget,
    RiskThresholds,
    TraceEdit,
    enforce_privacy,
    explain_how,
    explain_why,
    how_to,
    what_if,
)
from .mnb import MnbModel, train_identification, train_mnb
from .trace import LabeledCorpus, Trace
from .vectors import KINDS, VectorParams, predict_any, train_vector_classifier

MODES = ("why", "how", "whatif", "howto")


def train_model(
    corpus: LabeledCorpus,
    task: str = "attribute",
    kind: str = "mnb",
    alpha: float = 1.0,
    k_min: int = 0,
    params: VectorParams | None = None,
):
    if task == "identification":
        if kind != "mnb":
            raise BadParams("identification uses the mnb kind")
        return train_identification(corpus, alpha=alpha, k_min=k_min)
    if task != "attribute":
        raise BadParams(f"unknown task {task!r}")
    if kind == "mnb":
        return train_mnb(corpus, alpha=alpha, k_min=k_min)
    if kind in KINDS:
        return train_vector_classifier(kind, corpus, params)
    raise BadParams(f"unknown model kind {kind!r}")


def build_predict_payload(model, trace: Trace) -> dict:
    return wire.prediction_to_jsonable(predict_any(model, trace))


def build_explain_payload(
    model,
    trace: Trace | None,
    mode: str,
    *,
    top_k: int | None = 5,
    thresholds: RiskThresholds | None = None,
    edit: TraceEdit | None = None,
    target: HowToTarget | None = None,
    corpus: LabeledCorpus | None = None,
    method: str | None = None,
    known_pseudonyms: set[str] | None = None,
) -> dict:
    """Run one explanation mode and return its privacy-enforced wire dict."""
    if mode not in MODES:
        raise BadParams(f"unknown explain mode {mode!r}")
    querying = trace.pseudonym if trace is not None else None
    if mode == "why":
        expl = explain_why(model, trace, thresholds=thresholds, top_k=top_k)
    elif mode == "how":
        expl = explain_how(model, corpus=corpus, top_k=top_k, method=method)
    elif mode == "whatif":
        expl = what_if(model, trace, edit or TraceEdit(), thresholds=thresholds)
    else:
        expl = how_to(model, trace, target or HowToTarget(), thresholds=thresholds)
    expl = enforce_privacy(
        expl, model, known_pseudonyms=known_pseudonyms, querying_pseudonym=querying
    )
    return wire.explanation_to_jsonable(expl)
