"""Structured text wire format and snapshot serialization.

Everything the service, the CLI and the snapshot files exchange is JSON with
a fixed key order per document type (documented in docs/formats.md). Floats
serialize as Python's shortest round-trip decimals, so load(save(x)) is
bit-exact and byte-for-byte reproducible.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .explain import (
    HowExplanation,
    HowToPlan,
    HowToStep,
    RiskAssessment,
    RiskThresholds,
    TraceEdit,
    WhatIfResult,
    WhyExplanation,
)
from .mnb import MnbModel, Prediction
from .ranking import FeatureScore, RankedFactors
from .trace import (
    AttributeSchema,
    CheckIn,
    IdentitySchema,
    LabeledCheckIn,
    LabeledCorpus,
    Trace,
)
from .vectors import VectorModel, VectorParams

FORMAT_CORPUS = "corpus/1"
FORMAT_MODEL = "model/1"
FORMAT_TRACE = "trace/1"


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def dumps_line(obj) -> str:
    """Single-line form for append-only logs."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n"


def loads(text: str):
    return json.loads(text)


def save(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def load(path):
    return loads(Path(path).read_text(encoding="utf-8"))


# -- check-ins and traces ---------------------------------------------------------

def checkin_to_jsonable(c: CheckIn) -> dict:
    return {
        "checkin_id": c.checkin_id,
        "pseudonym": c.pseudonym,
        "venue_id": c.venue_id,
        "category_id": c.category_id,
        "lat": float(c.lat),
        "lon": float(c.lon),
        "timestamp": int(c.timestamp),
        "tz_offset": int(c.tz_offset),
    }


def checkin_from_jsonable(d: dict) -> CheckIn:
    return CheckIn(
        checkin_id=str(d["checkin_id"]),
        pseudonym=str(d.get("pseudonym", "")),
        venue_id=str(d.get("venue_id", "")),
        category_id=str(d.get("category_id", "")),
        lat=float(d["lat"]),
        lon=float(d["lon"]),
        timestamp=int(d["timestamp"]),
        tz_offset=int(d.get("tz_offset", 0)),
    )


def trace_to_jsonable(t: Trace) -> dict:
    return {
        "format": FORMAT_TRACE,
        "pseudonym": t.pseudonym,
        "checkins": [checkin_to_jsonable(c) for c in t.checkins],
    }


def trace_from_jsonable(d: dict) -> Trace:
    return Trace(
        checkins=tuple(checkin_from_jsonable(c) for c in d.get("checkins", [])),
        pseudonym=d.get("pseudonym"),
    )


# -- schema / corpus -----------------------------------------------------------------

def schema_to_jsonable(s: AttributeSchema) -> dict:
    return {
        "name": s.name,
        "classes": list(s.classes),
        "identity": isinstance(s, IdentitySchema),
    }


def schema_from_jsonable(d: dict) -> AttributeSchema:
    cls = IdentitySchema if d.get("identity") else AttributeSchema
    return cls(name=str(d["name"]), classes=tuple(d["classes"]))


def corpus_to_jsonable(corpus: LabeledCorpus) -> dict:
    return {
        "format": FORMAT_CORPUS,
        "schema": schema_to_jsonable(corpus.schema),
        "granularity": corpus.granularity,
        "vocabulary": list(corpus.vocabulary),
        "records": [
            {"label": r.label, **checkin_to_jsonable(r.checkin)}
            for r in corpus.records
        ],
    }


def corpus_from_jsonable(d: dict) -> LabeledCorpus:
    records = tuple(
        LabeledCheckIn(checkin=checkin_from_jsonable(r), label=str(r["label"]))
        for r in d["records"]
    )
    return LabeledCorpus(
        schema=schema_from_jsonable(d["schema"]),
        records=records,
        vocabulary=tuple(d["vocabulary"]),
        granularity=d.get("granularity", "venue"),
    )


def save_corpus(corpus: LabeledCorpus, path) -> None:
    save(corpus_to_jsonable(corpus), path)


def load_corpus(path) -> LabeledCorpus:
    return corpus_from_jsonable(load(path))


# -- models -----------------------------------------------------------------------------

def model_to_jsonable(model) -> dict:
    if isinstance(model, MnbModel):
        return {
            "format": FORMAT_MODEL,
            "kind": "mnb",
            "schema": schema_to_jsonable(model.schema),
            "granularity": model.granularity,
            "vocabulary": list(model.vocabulary),
            "alpha": float(model.alpha),
            "k_min": int(model.k_min),
            "suppressed": sorted([list(cell) for cell in model.suppressed]),
            "trained_on": int(model.trained_on),
            "log_priors": [float(x) for x in model.log_priors],
            "log_likelihoods": [[float(x) for x in row] for row in model.log_likelihoods],
            "log_floor": [float(x) for x in model.log_floor],
        }
    if isinstance(model, VectorModel):
        p = model.params
        return {
            "format": FORMAT_MODEL,
            "kind": model.kind,
            "schema": schema_to_jsonable(model.schema),
            "granularity": model.granularity,
            "vocabulary": list(model.vocabulary),
            "params": {
                "learning_rate": p.learning_rate,
                "epochs": p.epochs,
                "l2": p.l2,
                "max_depth": p.max_depth,
                "n_trees": p.n_trees,
                "k": p.k,
                "seed": p.seed,
            },
            "parameters": model.parameters,
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_jsonable(d: dict):
    kind = d["kind"]
    schema = schema_from_jsonable(d["schema"])
    if kind == "mnb":
        return MnbModel(
            schema=schema,
            vocabulary=tuple(d["vocabulary"]),
            granularity=d.get("granularity", "venue"),
            log_priors=np.asarray(d["log_priors"], dtype=float),
            log_likelihoods=np.asarray(d["log_likelihoods"], dtype=float),
            log_floor=np.asarray(d["log_floor"], dtype=float),
            alpha=float(d["alpha"]),
            k_min=int(d["k_min"]),
            suppressed=frozenset((f, c) for f, c in d["suppressed"]),
            trained_on=int(d["trained_on"]),
        )
    return VectorModel(
        kind=kind,
        schema=schema,
        vocabulary=tuple(d["vocabulary"]),
        granularity=d.get("granularity", "venue"),
        params=VectorParams(**d["params"]),
        parameters=d["parameters"],
    )


def save_model(model, path) -> None:
    save(model_to_jsonable(model), path)


def load_model(path):
    return model_from_jsonable(load(path))


# -- predictions / explanations ------------------------------------------------------------

def prediction_to_jsonable(p: Prediction) -> dict:
    return {
        "classes": list(p.classes),
        "scores": [float(s) for s in p.scores],
        "posterior": [float(x) for x in p.posterior],
        "predicted": p.predicted,
        "n_used": int(p.n_used),
    }


def prediction_from_jsonable(d: dict) -> Prediction:
    return Prediction(
        classes=tuple(d["classes"]),
        scores=tuple(float(s) for s in d["scores"]),
        posterior=tuple(float(x) for x in d["posterior"]),
        predicted=str(d["predicted"]),
        n_used=int(d["n_used"]),
    )


def thresholds_to_jsonable(t: RiskThresholds) -> dict:
    return {"t_low": float(t.t_low), "t_high": float(t.t_high)}


def thresholds_from_jsonable(d: dict) -> RiskThresholds:
    return RiskThresholds(t_low=float(d["t_low"]), t_high=float(d["t_high"]))


def risk_to_jsonable(r: RiskAssessment) -> dict:
    return {
        "posterior_top": float(r.posterior_top),
        "prior_top": float(r.prior_top),
        "lift": float(r.lift),
        "band": r.band,
        "thresholds": thresholds_to_jsonable(r.thresholds),
    }


def risk_from_jsonable(d: dict) -> RiskAssessment:
    return RiskAssessment(
        posterior_top=float(d["posterior_top"]),
        prior_top=float(d["prior_top"]),
        lift=float(d["lift"]),
        band=str(d["band"]),
        thresholds=thresholds_from_jsonable(d["thresholds"]),
    )


def factors_to_jsonable(f: RankedFactors) -> dict:
    return {
        "target_class": f.target_class,
        "truncated_at": f.truncated_at,
        "entries": [
            {"feature_id": e.feature_id, "score": float(e.score), "method": e.method}
            for e in f.entries
        ],
    }


def factors_from_jsonable(d: dict) -> RankedFactors:
    return RankedFactors(
        target_class=d.get("target_class"),
        entries=tuple(
            FeatureScore(str(e["feature_id"]), float(e["score"]), str(e["method"]))
            for e in d["entries"]
        ),
        truncated_at=d.get("truncated_at"),
    )


def explanation_to_jsonable(expl) -> dict:
    if isinstance(expl, WhyExplanation):
        return {
            "mode": "why",
            "predicted": expl.predicted,
            "risk": risk_to_jsonable(expl.risk),
            "factors": factors_to_jsonable(expl.factors),
            "occlusion_factors": factors_to_jsonable(expl.occlusion_factors),
            "per_class_log_products": {
                k: float(v) for k, v in expl.per_class_log_products.items()
            },
            "prior_of_predicted": float(expl.prior_of_predicted),
            "recommendation": expl.recommendation,
            "trace_features": list(expl.trace_features),
            "audit_removed": int(expl.audit_removed),
        }
    if isinstance(expl, HowExplanation):
        return {
            "mode": "how",
            "kind": expl.kind,
            "per_class_top_features": {
                c: factors_to_jsonable(f) for c, f in expl.per_class_top_features.items()
            },
            "class_priors": {k: float(v) for k, v in expl.class_priors.items()},
            "vocabulary_size": int(expl.vocabulary_size),
            "training_size": int(expl.training_size),
            "suppressed_cells": int(expl.suppressed_cells),
            "meta": dict(expl.meta),
            "audit_removed": int(expl.audit_removed),
        }
    if isinstance(expl, WhatIfResult):
        return {
            "mode": "whatif",
            "edit": {
                "description": expl.edit.describe(),
                "remove": list(expl.edit.remove),
                "add": [checkin_to_jsonable(c) for c in expl.edit.add],
            },
            "before": prediction_to_jsonable(expl.before),
            "after": prediction_to_jsonable(expl.after),
            "risk_before": risk_to_jsonable(expl.risk_before),
            "risk_after": risk_to_jsonable(expl.risk_after),
        }
    if isinstance(expl, HowToPlan):
        return {
            "mode": "howto",
            "target": expl.target,
            "achieved": bool(expl.achieved),
            "steps": [
                {
                    "removed_checkin_id": s.removed_checkin_id,
                    "removed_feature": s.removed_feature,
                    "predicted_after": s.predicted_after,
                    "posterior_top_after": float(s.posterior_top_after),
                    "band_after": s.band_after,
                }
                for s in expl.steps
            ],
            "final_posterior": [float(x) for x in expl.final_posterior],
        }
    raise TypeError(f"cannot serialize {type(expl).__name__}")


def explanation_from_jsonable(d: dict):
    mode = d["mode"]
    if mode == "why":
        return WhyExplanation(
            predicted=str(d["predicted"]),
            risk=risk_from_jsonable(d["risk"]),
            factors=factors_from_jsonable(d["factors"]),
            occlusion_factors=factors_from_jsonable(d["occlusion_factors"]),
            per_class_log_products={
                k: float(v) for k, v in d["per_class_log_products"].items()
            },
            prior_of_predicted=float(d["prior_of_predicted"]),
            recommendation=str(d["recommendation"]),
            trace_features=tuple(d.get("trace_features", ())),
            audit_removed=int(d.get("audit_removed", 0)),
        )
    if mode == "how":
        return HowExplanation(
            kind=str(d["kind"]),
            per_class_top_features={
                c: factors_from_jsonable(f)
                for c, f in d["per_class_top_features"].items()
            },
            class_priors={k: float(v) for k, v in d["class_priors"].items()},
            vocabulary_size=int(d["vocabulary_size"]),
            training_size=int(d["training_size"]),
            suppressed_cells=int(d["suppressed_cells"]),
            meta=dict(d.get("meta", {})),
            audit_removed=int(d.get("audit_removed", 0)),
        )
    if mode == "whatif":
        return WhatIfResult(
            edit=TraceEdit(
                add=tuple(checkin_from_jsonable(c) for c in d["edit"]["add"]),
                remove=tuple(d["edit"]["remove"]),
            ),
            before=prediction_from_jsonable(d["before"]),
            after=prediction_from_jsonable(d["after"]),
            risk_before=risk_from_jsonable(d["risk_before"]),
            risk_after=risk_from_jsonable(d["risk_after"]),
        )
    if mode == "howto":
        return HowToPlan(
            target=str(d["target"]),
            steps=tuple(
                HowToStep(
                    removed_checkin_id=str(s["removed_checkin_id"]),
                    removed_feature=str(s["removed_feature"]),
                    predicted_after=str(s["predicted_after"]),
                    posterior_top_after=float(s["posterior_top_after"]),
                    band_after=str(s["band_after"]),
                )
                for s in d["steps"]
            ),
            achieved=bool(d["achieved"]),
            final_posterior=tuple(float(x) for x in d["final_posterior"]),
        )
    raise ValueError(f"unknown explanation mode {mode!r}")
