"""Why / How / What-If / How-To explanations with privacy enforcement.

Every payload built here is safe to hand to an end user after
``enforce_privacy``: it references only the query trace's own check-ins,
aggregate model statistics, and no statistic derived from a suppressed
(k_min) cell or a foreign pseudonym.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import BadThresholds, EmptyTrace, UnknownCheckIn
from .mnb import MnbModel, Prediction, predict_mnb
from .ranking import (
    ACCURACY_GAIN,
    RankedFactors,
    occlusion_gains,
    rank_global,
    rank_instance_likelihood,
    rank_instance_occlusion,
    rank_scores,
)
from .trace import CheckIn, Trace
from .vectors import VectorModel, predict_any

LOW, MEDIUM, HIGH = "low", "medium", "high"
BAND_ORDER = {LOW: 0, MEDIUM: 1, HIGH: 2}
SHARE, WITHHOLD = "share", "withhold"

DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class RiskThresholds:
    t_low: float = 0.55
    t_high: float = 0.85

    def __post_init__(self):
        if not (0.0 < self.t_low < self.t_high < 1.0):
            raise BadThresholds(
                f"need 0 < t_low < t_high < 1, got ({self.t_low}, {self.t_high})"
            )


@dataclass(frozen=True)
class RiskAssessment:
    posterior_top: float
    prior_top: float
    lift: float
    band: str
    thresholds: RiskThresholds


def assess_risk(
    prediction: Prediction, priors, thresholds: RiskThresholds | None = None
) -> RiskAssessment:
    """Band the posterior of the predicted class into low/medium/high."""
    thresholds = thresholds or RiskThresholds()
    top = prediction.posterior_top
    prior_top = float(priors[prediction.predicted_index])
    if top >= thresholds.t_high:
        band = HIGH
    elif top < thresholds.t_low:
        band = LOW
    else:
        band = MEDIUM
    return RiskAssessment(
        posterior_top=float(top),
        prior_top=prior_top,
        lift=float(top - prior_top),
        band=band,
        thresholds=thresholds,
    )


@dataclass(frozen=True)
class WhyExplanation:
    predicted: str
    risk: RiskAssessment
    factors: RankedFactors
    occlusion_factors: RankedFactors
    per_class_log_products: dict[str, float]
    prior_of_predicted: float
    recommendation: str
    trace_features: tuple[str, ...] = ()
    audit_removed: int = 0


@dataclass(frozen=True)
class HowExplanation:
    kind: str
    per_class_top_features: dict[str, RankedFactors]
    class_priors: dict[str, float]
    vocabulary_size: int
    training_size: int
    suppressed_cells: int
    meta: dict = field(default_factory=dict)
    audit_removed: int = 0


@dataclass(frozen=True)
class TraceEdit:
    add: tuple[CheckIn, ...] = ()
    remove: tuple[str, ...] = ()  # checkin ids

    def describe(self) -> str:
        parts = []
        if self.remove:
            parts.append("remove " + ", ".join(self.remove))
        if self.add:
            parts.append(f"add {len(self.add)} check-in(s)")
        return "; ".join(parts) if parts else "no change"


@dataclass(frozen=True)
class WhatIfResult:
    edit: TraceEdit
    before: Prediction
    after: Prediction
    risk_before: RiskAssessment
    risk_after: RiskAssessment


@dataclass(frozen=True)
class HowToTarget:
    kind: str = "flip"          # "flip" or "band"
    band: str = LOW

    def __post_init__(self):
        if self.kind not in ("flip", "band") or self.band not in BAND_ORDER:
            raise ValueError(f"bad how-to target ({self.kind}, {self.band})")

    def describe(self) -> str:
        return "flip predicted class" if self.kind == "flip" else f"band <= {self.band}"


@dataclass(frozen=True)
class HowToStep:
    removed_checkin_id: str
    removed_feature: str
    predicted_after: str
    posterior_top_after: float
    band_after: str


@dataclass(frozen=True)
class HowToPlan:
    target: str
    steps: tuple[HowToStep, ...]
    achieved: bool
    final_posterior: tuple[float, ...]


# -- the four explanation kinds ----------------------------------------------------

def explain_why(
    model: MnbModel,
    trace: Trace,
    thresholds: RiskThresholds | None = None,
    top_k: int | None = DEFAULT_TOP_K,
) -> WhyExplanation:
    """Instance explanation: prediction, risk band, ranked factors, advice."""
    if trace.n == 0:
        raise EmptyTrace("why explanation needs a non-empty trace")
    pred = predict_mnb(model, trace)
    risk = assess_risk(pred, model.priors, thresholds)
    factors = rank_instance_likelihood(model, trace, pred.predicted, top_k)
    occlusion = rank_instance_occlusion(model, trace, top_k)
    return WhyExplanation(
        predicted=pred.predicted,
        risk=risk,
        factors=factors,
        occlusion_factors=occlusion,
        per_class_log_products=dict(zip(pred.classes, pred.scores)),
        prior_of_predicted=float(model.priors[pred.predicted_index]),
        recommendation=WITHHOLD if risk.band == HIGH else SHARE,
        trace_features=trace.feature_ids(model.granularity),
    )


def explain_how(model, corpus=None, top_k: int | None = DEFAULT_TOP_K,
                method: str | None = None) -> HowExplanation:
    """Global explanation: top features per class plus aggregate statistics."""
    per_class = rank_global(model, corpus=corpus, top_k=top_k, method=method)
    if isinstance(model, MnbModel):
        priors = {c: float(p) for c, p in zip(model.schema.classes, model.priors)}
        trained_on = model.trained_on
        suppressed = len(model.suppressed)
    else:
        users = len(model.parameters.get("y", [])) or model.parameters.get("total_samples", 0)
        priors = {c: 0.0 for c in model.schema.classes}
        trained_on = int(users)
        suppressed = 0
    return HowExplanation(
        kind=getattr(model, "kind", "mnb"),
        per_class_top_features=per_class,
        class_priors=priors,
        vocabulary_size=len(model.vocabulary),
        training_size=trained_on,
        suppressed_cells=suppressed,
    )


def apply_edit(trace: Trace, edit: TraceEdit) -> Trace:
    present = {c.checkin_id for c in trace.checkins}
    for cid in edit.remove:
        if cid not in present:
            raise UnknownCheckIn(f"check-in {cid!r} not in trace")
    removed = set(edit.remove)
    kept = [c for c in trace.checkins if c.checkin_id not in removed]
    return Trace(checkins=tuple(kept) + tuple(edit.add), pseudonym=trace.pseudonym)


def what_if(
    model,
    trace: Trace,
    edit: TraceEdit,
    thresholds: RiskThresholds | None = None,
) -> WhatIfResult:
    """Recompute prediction and risk on the edited trace, from scratch."""
    before = predict_any(model, trace)
    after = predict_any(model, apply_edit(trace, edit))
    priors = model.priors if isinstance(model, MnbModel) else _uniform_priors(model)
    return WhatIfResult(
        edit=edit,
        before=before,
        after=after,
        risk_before=assess_risk(before, priors, thresholds),
        risk_after=assess_risk(after, priors, thresholds),
    )


def _uniform_priors(model):
    m = model.schema.m
    return [1.0 / m] * m


def _band_of(model, trace, thresholds) -> tuple[Prediction, str]:
    pred = predict_any(model, trace)
    priors = model.priors if isinstance(model, MnbModel) else _uniform_priors(model)
    return pred, assess_risk(pred, priors, thresholds).band


def how_to(
    model,
    trace: Trace,
    target: HowToTarget,
    thresholds: RiskThresholds | None = None,
) -> HowToPlan:
    """Greedy removal plan toward a flipped class or a lower risk band.

    Each step drops the check-in with the largest occlusion gain for the
    class currently predicted; ties resolve by feature id then position.
    """
    if trace.n == 0:
        raise EmptyTrace("how-to planning needs a non-empty trace")
    pred, band = _band_of(model, trace, thresholds)
    origin = pred.predicted

    def achieved(p: Prediction, b: str) -> bool:
        if target.kind == "flip":
            return p.predicted != origin
        return BAND_ORDER[b] <= BAND_ORDER[target.band]

    steps: list[HowToStep] = []
    current = trace
    while not achieved(pred, band) and current.n > 0:
        gains = occlusion_gains(model, current)
        gains.sort(key=lambda t: (-t[2], t[1], t[0]))
        idx, fid, _ = gains[0]
        removed = current.checkins[idx]
        current = Trace(
            checkins=current.checkins[:idx] + current.checkins[idx + 1:],
            pseudonym=current.pseudonym,
        )
        pred, band = _band_of(model, current, thresholds)
        steps.append(
            HowToStep(
                removed_checkin_id=removed.checkin_id,
                removed_feature=fid,
                predicted_after=pred.predicted,
                posterior_top_after=pred.posterior_top,
                band_after=band,
            )
        )
    return HowToPlan(
        target=target.describe(),
        steps=tuple(steps),
        achieved=achieved(pred, band),
        final_posterior=pred.posterior,
    )


# -- privacy enforcement --------------------------------------------------------------

def _clean_ranking(
    factors: RankedFactors,
    model,
    allowed_features: set[str] | None,
) -> tuple[RankedFactors, int]:
    """Drop suppressed-cell entries and entries referencing foreign data."""
    suppressed = getattr(model, "suppressed", frozenset())
    removed = 0
    kept = []
    classes = model.schema.classes
    for e in factors.entries:
        if factors.target_class is not None:
            bad_cell = (e.feature_id, factors.target_class) in suppressed
        else:
            bad_cell = any((e.feature_id, c) in suppressed for c in classes)
        foreign = allowed_features is not None and e.feature_id not in allowed_features
        if bad_cell or foreign:
            removed += 1
        else:
            kept.append(e)
    if removed == 0:
        return factors, 0
    return replace(factors, entries=tuple(kept)), removed


def _redact_identity_keys(
    mapping: dict, model, querying_pseudonym: str | None
) -> tuple[dict, int]:
    """For identification models, replace foreign pseudonym keys with stable
    rank placeholders; the querying user keeps their own pseudonym."""
    if not getattr(model, "is_identification", False):
        return dict(mapping), 0
    out = {}
    removed = 0
    other = 0
    for key, value in mapping.items():
        if querying_pseudonym is not None and key == querying_pseudonym:
            out[key] = value
        else:
            other += 1
            out[f"user-{other:03d}"] = value
            removed += 1
    return out, removed


def enforce_privacy(
    payload,
    model,
    known_pseudonyms: set[str] | None = None,
    querying_pseudonym: str | None = None,
):
    """Verify and strip: no foreign pseudonyms, no check-ins outside the
    query trace, no suppressed-cell statistics. Sanitizes rather than fails;
    the number of removed items lands in ``audit_removed``.
    """
    known = set(known_pseudonyms or ())
    if getattr(model, "is_identification", False):
        known |= set(model.schema.classes)
    known.discard(querying_pseudonym)

    if isinstance(payload, WhyExplanation):
        audit = 0
        allowed = set(payload.trace_features)
        factors, r1 = _clean_ranking(payload.factors, model, allowed)
        occl, r2 = _clean_ranking(payload.occlusion_factors, model, allowed)
        audit += r1 + r2
        products, r3 = _redact_identity_keys(
            payload.per_class_log_products, model, querying_pseudonym
        )
        audit += r3
        predicted = payload.predicted
        if getattr(model, "is_identification", False) and predicted != querying_pseudonym:
            # map onto the placeholder assigned positionally by the redaction
            old_keys = list(payload.per_class_log_products)
            predicted = list(products)[old_keys.index(predicted)]
            audit += 1
        return replace(
            payload,
            factors=factors,
            occlusion_factors=occl,
            per_class_log_products=products,
            predicted=predicted,
            audit_removed=payload.audit_removed + audit,
        )

    if isinstance(payload, HowExplanation):
        audit = 0
        cleaned = {}
        for cls, ranking in payload.per_class_top_features.items():
            new_ranking, r = _clean_ranking(ranking, model, None)
            cleaned[cls] = new_ranking
            audit += r
        cleaned, r = _redact_identity_keys(cleaned, model, querying_pseudonym)
        audit += r
        priors, r = _redact_identity_keys(payload.class_priors, model, querying_pseudonym)
        audit += r
        meta = {}
        for key, value in payload.meta.items():
            if key in known or (isinstance(value, str) and value in known):
                audit += 1
                continue
            meta[key] = value
        return replace(
            payload,
            per_class_top_features=cleaned,
            class_priors=priors,
            meta=meta,
            audit_removed=payload.audit_removed + audit,
        )

    return payload


# -- rendering --------------------------------------------------------------------------

_BAND_BANNER = {LOW: "Low privacy risk", MEDIUM: "Medium privacy risk", HIGH: "High privacy risk"}


def render_text(expl) -> str:
    if isinstance(expl, WhyExplanation):
        lines = [_BAND_BANNER[expl.risk.band], ""]
        lines.append(
            f"Inferred personal information: {expl.predicted} "
            f"(posterior {expl.risk.posterior_top:.4f})"
        )
        if expl.factors.entries:
            lines.append("")
            lines.append("Per-factor likelihood (ranked in descending order):")
            for e in expl.factors.entries:
                lines.append(f"  - Check-in {e.feature_id}: likelihood {e.score:.2f}")
        lines.append("")
        lines.append(f"Likelihood products (prior of {expl.predicted}: {expl.prior_of_predicted:.2f}):")
        import math
        for cls, logp in expl.per_class_log_products.items():
            lines.append(f"  - {cls}: {math.exp(logp):.3e}")
        lines.append("")
        lines.append(f"Recommendation: {expl.recommendation}")
        return "\n".join(lines) + "\n"

    if isinstance(expl, HowExplanation):
        lines = [f"Model: {expl.kind}"]
        lines.append(
            f"Vocabulary {expl.vocabulary_size} features, trained on "
            f"{expl.training_size} records, {expl.suppressed_cells} suppressed cells"
        )
        for cls, ranking in expl.per_class_top_features.items():
            lines.append(f"Top features for {cls}:")
            for e in ranking.entries:
                lines.append(f"  - {e.feature_id}: {e.score:.4f} ({e.method})")
        return "\n".join(lines) + "\n"

    if isinstance(expl, WhatIfResult):
        return (
            f"Edit: {expl.edit.describe()}\n"
            f"Before: {expl.before.predicted} "
            f"(posterior {expl.before.posterior_top:.4f}, band {expl.risk_before.band})\n"
            f"After:  {expl.after.predicted} "
            f"(posterior {expl.after.posterior_top:.4f}, band {expl.risk_after.band})\n"
        )

    if isinstance(expl, HowToPlan):
        lines = [f"Target: {expl.target}", f"Achieved: {'yes' if expl.achieved else 'no'}"]
        for i, s in enumerate(expl.steps, start=1):
            lines.append(
                f"  {i}. drop check-in at {s.removed_feature}: "
                f"{s.predicted_after} posterior {s.posterior_top_after:.4f}, band {s.band_after}"
            )
        return "\n".join(lines) + "\n"

    raise TypeError(f"cannot render {type(expl).__name__}")


def render_explanation(expl, format: str = "text") -> str:
    """Figure-style text layout or the structured wire document."""
    if format == "text":
        return render_text(expl)
    if format == "structured":
        from . import wire

        return wire.dumps(wire.explanation_to_jsonable(expl))
    raise ValueError(f"unknown format {format!r}")
