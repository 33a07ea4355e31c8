"""Privacy-risk advisor for location check-in traces.

Infers personal attributes (or user identity) from check-in traces, explains
each inference with model-specific feature rankings, quantifies the privacy
risk of sharing, and obfuscates locations with planar-Laplace noise.
"""

from .errors import AdvisorError, DataError, EngineError
from .explain import (
    HowExplanation,
    HowToPlan,
    HowToTarget,
    RiskAssessment,
    RiskThresholds,
    TraceEdit,
    WhatIfResult,
    WhyExplanation,
    assess_risk,
    enforce_privacy,
    explain_how,
    explain_why,
    how_to,
    render_explanation,
    what_if,
)
from .mnb import (
    MnbModel,
    Prediction,
    identify_user,
    predict_mnb,
    train_identification,
    train_mnb,
)
from .privacy import (
    ObfuscationParams,
    Pseudonym,
    obfuscate_trace,
    planar_laplace_sample,
    pseudonymize,
)
from .ranking import (
    FeatureScore,
    RankedFactors,
    rank_global,
    rank_instance_contribution,
    rank_instance_knn_margin,
    rank_instance_likelihood,
    rank_instance_occlusion,
)
from .trace import (
    AttributeSchema,
    CheckIn,
    FeatureVector,
    LabeledCheckIn,
    LabeledCorpus,
    SynthConfig,
    Trace,
    attach_labels,
    parse_checkin_tsv,
    synth_corpus,
    to_feature_vector,
)
from .vectors import VectorModel, VectorParams, predict_any, predict_vector, train_vector_classifier

__version__ = "0.1.0"
