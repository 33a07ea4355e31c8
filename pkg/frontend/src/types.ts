/** Wire payload types for the advisor service (see docs/formats.md). */

export type Band = 'low' | 'medium' | 'high';
export type Recommendation = 'share' | 'withhold';

export interface WireCheckIn {
    checkin_id: string;
    pseudonym: string;
    venue_id: string;
    category_id: string;
    lat: number;
    lon: number;
    timestamp: number;
    tz_offset: number;
}

export interface TraceDoc {
    format?: string;
    pseudonym: string | null;
    checkins: WireCheckIn[];
}

export interface WirePrediction {
    classes: string[];
    scores: number[];
    posterior: number[];
    predicted: string;
    n_used: number;
}

export interface WireThresholds {
    t_low: number;
    t_high: number;
}

export interface WireRisk {
    posterior_top: number;
    prior_top: number;
    lift: number;
    band: Band;
    thresholds: WireThresholds;
}

export interface WireFactorEntry {
    feature_id: string;
    score: number;
    method: string;
}

export interface WireFactors {
    target_class: string | null;
    truncated_at: number | null;
    entries: WireFactorEntry[];
}

export interface WhyPayload {
    mode: 'why';
    predicted: string;
    risk: WireRisk;
    factors: WireFactors;
    occlusion_factors: WireFactors;
    per_class_log_products: Record<string, number>;
    prior_of_predicted: number;
    recommendation: Recommendation;
    trace_features: string[];
    audit_removed: number;
}

export interface WhatIfPayload {
    mode: 'whatif';
    edit: { description: string; remove: string[]; add: WireCheckIn[] };
    before: WirePrediction;
    after: WirePrediction;
    risk_before: WireRisk;
    risk_after: WireRisk;
}

export interface HowToStepPayload {
    removed_checkin_id: string;
    removed_feature: string;
    predicted_after: string;
    posterior_top_after: number;
    band_after: Band;
}

export interface HowToPayload {
    mode: 'howto';
    target: string;
    achieved: boolean;
    steps: HowToStepPayload[];
    final_posterior: number[];
}

export interface ObfuscatedPoint {
    lat: number;
    lon: number;
    venue_id?: string;
}

/** Risk numbers currently shown by the gauge; always verbatim service values. */
export interface GaugeValues {
    posteriorTop: number;
    band: Band;
    predicted: string;
}

export interface DecisionEntry {
    kind: Recommendation;
    at: number;
    enabledCount: number;
    gauge: GaugeValues | null;
    synced: boolean;
}
