/** Presentation helpers: band colors, gauge text, factor bars, plan lists.
 *
 * Pure string/value mapping only; the numbers rendered here must arrive
 * verbatim from service payloads.
 */
import { Band, HowToPayload, Recommendation, WireFactorEntry } from './types.js';

export const BAND_COLORS: Record<Band, string> = {
    low: '#2e7d32',     // green
    medium: '#f9a825',  // amber
    high: '#c62828',    // red
};

export const BAND_LABELS: Record<Band, string> = {
    low: 'Low privacy risk',
    medium: 'Medium privacy risk',
    high: 'High privacy risk',
};

export function bandColor(band: Band): string {
    return BAND_COLORS[band];
}

/** Mirrors the service policy: withhold exactly when the band is high. */
export function recommendationForBand(band: Band): Recommendation {
    return band === 'high' ? 'withhold' : 'share';
}

export function gaugeText(posteriorTop: number, band: Band): string {
    return `${BAND_LABELS[band]} (${posteriorTop.toFixed(3)})`;
}

export interface FactorBar {
    featureId: string;
    score: number;
    width: number; // 0..1 of the widest bar
}

export function factorBars(entries: WireFactorEntry[], topK = 5): FactorBar[] {
    const shown = entries.slice(0, topK);
    const max = shown.reduce((m, e) => Math.max(m, Math.abs(e.score)), 0);
    return shown.map((e) => ({
        featureId: e.feature_id,
        score: e.score,
        width: max > 0 ? Math.abs(e.score) / max : 0,
    }));
}

export interface PlanItem {
    label: string;
    checkinId: string;
    bandAfter: Band;
}

export function planChecklist(plan: HowToPayload): PlanItem[] {
    return plan.steps.map((s, i) => ({
        label: `${i + 1}. avoid ${s.removed_feature} ` +
            `(risk becomes ${s.band_after}, ${s.posterior_top_after.toFixed(3)})`,
        checkinId: s.removed_checkin_id,
        bandAfter: s.band_after,
    }));
}

export function planSummary(plan: HowToPayload): string {
    if (plan.steps.length === 0) {
        return plan.achieved ? 'No action needed.' : 'No removals available.';
    }
    return plan.achieved
        ? `Target reachable in ${plan.steps.length} removal(s).`
        : 'Target not reachable by removals alone.';
}
