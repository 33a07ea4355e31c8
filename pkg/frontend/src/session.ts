/** Session state machine for the interactive advisor.
 *
 * The displayed risk always corresponds to the currently enabled subset of
 * check-ins: every toggle marks the gauge pending, issues a what-if request
 * for that subset, and only the newest in-flight request may update the
 * gauge. Numbers land in the state verbatim from service responses; this
 * module performs no probability arithmetic.
 */
import { AdvisorClient } from './api.js';
import {
    DecisionEntry,
    GaugeValues,
    HowToPayload,
    Recommendation,
    TraceDoc,
    WhyPayload,
    WireFactorEntry,
} from './types.js';

export interface SessionOptions {
    epsilon?: number;
    snap?: 'none' | 'nearest_known_venue';
    topK?: number;
}

export interface SessionState {
    trace: TraceDoc | null;
    enabled: boolean[];
    pending: boolean;
    stale: boolean;
    error: string | null;
    gauge: GaugeValues | null;
    explanation: WhyPayload | null;
    plan: HowToPayload | null;
    decisions: DecisionEntry[];
}

function emptyState(): SessionState {
    return {
        trace: null,
        enabled: [],
        pending: false,
        stale: false,
        error: null,
        gauge: null,
        explanation: null,
        plan: null,
        decisions: [],
    };
}

export function parseTraceDoc(text: string): TraceDoc {
    const doc = JSON.parse(text) as TraceDoc;
    if (!doc || !Array.isArray(doc.checkins)) {
        throw new Error('trace document needs a checkins array');
    }
    for (const c of doc.checkins) {
        if (typeof c.checkin_id !== 'string' || typeof c.lat !== 'number' || typeof c.lon !== 'number') {
            throw new Error('malformed check-in entry');
        }
    }
    return doc;
}

export class AdvisorSession {
    readonly state: SessionState = emptyState();
    private requestSeq = 0;
    private controller: AbortController | null = null;

    constructor(
        private readonly client: AdvisorClient,
        private readonly modelId: string,
        private readonly options: SessionOptions = {},
    ) {}

    get shareEnabled(): boolean {
        return this.enabledCount > 0 && !this.state.pending && this.state.gauge !== null;
    }

    get enabledCount(): number {
        return this.state.enabled.filter(Boolean).length;
    }

    private disabledIds(): string[] {
        const trace = this.state.trace;
        if (!trace) return [];
        return trace.checkins
            .filter((_, i) => !this.state.enabled[i])
            .map((c) => c.checkin_id);
    }

    private enabledCheckins() {
        const trace = this.state.trace;
        if (!trace) return [];
        return trace.checkins.filter((_, i) => this.state.enabled[i]);
    }

    /** Parse a pasted or uploaded trace document and fetch the initial risk. */
    async loadTrace(text: string): Promise<void> {
        let doc: TraceDoc;
        try {
            doc = parseTraceDoc(text);
        } catch (err) {
            this.state.error = `could not parse trace: ${(err as Error).message}`;
            return; // state otherwise unchanged
        }
        this.state.trace = doc;
        this.state.enabled = doc.checkins.map(() => true);
        this.state.error = null;
        this.state.explanation = null;
        this.state.plan = null;
        this.state.gauge = null;
        await this.refresh(true);
    }

    /** Flip one check-in and refresh the gauge for the new enabled subset. */
    async toggleCheckin(index: number): Promise<void> {
        if (!this.state.trace || index < 0 || index >= this.state.enabled.length) {
            throw new Error(`toggle index ${index} out of range`);
        }
        this.state.enabled[index] = !this.state.enabled[index];
        await this.refresh(false);
    }

    /** Re-query the service for the currently enabled subset. Newer calls
     * supersede older in-flight ones. */
    private async refresh(initial: boolean): Promise<void> {
        const trace = this.state.trace;
        if (!trace) return;
        const seq = ++this.requestSeq;
        this.controller?.abort();
        this.controller = typeof AbortController !== 'undefined' ? new AbortController() : null;
        const signal = this.controller?.signal;
        this.state.pending = true;
        try {
            if (initial && trace.checkins.length > 0) {
                const why = await this.client.explainWhy(
                    this.modelId, trace, this.options.topK ?? 5, signal,
                );
                if (seq !== this.requestSeq) return;
                this.state.explanation = why;
                this.state.gauge = {
                    posteriorTop: why.risk.posterior_top,
                    band: why.risk.band,
                    predicted: why.predicted,
                };
            } else {
                const res = await this.client.whatIf(
                    this.modelId, trace, this.disabledIds(), signal,
                );
                if (seq !== this.requestSeq) return;
                this.state.gauge = {
                    posteriorTop: res.risk_after.posterior_top,
                    band: res.risk_after.band,
                    predicted: res.after.predicted,
                };
            }
            this.state.stale = false;
            this.state.pending = false;
        } catch (err) {
            if (seq !== this.requestSeq) return; // superseded; ignore
            this.state.pending = false;
            this.state.stale = true; // keep last values, flag them
        }
    }

    /** Likelihood factors of the initial explanation restricted to enabled
     * check-ins; scores stay exactly as the service reported them. */
    visibleFactors(): WireFactorEntry[] {
        const expl = this.state.explanation;
        const trace = this.state.trace;
        if (!expl || !trace) return [];
        const enabledFeatures = new Set(
            trace.checkins
                .filter((_, i) => this.state.enabled[i])
                .map((c) => c.venue_id || c.category_id),
        );
        return expl.factors.entries.filter((e) => enabledFeatures.has(e.feature_id));
    }

    /** Fetch a greedy removal plan for the enabled subset. */
    async requestPlan(targetBand: 'low' | 'medium' | 'high' = 'low'): Promise<HowToPayload | null> {
        const trace = this.state.trace;
        if (!trace || this.enabledCount === 0) return null;
        const subset: TraceDoc = { pseudonym: trace.pseudonym, checkins: this.enabledCheckins() };
        try {
            this.state.plan = await this.client.howTo(this.modelId, subset, targetBand);
        } catch (err) {
            this.state.stale = true;
        }
        return this.state.plan;
    }

    /** Apply one plan step by toggling off the named check-in. */
    async applyPlanStep(stepIndex: number): Promise<void> {
        const plan = this.state.plan;
        const trace = this.state.trace;
        if (!plan || !trace) return;
        const step = plan.steps[stepIndex];
        if (!step) return;
        const idx = trace.checkins.findIndex(
            (c, i) => this.state.enabled[i] && c.checkin_id === step.removed_checkin_id,
        );
        if (idx >= 0) {
            await this.toggleCheckin(idx);
        }
    }

    /** Record the user's decision. Sharing sends the enabled subset through
     * the obfuscation endpoint and ingests the result; withholding sends
     * nothing at all. The decision log is append-only. */
    async decide(kind: Recommendation): Promise<DecisionEntry> {
        const entry: DecisionEntry = {
            kind,
            at: Date.now(),
            enabledCount: this.enabledCount,
            gauge: this.state.gauge ? { ...this.state.gauge } : null,
            synced: kind === 'withhold',
        };
        this.state.decisions.push(entry);
        if (kind === 'share') {
            await this.syncShare(entry);
        }
        return entry;
    }

    /** Retry the network side of an unsynced share decision in place. */
    async retryDecision(index: number): Promise<void> {
        const entry = this.state.decisions[index];
        if (entry && entry.kind === 'share' && !entry.synced) {
            await this.syncShare(entry);
        }
    }

    private async syncShare(entry: DecisionEntry): Promise<void> {
        try {
            const checkins = this.enabledCheckins();
            const { points } = await this.client.obfuscate(
                checkins.map((c) => ({ lat: c.lat, lon: c.lon })),
                this.options.epsilon ?? 0.01,
                this.options.snap ?? 'none',
            );
            const pseudonym = this.state.trace?.pseudonym ?? '';
            const shared: TraceDoc = {
                pseudonym,
                checkins: checkins.map((c, i) => ({
                    checkin_id: `${pseudonym}-s${entry.at}-${i}`,
                    pseudonym,
                    venue_id: points[i]?.venue_id ?? '',
                    category_id: '',
                    lat: points[i]?.lat ?? c.lat,
                    lon: points[i]?.lon ?? c.lon,
                    timestamp: c.timestamp,
                    tz_offset: c.tz_offset,
                })),
            };
            await this.client.ingest(shared);
            entry.synced = true;
        } catch (err) {
            entry.synced = false; // stays in the log for manual retry
        }
    }
}
