/** Thin client for the advisor HTTP endpoints.
 *
 * All inference numbers come from these responses; nothing in the UI may
 * recompute them. The fetch implementation is injectable so tests can
 * intercept every network call.
 */
import {
    HowToPayload,
    ObfuscatedPoint,
    TraceDoc,
    WhatIfPayload,
    WhyPayload,
    WirePrediction,
} from './types.js';

export interface HttpResponse {
    ok: boolean;
    status: number;
    json(): Promise<unknown>;
}

export interface RequestOptions {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
    signal?: AbortSignal;
}

export type FetchLike = (url: string, init?: RequestOptions) => Promise<HttpResponse>;

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

export class AdvisorClient {
    constructor(
        private readonly baseUrl: string,
        private readonly fetchImpl: FetchLike = (globalThis.fetch as unknown as FetchLike),
    ) {}

    private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
        const resp = await this.fetchImpl(this.baseUrl + path, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(body),
            signal,
        });
        const payload = (await resp.json()) as T & { error?: string };
        if (!resp.ok) {
            throw new ApiError(resp.status, payload.error ?? `HTTP ${resp.status}`);
        }
        return payload;
    }

    predict(modelId: string, trace: TraceDoc, signal?: AbortSignal): Promise<WirePrediction> {
        return this.post(`/v1/models/${modelId}/predict`, { trace }, signal);
    }

    explainWhy(modelId: string, trace: TraceDoc, topK = 5, signal?: AbortSignal): Promise<WhyPayload> {
        return this.post(`/v1/models/${modelId}/explain`, { trace, mode: 'why', top_k: topK }, signal);
    }

    whatIf(
        modelId: string,
        trace: TraceDoc,
        removeIds: string[],
        signal?: AbortSignal,
    ): Promise<WhatIfPayload> {
        return this.post(
            `/v1/models/${modelId}/explain`,
            { trace, mode: 'whatif', edit: { remove: removeIds, add: [] } },
            signal,
        );
    }

    howTo(
        modelId: string,
        trace: TraceDoc,
        targetBand: 'low' | 'medium' | 'high' = 'low',
        signal?: AbortSignal,
    ): Promise<HowToPayload> {
        return this.post(
            `/v1/models/${modelId}/explain`,
            { trace, mode: 'howto', target: { kind: 'band', band: targetBand } },
            signal,
        );
    }

    obfuscate(
        points: Array<{ lat: number; lon: number }>,
        epsilon: number,
        snap: 'none' | 'nearest_known_venue' = 'none',
    ): Promise<{ points: ObfuscatedPoint[] }> {
        return this.post('/v1/obfuscate', { points, epsilon, snap });
    }

    ingest(trace: TraceDoc): Promise<{ accepted: number }> {
        return this.post('/v1/traces', trace);
    }
}
