/** Browser entry point: wires the session to the static page in index.html. */
import { AdvisorClient } from './api.js';
import { bandColor, factorBars, gaugeText, planChecklist, planSummary, recommendationForBand } from './render.js';
import { AdvisorSession } from './session.js';

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

function init(): void {
    const params = new URLSearchParams(window.location.search);
    const base = params.get('service') ?? '';
    const modelId = params.get('model') ?? 'm0001';
    const session = new AdvisorSession(new AdvisorClient(base), modelId, {
        epsilon: Number(params.get('epsilon') ?? '0.01'),
    });

    const traceInput = el<HTMLTextAreaElement>('trace-input');
    const loadButton = el<HTMLButtonElement>('load-button');
    const errorBanner = el<HTMLDivElement>('error-banner');
    const gauge = el<HTMLDivElement>('gauge');
    const recommendation = el<HTMLDivElement>('recommendation');
    const rows = el<HTMLUListElement>('checkin-rows');
    const factors = el<HTMLUListElement>('factor-bars');
    const planButton = el<HTMLButtonElement>('plan-button');
    const planList = el<HTMLOListElement>('plan-list');
    const shareButton = el<HTMLButtonElement>('share-button');
    const withholdButton = el<HTMLButtonElement>('withhold-button');
    const decisions = el<HTMLUListElement>('decision-log');

    function renderState(): void {
        const s = session.state;
        errorBanner.textContent = s.error ?? '';
        errorBanner.style.display = s.error ? 'block' : 'none';

        if (s.pending) {
            gauge.textContent = 'updating…';
            gauge.style.background = '#9e9e9e';
        } else if (s.gauge) {
            gauge.textContent = gaugeText(s.gauge.posteriorTop, s.gauge.band)
                + (s.stale ? ' [stale]' : '');
            gauge.style.background = bandColor(s.gauge.band);
        } else {
            gauge.textContent = 'no trace loaded';
            gauge.style.background = '#9e9e9e';
        }
        recommendation.textContent = s.gauge && !s.pending
            ? `Recommendation: ${recommendationForBand(s.gauge.band)}`
            : '';

        rows.replaceChildren(
            ...(s.trace?.checkins ?? []).map((c, i) => {
                const li = document.createElement('li');
                const box = document.createElement('input');
                box.type = 'checkbox';
                box.checked = s.enabled[i] ?? false;
                box.addEventListener('change', () => {
                    void session.toggleCheckin(i).then(renderState);
                    renderState(); // show pending immediately
                });
                li.append(box, ` ${c.venue_id || `(${c.lat.toFixed(4)}, ${c.lon.toFixed(4)})`}`);
                return li;
            }),
        );

        factors.replaceChildren(
            ...factorBars(session.visibleFactors()).map((bar) => {
                const li = document.createElement('li');
                const span = document.createElement('span');
                span.style.display = 'inline-block';
                span.style.width = `${Math.round(bar.width * 240)}px`;
                span.style.background = '#1565c0';
                span.textContent = ' ';
                li.append(span, ` ${bar.featureId}: ${bar.score.toFixed(2)}`);
                return li;
            }),
        );

        planList.replaceChildren(
            ...(s.plan ? planChecklist(s.plan) : []).map((item, i) => {
                const li = document.createElement('li');
                const button = document.createElement('button');
                button.textContent = item.label;
                button.addEventListener('click', () => {
                    void session.applyPlanStep(i).then(renderState);
                });
                li.append(button);
                return li;
            }),
        );
        if (s.plan) {
            planButton.textContent = planSummary(s.plan);
        }

        shareButton.disabled = !session.shareEnabled;
        withholdButton.disabled = s.gauge === null || s.pending;

        decisions.replaceChildren(
            ...s.decisions.map((d) => {
                const li = document.createElement('li');
                const risk = d.gauge ? `${d.gauge.band} ${d.gauge.posteriorTop.toFixed(3)}` : '-';
                li.textContent = `${new Date(d.at).toISOString()} ${d.kind} `
                    + `(${d.enabledCount} check-ins, risk ${risk})`
                    + (d.synced ? '' : ' [unsynced]');
                return li;
            }),
        );
    }

    loadButton.addEventListener('click', () => {
        void session.loadTrace(traceInput.value).then(renderState);
        renderState();
    });
    planButton.addEventListener('click', () => {
        void session.requestPlan().then(renderState);
    });
    shareButton.addEventListener('click', () => {
        void session.decide('share').then(renderState);
    });
    withholdButton.addEventListener('click', () => {
        void session.decide('withhold').then(renderState);
    });

    renderState();
}

document.addEventListener('DOMContentLoaded', init);
