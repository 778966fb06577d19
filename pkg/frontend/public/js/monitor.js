// ============================================================================
// Run monitoring
// ============================================================================
//
// Polls the status and curve endpoints on an interval and hands both to a
// render callback. Nothing is cached across page loads; a reload rebuilds
// the identical view from the API. Chart geometry lives in pure functions
// so it can be tested without a document.
export class RunMonitor {
    runId;
    client;
    options;
    handle = null;
    ticking = false;
    constructor(client, runId, options) {
        this.client = client;
        this.runId = runId;
        this.options = options;
    }
    start() {
        if (this.handle !== null)
            return;
        const setIntervalFn = this.options.setIntervalFn ?? ((fn, ms) => setInterval(fn, ms));
        this.handle = setIntervalFn(() => void this.tick(), this.options.intervalMs ?? 2000);
        void this.tick();
    }
    stop() {
        if (this.handle === null)
            return;
        const clearIntervalFn = this.options.clearIntervalFn ?? ((h) => clearInterval(h));
        clearIntervalFn(this.handle);
        this.handle = null;
    }
    async tick() {
        if (this.ticking)
            return; // a slow poll must not stack another
        this.ticking = true;
        try {
            const [status, curve] = await Promise.all([
                this.client.runStatus(this.runId),
                this.client.runCurve(this.runId),
            ]);
            this.options.onUpdate({ status, points: curve.points });
            if (status.status === "done" || status.status === "failed") {
                this.stop();
            }
        }
        catch (exc) {
            this.options.onError?.(exc);
        }
        finally {
            this.ticking = false;
        }
    }
}
// ---------------------------------------------------------------------------
// Chart geometry
// ---------------------------------------------------------------------------
/** Metric to chart: the first key, alphabetically, present in the last point. */
export function pickMetric(points) {
    for (let i = points.length - 1; i >= 0; i--) {
        const point = points[i];
        if (!point)
            continue;
        const keys = Object.keys(point.metrics).sort();
        if (keys.length > 0)
            return keys[0] ?? null;
    }
    return null;
}
/**
 * Map curve points to pixel coordinates: x spans the labeled counts, y spans
 * [0, max value] with a floor of 1 so flat-zero curves still sit on the axis.
 */
export function chartPoints(points, metric, geometry) {
    const rows = points
        .filter((p) => typeof p.metrics[metric] === "number")
        .map((p) => ({ labeled: p.labeled_count, value: p.metrics[metric] }));
    if (rows.length === 0)
        return [];
    const { width, height, pad } = geometry;
    const innerW = Math.max(1, width - 2 * pad);
    const innerH = Math.max(1, height - 2 * pad);
    const xs = rows.map((r) => r.labeled);
    const xMin = Math.min(...xs);
    const xMax = Math.max(...xs);
    const xSpan = xMax - xMin;
    const yMax = Math.max(1e-9, ...rows.map((r) => r.value), 0);
    return rows.map((r) => ({
        x: pad + (xSpan === 0 ? innerW / 2 : ((r.labeled - xMin) / xSpan) * innerW),
        y: pad + innerH - (Math.max(0, r.value) / yMax) * innerH,
        labeled: r.labeled,
        value: r.value,
    }));
}
/** SVG polyline "points" attribute for the metric curve. */
export function curvePolyline(points, metric, geometry) {
    return chartPoints(points, metric, geometry)
        .map((p) => `${round2(p.x)},${round2(p.y)}`)
        .join(" ");
}
function round2(v) {
    return Math.round(v * 100) / 100;
}
export function formatSpend(ledger) {
    const spent = ledger.spent.toFixed(4).replace(/\.?0+$/, "");
    if (ledger.budget === null) {
        return `${spent} (no budget)`;
    }
    return `${spent} / ${ledger.budget}`;
}
export function describeStop(status) {
    if (status.status === "failed") {
        return status.error ? `failed: ${status.error}` : "failed";
    }
    if (status.status === "done") {
        return status.stop_reason ? `stopped: ${status.stop_reason}` : "done";
    }
    return status.status;
}
