// ============================================================================
// Control API client
// ============================================================================
//
// Thin fetch wrapper around the labelloop HTTP surface. Transport failures
// and 5xx responses are retried with a short backoff when the request is
// safe to replay: GETs always are, task submits are because they carry an
// idempotency key in the body (a replay acknowledges without a second log
// record), and claims are because a lost claim simply leaves a lease to
// expire server-side. Run creation is never retried automatically.
export class ApiError extends Error {
    status;
    errors;
    constructor(status, errors) {
        const first = errors[0];
        super(first ? `${first.field || "request"}: ${first.message}` : `HTTP ${status}`);
        this.name = "ApiError";
        this.status = status;
        this.errors = errors;
    }
}
export function newIdempotencyKey() {
    const c = globalThis.crypto;
    if (c && typeof c.randomUUID === "function") {
        return c.randomUUID();
    }
    return `key-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}
function defaultSleep(ms) {
    return new Promise((resolve) => setTimeout(resolve, ms));
}
export class ApiClient {
    baseUrl;
    fetchFn;
    maxAttempts;
    retryDelayMs;
    sleepFn;
    constructor(baseUrl, options = {}) {
        this.baseUrl = baseUrl.replace(/\/+$/, "");
        this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
        this.maxAttempts = options.maxAttempts ?? 4;
        this.retryDelayMs = options.retryDelayMs ?? 150;
        this.sleepFn = options.sleepFn ?? defaultSleep;
    }
    async request(method, path, body, retry = false) {
        const url = `${this.baseUrl}${path}`;
        const init = { method };
        if (body !== undefined) {
            init.headers = { "content-type": "application/json" };
            init.body = JSON.stringify(body);
        }
        const attempts = retry ? this.maxAttempts : 1;
        let lastError = null;
        for (let attempt = 1; attempt <= attempts; attempt++) {
            if (attempt > 1) {
                await this.sleepFn(this.retryDelayMs * (attempt - 1));
            }
            let response;
            try {
                response = await this.fetchFn(url, init);
            }
            catch (exc) {
                lastError = exc;
                continue; // transport failure: replay if attempts remain
            }
            if (response.ok) {
                return (await response.json());
            }
            if (response.status >= 500) {
                lastError = new ApiError(response.status, [
                    { field: "", message: `server error ${response.status}` },
                ]);
                continue;
            }
            throw new ApiError(response.status, await readErrors(response));
        }
        if (lastError instanceof ApiError)
            throw lastError;
        throw new ApiError(0, [
            { field: "", message: `network failure: ${String(lastError)}` },
        ]);
    }
    health() {
        return this.request("GET", "/api/health", undefined, true);
    }
    strategies() {
        return this.request("GET", "/api/strategies", undefined, true);
    }
    validateConfig(config) {
        return this.request("POST", "/api/config/validate", { config }, true);
    }
    uploadDataset(name, content) {
        return this.request("POST", "/api/datasets", { name, content });
    }
    createRun(config, runName) {
        const body = { config };
        if (runName)
            body.run_name = runName;
        return this.request("POST", "/api/runs", body);
    }
    listRuns() {
        return this.request("GET", "/api/runs", undefined, true);
    }
    runStatus(runId) {
        return this.request("GET", `/api/runs/${encodeURIComponent(runId)}`, undefined, true);
    }
    runCurve(runId) {
        return this.request("GET", `/api/runs/${encodeURIComponent(runId)}/curve`, undefined, true);
    }
    runConfig(runId) {
        return this.request("GET", `/api/runs/${encodeURIComponent(runId)}/config`, undefined, true);
    }
    runAnnotations(runId) {
        return this.request("GET", `/api/runs/${encodeURIComponent(runId)}/annotations`, undefined, true);
    }
    listTasks(runId) {
        return this.request("GET", `/api/runs/${encodeURIComponent(runId)}/tasks`, undefined, true);
    }
    claimTask(runId, annotatorId) {
        return this.request("POST", `/api/runs/${encodeURIComponent(runId)}/tasks/claim`, { annotator_id: annotatorId }, true);
    }
    submitTask(runId, taskId, args) {
        return this.request("POST", `/api/runs/${encodeURIComponent(runId)}/tasks/${encodeURIComponent(taskId)}/submit`, {
            annotator_id: args.annotatorId,
            text: args.text,
            skip: args.skip ?? false,
            idempotency_key: args.idempotencyKey,
        }, true);
    }
}
async function readErrors(response) {
    try {
        const body = (await response.json());
        if (Array.isArray(body.errors) && body.errors.length > 0) {
            return body.errors;
        }
    }
    catch {
        // non-JSON error body; fall through
    }
    return [{ field: "", message: `HTTP ${response.status}` }];
}
