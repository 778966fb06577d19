// ============================================================================
// Annotation loop
// ============================================================================
//
// Drives one annotator's claim/submit cycle against a run's task queue. The
// controller owns the interaction invariants; the page only renders:
//   - at most one request in flight, submit refused while one is pending
//   - empty text never leaves the browser (skip is the explicit path)
//   - each submit intent carries one idempotency key; transport retries
//     inside the client replay the same body, so duplicate delivery cannot
//     produce a second log record
//   - a claim is released visually when its lease would have run out
//
// Lease timing note: the server stamps lease_expires_at from its own
// monotonic clock, which is meaningless in the browser. The controller
// counts down locally from the moment the claim response arrived, which is
// always at or after the server-side claim instant, so the local countdown
// can only be conservative.
import { ApiError, newIdempotencyKey } from "./client.js";
export const DEFAULT_LEASE_SECONDS = 1800;
export class AnnotationInputError extends Error {
    field = "annotation";
    constructor(message) {
        super(message);
        this.name = "AnnotationInputError";
    }
}
export class AnnotateLoop {
    runId;
    annotatorId;
    current = null;
    inFlight = false;
    client;
    leaseSeconds;
    events;
    setTimeoutFn;
    clearTimeoutFn;
    leaseTimer = null;
    submitKey = null;
    lastAttempt = null;
    constructor(client, runId, annotatorId, options = {}) {
        if (!annotatorId.trim()) {
            throw new AnnotationInputError("annotator id is required");
        }
        this.client = client;
        this.runId = runId;
        this.annotatorId = annotatorId;
        this.leaseSeconds = options.leaseSeconds ?? DEFAULT_LEASE_SECONDS;
        this.events = options.events ?? {};
        this.setTimeoutFn =
            options.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
        this.clearTimeoutFn =
            options.clearTimeoutFn ?? ((handle) => clearTimeout(handle));
    }
    /**
     * Claim the next pending task. Resolves null when the queue has nothing
     * pending right now (tasks may still be claimed by others).
     */
    async claimNext() {
        this.guardIdle();
        if (this.current !== null) {
            throw new AnnotationInputError("resolve or release the current task before claiming another");
        }
        this.inFlight = true;
        try {
            const response = await this.client.claimTask(this.runId, this.annotatorId);
            const task = response.task;
            if (task === null)
                return null;
            this.current = task;
            this.submitKey = newIdempotencyKey();
            this.armLeaseTimer(task.task_id);
            this.events.onTask?.(task);
            return task;
        }
        finally {
            this.inFlight = false;
        }
    }
    /** Submit annotation text for the held task. */
    submit(text) {
        if (text.trim() === "") {
            // never send an empty annotation; the skip control is the honest path
            return Promise.reject(new AnnotationInputError("annotation text is required; use skip instead"));
        }
        return this.resolve({ text });
    }
    /** Skip the held task without annotating it. */
    skip() {
        return this.resolve({ skip: true });
    }
    /** Poll queue counts for the position indicator. */
    async refreshCounts() {
        const listing = await this.client.listTasks(this.runId);
        this.events.onCounts?.(listing.counts);
        return listing.counts;
    }
    dispose() {
        this.disarmLeaseTimer();
        this.current = null;
        this.submitKey = null;
        this.lastAttempt = null;
    }
    async resolve(args) {
        this.guardIdle();
        const task = this.current;
        if (task === null) {
            throw new AnnotationInputError("no task is currently claimed");
        }
        // One key per submit intent: a retry of the same content replays the
        // key, while edited content gets a fresh key so a stale replay cannot
        // masquerade as an ack for the new text.
        const content = JSON.stringify([args.text ?? null, args.skip ?? false]);
        if (this.submitKey === null || this.lastAttempt !== content) {
            this.submitKey = newIdempotencyKey();
            this.lastAttempt = content;
        }
        const key = this.submitKey;
        this.inFlight = true;
        try {
            const ack = await this.client.submitTask(this.runId, task.task_id, {
                annotatorId: this.annotatorId,
                text: args.text,
                skip: args.skip,
                idempotencyKey: key,
            });
            this.disarmLeaseTimer();
            this.current = null;
            this.submitKey = null;
            this.lastAttempt = null;
            this.events.onAck?.(ack);
            return ack;
        }
        catch (exc) {
            if (exc instanceof ApiError && exc.status === 403) {
                // the server no longer honors our claim; drop it here too
                this.disarmLeaseTimer();
                this.current = null;
                this.submitKey = null;
                this.lastAttempt = null;
                this.events.onLeaseLost?.(task.task_id);
            }
            throw exc;
        }
        finally {
            this.inFlight = false;
        }
    }
    guardIdle() {
        if (this.inFlight) {
            throw new AnnotationInputError("a request is already in flight");
        }
    }
    armLeaseTimer(taskId) {
        this.disarmLeaseTimer();
        this.leaseTimer = this.setTimeoutFn(() => {
            this.leaseTimer = null;
            if (this.inFlight) {
                // let the pending request settle; the server answer decides
                return;
            }
            if (this.current?.task_id === taskId) {
                this.current = null;
                this.submitKey = null;
                this.lastAttempt = null;
                this.events.onLeaseLost?.(taskId);
            }
        }, this.leaseSeconds * 1000);
    }
    disarmLeaseTimer() {
        if (this.leaseTimer !== null) {
            this.clearTimeoutFn(this.leaseTimer);
            this.leaseTimer = null;
        }
    }
}
