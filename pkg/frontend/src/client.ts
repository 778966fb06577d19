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

import type {
  AnnotationsResponse,
  ClaimResponse,
  ConfigDocument,
  CreateRunResponse,
  CurveResponse,
  DatasetUploadResponse,
  FieldError,
  FlatConfig,
  HealthResponse,
  RunConfigResponse,
  RunListResponse,
  RunStatus,
  StrategiesResponse,
  SubmitAck,
  TaskListResponse,
  ValidateResponse,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly errors: FieldError[];

  constructor(status: number, errors: FieldError[]) {
    const first = errors[0];
    super(first ? `${first.field || "request"}: ${first.message}` : `HTTP ${status}`);
    this.name = "ApiError";
    this.status = status;
    this.errors = errors;
  }
}

export interface ClientOptions {
  fetchFn?: FetchLike;
  /** Total attempts per retryable request, first try included. */
  maxAttempts?: number;
  /** Base backoff; attempt n waits n * retryDelayMs. */
  retryDelayMs?: number;
  sleepFn?: (ms: number) => Promise<void>;
}

export function newIdempotencyKey(): string {
  const c = globalThis.crypto;
  if (c && typeof c.randomUUID === "function") {
    return c.randomUUID();
  }
  return `key-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;
  private readonly maxAttempts: number;
  private readonly retryDelayMs: number;
  private readonly sleepFn: (ms: number) => Promise<void>;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.maxAttempts = options.maxAttempts ?? 4;
    this.retryDelayMs = options.retryDelayMs ?? 150;
    this.sleepFn = options.sleepFn ?? defaultSleep;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    retry = false,
  ): Promise<T> {
    const url = `${this.baseUrl}${path}`;
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const attempts = retry ? this.maxAttempts : 1;
    let lastError: unknown = null;

    for (let attempt = 1; attempt <= attempts; attempt++) {
      if (attempt > 1) {
        await this.sleepFn(this.retryDelayMs * (attempt - 1));
      }
      let response: Response;
      try {
        response = await this.fetchFn(url, init);
      } catch (exc) {
        lastError = exc;
        continue; // transport failure: replay if attempts remain
      }
      if (response.ok) {
        return (await response.json()) as T;
      }
      if (response.status >= 500) {
        lastError = new ApiError(response.status, [
          { field: "", message: `server error ${response.status}` },
        ]);
        continue;
      }
      throw new ApiError(response.status, await readErrors(response));
    }
    if (lastError instanceof ApiError) throw lastError;
    throw new ApiError(0, [
      { field: "", message: `network failure: ${String(lastError)}` },
    ]);
  }

  health(): Promise<HealthResponse> {
    return this.request("GET", "/api/health", undefined, true);
  }

  strategies(): Promise<StrategiesResponse> {
    return this.request("GET", "/api/strategies", undefined, true);
  }

  validateConfig(config: ConfigDocument | FlatConfig): Promise<ValidateResponse> {
    return this.request("POST", "/api/config/validate", { config }, true);
  }

  uploadDataset(name: string, content: string): Promise<DatasetUploadResponse> {
    return this.request("POST", "/api/datasets", { name, content });
  }

  createRun(
    config: ConfigDocument | FlatConfig,
    runName?: string,
  ): Promise<CreateRunResponse> {
    const body: Record<string, unknown> = { config };
    if (runName) body.run_name = runName;
    return this.request("POST", "/api/runs", body);
  }

  listRuns(): Promise<RunListResponse> {
    return this.request("GET", "/api/runs", undefined, true);
  }

  runStatus(runId: string): Promise<RunStatus> {
    return this.request("GET", `/api/runs/${encodeURIComponent(runId)}`, undefined, true);
  }

  runCurve(runId: string): Promise<CurveResponse> {
    return this.request("GET", `/api/runs/${encodeURIComponent(runId)}/curve`, undefined, true);
  }

  runConfig(runId: string): Promise<RunConfigResponse> {
    return this.request("GET", `/api/runs/${encodeURIComponent(runId)}/config`, undefined, true);
  }

  runAnnotations(runId: string): Promise<AnnotationsResponse> {
    return this.request(
      "GET",
      `/api/runs/${encodeURIComponent(runId)}/annotations`,
      undefined,
      true,
    );
  }

  listTasks(runId: string): Promise<TaskListResponse> {
    return this.request("GET", `/api/runs/${encodeURIComponent(runId)}/tasks`, undefined, true);
  }

  claimTask(runId: string, annotatorId: string): Promise<ClaimResponse> {
    return this.request(
      "POST",
      `/api/runs/${encodeURIComponent(runId)}/tasks/claim`,
      { annotator_id: annotatorId },
      true,
    );
  }

  submitTask(
    runId: string,
    taskId: string,
    args: {
      annotatorId: string;
      text?: string;
      skip?: boolean;
      idempotencyKey: string;
    },
  ): Promise<SubmitAck> {
    return this.request(
      "POST",
      `/api/runs/${encodeURIComponent(runId)}/tasks/${encodeURIComponent(taskId)}/submit`,
      {
        annotator_id: args.annotatorId,
        text: args.text,
        skip: args.skip ?? false,
        idempotency_key: args.idempotencyKey,
      },
      true,
    );
  }
}

async function readErrors(response: Response): Promise<FieldError[]> {
  try {
    const body = (await response.json()) as { errors?: FieldError[] };
    if (Array.isArray(body.errors) && body.errors.length > 0) {
      return body.errors;
    }
  } catch {
    // non-JSON error body; fall through
  }
  return [{ field: "", message: `HTTP ${response.status}` }];
}
