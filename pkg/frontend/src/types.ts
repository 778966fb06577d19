// ============================================================================
// Control API payload types
// ============================================================================
//
// These mirror the JSON the labelloop server emits. Everything the UI shows
// is reconstructed from these payloads; the browser never holds authoritative
// state of its own.

export interface FieldError {
  field: string;
  message: string;
}

export interface HealthResponse {
  schema_version: number;
  status: string;
}

export interface StrategiesResponse {
  schema_version: number;
  strategies: string[];
}

export interface ValidateResponse {
  schema_version: number;
  valid: boolean;
  errors: FieldError[];
}

export interface DatasetUploadResponse {
  schema_version: number;
  path: string;
}

export interface CreateRunResponse {
  schema_version: number;
  run_id: string;
}

export interface LedgerSnapshot {
  input_tokens: number;
  output_tokens: number;
  spent: number;
  budget: number | null;
}

export type RunState =
  | "created"
  | "running"
  | "waiting_human"
  | "done"
  | "failed";

export interface RunStatus {
  schema_version?: number;
  run_id: string;
  status: RunState;
  phase: string | null;
  iteration: number;
  labeled: number;
  unlabeled: number;
  test: number;
  model_ref: string;
  stop_reason: string | null;
  strategy: string;
  mode: string;
  ledger: LedgerSnapshot;
  error: string | null;
}

export interface RunListResponse {
  schema_version: number;
  runs: RunStatus[];
}

export interface CurvePoint {
  schema_version: number;
  iteration: number;
  labeled_count: number;
  selected_ids: string[];
  moved_ids: string[];
  skipped: string[];
  strategy_used: string;
  metrics: Record<string, number>;
  eval_count: number;
  skipped_eval: boolean;
  ledger: { input_tokens: number; output_tokens: number; spent: number };
}

export interface CurveResponse {
  schema_version: number;
  run_id: string;
  points: CurvePoint[];
}

export interface RunConfigResponse {
  schema_version: number;
  run_id: string;
  config: ConfigDocument;
}

export interface AnnotationRecord {
  id: string;
  annotation: string | null;
  annotator: string;
  timestamp: number;
  input_tokens: number;
  output_tokens: number;
  cost: number;
  skipped: boolean;
}

export interface AnnotationsResponse {
  schema_version: number;
  run_id: string;
  records: AnnotationRecord[];
}

export type TaskStatus = "pending" | "claimed" | "done" | "skipped";

export interface AnnotationTask {
  task_id: string;
  instance_id: string;
  input_text: string;
  created_iteration: number;
  status: TaskStatus;
  claimant: string | null;
  lease_expires_at: number | null;
}

export interface TaskCounts {
  pending: number;
  claimed: number;
  done: number;
  skipped: number;
}

export interface TaskListResponse {
  schema_version: number;
  run_id: string;
  counts: TaskCounts;
  total: number;
  tasks: AnnotationTask[];
}

export interface ClaimResponse {
  schema_version: number;
  task: AnnotationTask | null;
}

export interface SubmitAck {
  schema_version: number;
  task_id: string;
  status: TaskStatus;
  duplicate: boolean;
}

// A run configuration document. Keys are dotted identifiers
// ("al.query_size"); values are scalars or lists. Nested objects are
// accepted on upload and flattened before validation or submission.
export type ConfigValue =
  | string
  | number
  | boolean
  | null
  | Array<string | number | boolean | null>;

export interface ConfigDocument {
  [key: string]: ConfigValue | ConfigDocument;
}

export type FlatConfig = Record<string, ConfigValue>;
