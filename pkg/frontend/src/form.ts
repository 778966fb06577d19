// ============================================================================
// Run configuration form model
// ============================================================================
//
// The form state holds raw field text; buildDocument turns it into the flat
// dotted-key document the server accepts. Unparseable numeric text is kept
// verbatim so validation flags it on the right field instead of silently
// dropping it. An uploaded advanced document overrides individual form
// fields key by key, and the merged result is what gets echoed back for
// confirmation and finally submitted.

import { flatten } from "./validation.js";
import type { ConfigDocument, ConfigValue, FlatConfig } from "./types.js";

export interface ParamRow {
  key: string;
  value: string;
}

export interface RunFormState {
  runName: string;
  strategy: string;
  mode: "al" | "ed";
  datasetPath: string;
  initQuerySize: string;
  querySize: string;
  numIterations: string;
  seed: string;
  testFraction: string;
  labeler: string;
  /** Generic key/value rows for labeler parameters (provider fields vary). */
  labelerParams: ParamRow[];
  promptTemplate: string;
  budget: string;
  priceInputPer1m: string;
  priceOutputPer1m: string;
  priceBatchDiscount: string;
  batchMode: boolean;
  metrics: string;
  stopLabeledCount: string;
  stopMetric: string;
  stopThreshold: string;
  advanced: FlatConfig | null;
}

export function emptyForm(): RunFormState {
  return {
    runName: "",
    strategy: "random",
    mode: "al",
    datasetPath: "",
    initQuerySize: "",
    querySize: "",
    numIterations: "",
    seed: "",
    testFraction: "",
    labeler: "human",
    labelerParams: [],
    promptTemplate: "",
    budget: "",
    priceInputPer1m: "",
    priceOutputPer1m: "",
    priceBatchDiscount: "",
    batchMode: false,
    metrics: "",
    stopLabeledCount: "",
    stopMetric: "",
    stopThreshold: "",
    advanced: null,
  };
}

/**
 * Parse one raw field: empty text means "leave unset"; numeric text becomes
 * a number; anything else stays a string so the validator can name the
 * offending field.
 */
export function parseScalar(raw: string): ConfigValue | undefined {
  const text = raw.trim();
  if (text === "") return undefined;
  if (text === "true") return true;
  if (text === "false") return false;
  if (/^-?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/.test(text)) {
    return Number(text);
  }
  return text;
}

function put(doc: FlatConfig, key: string, raw: string): void {
  const value = parseScalar(raw);
  if (value !== undefined) doc[key] = value;
}

/**
 * Map one generic parameter row to a dotted key. Bare keys land under
 * labeller.parameters (model, max_tokens, noise_p and whatever a provider
 * needs); keys that already contain a dot attach directly under labeller
 * so rows can reach base_url, api_key or price fields too.
 */
export function paramRowKey(rowKey: string): string {
  const key = rowKey.trim();
  if (key.includes(".")) return `labeller.${key}`;
  return `labeller.parameters.${key}`;
}

/** Build the flat config document for the current form state. */
export function buildDocument(form: RunFormState): FlatConfig {
  const doc: FlatConfig = {};

  if (form.strategy.trim() !== "") doc["al"] = form.strategy.trim();
  if (form.mode === "ed") doc["al.mode"] = "ed";
  put(doc, "al.init_query_size", form.initQuerySize);
  put(doc, "al.query_size", form.querySize);
  put(doc, "al.num_iterations", form.numIterations);
  put(doc, "al.seed", form.seed);
  put(doc, "al.test_fraction", form.testFraction);
  put(doc, "al.budget", form.budget);

  if (form.labeler.trim() !== "") doc["labeller"] = form.labeler.trim();
  for (const row of form.labelerParams) {
    if (row.key.trim() === "") continue;
    put(doc, paramRowKey(row.key), row.value);
  }
  if (form.promptTemplate.trim() !== "") {
    doc["labeller.prompt_template"] = form.promptTemplate;
  }
  put(doc, "labeller.price.input_per_1m", form.priceInputPer1m);
  put(doc, "labeller.price.output_per_1m", form.priceOutputPer1m);
  put(doc, "labeller.price.batch_discount", form.priceBatchDiscount);
  if (form.batchMode) doc["labeller.batch_mode"] = true;

  if (form.metrics.trim() !== "") {
    doc["evaluation.metrics"] = form.metrics
      .split(",")
      .map((m) => m.trim())
      .filter((m) => m !== "");
  }
  put(doc, "stopping.labeled_count", form.stopLabeledCount);
  if (form.stopMetric.trim() !== "") doc["stopping.metric"] = form.stopMetric.trim();
  put(doc, "stopping.metric_threshold", form.stopThreshold);

  if (form.datasetPath.trim() !== "") doc["data.path"] = form.datasetPath.trim();
  if (form.runName.trim() !== "") doc["run.name"] = form.runName.trim();

  return form.advanced === null ? doc : mergeAdvanced(doc, form.advanced);
}

/** Advanced upload wins key by key over the form fields. */
export function mergeAdvanced(base: FlatConfig, advanced: FlatConfig): FlatConfig {
  return { ...base, ...advanced };
}

/**
 * Parse an advanced-config upload. JSON documents only; the CLI reads YAML
 * but the browser ships no YAML parser. Nested objects flatten to dotted
 * keys, so a file written for the CLI converts with a one-liner.
 */
export function parseAdvancedDocument(text: string): FlatConfig {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (exc) {
    throw new Error(`not valid JSON: ${(exc as Error).message}`);
  }
  if (
    typeof parsed !== "object" ||
    parsed === null ||
    Array.isArray(parsed)
  ) {
    throw new Error("the config document must be a JSON object");
  }
  return flatten(parsed as ConfigDocument);
}

/** Stable pretty form of the merged document, echoed before submission. */
export function echoDocument(doc: FlatConfig): string {
  const keys = Object.keys(doc).sort();
  const ordered: FlatConfig = {};
  for (const key of keys) {
    const value = doc[key];
    if (value !== undefined) ordered[key] = value;
  }
  return JSON.stringify(ordered, null, 2);
}
