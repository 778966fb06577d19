// ============================================================================
// Client-side config validation
// ============================================================================
//
// This is a field-for-field mirror of the server's validator. The point is
// that every error the form shows before submission uses the same dotted
// field identifier the server would respond with, so error rendering is one
// code path whether the check ran locally or remotely. Keep the rules in
// lockstep with the server: the parity test in tests/validation.test.ts
// compares both sides over generated documents.

import type { ConfigDocument, ConfigValue, FieldError, FlatConfig } from "./types.js";

export const STRATEGY_NAMES = [
  "bleuvar",
  "coreset",
  "facility_location",
  "huds",
  "idds",
  "mean_token_entropy",
  "nsp",
  "random",
  "te_delfy",
];

export const LABELER_KINDS = [
  "oracle",
  "noisy_oracle",
  "human",
  "api_llm",
  "local_llm",
];

export const TRAINER_KINDS = ["noop", "command", "http"];

export const MODEL_BACKENDS = ["mock", "remote-openai-compatible"];

export const KNOWN_METRICS = [
  "bleu",
  "exact_match",
  "relaxed_exact_match",
  "rouge1",
  "rouge2",
  "rougeL",
];

export const DEFAULT_METRICS = ["relaxed_exact_match"];

export const KNOWN_KEYS = new Set([
  "al",
  "al.mode",
  "al.init_query_size",
  "al.query_size",
  "al.num_iterations",
  "al.budget",
  "al.seed",
  "al.test_fraction",
  "labeller",
  "labeller.parameters.model",
  "labeller.parameters.max_tokens",
  "labeller.parameters.noise_p",
  "labeller.prompt_template",
  "labeller.prompt_template_file",
  "labeller.price.input_per_1m",
  "labeller.price.output_per_1m",
  "labeller.price.batch_discount",
  "labeller.price.per_label",
  "labeller.batch_mode",
  "labeller.api_key",
  "labeller.base_url",
  "labeller.backend",
  "labeller.cost.per_task_estimate",
  "labeller.lease_seconds",
  "evaluation.metrics",
  "evaluation.additional_metrics",
  "decode.temperature",
  "decode.top_p",
  "decode.max_tokens",
  "decode.num_samples",
  "stopping.labeled_count",
  "stopping.metric",
  "stopping.metric_threshold",
  "model.backend",
  "model.base_url",
  "model.name",
  "model.api_key",
  "model.embed_model",
  "model.seed",
  "model.embed_dim",
  "model.max_concurrent",
  "trainer",
  "trainer.cmd",
  "trainer.url",
  "trainer.timeout",
  "data.path",
  "data.test_path",
  "data.input_field",
  "data.reference_field",
  "data.id_field",
  "run.name",
]);

const OPEN_PREFIXES = ["train.", "al.params."];

function isPlainObject(value: unknown): value is ConfigDocument {
  return (
    typeof value === "object" &&
    value !== null &&
    !Array.isArray(value) &&
    Object.getPrototypeOf(value) === Object.prototype
  );
}

/** Collapse nested mappings into dotted keys; scalars pass through. */
export function flatten(doc: ConfigDocument, prefix = ""): FlatConfig {
  const flat: FlatConfig = {};
  for (const [key, value] of Object.entries(doc)) {
    const dotted = `${prefix}${key}`;
    if (isPlainObject(value)) {
      Object.assign(flat, flatten(value, `${dotted}.`));
    } else {
      flat[dotted] = value as ConfigValue;
    }
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Typed getters. Absent keys and explicit nulls both read as "not set",
// matching the server. A wrongly-typed value records an error and then reads
// as "not set" so downstream rules behave exactly like the server's.
// ---------------------------------------------------------------------------

function err(errors: FieldError[], field: string, message: string): void {
  errors.push({ field, message });
}

function getNumber(
  doc: FlatConfig,
  key: string,
  errors: FieldError[],
): number | null {
  const value = doc[key];
  if (value === null || value === undefined) return null;
  if (typeof value !== "number") {
    err(errors, key, "must be a number");
    return null;
  }
  return value;
}

function getInt(
  doc: FlatConfig,
  key: string,
  errors: FieldError[],
): number | null {
  const value = doc[key];
  if (value === null || value === undefined) return null;
  if (typeof value !== "number" || !Number.isInteger(value)) {
    err(errors, key, "must be an integer");
    return null;
  }
  return value;
}

function getStr(
  doc: FlatConfig,
  key: string,
  errors: FieldError[],
): string | null {
  const value = doc[key];
  if (value === null || value === undefined) return null;
  if (typeof value !== "string") {
    err(errors, key, "must be a string");
    return null;
  }
  return value;
}

function getBool(
  doc: FlatConfig,
  key: string,
  errors: FieldError[],
): boolean | null {
  const value = doc[key];
  if (value === null || value === undefined) return null;
  if (typeof value !== "boolean") {
    err(errors, key, "must be true or false");
    return null;
  }
  return value;
}

function getList(
  doc: FlatConfig,
  key: string,
  errors: FieldError[],
): ConfigValue[] | null {
  const value = doc[key];
  if (value === null || value === undefined) return null;
  if (typeof value === "string") {
    return value
      .split(",")
      .map((v) => v.trim())
      .filter((v) => v !== "");
  }
  if (!Array.isArray(value)) {
    err(errors, key, "must be a list");
    return null;
  }
  return value;
}

function checkSizeSpec(doc: FlatConfig, key: string, errors: FieldError[]): void {
  const value = getNumber(doc, key, errors);
  if (value === null) return;
  if (value <= 0) {
    err(errors, key, "must be positive");
  } else if (value >= 1 && !Number.isInteger(value)) {
    err(errors, key, "sizes of 1 or more must be whole instance counts");
  }
}

// ---------------------------------------------------------------------------
// The validator
// ---------------------------------------------------------------------------

/** Check a flat config document; returns a list of field errors. */
export function validateConfig(doc: FlatConfig): FieldError[] {
  const errors: FieldError[] = [];

  for (const key of Object.keys(doc).sort()) {
    if (KNOWN_KEYS.has(key) || OPEN_PREFIXES.some((p) => key.startsWith(p))) {
      continue;
    }
    err(errors, key, "unknown configuration key");
  }

  const strategy = getStr(doc, "al", errors);
  if (strategy !== null && !STRATEGY_NAMES.includes(strategy)) {
    err(errors, "al", `unknown strategy '${strategy}'`);
  }

  const mode = getStr(doc, "al.mode", errors);
  if (mode !== null && mode !== "al" && mode !== "ed") {
    err(errors, "al.mode", "must be 'al' or 'ed'");
  }

  checkSizeSpec(doc, "al.init_query_size", errors);
  checkSizeSpec(doc, "al.query_size", errors);

  const iterations = getInt(doc, "al.num_iterations", errors);
  if (iterations !== null && iterations < 1) {
    err(errors, "al.num_iterations", "must be >= 1");
  }
  if (mode === "ed" && iterations !== null && iterations !== 1) {
    err(errors, "al.num_iterations", "ed mode runs exactly one iteration");
  }

  const budget = getNumber(doc, "al.budget", errors);
  if (budget !== null && budget <= 0) {
    err(errors, "al.budget", "must be positive");
  }

  getInt(doc, "al.seed", errors);

  const fraction = getNumber(doc, "al.test_fraction", errors);
  if (fraction !== null && !(fraction >= 0 && fraction < 1)) {
    err(errors, "al.test_fraction", "must be in [0, 1)");
  }

  const labeler = getStr(doc, "labeller", errors);
  if (labeler !== null && !LABELER_KINDS.includes(labeler)) {
    err(
      errors,
      "labeller",
      `unknown labeller '${labeler}' (known: ${LABELER_KINDS.join(", ")})`,
    );
  }

  const maxTokens = getInt(doc, "labeller.parameters.max_tokens", errors);
  if (maxTokens !== null && maxTokens < 1) {
    err(errors, "labeller.parameters.max_tokens", "must be >= 1");
  }

  const noise = getNumber(doc, "labeller.parameters.noise_p", errors);
  if (noise !== null && !(noise >= 0 && noise <= 1)) {
    err(errors, "labeller.parameters.noise_p", "must be in [0, 1]");
  }

  const template = getStr(doc, "labeller.prompt_template", errors);
  if (template !== null && !template.includes("{input}")) {
    err(
      errors,
      "labeller.prompt_template",
      "template must contain the {input} placeholder",
    );
  }

  for (const key of [
    "labeller.price.input_per_1m",
    "labeller.price.output_per_1m",
  ]) {
    const price = getNumber(doc, key, errors);
    if (price !== null && price < 0) {
      err(errors, key, "must be >= 0");
    }
  }
  const discount = getNumber(doc, "labeller.price.batch_discount", errors);
  if (discount !== null && !(discount > 0 && discount <= 1)) {
    err(errors, "labeller.price.batch_discount", "must be in (0, 1]");
  }
  const perLabel = getNumber(doc, "labeller.price.per_label", errors);
  if (perLabel !== null && perLabel < 0) {
    err(errors, "labeller.price.per_label", "must be >= 0");
  }
  getBool(doc, "labeller.batch_mode", errors);
  const estimate = getNumber(doc, "labeller.cost.per_task_estimate", errors);
  if (estimate !== null && estimate <= 0) {
    err(errors, "labeller.cost.per_task_estimate", "must be positive");
  }
  const lease = getNumber(doc, "labeller.lease_seconds", errors);
  if (lease !== null && lease <= 0) {
    err(errors, "labeller.lease_seconds", "must be positive");
  }

  const metricNames: string[] = [];
  for (const key of ["evaluation.metrics", "evaluation.additional_metrics"]) {
    const names = getList(doc, key, errors);
    if (names === null) continue;
    for (const name of names) {
      if (typeof name !== "string" || !KNOWN_METRICS.includes(name)) {
        err(errors, key, `unknown metric '${String(name)}'`);
      } else {
        metricNames.push(name);
      }
    }
  }
  if (!Object.prototype.hasOwnProperty.call(doc, "evaluation.metrics")) {
    metricNames.push(...DEFAULT_METRICS);
  }

  const temperature = getNumber(doc, "decode.temperature", errors);
  if (temperature !== null && temperature < 0) {
    err(errors, "decode.temperature", "must be >= 0");
  }
  const topP = getNumber(doc, "decode.top_p", errors);
  if (topP !== null && !(topP > 0 && topP <= 1)) {
    err(errors, "decode.top_p", "must be in (0, 1]");
  }
  const decodeMax = getInt(doc, "decode.max_tokens", errors);
  if (decodeMax !== null && decodeMax < 1) {
    err(errors, "decode.max_tokens", "must be >= 1");
  }
  const samples = getInt(doc, "decode.num_samples", errors);
  if (samples !== null) {
    if (samples < 1) {
      err(errors, "decode.num_samples", "must be >= 1");
    } else if (samples > 1 && (temperature ?? 0) <= 0) {
      err(
        errors,
        "decode.num_samples",
        "multiple samples require decode.temperature > 0",
      );
    }
  }

  const stopCount = getInt(doc, "stopping.labeled_count", errors);
  if (stopCount !== null && stopCount < 1) {
    err(errors, "stopping.labeled_count", "must be >= 1");
  }
  const stopMetric = getStr(doc, "stopping.metric", errors);
  const threshold = getNumber(doc, "stopping.metric_threshold", errors);
  if (threshold !== null && stopMetric === null) {
    err(errors, "stopping.metric", "required when metric_threshold is set");
  }
  if (stopMetric !== null) {
    if (threshold === null) {
      err(
        errors,
        "stopping.metric_threshold",
        "required when stopping.metric is set",
      );
    }
    if (!metricNames.includes(stopMetric)) {
      err(
        errors,
        "stopping.metric",
        `metric '${stopMetric}' is not computed by this run`,
      );
    }
  }

  const backend = getStr(doc, "model.backend", errors);
  if (backend !== null && !MODEL_BACKENDS.includes(backend)) {
    err(errors, "model.backend", `unknown backend '${backend}'`);
  }
  const baseUrl = getStr(doc, "model.base_url", errors);
  if (backend === "remote-openai-compatible" && !baseUrl) {
    err(errors, "model.base_url", "required for remote backends");
  }
  getStr(doc, "model.name", errors);
  getInt(doc, "model.seed", errors);
  const dim = getInt(doc, "model.embed_dim", errors);
  if (dim !== null && dim < 2) {
    err(errors, "model.embed_dim", "must be >= 2");
  }
  const concurrent = getInt(doc, "model.max_concurrent", errors);
  if (concurrent !== null && concurrent < 1) {
    err(errors, "model.max_concurrent", "must be >= 1");
  }

  const labelerBackend = getStr(doc, "labeller.backend", errors);
  if (labelerBackend !== null && !MODEL_BACKENDS.includes(labelerBackend)) {
    err(errors, "labeller.backend", `unknown backend '${labelerBackend}'`);
  }

  const trainer = getStr(doc, "trainer", errors);
  if (trainer !== null && !TRAINER_KINDS.includes(trainer)) {
    err(errors, "trainer", `unknown trainer '${trainer}'`);
  }
  if (trainer === "command" && !getStr(doc, "trainer.cmd", errors)) {
    err(errors, "trainer.cmd", "required for the command trainer");
  }
  if (trainer === "http" && !getStr(doc, "trainer.url", errors)) {
    err(errors, "trainer.url", "required for the http trainer");
  }

  const paramsErrors: FieldError[] = [];
  const strata = getInt(doc, "al.params.num_strata", paramsErrors);
  if (strata !== null && strata < 1) {
    err(paramsErrors, "al.params.num_strata", "must be >= 1");
  }
  const kSamples = getInt(doc, "al.params.k_samples", paramsErrors);
  if (kSamples !== null && kSamples < 1) {
    err(paramsErrors, "al.params.k_samples", "must be >= 1");
  }
  errors.push(...paramsErrors);

  return errors;
}

/** Group errors by field for per-field rendering. */
export function errorsByField(errors: FieldError[]): Map<string, string[]> {
  const out = new Map<string, string[]>();
  for (const { field, message } of errors) {
    const list = out.get(field);
    if (list) {
      list.push(message);
    } else {
      out.set(field, [message]);
    }
  }
  return out;
}
