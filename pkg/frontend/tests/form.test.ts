// Form model: raw field text to flat config document, advanced-upload
// merging, and the client-side validation wiring the setup page relies on.

import { describe, expect, it } from "vitest";
import {
  buildDocument,
  echoDocument,
  emptyForm,
  mergeAdvanced,
  paramRowKey,
  parseAdvancedDocument,
  parseScalar,
} from "../src/form.js";
import { errorsByField, validateConfig } from "../src/validation.js";

describe("parseScalar", () => {
  it("maps raw field text to config values", () => {
    expect(parseScalar("")).toBeUndefined();
    expect(parseScalar("   ")).toBeUndefined();
    expect(parseScalar("true")).toBe(true);
    expect(parseScalar("false")).toBe(false);
    expect(parseScalar("42")).toBe(42);
    expect(parseScalar("-3")).toBe(-3);
    expect(parseScalar("0.25")).toBe(0.25);
    expect(parseScalar(".5")).toBe(0.5);
    expect(parseScalar("1e3")).toBe(1000);
    expect(parseScalar("gpt-4o-mini")).toBe("gpt-4o-mini");
    // not a clean number: keep the text so validation names the field
    expect(parseScalar("12abc")).toBe("12abc");
  });
});

describe("paramRowKey", () => {
  it("nests bare keys under parameters and dotted keys under labeller", () => {
    expect(paramRowKey("model")).toBe("labeller.parameters.model");
    expect(paramRowKey("max_tokens")).toBe("labeller.parameters.max_tokens");
    expect(paramRowKey("base_url")).toBe("labeller.parameters.base_url");
    expect(paramRowKey("price.input_per_1m")).toBe("labeller.price.input_per_1m");
    expect(paramRowKey(" api_key ")).toBe("labeller.parameters.api_key");
  });
});

describe("buildDocument", () => {
  it("emits only the fields the user filled in", () => {
    const form = emptyForm();
    form.strategy = "random";
    form.querySize = "10";
    form.labeler = "human";
    const doc = buildDocument(form);
    expect(doc).toEqual({
      al: "random",
      "al.query_size": 10,
      labeller: "human",
    });
  });

  it("keeps a fractional query size so validation can reject it", () => {
    const form = emptyForm();
    form.querySize = "1.5";
    const doc = buildDocument(form);
    expect(doc["al.query_size"]).toBe(1.5);
    const grouped = errorsByField(validateConfig(doc));
    expect([...grouped.keys()]).toContain("al.query_size");
  });

  it("splits the metrics field into a list", () => {
    const form = emptyForm();
    form.metrics = "bleu, rougeL ,exact_match";
    const doc = buildDocument(form);
    expect(doc["evaluation.metrics"]).toEqual(["bleu", "rougeL", "exact_match"]);
  });

  it("leaves evaluation.metrics absent when the field is blank", () => {
    const doc = buildDocument(emptyForm());
    expect(Object.prototype.hasOwnProperty.call(doc, "evaluation.metrics")).toBe(false);
  });

  it("routes generic parameter rows through paramRowKey", () => {
    const form = emptyForm();
    form.labeler = "openai";
    form.labelerParams = [
      { key: "model", value: "gpt-4o-mini" },
      { key: "api_key", value: "OPENAI_API_KEY" },
      { key: "", value: "ignored" },
    ];
    const doc = buildDocument(form);
    expect(doc["labeller.parameters.model"]).toBe("gpt-4o-mini");
    expect(doc["labeller.parameters.api_key"]).toBe("OPENAI_API_KEY");
    expect(Object.keys(doc).some((k) => k.endsWith("."))).toBe(false);
  });

  it("lets an advanced upload override form fields key by key", () => {
    const form = emptyForm();
    form.strategy = "random";
    form.querySize = "10";
    form.advanced = parseAdvancedDocument('{"al": "coreset", "al.seed": 7}');
    const doc = buildDocument(form);
    expect(doc["al"]).toBe("coreset"); // upload wins
    expect(doc["al.query_size"]).toBe(10); // form field survives
    expect(doc["al.seed"]).toBe(7);
  });

  it("only sets al.mode for experimental-design runs", () => {
    const form = emptyForm();
    expect(buildDocument(form)["al.mode"]).toBeUndefined();
    form.mode = "ed";
    expect(buildDocument(form)["al.mode"]).toBe("ed");
  });
});

describe("parseAdvancedDocument", () => {
  it("flattens nested JSON to dotted keys", () => {
    const doc = parseAdvancedDocument(
      '{"al": {"strategy": "coreset", "query_size": 5}, "labeller": "human"}',
    );
    expect(doc).toEqual({
      "al.strategy": "coreset",
      "al.query_size": 5,
      labeller: "human",
    });
  });

  it("keeps lists as values rather than flattening into them", () => {
    const doc = parseAdvancedDocument('{"evaluation": {"metrics": ["bleu"]}}');
    expect(doc["evaluation.metrics"]).toEqual(["bleu"]);
  });

  it("rejects syntax errors with a pointed message", () => {
    expect(() => parseAdvancedDocument("al: coreset")).toThrow(/not valid JSON/);
  });

  it("rejects non-object documents", () => {
    expect(() => parseAdvancedDocument('["al"]')).toThrow(/JSON object/);
    expect(() => parseAdvancedDocument('"al"')).toThrow(/JSON object/);
  });
});

describe("echoDocument", () => {
  it("prints keys in stable sorted order", () => {
    const text = echoDocument({ b: 2, a: 1 });
    expect(text.indexOf('"a"')).toBeLessThan(text.indexOf('"b"'));
    expect(JSON.parse(text)).toEqual({ a: 1, b: 2 });
  });
});

describe("mergeAdvanced", () => {
  it("is a plain right-biased merge", () => {
    expect(mergeAdvanced({ a: 1, b: 2 }, { b: 3, c: 4 })).toEqual({
      a: 1,
      b: 3,
      c: 4,
    });
  });
});
