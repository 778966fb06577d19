// @vitest-environment jsdom
//
// Page smoke tests against a canned transport: the setup form must block an
// invalid config client-side (no create request leaves the browser) and must
// render server-side rejections into the same per-field slots.

import { beforeEach, describe, expect, it } from "vitest";
import { ApiClient } from "../src/client.js";
import type { FetchLike } from "../src/client.js";

interface CannedCall {
  url: string;
  method: string;
  body: Record<string, unknown> | null;
}

type Responder = (call: CannedCall) => { status: number; body: unknown } | null;

function cannedFetch(responder: Responder): { fetchFn: FetchLike; calls: CannedCall[] } {
  const calls: CannedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const call: CannedCall = {
      url,
      method: init?.method ?? "GET",
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
    };
    calls.push(call);
    const answer = responder(call);
    if (!answer) throw new TypeError(`no canned answer for ${call.method} ${url}`);
    return new Response(JSON.stringify(answer.body), { status: answer.status });
  };
  return { fetchFn, calls };
}

const STRATEGIES = { status: 200, body: { schema_version: 1, strategies: ["random", "coreset"] } };

async function mountSetupPage(responder: Responder) {
  window.__labelloopTest = true;
  const { mountApp } = await import("../src/app.js");
  window.location.hash = "#/new";
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  const { fetchFn, calls } = cannedFetch(responder);
  const client = new ApiClient("http://api.test", { fetchFn, maxAttempts: 1 });
  const unmount = mountApp(root, client);
  await flush();
  return { root, calls, unmount };
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

function setInput(input: HTMLInputElement, value: string): void {
  input.value = value;
  input.dispatchEvent(new Event("input"));
}

function inputForField(root: HTMLElement, dottedField: string): HTMLInputElement {
  const slot = root.querySelector(`[data-field="${dottedField}"]`);
  if (!slot) throw new Error(`no field slot for ${dottedField}`);
  const input = slot.previousElementSibling;
  if (!(input instanceof HTMLInputElement)) {
    throw new Error(`field ${dottedField} is not a text input`);
  }
  return input;
}

function submitForm(root: HTMLElement): void {
  const form = root.querySelector("form");
  if (!form) throw new Error("setup form not rendered");
  form.dispatchEvent(new Event("submit", { cancelable: true }));
}

beforeEach(() => {
  window.location.hash = "";
});

describe("setup page", () => {
  it("blocks an invalid config before any create request", async () => {
    const { root, calls, unmount } = await mountSetupPage((call) => {
      if (call.url.endsWith("/api/strategies")) return STRATEGIES;
      return null;
    });

    setInput(inputForField(root, "al.query_size"), "1.5");
    const echo = root.querySelector("pre.echo");
    expect(echo?.textContent).toContain("al.query_size");

    submitForm(root);
    await flush();

    const slot = root.querySelector('[data-field="al.query_size"]');
    expect(slot?.textContent).toMatch(/whole/);
    const creates = calls.filter((c) => c.method === "POST" && c.url.endsWith("/api/runs"));
    expect(creates.length).toBe(0);
    expect(window.location.hash).toBe("#/new");
    unmount();
  });

  it("renders a server-side rejection into the matching field slot", async () => {
    const { root, calls, unmount } = await mountSetupPage((call) => {
      if (call.url.endsWith("/api/strategies")) return STRATEGIES;
      if (call.method === "POST" && call.url.endsWith("/api/runs")) {
        return {
          status: 422,
          body: {
            schema_version: 1,
            errors: [{ field: "data.path", message: "dataset not found: missing.json" }],
          },
        };
      }
      return null;
    });

    setInput(inputForField(root, "data.path"), "missing.json");
    submitForm(root);
    await flush();

    const creates = calls.filter((c) => c.method === "POST" && c.url.endsWith("/api/runs"));
    expect(creates.length).toBe(1);
    const sentConfig = creates[0]?.body?.config as Record<string, unknown>;
    expect(sentConfig["data.path"]).toBe("missing.json");
    expect(sentConfig["al"]).toBe("random");

    const slot = root.querySelector('[data-field="data.path"]');
    expect(slot?.textContent).toContain("dataset not found");
    expect(window.location.hash).toBe("#/new"); // still on the form
    unmount();
  });

  it("navigates to the run page when the server accepts", async () => {
    const { root, calls, unmount } = await mountSetupPage((call) => {
      if (call.url.endsWith("/api/strategies")) return STRATEGIES;
      if (call.method === "POST" && call.url.endsWith("/api/runs")) {
        return { status: 200, body: { schema_version: 1, run_id: "run-7" } };
      }
      // the monitor page starts polling as soon as the hash flips
      if (call.url.endsWith("/api/runs/run-7")) {
        return {
          status: 200,
          body: {
            schema_version: 1,
            run_id: "run-7",
            status: "running",
            phase: "train",
            iteration: 0,
            labeled: 5,
            unlabeled: 45,
            test: 0,
            model_ref: "base",
            stop_reason: null,
            error: null,
            strategy: "random",
            mode: "al",
            ledger: { input_tokens: 0, output_tokens: 0, spent: 0, budget: null },
          },
        };
      }
      if (call.url.endsWith("/api/runs/run-7/curve")) {
        return { status: 200, body: { schema_version: 1, run_id: "run-7", points: [] } };
      }
      return null;
    });

    submitForm(root);
    await flush();

    expect(window.location.hash).toBe("#/run/run-7");
    const creates = calls.filter((c) => c.method === "POST" && c.url.endsWith("/api/runs"));
    expect(creates.length).toBe(1);
    unmount();
  });
});

describe("runs page", () => {
  it("lists runs from the server", async () => {
    window.__labelloopTest = true;
    const { mountApp } = await import("../src/app.js");
    window.location.hash = "#/runs";
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app") as HTMLElement;
    const { fetchFn } = cannedFetch((call) => {
      if (call.url.endsWith("/api/runs")) {
        return {
          status: 200,
          body: {
            schema_version: 1,
            runs: [
              {
                schema_version: 1,
                run_id: "alpha",
                status: "done",
                phase: null,
                iteration: 3,
                labeled: 30,
                unlabeled: 0,
                test: 10,
                model_ref: "base",
                stop_reason: "unlabeled_exhausted",
                error: null,
                strategy: "coreset",
                mode: "al",
                ledger: { input_tokens: 0, output_tokens: 0, spent: 0, budget: null },
              },
            ],
          },
        };
      }
      return null;
    });
    const client = new ApiClient("http://api.test", { fetchFn, maxAttempts: 1 });
    const unmount = mountApp(root, client);
    await flush();

    const cells = [...root.querySelectorAll("td")].map((td) => td.textContent);
    expect(cells).toContain("alpha");
    expect(cells).toContain("coreset");
    expect(cells).toContain("stopped: unlabeled_exhausted");
    unmount();
  });
});
