// ============================================================================
// Page wiring
// ============================================================================
//
// Hash-routed single page: #/runs (list), #/new (setup form), #/run/<id>
// (monitor), #/annotate/<id> (annotation). Every view rebuilds itself from
// the control API on entry; the browser keeps no state worth losing.

import { AnnotateLoop, AnnotationInputError } from "./annotate.js";
import { ApiClient, ApiError } from "./client.js";
import { append, clear, el } from "./dom.js";
import {
  buildDocument,
  echoDocument,
  emptyForm,
  parseAdvancedDocument,
  type RunFormState,
} from "./form.js";
import {
  RunMonitor,
  curvePolyline,
  describeStop,
  formatSpend,
  pickMetric,
} from "./monitor.js";
import { KNOWN_METRICS, errorsByField, validateConfig } from "./validation.js";
import type { AnnotationTask, FieldError, RunStatus } from "./types.js";

interface ViewContext {
  client: ApiClient;
  root: HTMLElement;
  /** teardown hooks for timers owned by the active view */
  cleanup: Array<() => void>;
}

export function mountApp(root: HTMLElement, client: ApiClient): () => void {
  const context: ViewContext = { client, root, cleanup: [] };

  const render = () => {
    for (const fn of context.cleanup.splice(0)) fn();
    clear(root);
    const hash = window.location.hash || "#/runs";
    const runMatch = /^#\/run\/(.+)$/.exec(hash);
    const annotateMatch = /^#\/annotate\/(.+)$/.exec(hash);
    if (hash === "#/new") {
      renderSetup(context);
    } else if (runMatch && runMatch[1]) {
      renderMonitor(context, decodeURIComponent(runMatch[1]));
    } else if (annotateMatch && annotateMatch[1]) {
      renderAnnotate(context, decodeURIComponent(annotateMatch[1]));
    } else {
      renderRunList(context);
    }
  };

  window.addEventListener("hashchange", render);
  render();
  return () => {
    window.removeEventListener("hashchange", render);
    for (const fn of context.cleanup.splice(0)) fn();
  };
}

function nav(active: string): HTMLElement {
  const link = (href: string, label: string) =>
    el(
      "a",
      { href, class: href === active ? "nav-link active" : "nav-link" },
      label,
    );
  return el(
    "nav",
    { class: "topnav" },
    el("span", { class: "brand" }, "labelloop"),
    link("#/runs", "Runs"),
    link("#/new", "New run"),
  );
}

function errorBanner(message: string): HTMLElement {
  return el("div", { class: "banner error" }, message);
}

// ---------------------------------------------------------------------------
// Runs list
// ---------------------------------------------------------------------------

function renderRunList(ctx: ViewContext): void {
  const table = el("div", { class: "run-list" }, "Loading runs...");
  append(ctx.root, nav("#/runs"), el("h1", {}, "Runs"), table);

  const refresh = async () => {
    let listing;
    try {
      listing = await ctx.client.listRuns();
    } catch (exc) {
      clear(table);
      append(table, errorBanner(`could not reach the server: ${String(exc)}`));
      return;
    }
    clear(table);
    if (listing.runs.length === 0) {
      append(
        table,
        el("p", { class: "muted" }, "No runs yet. ", el("a", { href: "#/new" }, "Start one.")),
      );
      return;
    }
    const rows = listing.runs.map((run) =>
      el(
        "tr",
        {},
        el("td", {}, el("a", { href: `#/run/${encodeURIComponent(run.run_id)}` }, run.run_id)),
        el("td", {}, run.strategy),
        el("td", {}, run.status),
        el("td", {}, String(run.labeled)),
        el("td", {}, describeStop(run)),
      ),
    );
    append(
      table,
      el(
        "table",
        {},
        el(
          "thead",
          {},
          el(
            "tr",
            {},
            el("th", {}, "run"),
            el("th", {}, "strategy"),
            el("th", {}, "status"),
            el("th", {}, "labeled"),
            el("th", {}, "outcome"),
          ),
        ),
        el("tbody", {}, ...rows),
      ),
    );
  };

  void refresh();
  const handle = setInterval(() => void refresh(), 3000);
  ctx.cleanup.push(() => clearInterval(handle));
}

// ---------------------------------------------------------------------------
// Setup form
// ---------------------------------------------------------------------------

function renderSetup(ctx: ViewContext): void {
  const form = emptyForm();
  const fieldErrors = el("div", {});
  const echo = el("pre", { class: "echo" });
  const errorSlots = new Map<string, HTMLElement>();

  const refreshEcho = () => {
    echo.textContent = echoDocument(buildDocument(form));
  };

  const showErrors = (errors: FieldError[]) => {
    for (const slot of errorSlots.values()) clear(slot);
    clear(fieldErrors);
    const grouped = errorsByField(errors);
    const loose: string[] = [];
    for (const [field, messages] of grouped) {
      const slot = errorSlots.get(field);
      if (slot) {
        append(slot, messages.join("; "));
      } else {
        loose.push(`${field || "config"}: ${messages.join("; ")}`);
      }
    }
    if (loose.length > 0) {
      append(fieldErrors, errorBanner(loose.join(" | ")));
    }
  };

  // one labeled input bound to a string property of the form state
  const field = <K extends keyof RunFormState>(
    label: string,
    key: K,
    dottedField: string,
    placeholder = "",
  ): HTMLElement => {
    const input = el("input", {
      type: "text",
      placeholder,
      value: String(form[key] ?? ""),
      oninput: (event) => {
        (form[key] as unknown as string) = (event.target as HTMLInputElement).value;
        refreshEcho();
      },
    });
    const slot = el("div", { class: "field-error", "data-field": dottedField });
    errorSlots.set(dottedField, slot);
    return el("label", { class: "field" }, el("span", {}, label), input, slot);
  };

  const select = (
    label: string,
    options: string[],
    value: string,
    dottedField: string,
    onChange: (v: string) => void,
  ): HTMLElement => {
    const node = el(
      "select",
      {
        onchange: (event) => {
          onChange((event.target as HTMLSelectElement).value);
          refreshEcho();
        },
      },
      ...options.map((o) =>
        el("option", o === value ? { value: o, selected: true } : { value: o }, o),
      ),
    );
    const slot = el("div", { class: "field-error", "data-field": dottedField });
    errorSlots.set(dottedField, slot);
    return el("label", { class: "field" }, el("span", {}, label), node, slot);
  };

  const strategySelect = select(
    "Query strategy",
    ["random"],
    form.strategy,
    "al",
    (v) => {
      form.strategy = v;
    },
  );

  // provider parameter rows; unknown providers get plain key/value entry
  const paramRows = el("div", { class: "param-rows" });
  const addParamRow = (key = "", value = "") => {
    const row = { key, value };
    form.labelerParams.push(row);
    const keyInput = el("input", {
      type: "text",
      placeholder: "parameter (model, max_tokens, ...)",
      value: key,
      oninput: (event) => {
        row.key = (event.target as HTMLInputElement).value;
        refreshEcho();
      },
    });
    const valueInput = el("input", {
      type: "text",
      placeholder: "value",
      value,
      oninput: (event) => {
        row.value = (event.target as HTMLInputElement).value;
        refreshEcho();
      },
    });
    append(paramRows, el("div", { class: "param-row" }, keyInput, valueInput));
    refreshEcho();
  };

  const datasetStatus = el("span", { class: "muted" });
  const datasetUpload = el("input", {
    type: "file",
    onchange: async (event) => {
      const input = event.target as HTMLInputElement;
      const file = input.files?.[0];
      if (!file) return;
      try {
        const uploaded = await ctx.client.uploadDataset(file.name, await file.text());
        form.datasetPath = uploaded.path;
        datasetStatus.textContent = `uploaded to ${uploaded.path}`;
        refreshEcho();
      } catch (exc) {
        datasetStatus.textContent = "";
        showErrors(exc instanceof ApiError ? exc.errors : [{ field: "data.path", message: String(exc) }]);
      }
    },
  });

  const advancedStatus = el("span", { class: "muted" });
  const advancedUpload = el("input", {
    type: "file",
    accept: ".json",
    onchange: async (event) => {
      const input = event.target as HTMLInputElement;
      const file = input.files?.[0];
      if (!file) return;
      try {
        form.advanced = parseAdvancedDocument(await file.text());
        advancedStatus.textContent = `${file.name}: ${Object.keys(form.advanced).length} keys override the form`;
        refreshEcho();
      } catch (exc) {
        form.advanced = null;
        advancedStatus.textContent = "";
        showErrors([{ field: "config", message: String(exc) }]);
      }
    },
  });

  const submitButton = el("button", { type: "submit" }, "Create run") as HTMLButtonElement;

  const onSubmit = async (event: Event) => {
    event.preventDefault();
    const doc = buildDocument(form);
    const errors = validateConfig(doc);
    if (errors.length > 0) {
      showErrors(errors); // same field ids the server would use
      return;
    }
    submitButton.disabled = true;
    try {
      const runName = typeof doc["run.name"] === "string" ? (doc["run.name"] as string) : undefined;
      const created = await ctx.client.createRun(doc, runName);
      window.location.hash = `#/run/${encodeURIComponent(created.run_id)}`;
    } catch (exc) {
      if (exc instanceof ApiError) {
        showErrors(exc.errors);
      } else {
        showErrors([{ field: "", message: String(exc) }]);
      }
    } finally {
      submitButton.disabled = false;
    }
  };

  const formNode = el(
    "form",
    { class: "setup", onsubmit: onSubmit },
    el("h2", {}, "Data"),
    field("Dataset path on the server", "datasetPath", "data.path", "data/pool.json"),
    el("label", { class: "field" }, el("span", {}, "Or upload a dataset"), datasetUpload, datasetStatus),
    el("h2", {}, "Selection"),
    strategySelect,
    field("Initial query size", "initQuerySize", "al.init_query_size", "count or fraction"),
    field("Query size per iteration", "querySize", "al.query_size", "count or fraction"),
    field("Iterations", "numIterations", "al.num_iterations", "10"),
    field("Seed", "seed", "al.seed", "0"),
    field("Test fraction", "testFraction", "al.test_fraction", "0.2"),
    el("h2", {}, "Labeler"),
    select(
      "Labeler",
      ["human", "oracle", "noisy_oracle", "api_llm", "local_llm"],
      form.labeler,
      "labeller",
      (v) => {
        form.labeler = v;
      },
    ),
    el(
      "div",
      { class: "field" },
      el("span", {}, "Labeler parameters"),
      paramRows,
      el("button", { type: "button", onclick: () => addParamRow() }, "Add parameter"),
    ),
    field("Prompt template", "promptTemplate", "labeller.prompt_template", "{input}"),
    el("h2", {}, "Budget and prices"),
    field("Budget", "budget", "al.budget"),
    field("Input price per 1M tokens", "priceInputPer1m", "labeller.price.input_per_1m"),
    field("Output price per 1M tokens", "priceOutputPer1m", "labeller.price.output_per_1m"),
    field("Batch discount", "priceBatchDiscount", "labeller.price.batch_discount"),
    el("h2", {}, "Stopping"),
    field("Stop at labeled count", "stopLabeledCount", "stopping.labeled_count"),
    field(`Stop metric (${KNOWN_METRICS.join(", ")})`, "stopMetric", "stopping.metric"),
    field("Stop metric threshold", "stopThreshold", "stopping.metric_threshold"),
    field("Metrics (comma separated)", "metrics", "evaluation.metrics"),
    el("h2", {}, "Advanced"),
    el(
      "label",
      { class: "field" },
      el("span", {}, "Config document upload (JSON, overrides form fields)"),
      advancedUpload,
      advancedStatus,
    ),
    field("Run name", "runName", "run.name"),
    fieldErrors,
    el("h2", {}, "Resolved configuration"),
    echo,
    submitButton,
  );

  append(ctx.root, nav("#/new"), el("h1", {}, "New run"), formNode);
  refreshEcho();

  // the strategy list is authoritative on the server
  void ctx.client
    .strategies()
    .then((response) => {
      const selectNode = strategySelect.querySelector("select");
      if (!selectNode) return;
      clear(selectNode);
      for (const name of response.strategies) {
        append(
          selectNode,
          el("option", name === form.strategy ? { value: name, selected: true } : { value: name }, name),
        );
      }
    })
    .catch(() => {
      /* the static default list stays usable offline */
    });
}

// ---------------------------------------------------------------------------
// Run monitor
// ---------------------------------------------------------------------------

function renderMonitor(ctx: ViewContext, runId: string): void {
  const statusLine = el("p", { class: "status-line" }, "Loading...");
  const progress = el("p", {});
  const spend = el("p", {});
  const chartBox = el("div", { class: "chart" });
  const annotateLink = el("p", {});
  const errorBox = el("div", {});

  append(
    ctx.root,
    nav(""),
    el("h1", {}, `Run ${runId}`),
    statusLine,
    progress,
    spend,
    annotateLink,
    chartBox,
    errorBox,
  );

  const monitor = new RunMonitor(ctx.client, runId, {
    intervalMs: 2000,
    onUpdate: ({ status, points }) => {
      clear(errorBox);
      statusLine.textContent =
        `${describeStop(status)} | phase: ${status.phase ?? "-"} | iteration ${status.iteration}`;
      progress.textContent =
        `labeled ${status.labeled} | unlabeled ${status.unlabeled} | test ${status.test}`;
      spend.textContent = `spend: ${formatSpend(status.ledger)}`;

      clear(annotateLink);
      if (status.status === "waiting_human") {
        append(
          annotateLink,
          el(
            "a",
            { href: `#/annotate/${encodeURIComponent(runId)}`, class: "annotate-cta" },
            "Annotation queue is waiting, annotate now",
          ),
        );
      }

      clear(chartBox);
      const metric = pickMetric(points);
      if (metric === null) {
        append(chartBox, el("p", { class: "muted" }, "No evaluated points yet."));
        return;
      }
      const geometry = { width: 560, height: 220, pad: 24 };
      const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
      svg.setAttribute("viewBox", `0 0 ${geometry.width} ${geometry.height}`);
      svg.setAttribute("class", "curve");
      const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
      line.setAttribute("points", curvePolyline(points, metric, geometry));
      line.setAttribute("fill", "none");
      line.setAttribute("stroke", "currentColor");
      line.setAttribute("stroke-width", "2");
      svg.appendChild(line);
      append(
        chartBox,
        el("h2", {}, `${metric} by labeled count`),
        svg,
        el(
          "p",
          { class: "muted" },
          points
            .map((p) => `${p.labeled_count}: ${(p.metrics[metric] ?? 0).toFixed(4)}`)
            .join("  "),
        ),
      );
    },
    onError: (exc) => {
      clear(errorBox);
      if (exc instanceof ApiError && exc.status === 404) {
        append(errorBox, errorBanner(`run ${runId} does not exist on this server`));
        monitor.stop();
      } else {
        append(errorBox, errorBanner(`poll failed: ${String(exc)}`));
      }
    },
  });
  monitor.start();
  ctx.cleanup.push(() => monitor.stop());
}

// ---------------------------------------------------------------------------
// Annotation view
// ---------------------------------------------------------------------------

function renderAnnotate(ctx: ViewContext, runId: string): void {
  append(ctx.root, nav(""), el("h1", {}, `Annotate ${runId}`));

  const startBox = el("div", { class: "annotate-start" });
  const workBox = el("div", { class: "annotate-work" });
  append(ctx.root, startBox, workBox);

  const nameInput = el("input", {
    type: "text",
    placeholder: "your annotator name",
  }) as HTMLInputElement;
  append(
    startBox,
    el("label", { class: "field" }, el("span", {}, "Annotator"), nameInput),
    el(
      "button",
      {
        type: "button",
        onclick: () => {
          const annotator = nameInput.value.trim();
          if (annotator === "") return;
          clear(startBox);
          void startLoop(annotator);
        },
      },
      "Start annotating",
    ),
  );

  const startLoop = async (annotator: string) => {
    const banner = el("div", {});
    const queuePosition = el("p", { class: "muted" });
    const inputText = el("pre", { class: "task-input" });
    const textArea = el("textarea", { rows: "6" }) as HTMLTextAreaElement;
    const inlineError = el("div", { class: "field-error" });
    const submitButton = el("button", { type: "button" }, "Submit") as HTMLButtonElement;
    const skipButton = el("button", { type: "button" }, "Skip") as HTMLButtonElement;
    const doneBox = el("div", {});

    append(
      workBox,
      banner,
      queuePosition,
      el("h2", {}, "Input"),
      inputText,
      el("label", { class: "field" }, el("span", {}, "Annotation"), textArea, inlineError),
      el("div", { class: "buttons" }, submitButton, skipButton),
      doneBox,
    );

    let leaseSeconds = 1800;
    try {
      const config = await ctx.client.runConfig(runId);
      const lease = config.config["labeller.lease_seconds"];
      if (typeof lease === "number" && lease > 0) leaseSeconds = lease;
    } catch {
      // default stands; the server still enforces the real lease
    }

    const setBusy = (busy: boolean) => {
      submitButton.disabled = busy || loop.current === null;
      skipButton.disabled = busy || loop.current === null;
    };

    const loop = new AnnotateLoop(ctx.client, runId, annotator, {
      leaseSeconds,
      events: {
        onTask: (task: AnnotationTask) => {
          clear(banner);
          inputText.textContent = task.input_text;
          textArea.value = "";
          setBusy(false);
        },
        onLeaseLost: (taskId: string) => {
          clear(banner);
          append(
            banner,
            errorBanner(
              `the lease on ${taskId} ran out; the task went back to the queue`,
            ),
          );
          void next();
        },
      },
    });
    ctx.cleanup.push(() => loop.dispose());

    const refreshCounts = async () => {
      try {
        const counts = await loop.refreshCounts();
        queuePosition.textContent =
          `queue: ${counts.pending} pending, ${counts.claimed} claimed, ` +
          `${counts.done} done, ${counts.skipped} skipped`;
      } catch {
        // non-essential indicator
      }
    };

    const next = async () => {
      inlineError.textContent = "";
      await refreshCounts();
      let task: AnnotationTask | null = null;
      try {
        task = await loop.claimNext();
      } catch (exc) {
        clear(banner);
        append(banner, errorBanner(String(exc)));
        return;
      }
      if (task === null) {
        inputText.textContent = "";
        setBusy(true);
        clear(doneBox);
        append(
          doneBox,
          el(
            "p",
            {},
            "No pending tasks right now. ",
            el("a", { href: `#/run/${encodeURIComponent(runId)}` }, "Back to the run."),
          ),
        );
        return;
      }
      clear(doneBox);
      setBusy(false);
    };

    const resolve = async (action: "submit" | "skip") => {
      inlineError.textContent = "";
      setBusy(true);
      try {
        if (action === "submit") {
          await loop.submit(textArea.value);
        } else {
          await loop.skip();
        }
        await next();
      } catch (exc) {
        if (exc instanceof AnnotationInputError) {
          inlineError.textContent = exc.message;
          setBusy(false);
        } else if (exc instanceof ApiError) {
          clear(banner);
          append(banner, errorBanner(exc.message));
          if (loop.current === null) {
            await next(); // claim was lost; move on
          } else {
            setBusy(false);
          }
        } else {
          clear(banner);
          append(banner, errorBanner(String(exc)));
          setBusy(false);
        }
      }
    };

    submitButton.addEventListener("click", () => void resolve("submit"));
    skipButton.addEventListener("click", () => void resolve("skip"));
    await next();
  };
}

// ---------------------------------------------------------------------------
// Boot
// ---------------------------------------------------------------------------

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const client = new ApiClient(window.location.origin);
  mountApp(root, client);
}

declare global {
  interface Window {
    __labelloopTest?: boolean;
  }
}

if (typeof window !== "undefined" && !window.__labelloopTest) {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", boot);
  } else {
    boot();
  }
}
