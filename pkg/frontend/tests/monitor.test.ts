// Run monitor: polling discipline with injected timers and the pure chart
// geometry the progress page draws from.

import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/client.js";
import {
  RunMonitor,
  chartPoints,
  curvePolyline,
  describeStop,
  formatSpend,
  pickMetric,
} from "../src/monitor.js";
import type { FetchLike } from "../src/client.js";
import type { CurvePoint, LedgerSnapshot, RunState, RunStatus } from "../src/types.js";

const GEOMETRY = { width: 120, height: 60, pad: 10 };

function ledger(spent = 0): LedgerSnapshot {
  return { input_tokens: 0, output_tokens: 0, spent, budget: null };
}

function point(
  iteration: number,
  labeled: number,
  metrics: Record<string, number>,
): CurvePoint {
  return {
    schema_version: 1,
    iteration,
    labeled_count: labeled,
    selected_ids: [],
    moved_ids: [],
    skipped: [],
    strategy_used: "random",
    metrics,
    eval_count: 0,
    skipped_eval: false,
    ledger: ledger(),
  };
}

function status(state: RunState, extra: Partial<RunStatus> = {}): RunStatus {
  return {
    schema_version: 1,
    run_id: "r1",
    status: state,
    phase: state,
    iteration: 1,
    labeled: 10,
    unlabeled: 90,
    test: 0,
    model_ref: "base",
    stop_reason: null,
    error: null,
    strategy: "random",
    mode: "al",
    ledger: ledger(1.25),
    ...extra,
  };
}

describe("pickMetric", () => {
  it("prefers the most recent point that carries metrics", () => {
    const points = [
      point(0, 10, { bleu: 0.1, rouge1: 0.2 }),
      point(1, 20, {}),
    ];
    // the last point has no metrics; fall back to the previous one
    expect(pickMetric(points)).toBe("bleu");
  });

  it("chooses the alphabetically first metric of the last point", () => {
    const points = [point(0, 10, { rougeL: 0.4, bleu: 0.2 })];
    expect(pickMetric(points)).toBe("bleu");
  });

  it("returns null when no point has metrics", () => {
    expect(pickMetric([point(0, 10, {})])).toBeNull();
    expect(pickMetric([])).toBeNull();
  });
});

describe("chartPoints", () => {
  it("spans x over labeled counts and y down from the metric max", () => {
    const rows = chartPoints(
      [point(0, 10, { bleu: 0.5 }), point(1, 30, { bleu: 1.0 })],
      "bleu",
      GEOMETRY,
    );
    expect(rows.length).toBe(2);
    expect(rows[0]?.x).toBe(10); // left edge of the inner box
    expect(rows[1]?.x).toBe(110); // right edge
    expect(rows[1]?.y).toBe(10); // max value rides the top
    expect(rows[0]?.y).toBe(30); // half the max sits mid-height
  });

  it("centers a single point instead of dividing by zero", () => {
    const rows = chartPoints([point(0, 10, { bleu: 0.3 })], "bleu", GEOMETRY);
    expect(rows.length).toBe(1);
    expect(rows[0]?.x).toBe(60);
    expect(Number.isFinite(rows[0]?.y)).toBe(true);
  });

  it("skips points that lack the chosen metric", () => {
    const rows = chartPoints(
      [point(0, 10, {}), point(1, 20, { bleu: 0.2 })],
      "bleu",
      GEOMETRY,
    );
    expect(rows.map((r) => r.labeled)).toEqual([20]);
  });

  it("keeps an all-zero curve on the baseline", () => {
    const rows = chartPoints(
      [point(0, 10, { bleu: 0 }), point(1, 20, { bleu: 0 })],
      "bleu",
      GEOMETRY,
    );
    for (const row of rows) {
      expect(row.y).toBe(GEOMETRY.height - GEOMETRY.pad);
    }
  });

  it("returns no rows for an unknown metric", () => {
    expect(chartPoints([point(0, 10, { bleu: 1 })], "rouge1", GEOMETRY)).toEqual([]);
  });
});

describe("curvePolyline", () => {
  it("renders rounded x,y pairs", () => {
    const attr = curvePolyline(
      [point(0, 10, { bleu: 0.5 }), point(1, 30, { bleu: 1.0 })],
      "bleu",
      GEOMETRY,
    );
    expect(attr).toBe("10,30 110,10");
  });
});

describe("formatSpend", () => {
  it("trims trailing zeros and names the budget", () => {
    expect(formatSpend({ spent: 0.125, budget: null })).toBe("0.125 (no budget)");
    expect(formatSpend({ spent: 1.5, budget: 10 })).toBe("1.5 / 10");
    expect(formatSpend({ spent: 0, budget: null })).toBe("0 (no budget)");
  });
});

describe("describeStop", () => {
  it("names the stop reason or the failure", () => {
    expect(describeStop(status("done", { stop_reason: "labeled_count" }))).toBe(
      "stopped: labeled_count",
    );
    expect(describeStop(status("done"))).toBe("done");
    expect(describeStop(status("failed", { error: "boom" }))).toBe("failed: boom");
    expect(describeStop(status("running"))).toBe("running");
  });
});

describe("RunMonitor", () => {
  function stubClient(answers: { status: RunStatus; points: CurvePoint[] }[]): ApiClient {
    let call = 0;
    const fetchFn: FetchLike = async (url) => {
      const index = Math.min(call, answers.length - 1);
      const answer = answers[index];
      if (!answer) throw new Error("no scripted answer");
      let body: unknown;
      if (url.endsWith("/curve")) {
        body = { schema_version: 1, points: answer.points };
        call += 1; // curve arrives second in each tick's pair
      } else {
        body = answer.status;
      }
      return new Response(JSON.stringify(body), { status: 200 });
    };
    return new ApiClient("http://x", { fetchFn, retryDelayMs: 1 });
  }

  it("polls until the run finishes, then stops itself", async () => {
    const updates: string[] = [];
    const timers: Array<() => void> = [];
    let cleared = 0;
    const monitor = new RunMonitor(
      stubClient([
        { status: status("running"), points: [] },
        { status: status("done"), points: [point(0, 10, { bleu: 1 })] },
      ]),
      "r1",
      {
        intervalMs: 5,
        onUpdate: (snapshot) => updates.push(snapshot.status.status),
        setIntervalFn: (fn) => {
          timers.push(fn);
          return 1;
        },
        clearIntervalFn: () => {
          cleared += 1;
        },
      },
    );

    monitor.start();
    await Promise.resolve();
    expect(timers.length).toBe(1);

    // let the immediate tick and one interval tick settle
    await new Promise((resolve) => setTimeout(resolve, 20));
    timers[0]?.();
    await new Promise((resolve) => setTimeout(resolve, 20));

    expect(updates).toEqual(["running", "done"]);
    expect(cleared).toBe(1);

    // after the run is done the monitor must not re-arm
    monitor.stop();
    expect(cleared).toBe(1);
  });

  it("routes request failures to onError and keeps going", async () => {
    let shouldFail = true;
    const fetchFn: FetchLike = async (url) => {
      if (shouldFail) throw new TypeError("offline");
      const body = url.endsWith("/curve")
        ? { schema_version: 1, points: [] }
        : status("running");
      return new Response(JSON.stringify(body), { status: 200 });
    };
    const client = new ApiClient("http://x", {
      fetchFn,
      maxAttempts: 1,
      retryDelayMs: 1,
    });
    const errors: unknown[] = [];
    const updates: string[] = [];
    const monitor = new RunMonitor(client, "r1", {
      onUpdate: (s) => updates.push(s.status.status),
      onError: (e) => errors.push(e),
      setIntervalFn: () => 1,
      clearIntervalFn: () => undefined,
    });

    await monitor.tick();
    expect(errors.length).toBe(1);
    expect(updates).toEqual([]);

    shouldFail = false;
    await monitor.tick();
    expect(updates).toEqual(["running"]);
    monitor.stop();
  });

  it("does not stack ticks while one is still in flight", async () => {
    let resolveGate: () => void = () => undefined;
    const gate = new Promise<void>((resolve) => {
      resolveGate = resolve;
    });
    let calls = 0;
    const fetchFn: FetchLike = async (url) => {
      calls += 1;
      await gate;
      const body = url.endsWith("/curve")
        ? { schema_version: 1, points: [] }
        : status("running");
      return new Response(JSON.stringify(body), { status: 200 });
    };
    const client = new ApiClient("http://x", { fetchFn, retryDelayMs: 1 });
    const monitor = new RunMonitor(client, "r1", {
      onUpdate: () => undefined,
      setIntervalFn: () => 1,
      clearIntervalFn: () => undefined,
    });

    const first = monitor.tick();
    const second = monitor.tick(); // must be a no-op while the first runs
    resolveGate();
    await Promise.all([first, second]);
    expect(calls).toBe(2); // status + curve from the first tick only
    monitor.stop();
  });
});
