// Deterministic RNG for tests (mulberry32) plus a fetch wrapper that injects
// transport failures around real requests.

import type { FetchLike } from "../../src/client.js";

export type Rng = () => number;

export function mulberry32(seed: number): Rng {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function pick<T>(rng: Rng, items: readonly T[]): T {
  const index = Math.floor(rng() * items.length);
  const item = items[Math.min(index, items.length - 1)];
  return item as T;
}

export function randInt(rng: Rng, lo: number, hi: number): number {
  return lo + Math.floor(rng() * (hi - lo + 1));
}

export interface FlakyOptions {
  /** Probability the request fails before it is sent (no server effect). */
  preLossP?: number;
  /** Probability the response is dropped after the server processed it. */
  postLossP?: number;
}

export interface FlakyStats {
  calls: number;
  preLosses: number;
  postLosses: number;
}

/**
 * Wrap a fetch with injected failures. Pre-send losses model requests that
 * never reach the server; post-send losses model processed requests whose
 * response got lost, the case idempotency keys and leases exist for.
 */
export function makeFlakyFetch(
  rng: Rng,
  options: FlakyOptions = {},
  inner: FetchLike = (url, init) => fetch(url, init),
): { fetchFn: FetchLike; stats: FlakyStats } {
  const preLossP = options.preLossP ?? 0;
  const postLossP = options.postLossP ?? 0;
  const stats: FlakyStats = { calls: 0, preLosses: 0, postLosses: 0 };

  const fetchFn: FetchLike = async (url, init) => {
    stats.calls += 1;
    if (rng() < preLossP) {
      stats.preLosses += 1;
      throw new TypeError("injected failure before send");
    }
    const response = await inner(url, init);
    if (rng() < postLossP) {
      stats.postLosses += 1;
      // drain so the connection is reusable, then pretend it never arrived
      await response.arrayBuffer().catch(() => undefined);
      throw new TypeError("injected failure after send");
    }
    return response;
  };

  return { fetchFn, stats };
}
