// Spawns the real control API as a subprocess for integration tests. The
// frontend talks to it over HTTP only, exactly like a browser would.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface TestServer {
  baseUrl: string;
  workDir: string;
  stop(): Promise<void>;
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        probe.close();
        reject(new Error("could not determine a free port"));
        return;
      }
      const port = address.port;
      probe.close(() => resolve(port));
    });
  });
}

export async function startServer(): Promise<TestServer> {
  const port = await freePort();
  const workDir = mkdtempSync(join(tmpdir(), "labelloop-ui-"));
  const child: ChildProcess = spawn(
    "python3",
    [
      "-m",
      "labelloop.server",
      "--host",
      "127.0.0.1",
      "--port",
      String(port),
      "--work-dir",
      join(workDir, "runs"),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  let exited = false;
  child.on("exit", () => {
    exited = true;
  });

  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 20000;
  for (;;) {
    if (exited) {
      throw new Error(`server exited during startup:\n${stderr}`);
    }
    try {
      const response = await fetch(`${baseUrl}/api/health`);
      if (response.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      child.kill("SIGKILL");
      throw new Error(`server did not come up within 20s:\n${stderr}`);
    }
    await sleep(100);
  }

  const stop = async () => {
    if (!exited) {
      child.kill("SIGTERM");
      const killAt = Date.now() + 5000;
      while (!exited && Date.now() < killAt) {
        await sleep(50);
      }
      if (!exited) child.kill("SIGKILL");
    }
    rmSync(workDir, { recursive: true, force: true });
  };

  return { baseUrl, workDir, stop };
}

/** Poll until the predicate resolves true or the timeout elapses. */
export async function waitFor(
  predicate: () => Promise<boolean>,
  timeoutMs = 30000,
  stepMs = 150,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    if (await predicate()) return;
    if (Date.now() > deadline) {
      throw new Error(`condition not met within ${timeoutMs}ms`);
    }
    await sleep(stepMs);
  }
}
