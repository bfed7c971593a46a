// Shared test support: a scripted fetch double for unit tests and a real
// engine-service spawner for the live suites.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import type { FetchLike } from "../src/api.js";

interface RecordedCall {
  url: string;
  method: string;
  body: string | null;
}

export class FakeFetch {
  calls: RecordedCall[] = [];
  private queue: Array<{ status: number; body: string }> = [];

  reply(status: number, body: unknown): void {
    this.queue.push({ status, body: JSON.stringify(body) });
  }

  fn: FetchLike = (url, init) => {
    this.calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ?? null,
    });
    const next = this.queue.shift();
    if (next === undefined) {
      return Promise.reject(new Error(`no scripted reply for ${url}`));
    }
    return Promise.resolve({
      status: next.status,
      text: () => Promise.resolve(next.body),
    });
  };
}

// ---------------------------------------------------------------------------
// Live service

export interface LiveService {
  baseUrl: string;
  stop(): Promise<void>;
}

const ENGINE_CMD = process.env["CONSOLE_TEST_ENGINE"] ?? "python3 -m epistemic_engine.cli";

export function defaultServiceConfig(port: number): Record<string, unknown> {
  return {
    bind: `127.0.0.1:${port}`,
    tick_mode: "manual",
    engine: { guardrail_mode: "flag_for_review" },
    sources: [
      {
        id: "feed",
        token: "feed-token",
        strategies: [
          "direct",
          "context_aware",
          "goal_oriented",
          "reflective",
          "temporal",
          "sector_targeted",
        ],
      },
      { id: "op_a", token: "op-a-token", review: true, strategies: ["direct"] },
      { id: "op_b", token: "op-b-token", review: true, strategies: ["direct"] },
    ],
    blacklist: [
      {
        rule_id: "no_harm",
        assertion: { topic: "harm", predicate: "promoted", polarity: "+" },
      },
    ],
  };
}

function randomPort(): number {
  return 20000 + Math.floor(Math.random() * 25000);
}

async function waitReady(baseUrl: string, child: ChildProcess, stderr: string[]): Promise<void> {
  const deadline = Date.now() + 15000;
  while (Date.now() < deadline) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early:\n${stderr.join("")}`);
    }
    try {
      const res = await fetch(`${baseUrl}/v1/metrics`);
      if (res.status === 200) return;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error(`service never became ready:\n${stderr.join("")}`);
}

export async function spawnService(
  configOverrides?: (config: Record<string, unknown>) => void,
): Promise<LiveService> {
  let lastError: unknown = null;
  for (let attempt = 0; attempt < 3; attempt += 1) {
    const port = randomPort();
    const config = defaultServiceConfig(port);
    configOverrides?.(config);
    const dir = mkdtempSync(join(tmpdir(), "console-test-"));
    const configPath = join(dir, "service.json");
    writeFileSync(configPath, JSON.stringify(config));

    const [cmd, ...baseArgs] = ENGINE_CMD.split(" ") as [string, ...string[]];
    const child = spawn(cmd, [...baseArgs, "serve", "--config", configPath], {
      stdio: ["ignore", "ignore", "pipe"],
    });
    const stderr: string[] = [];
    child.stderr?.on("data", (chunk: Buffer) => stderr.push(chunk.toString()));

    const baseUrl = `http://127.0.0.1:${port}`;
    try {
      await waitReady(baseUrl, child, stderr);
      return {
        baseUrl,
        stop: () =>
          new Promise<void>((resolve) => {
            child.once("exit", () => resolve());
            child.kill("SIGTERM");
            setTimeout(() => child.kill("SIGKILL"), 2000).unref();
          }),
      };
    } catch (err) {
      lastError = err;
      child.kill("SIGKILL");
    }
  }
  throw lastError;
}

export async function rawJson(
  method: string,
  url: string,
  body?: unknown,
): Promise<{ status: number; body: unknown }> {
  const res = await fetch(url, {
    method,
    headers: body === undefined ? undefined : { "content-type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await res.text();
  return { status: res.status, body: text === "" ? null : JSON.parse(text) };
}
