// Release gate for the console, one printed line per criterion.
//
// Pinned tolerances: the zero-authority comparison is byte-exact on the
// audit response body (no field subsetting, no float rounding); the race
// criterion counts HTTP statuses exactly.

import { afterAll, describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";
import { draftToBody, emptyDraft, validateDraft, type ComposeDraft } from "../src/validate.js";
import {
  applyAudit,
  applyMetrics,
  applyPending,
  applyState,
  emptyViewModel,
  type ConsoleViewModel,
} from "../src/viewmodel.js";
import { rawJson, spawnService, type LiveService } from "./helpers.js";

const results: string[] = [];

function record(name: string, ok: boolean, detail: string): void {
  results.push(`${ok ? "PASS" : "FAIL"}  ${name}  [${detail}]`);
  expect(ok, `${name}: ${detail}`).toBe(true);
}

afterAll(() => {
  console.log("\n--- console acceptance criteria ---");
  for (const line of results) console.log(line);
});

function draft(overrides: Partial<ComposeDraft>): ComposeDraft {
  return { ...emptyDraft(), ...overrides };
}

// The scripted session: inject, flag, approve, retire. Declared once so the
// console run and the console-free run cannot drift apart.
const OBSERVATION = draft({
  kind: "observation",
  sector: "perc",
  k: "0",
  anchor: "0.7",
  priority: "0.9",
  text: "route a reads clear",
  topic: "route_a",
  predicate: "clear",
});
const PIN = draft({
  kind: "constraint",
  sector: "ethics",
  k: "2",
  priority: "1.0",
  pinned: true,
  text: "keep the guard enabled",
  topic: "guard",
  predicate: "enabled",
});
const CLASH = draft({
  kind: "goal",
  sector: "plan",
  k: "1",
  anchor: "0.9",
  priority: "1.0",
  text: "disable the guard",
  topic: "guard",
  predicate: "enabled",
  polarity: "-",
});

async function consoleSession(service: LiveService): Promise<number> {
  const api = new ApiClient(service.baseUrl, (input, init) => fetch(input, init));
  const vm: ConsoleViewModel = emptyViewModel();

  // every mutation flows through the console's own validate and client
  // code, with full read refreshes in between (reads must add nothing)
  const refresh = async () => {
    applyState(vm, await api.state());
    applyMetrics(vm, await api.metrics());
    applyPending(vm, (await api.pending()).entries);
    applyAudit(vm, (await api.audit(vm.lastSeq)).records);
  };

  await refresh();
  for (const d of [OBSERVATION, PIN, CLASH]) {
    expect(validateDraft(d, vm.kMax)).toEqual({});
  }

  const first = await api.inject(draftToBody(OBSERVATION, "feed", "feed-token"));
  expect(first.record.decision).toBe("admitted");
  await refresh();

  const pinned = await api.inject(draftToBody(PIN, "feed", "feed-token"));
  expect(pinned.record.decision).toBe("admitted");
  await refresh();

  const flagged = await api.inject(draftToBody(CLASH, "feed", "feed-token"));
  expect(flagged.record.decision).toBe("flagged_for_review");
  expect(vm.pending.length).toBe(0); // panel updates only from the server
  await refresh();
  expect(vm.pending.map((e) => e.pending_id)).toContain(flagged.pending_id!);

  await api.retire(pinned.record.admitted_ids[0]!, "op_a", "op-a-token");
  await refresh();

  const approved = await api.resolvePending(flagged.pending_id!, "approve", "op_a", "op-a-token");
  expect(approved.record.decision).toBe("admitted");
  await refresh();
  expect(vm.pending.length).toBe(0);

  await api.retire(first.record.admitted_ids[0]!, "op_a", "op-a-token");
  await refresh();
  return vm.lastSeq;
}

// The same six mutations as bare HTTP calls. No console module is imported
// into this path; bodies are written out longhand.
async function rawSession(service: LiveService): Promise<void> {
  const base = `${service.baseUrl}/v1`;
  const inject = (fragment: Record<string, unknown>, priority: number) =>
    rawJson("POST", `${base}/inject`, {
      strategy: "direct",
      source: "feed",
      token: "feed-token",
      priority,
      fragment,
    });

  const first = await inject(
    {
      text: "route a reads clear",
      kind: "observation",
      sector: "perc",
      k: 0,
      anchor: 0.7,
      assertion: { topic: "route_a", predicate: "clear", polarity: "positive" },
    },
    0.9,
  );
  const pinned = await inject(
    {
      text: "keep the guard enabled",
      kind: "constraint",
      sector: "ethics",
      k: 2,
      anchor: 0.5,
      pinned: true,
      assertion: { topic: "guard", predicate: "enabled", polarity: "positive" },
    },
    1.0,
  );
  const flagged = await inject(
    {
      text: "disable the guard",
      kind: "goal",
      sector: "plan",
      k: 1,
      anchor: 0.9,
      assertion: { topic: "guard", predicate: "enabled", polarity: "negative" },
    },
    1.0,
  );

  const actor = { actor: "op_a", token: "op-a-token" };
  const pinId = (pinned.body as { record: { admitted_ids: number[] } }).record.admitted_ids[0]!;
  const firstId = (first.body as { record: { admitted_ids: number[] } }).record.admitted_ids[0]!;
  const pendingId = (flagged.body as { pending_id: number }).pending_id;
  await rawJson("POST", `${base}/beliefs/${pinId}/retire`, actor);
  await rawJson("POST", `${base}/pending/${pendingId}/approve`, actor);
  await rawJson("POST", `${base}/beliefs/${firstId}/retire`, actor);
}

async function auditBytes(service: LiveService): Promise<string> {
  const res = await fetch(`${service.baseUrl}/v1/audit?since=0`);
  return res.text();
}

describe("console acceptance", () => {
  it("zero authority: the console session leaves a byte-identical audit", async () => {
    const withConsole = await spawnService();
    let consoleAudit: string;
    let sessionRecords = 0;
    try {
      sessionRecords = await consoleSession(withConsole);
      consoleAudit = await auditBytes(withConsole);
    } finally {
      await withConsole.stop();
    }

    const withoutConsole = await spawnService();
    let rawAudit: string;
    try {
      await rawSession(withoutConsole);
      rawAudit = await auditBytes(withoutConsole);
    } finally {
      await withoutConsole.stop();
    }

    const identical =
      consoleAudit === rawAudit &&
      Buffer.from(consoleAudit).equals(Buffer.from(rawAudit));
    record(
      "console zero-authority",
      identical && sessionRecords === 6,
      `${sessionRecords} audit records, console vs raw session byte-identical: ${identical}`,
    );
  });

  it("pending race: two operators on one id get exactly one 200 and one 409", async () => {
    const service = await spawnService();
    try {
      const api = new ApiClient(service.baseUrl, (input, init) => fetch(input, init));
      await api.inject(draftToBody(PIN, "feed", "feed-token"));
      const flagged = await api.inject(draftToBody(CLASH, "feed", "feed-token"));
      expect(flagged.record.decision).toBe("flagged_for_review");
      const id = flagged.pending_id!;

      const outcomes = await Promise.allSettled([
        api.resolvePending(id, "approve", "op_a", "op-a-token"),
        api.resolvePending(id, "reject", "op_b", "op-b-token"),
      ]);
      const won = outcomes.filter((o) => o.status === "fulfilled");
      const conflicts = outcomes.filter(
        (o): o is PromiseRejectedResult => o.status === "rejected",
      );
      const conflictErr = conflicts[0]?.reason as ApiError | undefined;
      const ok =
        won.length === 1 &&
        conflicts.length === 1 &&
        conflictErr instanceof ApiError &&
        conflictErr.status === 409 &&
        conflictErr.code === "already_resolved";
      record(
        "pending race",
        ok,
        `statuses: one 200, one 409 ${conflictErr?.code ?? "?"}`,
      );
    } finally {
      await service.stop();
    }
  });
});
