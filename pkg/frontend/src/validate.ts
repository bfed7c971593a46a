// Local validation for the compose form. Mirrors the engine's request
// invariants so obviously bad drafts never reach the wire; everything the
// engine could still reject (filters, guardrails, capacity) is left to the
// service and surfaced verbatim from its response.

import type { InjectBody, StrategyName, WireAssertion } from "./types.js";
import { KIND_NAMES, STRATEGY_NAMES } from "./types.js";

// Same shape the form binds to: strings until submission.
export interface ComposeDraft {
  strategy: StrategyName;
  priority: string;
  text: string;
  kind: string;
  sector: string;
  k: string;
  anchor: string;
  topic: string;
  predicate: string;
  polarity: string;
  pinned: boolean;
  ttl: string;
  targetSector: string;
  targetK: string;
}

export function emptyDraft(): ComposeDraft {
  return {
    strategy: "direct",
    priority: "0.9",
    text: "",
    kind: "observation",
    sector: "perc",
    k: "0",
    anchor: "0.5",
    topic: "",
    predicate: "",
    polarity: "+",
    pinned: false,
    ttl: "",
    targetSector: "",
    targetK: "",
  };
}

export type FieldErrors = Partial<Record<keyof ComposeDraft, string>>;

const SECTOR_NAME = /^[a-z][a-z0-9_]*$/;

function parseUnit(raw: string): number | null {
  if (!/^\d+(\.\d+)?$/.test(raw.trim())) return null;
  const value = Number(raw);
  return value >= 0 && value <= 1 ? value : null;
}

function parseNonNegInt(raw: string): number | null {
  if (!/^\d+$/.test(raw.trim())) return null;
  return Number(raw);
}

export function validateDraft(draft: ComposeDraft, kMax: number): FieldErrors {
  const errors: FieldErrors = {};

  if (!STRATEGY_NAMES.includes(draft.strategy)) {
    errors.strategy = "unknown strategy";
  }
  if (parseUnit(draft.priority) === null) {
    errors.priority = "priority must be a number in [0, 1]";
  }
  if (draft.text.trim() === "") {
    errors.text = "fragment text must be non-empty";
  }
  if (!(KIND_NAMES as readonly string[]).includes(draft.kind)) {
    errors.kind = "unknown kind";
  }
  if (!SECTOR_NAME.test(draft.sector) || draft.sector.length > 32) {
    errors.sector = "sector names are [a-z][a-z0-9_]*, at most 32 chars";
  }
  const k = parseNonNegInt(draft.k);
  if (k === null || k > kMax) {
    errors.k = `layer must be an integer in 0..${kMax}`;
  }
  if (parseUnit(draft.anchor) === null) {
    errors.anchor = "anchor must be a number in [0, 1]";
  }

  // Assertion fields are all-or-nothing.
  const assertionParts = [draft.topic, draft.predicate].filter((p) => p.trim() !== "");
  if (assertionParts.length === 1) {
    errors.topic = "assertion needs both topic and predicate (or neither)";
  }
  if (assertionParts.length === 2 && draft.polarity !== "+" && draft.polarity !== "-") {
    errors.polarity = "polarity is + or -";
  }

  if (draft.strategy === "temporal") {
    const ttl = parseNonNegInt(draft.ttl);
    if (ttl === null || ttl < 1) {
      errors.ttl = "temporal injections need ttl >= 1";
    }
  }
  if (draft.strategy === "sector_targeted") {
    if (!SECTOR_NAME.test(draft.targetSector)) {
      errors.targetSector = "target sector required";
    }
    const tk = parseNonNegInt(draft.targetK);
    if (tk === null || tk > kMax) {
      errors.targetK = `target layer must be an integer in 0..${kMax}`;
    }
  }

  return errors;
}

// Only call after validateDraft came back empty.
export function draftToBody(
  draft: ComposeDraft,
  source: string,
  token: string,
): InjectBody {
  let assertion: WireAssertion | undefined;
  if (draft.topic.trim() !== "") {
    assertion = {
      topic: draft.topic.trim(),
      predicate: draft.predicate.trim(),
      polarity: draft.polarity === "-" ? "negative" : "positive",
    };
  }
  const body: InjectBody = {
    strategy: draft.strategy,
    source,
    token,
    priority: Number(draft.priority),
    fragment: {
      text: draft.text,
      kind: draft.kind as InjectBody["fragment"]["kind"],
      sector: draft.sector,
      k: Number(draft.k),
      anchor: Number(draft.anchor),
      ...(assertion ? { assertion } : {}),
      ...(draft.pinned ? { pinned: true } : {}),
    },
  };
  if (draft.strategy === "temporal") {
    body.ttl = Number(draft.ttl);
  }
  if (draft.strategy === "sector_targeted") {
    body.target = { sector: draft.targetSector, k: Number(draft.targetK) };
  }
  return body;
}
