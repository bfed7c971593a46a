// Wire types for the /v1 endpoint set. These mirror the service JSON
// exactly; the console never invents fields and never computes metrics.

export type Polarity = "positive" | "negative";

export type FragmentKindName =
  | "observation"
  | "goal"
  | "constraint"
  | "correction"
  | "heuristic"
  | "reflective_prompt"
  | "meta_report";

// Strategies the console offers. The unsafe literal-union mode exists in
// the engine behind a flag but is never exposed over the service, so it
// has no name here.
export type StrategyName =
  | "direct"
  | "context_aware"
  | "goal_oriented"
  | "reflective"
  | "temporal"
  | "sector_targeted";

export const STRATEGY_NAMES: readonly StrategyName[] = [
  "direct",
  "context_aware",
  "goal_oriented",
  "reflective",
  "temporal",
  "sector_targeted",
];

export const KIND_NAMES: readonly FragmentKindName[] = [
  "observation",
  "goal",
  "constraint",
  "correction",
  "heuristic",
  "reflective_prompt",
  "meta_report",
];

export interface WireAssertion {
  topic: string;
  predicate: string;
  polarity: Polarity;
}

export interface WireCoord {
  sector: string;
  k: number;
}

export interface WireFragment {
  id: number;
  text: string;
  kind: FragmentKindName;
  coord: WireCoord;
  assertion: WireAssertion | null;
  anchor: number;
  pinned: boolean;
  ttl: number | null;
  fast_decay: boolean;
  provenance: string;
  status: string;
  born_tick: number;
}

export interface StateResponse {
  tick: number;
  hash: string;
  k_max: number;
  sectors: string[];
  fragments: WireFragment[];
}

export interface MetricsResponse {
  tick: number;
  kappa: number;
  lambda: number;
  active: number;
  pending: number;
}

export interface RequestSummary {
  source: string;
  strategy: string;
  coord: string;
  kind: string;
  topic: string;
}

export interface AuditRecord {
  seq: number;
  tick: number;
  request_summary: RequestSummary;
  decision: string;
  reason_codes: string[];
  kappa_before: number;
  kappa_after: number;
  lambda_before: number;
  lambda_after: number;
  retracted_ids: number[];
  admitted_ids: number[];
}

export interface AuditResponse {
  records: AuditRecord[];
}

export interface PendingEntry {
  pending_id: number;
  created_tick: number;
  reasons: string[];
  request: {
    source: string;
    strategy: string;
    priority: number;
    coord: string;
    kind: string;
    topic: string;
    text: string;
  };
}

export interface PendingResponse {
  entries: PendingEntry[];
}

export interface InjectFragmentBody {
  text: string;
  kind: FragmentKindName;
  sector: string;
  k: number;
  anchor: number;
  assertion?: WireAssertion;
  pinned?: boolean;
  ttl?: number;
  fast_decay?: boolean;
}

export interface InjectBody {
  strategy: StrategyName;
  source: string;
  token: string;
  priority: number;
  fragment: InjectFragmentBody;
  ttl?: number;
  target?: WireCoord;
}

export interface InjectResponse {
  record: AuditRecord;
  pending_id: number | null;
  metrics: MetricsResponse;
}

export interface ResolveResponse {
  record: AuditRecord;
  metrics: MetricsResponse;
}

export interface TickResponse {
  reports: unknown[];
  metrics: MetricsResponse;
}

export interface ErrorBody {
  error: string;
  detail: string;
}
