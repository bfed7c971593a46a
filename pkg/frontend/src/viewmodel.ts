// The console's entire screen state, derived solely from /v1 responses.
// Nothing here is authoritative: the engine owns the beliefs, the metrics,
// and the audit numbering. This module only arranges what the service said.

import type {
  AuditRecord,
  MetricsResponse,
  PendingEntry,
  StateResponse,
  WireFragment,
} from "./types.js";
import { emptyDraft, type ComposeDraft } from "./validate.js";

export interface MetricsPoint {
  tick: number;
  kappa: number;
  lambda: number;
}

export const AUDIT_WINDOW = 50;

export interface ConsoleViewModel {
  tick: number;
  hash: string;
  kMax: number;
  sectors: string[];
  // keyed "sector/k"; one entry per grid cell, empty cells included
  grid: Map<string, WireFragment[]>;
  kappa: number;
  lambda: number;
  metricsSeries: MetricsPoint[];
  pending: PendingEntry[];
  auditWindow: AuditRecord[];
  lastSeq: number;
  composeDraft: ComposeDraft;
  // last-good tick shown in the stale banner; null while fetches succeed
  staleSinceTick: number | null;
  toast: string | null;
}

export function emptyViewModel(): ConsoleViewModel {
  return {
    tick: 0,
    hash: "",
    kMax: 0,
    sectors: [],
    grid: new Map(),
    kappa: 1.0,
    lambda: 0.0,
    metricsSeries: [],
    pending: [],
    auditWindow: [],
    lastSeq: 0,
    composeDraft: emptyDraft(),
    staleSinceTick: null,
    toast: null,
  };
}

export function cellKey(sector: string, k: number): string {
  return `${sector}/${k}`;
}

// Rebuild the grid from a state response: one cell per (sector, 0..k_max),
// fragments kept in id order within a cell.
export function applyState(vm: ConsoleViewModel, state: StateResponse): void {
  vm.tick = state.tick;
  vm.hash = state.hash;
  vm.kMax = state.k_max;
  vm.sectors = [...state.sectors];
  const grid = new Map<string, WireFragment[]>();
  for (const sector of state.sectors) {
    for (let k = 0; k <= state.k_max; k += 1) {
      grid.set(cellKey(sector, k), []);
    }
  }
  const sorted = [...state.fragments].sort((a, b) => a.id - b.id);
  for (const fragment of sorted) {
    const key = cellKey(fragment.coord.sector, fragment.coord.k);
    const cell = grid.get(key);
    if (cell) cell.push(fragment);
  }
  vm.grid = grid;
  vm.staleSinceTick = null;
}

export function applyMetrics(vm: ConsoleViewModel, metrics: MetricsResponse): void {
  vm.kappa = metrics.kappa;
  vm.lambda = metrics.lambda;
  const point: MetricsPoint = {
    tick: metrics.tick,
    kappa: metrics.kappa,
    lambda: metrics.lambda,
  };
  const last = vm.metricsSeries[vm.metricsSeries.length - 1];
  if (last !== undefined && last.tick === point.tick) {
    vm.metricsSeries[vm.metricsSeries.length - 1] = point;
  } else if (last !== undefined && last.tick > point.tick) {
    // A response from before the last one we applied; series stays ordered.
    return;
  } else {
    vm.metricsSeries.push(point);
  }
}

export function applyPending(vm: ConsoleViewModel, entries: PendingEntry[]): void {
  vm.pending = [...entries].sort((a, b) => a.pending_id - b.pending_id);
}

export class AuditGapError extends Error {
  constructor(expected: number, got: number) {
    super(`audit gap: expected seq ${expected}, got ${got}`);
  }
}

// Merge a poll batch into the window. Sequence numbers must continue the
// session gaplessly; a gap means records were missed and the caller should
// resync from seq 0 rather than display a hole.
export function applyAudit(vm: ConsoleViewModel, records: AuditRecord[]): void {
  for (const record of records) {
    if (record.seq <= vm.lastSeq) continue;
    if (record.seq !== vm.lastSeq + 1) {
      throw new AuditGapError(vm.lastSeq + 1, record.seq);
    }
    vm.auditWindow.push(record);
    vm.lastSeq = record.seq;
  }
  if (vm.auditWindow.length > AUDIT_WINDOW) {
    vm.auditWindow.splice(0, vm.auditWindow.length - AUDIT_WINDOW);
  }
}

export function resyncAudit(vm: ConsoleViewModel, records: AuditRecord[]): void {
  vm.auditWindow = [];
  vm.lastSeq = 0;
  applyAudit(vm, records);
}

// A fetch failure keeps the last-good screen and raises the banner.
export function markStale(vm: ConsoleViewModel): void {
  if (vm.staleSinceTick === null) {
    vm.staleSinceTick = vm.tick;
  }
}

// Clicking a grid cell pre-fills where the next composition lands.
export function selectCell(vm: ConsoleViewModel, sector: string, k: number): void {
  vm.composeDraft.sector = sector;
  vm.composeDraft.k = String(k);
  if (vm.composeDraft.strategy === "sector_targeted") {
    vm.composeDraft.targetSector = sector;
    vm.composeDraft.targetK = String(k);
  }
}

// Decision and reason codes verbatim, exactly as the audit record carries them.
export function toastFor(record: AuditRecord): string {
  if (record.reason_codes.length === 0) return record.decision;
  return `${record.decision}: ${record.reason_codes.join(", ")}`;
}
