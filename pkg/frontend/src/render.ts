// HTML and SVG renderers, all pure string producers so every screen is
// testable without a browser. main.ts owns the only DOM writes.

import type { AuditRecord, PendingEntry, WireFragment } from "./types.js";
import type { ConsoleViewModel, MetricsPoint } from "./viewmodel.js";
import { cellKey } from "./viewmodel.js";

export function escapeHtml(raw: string): string {
  return raw
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

// Anchor strength as a 0..100% bar. Pinned beliefs carry a lock glyph
// instead of a percentage: they do not decay, so a bar would mislead.
export function anchorBar(anchor: number, pinned: boolean): string {
  if (pinned) {
    return `<span class="pin" title="pinned, never decays">&#128274;</span>`;
  }
  const pct = Math.round(anchor * 100);
  return (
    `<span class="bar" title="anchor ${anchor.toFixed(2)}">` +
    `<span class="fill" style="width:${pct}%"></span>` +
    `<span class="pct">${pct}%</span></span>`
  );
}

function fragmentLine(f: WireFragment): string {
  const assertion = f.assertion
    ? ` <code>${escapeHtml(f.assertion.topic)}:${escapeHtml(f.assertion.predicate)}:${
        f.assertion.polarity === "positive" ? "+" : "-"
      }</code>`
    : "";
  return (
    `<li class="fragment" data-id="${f.id}">` +
    `#${f.id} [${escapeHtml(f.kind)}] ${escapeHtml(f.text)}${assertion} ` +
    anchorBar(f.anchor, f.pinned) +
    ` <button class="retire" data-retire="${f.id}">retire</button></li>`
  );
}

export function renderGrid(vm: ConsoleViewModel): string {
  const header = ["<tr><th></th>"];
  for (let k = 0; k <= vm.kMax; k += 1) header.push(`<th>k=${k}</th>`);
  header.push("</tr>");

  const rows: string[] = [];
  for (const sector of vm.sectors) {
    const cells = [`<th scope="row">${escapeHtml(sector)}</th>`];
    for (let k = 0; k <= vm.kMax; k += 1) {
      const fragments = vm.grid.get(cellKey(sector, k)) ?? [];
      const body = fragments.length
        ? `<ul>${fragments.map(fragmentLine).join("")}</ul>`
        : "";
      cells.push(
        `<td class="cell${fragments.length ? "" : " empty"}"` +
          ` data-sector="${escapeHtml(sector)}" data-k="${k}">${body}</td>`,
      );
    }
    rows.push(`<tr>${cells.join("")}</tr>`);
  }
  return `<table class="grid">${header.join("")}${rows.join("")}</table>`;
}

export function kappaBadge(kappa: number): string {
  return `<span class="badge kappa">&kappa; ${kappa.toFixed(2)}</span>`;
}

// One SVG, two polylines: kappa on a fixed 0..1 scale, lambda scaled to the
// window maximum so both stay readable. No chart dependency.
export function renderSparkline(series: MetricsPoint[], width = 320, height = 64): string {
  if (series.length === 0) {
    return `<svg class="spark" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  const first = series[0]!;
  const last = series[series.length - 1]!;
  const tickSpan = Math.max(1, last.tick - first.tick);
  const lambdaMax = Math.max(1, ...series.map((p) => p.lambda));
  const x = (tick: number) => ((tick - first.tick) / tickSpan) * (width - 2) + 1;
  const y = (unit: number) => (1 - unit) * (height - 2) + 1;
  const kappaPts = series.map((p) => `${x(p.tick).toFixed(1)},${y(p.kappa).toFixed(1)}`);
  const lambdaPts = series.map((p) =>
    `${x(p.tick).toFixed(1)},${y(p.lambda / lambdaMax).toFixed(1)}`,
  );
  return (
    `<svg class="spark" viewBox="0 0 ${width} ${height}">` +
    `<polyline class="kappa" fill="none" points="${kappaPts.join(" ")}" />` +
    `<polyline class="lambda" fill="none" points="${lambdaPts.join(" ")}" />` +
    `</svg>`
  );
}

export function renderPending(entries: PendingEntry[]): string {
  if (entries.length === 0) return `<p class="empty">review queue empty</p>`;
  const items = entries.map(
    (e) =>
      `<li class="pending" data-pending="${e.pending_id}">` +
      `<span class="meta">#${e.pending_id} @${e.created_tick} ` +
      `${escapeHtml(e.request.source)} ${escapeHtml(e.request.strategy)} ` +
      `${escapeHtml(e.request.coord)} ${escapeHtml(e.request.kind)}</span> ` +
      `<span class="reasons">${e.reasons.map(escapeHtml).join(", ")}</span> ` +
      `<blockquote>${escapeHtml(e.request.text)}</blockquote>` +
      `<button data-verdict="approve" data-pending-id="${e.pending_id}">approve</button> ` +
      `<button data-verdict="reject" data-pending-id="${e.pending_id}">reject</button></li>`,
  );
  return `<ul class="pending-list">${items.join("")}</ul>`;
}

// Audit rows carry request summaries only (coord, kind, topic), so rejected
// submissions never leak their full text into the browsing surface.
export function renderAudit(window: AuditRecord[]): string {
  const rows = window.map(
    (r) =>
      `<tr class="audit ${escapeHtml(r.decision)}">` +
      `<td>${r.seq}</td><td>${r.tick}</td>` +
      `<td>${escapeHtml(r.request_summary.source)}</td>` +
      `<td>${escapeHtml(r.request_summary.strategy)}</td>` +
      `<td>${escapeHtml(r.request_summary.coord)}</td>` +
      `<td>${escapeHtml(r.request_summary.topic)}</td>` +
      `<td>${escapeHtml(r.decision)}</td>` +
      `<td>${r.reason_codes.map(escapeHtml).join(", ")}</td>` +
      `<td>${r.kappa_after.toFixed(3)}</td><td>${r.lambda_after.toFixed(1)}</td></tr>`,
  );
  return (
    `<table class="audit-log"><tr><th>seq</th><th>tick</th><th>source</th>` +
    `<th>strategy</th><th>coord</th><th>topic</th><th>decision</th>` +
    `<th>reasons</th><th>&kappa;</th><th>&lambda;</th></tr>${rows.join("")}</table>`
  );
}

export function renderToast(toast: string | null): string {
  if (toast === null) return "";
  return `<div class="toast">${escapeHtml(toast)}</div>`;
}

export function staleBanner(staleSinceTick: number | null): string {
  if (staleSinceTick === null) return "";
  return (
    `<div class="stale">connection lost, showing data from tick ` +
    `${staleSinceTick}</div>`
  );
}
