import { describe, expect, it } from "vitest";
import {
  anchorBar,
  escapeHtml,
  kappaBadge,
  renderAudit,
  renderGrid,
  renderPending,
  renderSparkline,
  renderToast,
  staleBanner,
} from "../src/render.js";
import type { StateResponse, WireFragment } from "../src/types.js";
import { applyState, emptyViewModel } from "../src/viewmodel.js";

function goalAt(sector: string, k: number): WireFragment {
  return {
    id: 1,
    text: "reach the depot",
    kind: "goal",
    coord: { sector, k },
    assertion: { topic: "depot", predicate: "reached", polarity: "positive" },
    anchor: 0.8,
    pinned: false,
    ttl: null,
    fast_decay: false,
    provenance: 'injected:"feed"',
    status: "active",
    born_tick: 0,
  };
}

function freshState(fragments: WireFragment[] = []): StateResponse {
  return {
    tick: 0,
    hash: "h".repeat(64),
    k_max: 4,
    sectors: ["perc", "plan", "mem", "refl", "know", "ethics"],
    fragments,
  };
}

describe("grid screen", () => {
  it("renders every cell empty on a fresh engine, kappa badge 1.0", () => {
    const vm = emptyViewModel();
    applyState(vm, freshState());
    const html = renderGrid(vm);
    expect(html.match(/<td class="cell empty"/g)?.length).toBe(6 * 5);
    expect(html).not.toContain("<li");
    expect(kappaBadge(vm.kappa)).toContain("1.00");
  });

  it("renders exactly one non-empty cell for a single (plan,1) goal", () => {
    const vm = emptyViewModel();
    applyState(vm, freshState([goalAt("plan", 1)]));
    const html = renderGrid(vm);
    expect(html.match(/<td class="cell"/g)?.length).toBe(1);
    expect(html.match(/<td class="cell empty"/g)?.length).toBe(6 * 5 - 1);
    expect(html).toContain("reach the depot");
  });

  it("cells carry their coordinate for click-to-compose", () => {
    const vm = emptyViewModel();
    applyState(vm, freshState());
    expect(renderGrid(vm)).toContain('data-sector="ethics" data-k="3"');
  });
});

describe("anchor bars", () => {
  it("shows anchor as a percentage bar", () => {
    const html = anchorBar(0.42, false);
    expect(html).toContain("42%");
    expect(html).toContain("width:42%");
  });

  it("shows a lock glyph instead of a bar when pinned", () => {
    const html = anchorBar(1.0, true);
    expect(html).toContain("&#128274;");
    expect(html).not.toContain("%");
  });
});

describe("sparkline", () => {
  it("draws kappa and lambda polylines over the series", () => {
    const svg = renderSparkline([
      { tick: 0, kappa: 1, lambda: 0 },
      { tick: 1, kappa: 0.5, lambda: 2 },
      { tick: 2, kappa: 1, lambda: 4 },
    ]);
    const polylines = svg.match(/<polyline/g);
    expect(polylines?.length).toBe(2);
    const kappaPoints = /class="kappa"[^/]*points="([^"]+)"/.exec(svg)?.[1];
    expect(kappaPoints?.split(" ").length).toBe(3);
  });

  it("renders an empty frame for an empty series", () => {
    expect(renderSparkline([])).not.toContain("polyline");
  });
});

describe("panels", () => {
  it("pending entries expose verdict buttons wired by id", () => {
    const html = renderPending([
      {
        pending_id: 7,
        created_tick: 2,
        reasons: ["guardrail:conflict_with_pinned"],
        request: { source: "feed", strategy: "direct", priority: 1, coord: "plan/1", kind: "goal", topic: "guard", text: "disable the guard" },
      },
    ]);
    expect(html).toContain('data-verdict="approve" data-pending-id="7"');
    expect(html).toContain('data-verdict="reject" data-pending-id="7"');
    expect(html).toContain("disable the guard");
    expect(renderPending([])).toContain("review queue empty");
  });

  it("audit rows show summaries, never fragment text", () => {
    const html = renderAudit([
      {
        seq: 1,
        tick: 0,
        request_summary: { source: "feed", strategy: "direct", coord: "perc/0", kind: "observation", topic: "route_a" },
        decision: "rejected",
        reason_codes: ["blacklist:no_harm"],
        kappa_before: 1,
        kappa_after: 1,
        lambda_before: 0,
        lambda_after: 0,
        retracted_ids: [],
        admitted_ids: [],
      },
    ]);
    expect(html).toContain("blacklist:no_harm");
    expect(html).toContain("route_a");
    expect(html).toContain('class="audit rejected"');
  });

  it("escapes markup coming from the wire", () => {
    expect(escapeHtml('<b a="1">')).toBe("&lt;b a=&quot;1&quot;&gt;");
    expect(renderToast('<script>alert(1)</script>')).not.toContain("<script>");
  });

  it("banner and toast render only when set", () => {
    expect(staleBanner(null)).toBe("");
    expect(staleBanner(4)).toContain("tick 4");
    expect(renderToast(null)).toBe("");
    expect(renderToast("admitted")).toContain("admitted");
  });
});
