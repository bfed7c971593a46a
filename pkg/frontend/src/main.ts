// Browser entry point: the connect screen, the refresh loop, and event
// wiring. All decisions and numbers on screen come from server responses;
// this file never updates a panel optimistically.

import { ApiClient, ApiError } from "./api.js";
import {
  kappaBadge,
  renderAudit,
  renderGrid,
  renderPending,
  renderSparkline,
  renderToast,
  staleBanner,
} from "./render.js";
import { draftToBody, validateDraft, type ComposeDraft } from "./validate.js";
import {
  applyAudit,
  applyMetrics,
  applyPending,
  applyState,
  AuditGapError,
  emptyViewModel,
  markStale,
  resyncAudit,
  selectCell,
  toastFor,
  type ConsoleViewModel,
} from "./viewmodel.js";

interface Session {
  api: ApiClient;
  actor: string;
  token: string;
  vm: ConsoleViewModel;
}

const POLL_WAIT_MS = 1500; // under the service's 2000 ms cap

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node;
}

function paint(session: Session): void {
  const { vm } = session;
  el("badge").innerHTML = kappaBadge(vm.kappa) + ` <span class="badge">tick ${vm.tick}</span>`;
  el("banner").innerHTML = staleBanner(vm.staleSinceTick);
  el("grid").innerHTML = renderGrid(vm);
  el("spark").innerHTML = renderSparkline(vm.metricsSeries);
  el("pending").innerHTML = renderPending(vm.pending);
  el("audit").innerHTML = renderAudit(vm.auditWindow);
  el("toast").innerHTML = renderToast(vm.toast);
}

async function refreshAll(session: Session): Promise<void> {
  const { api, vm } = session;
  try {
    applyState(vm, await api.state());
    applyMetrics(vm, await api.metrics());
    applyPending(vm, (await api.pending()).entries);
  } catch {
    markStale(vm);
  }
  paint(session);
}

async function pollLoop(session: Session): Promise<void> {
  const { api, vm } = session;
  for (;;) {
    try {
      const batch = await api.audit(vm.lastSeq, POLL_WAIT_MS);
      try {
        applyAudit(vm, batch.records);
      } catch (err) {
        if (!(err instanceof AuditGapError)) throw err;
        resyncAudit(vm, (await api.audit(0)).records);
      }
      if (batch.records.length > 0) {
        await refreshAll(session);
      } else {
        paint(session);
      }
    } catch {
      markStale(vm);
      paint(session);
      await new Promise((resolve) => setTimeout(resolve, 1000));
    }
  }
}

function readDraft(): ComposeDraft {
  const field = (id: string) => (el(id) as HTMLInputElement).value;
  return {
    strategy: field("f-strategy") as ComposeDraft["strategy"],
    priority: field("f-priority"),
    text: field("f-text"),
    kind: field("f-kind"),
    sector: field("f-sector"),
    k: field("f-k"),
    anchor: field("f-anchor"),
    topic: field("f-topic"),
    predicate: field("f-predicate"),
    polarity: field("f-polarity"),
    pinned: (el("f-pinned") as HTMLInputElement).checked,
    ttl: field("f-ttl"),
    targetSector: field("f-target-sector"),
    targetK: field("f-target-k"),
  };
}

function showFieldErrors(errors: Record<string, string>): void {
  el("compose-errors").innerHTML = Object.entries(errors)
    .map(([field, hint]) => `<li><b>${field}</b>: ${hint}</li>`)
    .join("");
}

async function submitDraft(session: Session): Promise<void> {
  const draft = readDraft();
  const errors = validateDraft(draft, session.vm.kMax);
  if (Object.keys(errors).length > 0) {
    showFieldErrors(errors as Record<string, string>);
    return; // invalid drafts never reach the network
  }
  showFieldErrors({});
  try {
    const result = await session.api.inject(draftToBody(draft, session.actor, session.token));
    session.vm.toast = toastFor(result.record);
  } catch (err) {
    session.vm.toast = err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err);
  }
  await refreshAll(session);
}

async function resolve(session: Session, id: number, verdict: "approve" | "reject"): Promise<void> {
  try {
    const result = await session.api.resolvePending(id, verdict, session.actor, session.token);
    session.vm.toast = toastFor(result.record);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      session.vm.toast = `conflict: ${err.detail}`;
    } else {
      session.vm.toast = err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err);
    }
  }
  await refreshAll(session); // panel state comes from the server, never guessed
}

async function retire(session: Session, fragmentId: number): Promise<void> {
  try {
    const result = await session.api.retire(fragmentId, session.actor, session.token);
    session.vm.toast = toastFor(result.record);
  } catch (err) {
    session.vm.toast = err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err);
  }
  await refreshAll(session);
}

function wireEvents(session: Session): void {
  el("grid").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const retireId = target.getAttribute("data-retire");
    if (retireId !== null) {
      void retire(session, Number(retireId));
      return;
    }
    const cell = target.closest("[data-sector]");
    if (cell !== null) {
      const sector = cell.getAttribute("data-sector") ?? "";
      const k = Number(cell.getAttribute("data-k") ?? "0");
      selectCell(session.vm, sector, k);
      (el("f-sector") as HTMLInputElement).value = session.vm.composeDraft.sector;
      (el("f-k") as HTMLInputElement).value = session.vm.composeDraft.k;
    }
  });
  el("pending").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const verdict = target.getAttribute("data-verdict");
    const id = target.getAttribute("data-pending-id");
    if (verdict !== null && id !== null) {
      void resolve(session, Number(id), verdict as "approve" | "reject");
    }
  });
  el("compose-submit").addEventListener("click", () => void submitDraft(session));
}

function connect(): void {
  const baseUrl = (el("c-url") as HTMLInputElement).value.trim();
  const actor = (el("c-actor") as HTMLInputElement).value.trim();
  const token = (el("c-token") as HTMLInputElement).value;
  if (baseUrl === "" || actor === "") return;
  const session: Session = {
    api: new ApiClient(baseUrl, (input, init) => fetch(input, init)),
    actor,
    token,
    vm: emptyViewModel(),
  };
  el("connect-screen").style.display = "none";
  el("console-screen").style.display = "";
  wireEvents(session);
  void refreshAll(session).then(() => pollLoop(session));
}

el("c-connect").addEventListener("click", connect);
