import * as api from "./api.js";
import { StaleVersionError } from "./api.js";
import { setBaseUrl } from "./config.js";
import { app, consensusFor, judgmentFor } from "./state.js";
import { renderJudgmentForm } from "./judgmentForm.js";
import { renderOverlayPanel } from "./overlay.js";
import { renderChecksPanel } from "./checks.js";

type Tab = "elicit" | "overlay" | "checks";
let tab: Tab = "elicit";

function onError(err: unknown): void {
  if (err instanceof StaleVersionError) {
    app.set({ conflict: err });
    return;
  }
  const box = document.getElementById("errors");
  if (box) box.textContent = err instanceof Error ? err.message : String(err);
}

async function loadSession(sessionId: string): Promise<void> {
  const res = await api.getSession(sessionId);
  const state = app.get();
  app.set({
    sessionId,
    session: res.session,
    version: res.version,
    conflict: null,
    expertId: state.expertId || res.session.experts[0]?.expert_id || "",
    quantityId:
      state.quantityId || res.session.quantities[0]?.quantity_id || "",
  });
}

function header(root: HTMLElement): void {
  const bar = document.createElement("header");
  bar.className = "topbar";

  const idInput = document.createElement("input");
  idInput.placeholder = "session id";
  idInput.value = app.get().sessionId;
  const load = document.createElement("button");
  load.textContent = "Load";
  load.addEventListener("click", () => {
    void loadSession(idInput.value.trim()).catch(onError);
  });
  bar.appendChild(idInput);
  bar.appendChild(load);

  const state = app.get();
  if (state.session) {
    const expertSel = document.createElement("select");
    for (const e of state.session.experts) {
      const opt = document.createElement("option");
      opt.value = e.expert_id;
      opt.textContent = e.name || e.expert_id;
      if (e.expert_id === state.expertId) opt.selected = true;
      expertSel.appendChild(opt);
    }
    expertSel.addEventListener("change", () =>
      app.set({ expertId: expertSel.value }),
    );
    bar.appendChild(expertSel);

    const roleSel = document.createElement("select");
    for (const role of ["expert", "facilitator"] as const) {
      const opt = document.createElement("option");
      opt.value = role;
      opt.textContent = role;
      if (role === state.role) opt.selected = true;
      roleSel.appendChild(opt);
    }
    roleSel.addEventListener("change", () =>
      app.set({ role: roleSel.value as "expert" | "facilitator" }),
    );
    bar.appendChild(roleSel);

    const quantitySel = document.createElement("select");
    for (const q of state.session.quantities) {
      const opt = document.createElement("option");
      opt.value = q.quantity_id;
      opt.textContent = q.quantity_id;
      if (q.quantity_id === state.quantityId) opt.selected = true;
      quantitySel.appendChild(opt);
    }
    quantitySel.addEventListener("change", () =>
      app.set({ quantityId: quantitySel.value }),
    );
    bar.appendChild(quantitySel);

    const stage = document.createElement("span");
    stage.className = "stage-badge";
    stage.textContent = `stage: ${state.session.stage}`;
    bar.appendChild(stage);
  }
  root.appendChild(bar);
}

function tabs(root: HTMLElement): void {
  const nav = document.createElement("nav");
  nav.className = "tabs";
  const entries: [Tab, string][] = [
    ["elicit", "Judgments"],
    ["overlay", "Overlay & consensus"],
    ["checks", "Trial checks"],
  ];
  for (const [id, label] of entries) {
    const btn = document.createElement("button");
    btn.textContent = label;
    if (id === tab) btn.classList.add("active");
    btn.addEventListener("click", () => {
      tab = id;
      render();
    });
    nav.appendChild(btn);
  }
  root.appendChild(nav);
}

function conflictBanner(root: HTMLElement): void {
  const state = app.get();
  if (!state.conflict) return;
  const banner = document.createElement("div");
  banner.className = "conflict-banner";
  banner.textContent =
    "This session changed in another window " +
    `(saved against version ${state.conflict.expected}, ` +
    `yours was ${state.conflict.actual}). `;
  const reload = document.createElement("button");
  reload.textContent = "Reload session";
  reload.addEventListener("click", () => {
    void loadSession(state.sessionId).catch(onError);
  });
  banner.appendChild(reload);
  root.appendChild(banner);
}

function elicitTab(root: HTMLElement): void {
  const state = app.get();
  if (!state.session) return;
  const quantity = state.session.quantities.find(
    (q) => q.quantity_id === state.quantityId,
  );
  if (!quantity) return;

  const intro = document.createElement("p");
  intro.className = "quantity-text";
  intro.textContent = quantity.text || quantity.quantity_id;
  root.appendChild(intro);

  const host = document.createElement("div");
  root.appendChild(host);
  const existing = judgmentFor(state.session, state.expertId, state.quantityId);
  renderJudgmentForm(host, {
    quantity,
    initial: existing?.judgment,
    preview: (values, family) =>
      api.putJudgment(
        state.sessionId,
        state.expertId,
        state.quantityId,
        values,
        family,
      ),
    onAccepted: () => {
      void loadSession(state.sessionId).catch(onError);
    },
    onError,
  });
}

function overlayTab(root: HTMLElement): void {
  const state = app.get();
  if (!state.session) return;
  const quantity = state.session.quantities.find(
    (q) => q.quantity_id === state.quantityId,
  );
  if (!quantity) return;
  const host = document.createElement("div");
  root.appendChild(host);
  api
    .getOverlay(state.sessionId, state.quantityId)
    .then((overlay) => {
      renderOverlayPanel(host, {
        quantity,
        overlay,
        stage: state.session?.stage ?? "setup",
        role: state.role,
        consensusValues: state.session
          ? consensusFor(state.session, state.quantityId)?.judgment
          : undefined,
        saveConsensus: (values, family) =>
          api.putConsensus(state.sessionId, state.quantityId, values, family),
        onConsensusSaved: () => {
          void loadSession(state.sessionId).catch(onError);
        },
        onError,
      });
    })
    .catch((err) => {
      const note = document.createElement("p");
      note.className = "overlay-empty";
      note.textContent =
        err instanceof api.ApiError && err.code === "no_fits"
          ? "no fitted judgments for this quantity yet"
          : err instanceof Error
            ? err.message
            : String(err);
      host.appendChild(note);
    });
}

function checksTab(root: HTMLElement): void {
  const state = app.get();
  if (!state.session) return;
  const host = document.createElement("div");
  root.appendChild(host);
  renderChecksPanel(host, {
    session: state.session,
    fetchSample: (params, total) =>
      api.getPatientSample(state.sessionId, params, total),
    fetchDelayed: (params) => api.getDelayedPositive(state.sessionId, params),
    onError,
  });
}

function render(): void {
  const root = document.getElementById("app");
  if (!root) return;
  root.innerHTML = "";
  header(root);
  conflictBanner(root);

  const errors = document.createElement("p");
  errors.id = "errors";
  errors.className = "inline-error";
  root.appendChild(errors);

  if (!app.get().session) {
    const hint = document.createElement("p");
    hint.textContent = "enter a session id to begin";
    root.appendChild(hint);
    return;
  }
  tabs(root);
  const content = document.createElement("main");
  root.appendChild(content);
  if (tab === "elicit") elicitTab(content);
  else if (tab === "overlay") overlayTab(content);
  else checksTab(content);
}

export function boot(): void {
  const declared = document
    .querySelector("meta[name=service-base-url]")
    ?.getAttribute("content");
  if (declared) setBaseUrl(declared);
  app.subscribe(render);
  render();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
