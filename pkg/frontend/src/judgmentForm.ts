// Five-point entry with a live fitted preview. Fields appear in the
// entry order minimum, maximum, median, lower quartile, upper quartile:
// anchoring on the extremes first keeps the quartiles honest. Every
// preview comes from the service fit endpoint; this module never fits
// anything itself.

import type { FitDoc, JudgmentValues, QuantityDoc } from "./api.js";

export const DEBOUNCE_MS = 300;

export interface PreviewResponse {
  fit: FitDoc;
}

export interface JudgmentFormOptions {
  quantity: QuantityDoc;
  initial?: JudgmentValues;
  debounceMs?: number;
  // bound to putJudgment or putConsensus by the caller
  preview(values: JudgmentValues, family?: string): Promise<PreviewResponse>;
  onAccepted?(values: JudgmentValues, fit: FitDoc, family?: string): void;
  onError?(err: unknown): void;
}

interface Field {
  key: keyof JudgmentValues;
  label: string;
}

// entry order, not numeric order
const FIELDS: Field[] = [
  { key: "minimum", label: "plausible minimum" },
  { key: "maximum", label: "plausible maximum" },
  { key: "median", label: "median" },
  { key: "q25", label: "lower quartile" },
  { key: "q75", label: "upper quartile" },
];

const VALUE_ORDER: (keyof JudgmentValues)[] = [
  "minimum",
  "q25",
  "median",
  "q75",
  "maximum",
];

export function orderingError(
  values: Partial<JudgmentValues>,
  quantity: QuantityDoc,
): string | null {
  for (const key of VALUE_ORDER) {
    const v = values[key];
    if (v === undefined || Number.isNaN(v)) return `enter the ${key}`;
    if (!Number.isFinite(v)) return `${key} must be finite`;
  }
  const vs = values as JudgmentValues;
  for (let i = 1; i < VALUE_ORDER.length; i++) {
    const a = VALUE_ORDER[i - 1];
    const b = VALUE_ORDER[i];
    if (!(vs[a] < vs[b])) {
      return `${b} must exceed ${a}`;
    }
  }
  const [lo, hi] = quantity.support;
  if (lo !== null && vs.minimum < lo) return `minimum lies below the support (${lo})`;
  if (hi !== null && vs.maximum > hi) return `maximum lies above the support (${hi})`;
  return null;
}

function formatParams(fit: FitDoc): string {
  const params = fit.distribution.params ?? {};
  return Object.entries(params)
    .map(([k, v]) => `${k} = ${v.toFixed(4)}`)
    .join(", ");
}

export function renderJudgmentForm(
  root: HTMLElement,
  opts: JudgmentFormOptions,
): void {
  const debounceMs = opts.debounceMs ?? DEBOUNCE_MS;
  let family: string | undefined;
  let lastFit: FitDoc | null = null;
  let timer: ReturnType<typeof setTimeout> | null = null;

  root.innerHTML = "";
  const form = document.createElement("form");
  form.className = "judgment-form";
  form.addEventListener("submit", (e) => e.preventDefault());

  const inputs = new Map<keyof JudgmentValues, HTMLInputElement>();
  for (const field of FIELDS) {
    const row = document.createElement("label");
    row.className = "judgment-field";
    const caption = document.createElement("span");
    caption.textContent = field.label;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "any";
    input.name = field.key;
    if (opts.initial) input.value = String(opts.initial[field.key]);
    input.addEventListener("input", onEdit);
    row.appendChild(caption);
    row.appendChild(input);
    form.appendChild(row);
    inputs.set(field.key, input);
  }

  const error = document.createElement("p");
  error.className = "inline-error";
  error.hidden = true;

  const preview = document.createElement("div");
  preview.className = "fit-preview";

  const candidates = document.createElement("div");
  candidates.className = "family-candidates";

  const accept = document.createElement("button");
  accept.type = "button";
  accept.textContent = "Accept fit";
  accept.disabled = true;
  accept.addEventListener("click", () => {
    const values = readValues();
    if (values && lastFit) opts.onAccepted?.(values, lastFit, family);
  });

  form.appendChild(error);
  root.appendChild(form);
  root.appendChild(preview);
  root.appendChild(candidates);
  root.appendChild(accept);

  function readValues(): JudgmentValues | null {
    const raw: Partial<JudgmentValues> = {};
    for (const [key, input] of inputs) {
      if (input.value !== "") raw[key] = Number(input.value);
    }
    const message = orderingError(raw, opts.quantity);
    if (message) {
      error.textContent = message;
      error.hidden = false;
      accept.disabled = true;
      return null;
    }
    error.hidden = true;
    return raw as JudgmentValues;
  }

  function onEdit(): void {
    const values = readValues();
    if (timer !== null) clearTimeout(timer);
    if (!values) return;
    timer = setTimeout(() => void refresh(values), debounceMs);
  }

  async function refresh(values: JudgmentValues): Promise<void> {
    try {
      const res = await opts.preview(values, family);
      lastFit = res.fit;
      renderPreview(res.fit);
      accept.disabled = false;
    } catch (err) {
      opts.onError?.(err);
    }
  }

  function renderPreview(fit: FitDoc): void {
    preview.innerHTML = "";
    const title = document.createElement("p");
    title.className = "fit-family";
    title.textContent = `best fit: ${fit.distribution.family}`;
    const params = document.createElement("p");
    params.className = "fit-params";
    params.textContent = formatParams(fit);
    const sse = document.createElement("p");
    sse.className = "fit-sse";
    sse.textContent = `sum of squares ${fit.sse.toExponential(3)}`;
    preview.appendChild(title);
    preview.appendChild(params);
    preview.appendChild(sse);

    candidates.innerHTML = "";
    if (fit.family_candidates.length < 2) return;
    const note = document.createElement("span");
    note.textContent = "alternatives:";
    candidates.appendChild(note);
    for (const [name] of fit.family_candidates) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = "family-option";
      btn.textContent = name;
      if (name === fit.distribution.family) btn.disabled = true;
      btn.addEventListener("click", () => {
        family = name;
        const values = readValues();
        if (values) void refresh(values);
      });
      candidates.appendChild(btn);
    }
  }
}
