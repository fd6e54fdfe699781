// Trial sanity checks: the simulated-patient grid and the delayed
// positive summary, with what-if editing of the parameter medians.
// All numbers come from the checks endpoints; the panel only colors
// and counts what the service sends back.

import type {
  DelayedPositiveDoc,
  PatientSampleDoc,
  SessionDoc,
} from "./api.js";
import { consensusFor } from "./state.js";

export const PARAMETER_IDS = [
  "eta",
  "psi",
  "theta1",
  "theta2",
  "theta3",
] as const;

// Shading separates the test-positive rounds (start dark, six months
// light); early-test positives are red in the first round and purple
// in the second; early-test negatives stay green, never-positives pale.
export const CELL_COLORS: Record<string, { color: string; label: string }> = {
  rt_pos_start_et_pos: {
    color: "#b71c1c",
    label: "positive at start, early test positive (first round)",
  },
  rt_pos_start_et_neg: {
    color: "#1b5e20",
    label: "positive at start, early test negative",
  },
  rt_pos_6mo_et_pos: {
    color: "#7b1fa2",
    label: "positive by six months, early test positive (second round)",
  },
  rt_pos_6mo_et_neg: {
    color: "#66bb6a",
    label: "positive by six months, early test negative",
  },
  rt_never_et_pos: {
    color: "#ef6c00",
    label: "never positive, early test positive",
  },
  rt_never_et_neg: {
    color: "#dcedc8",
    label: "never positive, early test negative",
  },
};

export interface TrialMedians {
  params: Record<string, number>;
  missing: string[];
}

// consensus medians drive the checks; whatever has not been agreed yet
// is reported back to the facilitator
export function collectTrialMedians(session: SessionDoc): TrialMedians {
  const params: Record<string, number> = {};
  const missing: string[] = [];
  for (const id of PARAMETER_IDS) {
    const record = consensusFor(session, id);
    if (record) params[id] = record.judgment.median;
    else missing.push(id);
  }
  return { params, missing };
}

export interface ChecksPanelOptions {
  session: SessionDoc;
  total?: number;
  fetchSample(
    params: Record<string, number>,
    total: number,
  ): Promise<PatientSampleDoc>;
  fetchDelayed(params: Record<string, number>): Promise<DelayedPositiveDoc>;
  onError?(err: unknown): void;
}

function svgElement(tag: string): SVGElement {
  return document.createElementNS("http://www.w3.org/2000/svg", tag);
}

const CELL = 20;
const GAP = 3;
const PER_ROW = 10;

function renderGrid(host: HTMLElement, sample: PatientSampleDoc): void {
  const patients = sample.sample.patients;
  const rows = Math.ceil(patients.length / PER_ROW);
  const svg = svgElement("svg");
  svg.setAttribute("class", "patient-grid");
  svg.setAttribute(
    "viewBox",
    `0 0 ${PER_ROW * (CELL + GAP)} ${rows * (CELL + GAP)}`,
  );
  svg.setAttribute("width", String(PER_ROW * (CELL + GAP)));
  patients.forEach((cell, i) => {
    const rect = svgElement("rect");
    rect.setAttribute("x", String((i % PER_ROW) * (CELL + GAP)));
    rect.setAttribute("y", String(Math.floor(i / PER_ROW) * (CELL + GAP)));
    rect.setAttribute("width", String(CELL));
    rect.setAttribute("height", String(CELL));
    rect.setAttribute("rx", "3");
    rect.setAttribute("fill", CELL_COLORS[cell]?.color ?? "#cccccc");
    rect.setAttribute("class", "patient");
    rect.setAttribute("data-cell", cell);
    svg.appendChild(rect);
  });
  host.appendChild(svg);

  const legend = document.createElement("ul");
  legend.className = "grid-legend";
  for (const [cell, { color, label }] of Object.entries(CELL_COLORS)) {
    const item = document.createElement("li");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = color;
    item.appendChild(swatch);
    item.appendChild(document.createTextNode(label));
    item.dataset.cell = cell;
    legend.appendChild(item);
  }
  host.appendChild(legend);
}

function renderSummary(
  host: HTMLElement,
  sample: PatientSampleDoc,
  delayed: DelayedPositiveDoc,
): void {
  const groups = sample.sample.group_counts;
  const summary = document.createElement("div");
  summary.className = "checks-summary";

  const counts = document.createElement("p");
  counts.className = "group-counts";
  counts.textContent =
    `of ${sample.sample.total} patients: ` +
    `${groups.rt_pos_start} positive at the start, ` +
    `${groups.rt_pos_6mo} positive by six months, ` +
    `${groups.rt_never} never positive`;
  summary.appendChild(counts);

  const { estimate, interval, level } = delayed.result;
  const dp = document.createElement("p");
  dp.className = "delayed-positive";
  dp.textContent =
    `delayed positive share: ${estimate.toFixed(3)} ` +
    `(${Math.round(level * 100)}% interval ` +
    `${interval[0].toFixed(3)} to ${interval[1].toFixed(3)})`;
  summary.appendChild(dp);

  host.appendChild(summary);
}

export function renderChecksPanel(
  root: HTMLElement,
  opts: ChecksPanelOptions,
): void {
  root.innerHTML = "";
  const total = opts.total ?? 100;
  const { params, missing } = collectTrialMedians(opts.session);

  if (missing.length > 0) {
    const note = document.createElement("p");
    note.className = "missing-medians";
    note.textContent = "checks need consensus medians for every parameter; still missing:";
    const list = document.createElement("ul");
    list.className = "missing-list";
    for (const id of missing) {
      const item = document.createElement("li");
      item.textContent = id;
      list.appendChild(item);
    }
    root.appendChild(note);
    root.appendChild(list);
    return;
  }

  const controls = document.createElement("form");
  controls.className = "whatif-controls";
  controls.addEventListener("submit", (e) => e.preventDefault());
  const inputs = new Map<string, HTMLInputElement>();
  for (const id of PARAMETER_IDS) {
    const row = document.createElement("label");
    const caption = document.createElement("span");
    caption.textContent = id;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "0.01";
    input.min = "0";
    input.max = "1";
    input.name = id;
    input.value = String(params[id]);
    row.appendChild(caption);
    row.appendChild(input);
    controls.appendChild(row);
    inputs.set(id, input);
  }
  const update = document.createElement("button");
  update.type = "button";
  update.textContent = "Update";
  update.addEventListener("click", () => void load(readParams()));
  controls.appendChild(update);
  root.appendChild(controls);

  const output = document.createElement("div");
  output.className = "checks-output";
  root.appendChild(output);

  function readParams(): Record<string, number> {
    const out: Record<string, number> = {};
    for (const [id, input] of inputs) out[id] = Number(input.value);
    return out;
  }

  async function load(current: Record<string, number>): Promise<void> {
    try {
      const [sample, delayed] = await Promise.all([
        opts.fetchSample(current, total),
        opts.fetchDelayed(current),
      ]);
      output.innerHTML = "";
      renderSummary(output, sample, delayed);
      renderGrid(output, sample);
    } catch (err) {
      opts.onError?.(err);
    }
  }

  void load(params);
}
