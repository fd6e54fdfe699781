// Group overlay: every fitted density on one grid, consensus entry for
// the facilitator, and the feedback statements derived from the saved
// consensus. Densities arrive as grids from the overlay endpoint; the
// only arithmetic here is trapezoid sums over those grids for display.

import type {
  ConsensusResponse,
  JudgmentValues,
  OverlayDoc,
  QuantityDoc,
} from "./api.js";
import { renderJudgmentForm } from "./judgmentForm.js";

export const STAGES = [
  "setup",
  "training",
  "background",
  "individual",
  "review_checks",
  "group_discussion",
  "consensus",
  "feedback",
  "closed",
] as const;

export function stageIndex(stage: string): number {
  return STAGES.indexOf(stage as (typeof STAGES)[number]);
}

const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
];

const WIDTH = 640;
const HEIGHT = 300;
const PAD = 36;

export function polylinePoints(
  x: number[],
  y: number[],
  xDomain: [number, number],
  yMax: number,
): string {
  const sx = (v: number) =>
    PAD + ((v - xDomain[0]) / (xDomain[1] - xDomain[0])) * (WIDTH - 2 * PAD);
  const sy = (v: number) => HEIGHT - PAD - (v / yMax) * (HEIGHT - 2 * PAD);
  return x.map((v, i) => `${sx(v).toFixed(2)},${sy(y[i]).toFixed(2)}`).join(" ");
}

// P(X <= t) by trapezoid over the service-provided grid, with linear
// interpolation inside the cell containing t.
export function gridProbabilityBelow(
  x: number[],
  pdf: number[],
  t: number,
): number {
  if (t <= x[0]) return 0;
  let mass = 0;
  for (let i = 1; i < x.length; i++) {
    const h = x[i] - x[i - 1];
    if (t >= x[i]) {
      mass += (h * (pdf[i - 1] + pdf[i])) / 2;
      continue;
    }
    const frac = (t - x[i - 1]) / h;
    const pdfAtT = pdf[i - 1] + frac * (pdf[i] - pdf[i - 1]);
    mass += ((t - x[i - 1]) * (pdf[i - 1] + pdfAtT)) / 2;
    break;
  }
  return mass;
}

export interface OverlayPanelOptions {
  quantity: QuantityDoc;
  overlay: OverlayDoc;
  stage: string;
  role: "expert" | "facilitator";
  consensusValues?: JudgmentValues;
  debounceMs?: number;
  saveConsensus(
    values: JudgmentValues,
    family?: string,
  ): Promise<ConsensusResponse>;
  onConsensusSaved?(res: ConsensusResponse): void;
  onError?(err: unknown): void;
}

function svgElement(tag: string): SVGElement {
  return document.createElementNS("http://www.w3.org/2000/svg", tag);
}

function renderChart(root: HTMLElement, overlay: OverlayDoc): void {
  const series: { id: string; pdf: number[]; color: string; wide: boolean }[] =
    Object.keys(overlay.densities)
      .sort()
      .map((id, i) => ({
        id,
        pdf: overlay.densities[id],
        color: PALETTE[i % PALETTE.length],
        wide: false,
      }));
  if (overlay.consensus) {
    series.push({
      id: "consensus",
      pdf: overlay.consensus,
      color: "#111111",
      wide: true,
    });
  }
  const yMax = Math.max(...series.flatMap((s) => s.pdf), 1e-12);
  const xDomain: [number, number] = [
    overlay.x[0],
    overlay.x[overlay.x.length - 1],
  ];

  const svg = svgElement("svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "overlay-chart");
  const axis = svgElement("line");
  axis.setAttribute("x1", String(PAD));
  axis.setAttribute("x2", String(WIDTH - PAD));
  axis.setAttribute("y1", String(HEIGHT - PAD));
  axis.setAttribute("y2", String(HEIGHT - PAD));
  axis.setAttribute("stroke", "#888");
  svg.appendChild(axis);

  for (const s of series) {
    const line = svgElement("polyline");
    line.setAttribute("points", polylinePoints(overlay.x, s.pdf, xDomain, yMax));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", s.color);
    line.setAttribute("stroke-width", s.wide ? "3" : "1.5");
    line.setAttribute("data-series", s.id);
    svg.appendChild(line);
  }
  root.appendChild(svg);

  const legend = document.createElement("ul");
  legend.className = "overlay-legend";
  for (const s of series) {
    const item = document.createElement("li");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = s.color;
    item.appendChild(swatch);
    item.appendChild(document.createTextNode(s.id));
    legend.appendChild(item);
  }
  root.appendChild(legend);
}

function renderFeedback(
  root: HTMLElement,
  overlay: OverlayDoc,
  values: JudgmentValues,
): void {
  if (!overlay.consensus) return;
  const { x } = overlay;
  const pdf = overlay.consensus;
  const below = (t: number) => gridProbabilityBelow(x, pdf, t);

  const panel = document.createElement("div");
  panel.className = "feedback-panel";
  const head = document.createElement("h3");
  head.textContent = "What the consensus fit implies";
  panel.appendChild(head);

  const statements: string[] = [
    `P(X ≤ ${values.q25}) = ${below(values.q25).toFixed(3)}`,
    `P(X ≤ ${values.median}) = ${below(values.median).toFixed(3)}`,
    `P(X ≤ ${values.q75}) = ${below(values.q75).toFixed(3)}`,
    `P(${values.q25} < X ≤ ${values.q75}) = ${(
      below(values.q75) - below(values.q25)
    ).toFixed(3)}`,
    `P(X < ${values.minimum}) = ${below(values.minimum).toFixed(3)}`,
    `P(X > ${values.maximum}) = ${(1 - below(values.maximum)).toFixed(3)}`,
  ];
  const list = document.createElement("ul");
  list.className = "feedback-statements";
  for (const text of statements) {
    const item = document.createElement("li");
    item.textContent = text;
    list.appendChild(item);
  }
  panel.appendChild(list);
  root.appendChild(panel);
}

export function renderOverlayPanel(
  root: HTMLElement,
  opts: OverlayPanelOptions,
): void {
  root.innerHTML = "";
  renderChart(root, opts.overlay);

  if (opts.consensusValues) {
    renderFeedback(root, opts.overlay, opts.consensusValues);
  }

  if (opts.role !== "facilitator") return;

  const section = document.createElement("section");
  section.className = "consensus-entry";
  const head = document.createElement("h3");
  head.textContent = "Group consensus (rational impartial observer)";
  section.appendChild(head);

  if (stageIndex(opts.stage) < stageIndex("group_discussion")) {
    const blocked = document.createElement("p");
    blocked.className = "stage-blocked";
    blocked.textContent =
      `consensus entry opens at the group_discussion stage; ` +
      `the session is at ${opts.stage}`;
    section.appendChild(blocked);
    root.appendChild(section);
    return;
  }

  const formHost = document.createElement("div");
  section.appendChild(formHost);
  root.appendChild(section);

  renderJudgmentForm(formHost, {
    quantity: opts.quantity,
    initial: opts.consensusValues,
    debounceMs: opts.debounceMs,
    // saving IS the preview here: the endpoint stores the judgment,
    // fits it, and advances the stage
    preview: async (values, family) => {
      const res = await opts.saveConsensus(values, family);
      opts.onConsensusSaved?.(res);
      return res;
    },
    onError: opts.onError,
  });
}
