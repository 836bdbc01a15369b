/** DOM rendering for the oracle UI.
 *
 * Rendering is pure: each function paints exactly the payload it is given.
 * All numbers pass through the exported formatters, which the snapshot
 * tests reuse to assert that everything on screen equals the service
 * payload.
 */

import type {
  DatasetDetail,
  QueryPayload,
  ResultPayload,
  TopEntry,
} from "./api.js";

/** Feature values and ARI are shown exactly as received. */
export function fmtValue(value: number | string | null): string {
  return String(value);
}

/** Weight shares get a fixed number of decimals for the leaderboard. */
export function fmtWeight(value: number): string {
  return value.toFixed(4);
}

export function fmtProgress(u: number, budget: number): string {
  return `${u} / ${budget}`;
}

export function fmtProvenance(p: {
  algorithm: string;
  params: Record<string, number | string>;
  seed: number | null;
}): string {
  const inner = Object.entries(p.params)
    .map(([k, v]) => `${k}=${fmtValue(v)}`)
    .join(", ");
  const seed = p.seed === null ? "" : `, seed=${p.seed}`;
  return `${p.algorithm}(${inner}${seed})`;
}

const PALETTE = [
  "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951",
  "#ff8ab7", "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0",
];

export function clusterColor(label: number): string {
  if (label < 0) return "#c8c8c8"; // noise
  return PALETTE[label % PALETTE.length];
}

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ScatterOptions {
  colors?: (index: number) => string;
  highlight?: number[];
}

/** SVG scatter of the dataset's 2-D projection. */
export function renderScatter(
  projection: [number, number][],
  options: ScatterOptions = {},
): SVGSVGElement {
  const width = 420;
  const height = 320;
  const pad = 14;
  const xs = projection.map((p) => p[0]);
  const ys = projection.map((p) => p[1]);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const sx = (x: number) =>
    pad + ((x - xMin) / (xMax - xMin || 1)) * (width - 2 * pad);
  const sy = (y: number) =>
    height - pad - ((y - yMin) / (yMax - yMin || 1)) * (height - 2 * pad);

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "scatter");
  const highlight = new Set(options.highlight ?? []);
  projection.forEach(([x, y], index) => {
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", sx(x).toFixed(2));
    dot.setAttribute("cy", sy(y).toFixed(2));
    dot.setAttribute("r", highlight.has(index) ? "7" : "3");
    dot.setAttribute("fill", options.colors?.(index) ?? "#9498a0");
    dot.setAttribute("data-index", String(index));
    if (highlight.has(index)) dot.setAttribute("class", "highlight");
    svg.appendChild(dot);
  });
  return svg;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** The pair under query: two feature tables plus the highlighted scatter. */
export function renderQueryView(
  container: HTMLElement,
  query: QueryPayload,
  dataset: DatasetDetail,
): void {
  container.textContent = "";
  const [a, b] = query.instances;
  container.appendChild(
    el("h2", "pair-title", `Do instances ${a.index} and ${b.index} belong together?`),
  );
  container.appendChild(
    el("p", "progress",
       `answered ${fmtProgress(query.progress.u, query.progress.budget)}`),
  );
  const tables = el("div", "feature-tables");
  for (const inst of query.instances) {
    const box = el("div", "feature-box");
    box.appendChild(el("h3", "instance-id", `instance ${inst.index}`));
    const table = el("table", "features");
    table.setAttribute("data-instance", String(inst.index));
    for (const [name, value] of Object.entries(inst.features)) {
      const row = el("tr");
      row.appendChild(el("td", "feature-name", name));
      row.appendChild(el("td", "feature-value", fmtValue(value)));
      table.appendChild(row);
    }
    box.appendChild(table);
    tables.appendChild(box);
  }
  container.appendChild(tables);
  container.appendChild(
    renderScatter(dataset.projection, { highlight: query.pair }),
  );
}

/** Top-weighted clusterings after each answer; tie notice before any. */
export function renderLeaderboard(
  container: HTMLElement,
  top: TopEntry[] | null,
  answered: number,
): void {
  container.textContent = "";
  container.appendChild(el("h3", undefined, "leading clusterings"));
  if (answered === 0 || top === null) {
    container.appendChild(
      el("p", "tie-notice", "no answers yet: all clusterings tied at equal weight"),
    );
    return;
  }
  const list = el("ol", "top-list");
  for (const entry of top) {
    const item = el("li");
    item.appendChild(el("span", "algo", fmtProvenance(entry)));
    item.appendChild(el("span", "weight", fmtWeight(entry.weight)));
    list.appendChild(item);
  }
  container.appendChild(list);
}

/** Final (or progressive) selection: colored scatter, provenance, sizes. */
export function renderResultView(
  container: HTMLElement,
  result: ResultPayload,
  dataset: DatasetDetail,
): void {
  container.textContent = "";
  container.appendChild(el("h2", undefined, "selected clustering"));
  container.appendChild(
    el("p", "provenance", fmtProvenance(result.provenance)),
  );
  container.appendChild(
    el("p", "progress",
       `constraints used ${fmtProgress(result.progress.u, result.progress.budget)}`),
  );
  if (result.no_constraints_yet) {
    container.appendChild(
      el("p", "no-constraints", "no constraints answered yet; this is the deterministic default pick"),
    );
  }
  if (result.ari !== null) {
    const ari = el("p", "ari", `ARI against the known classes: ${fmtValue(result.ari)}`);
    ari.setAttribute("data-ari", fmtValue(result.ari));
    container.appendChild(ari);
  }
  const table = el("table", "cluster-sizes");
  const head = el("tr");
  head.appendChild(el("th", undefined, "cluster"));
  head.appendChild(el("th", undefined, "size"));
  table.appendChild(head);
  for (const row of result.cluster_sizes) {
    const tr = el("tr");
    tr.appendChild(el("td", "cluster-label",
                      row.label < 0 ? "noise" : fmtValue(row.label)));
    tr.appendChild(el("td", "cluster-size", fmtValue(row.size)));
    table.appendChild(tr);
  }
  container.appendChild(table);
  container.appendChild(
    renderScatter(dataset.projection, {
      colors: (index) => clusterColor(result.assignment[index]),
    }),
  );
}
