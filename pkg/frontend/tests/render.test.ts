/** Snapshot tests against payloads recorded from a real service session:
 * everything the views display must equal the corresponding payload field.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";

import type {
  AnswerPayload,
  DatasetDetail,
  QueryPayload,
  ResultPayload,
} from "../src/api.js";
import {
  clusterColor,
  fmtProgress,
  fmtProvenance,
  fmtValue,
  fmtWeight,
  renderLeaderboard,
  renderQueryView,
  renderResultView,
  renderScatter,
} from "../src/views.js";

interface Recorded {
  dataset: DatasetDetail;
  queries: QueryPayload[];
  answers: AnswerPayload[];
  result: ResultPayload;
}

const recorded: Recorded = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "payloads.json"), "utf-8"),
);

let container: HTMLElement;

beforeEach(() => {
  container = document.createElement("div");
  document.body.appendChild(container);
});

describe("query view", () => {
  it("shows exactly the payload's pair, features and progress", () => {
    for (const query of recorded.queries) {
      renderQueryView(container, query, recorded.dataset);
      const title = container.querySelector(".pair-title")!.textContent!;
      expect(title).toContain(String(query.pair[0]));
      expect(title).toContain(String(query.pair[1]));
      expect(container.querySelector(".progress")!.textContent).toBe(
        `answered ${fmtProgress(query.progress.u, query.progress.budget)}`,
      );
      const tables = container.querySelectorAll("table.features");
      expect(tables.length).toBe(2);
      query.instances.forEach((inst, t) => {
        const table = tables[t] as HTMLTableElement;
        expect(table.getAttribute("data-instance")).toBe(String(inst.index));
        const names = [...table.querySelectorAll(".feature-name")].map(
          (n) => n.textContent,
        );
        const values = [...table.querySelectorAll(".feature-value")].map(
          (n) => n.textContent,
        );
        expect(names).toEqual(Object.keys(inst.features));
        expect(values).toEqual(
          Object.values(inst.features).map((v) => fmtValue(v)),
        );
      });
    }
  });

  it("highlights exactly the queried pair in the scatter", () => {
    const query = recorded.queries[0];
    renderQueryView(container, query, recorded.dataset);
    const dots = container.querySelectorAll("svg circle");
    expect(dots.length).toBe(recorded.dataset.projection.length);
    const highlighted = [...container.querySelectorAll("circle.highlight")].map(
      (c) => Number(c.getAttribute("data-index")),
    );
    expect(highlighted.sort((a, b) => a - b)).toEqual(
      [...query.pair].sort((a, b) => a - b),
    );
  });
});

describe("leaderboard", () => {
  it("shows a tie notice before any answers", () => {
    renderLeaderboard(container, null, 0);
    expect(container.querySelector(".tie-notice")).not.toBeNull();
    expect(container.querySelectorAll(".top-list li").length).toBe(0);
  });

  it("lists the payload's top entries verbatim, in order", () => {
    for (const answer of recorded.answers) {
      renderLeaderboard(container, answer.top, answer.progress.u);
      const algos = [...container.querySelectorAll(".top-list .algo")].map(
        (n) => n.textContent,
      );
      const weights = [...container.querySelectorAll(".top-list .weight")].map(
        (n) => n.textContent,
      );
      expect(algos).toEqual(answer.top.map((t) => fmtProvenance(t)));
      expect(weights).toEqual(answer.top.map((t) => fmtWeight(t.weight)));
    }
  });

  it("orders entries by non-increasing weight (service contract echoed)", () => {
    const last = recorded.answers[recorded.answers.length - 1];
    const weights = last.top.map((t) => t.weight);
    const sorted = [...weights].sort((a, b) => b - a);
    expect(weights).toEqual(sorted);
  });
});

describe("result view", () => {
  it("shows ARI, provenance and cluster sizes straight from the payload", () => {
    renderResultView(container, recorded.result, recorded.dataset);
    expect(container.querySelector(".provenance")!.textContent).toBe(
      fmtProvenance(recorded.result.provenance),
    );
    const ari = container.querySelector(".ari")!;
    expect(ari.getAttribute("data-ari")).toBe(fmtValue(recorded.result.ari));
    expect(recorded.result.ari).toBe(1.0);
    const sizes = [...container.querySelectorAll(".cluster-size")].map((n) =>
      Number(n.textContent),
    );
    expect(sizes).toEqual(recorded.result.cluster_sizes.map((c) => c.size));
    const total = sizes.reduce((a, b) => a + b, 0);
    expect(total).toBe(recorded.result.assignment.length);
  });

  it("colors every projection dot by the assignment", () => {
    renderResultView(container, recorded.result, recorded.dataset);
    const dots = [...container.querySelectorAll("svg circle")];
    expect(dots.length).toBe(recorded.result.assignment.length);
    for (const dot of dots) {
      const index = Number(dot.getAttribute("data-index"));
      expect(dot.getAttribute("fill")).toBe(
        clusterColor(recorded.result.assignment[index]),
      );
    }
  });
});

describe("scatter", () => {
  it("degenerate single-point projection still renders", () => {
    const svg = renderScatter([[0.5, 0.5]]);
    expect(svg.querySelectorAll("circle").length).toBe(1);
  });
});
