/**
 * Panel templates: pure functions from server payloads + session state to
 * HTML strings.  The browser bootstrap mounts these and wires the controls;
 * tests snapshot them directly from recorded fixtures.
 */

import type {
  AtePayload,
  CounterfactualPayload,
  DiagnosticsPayload,
  ModelPayload,
  PdpPayload,
  PrpPayload,
  SamplePayload,
} from "./api.js";
import { esc, fmt, histogramSvg, pdpSvg, radarSvg } from "./charts.js";
import { graphSvg } from "./graphview.js";
import type { SessionState } from "./state.js";

export function retryBanner(message: string): string {
  return (
    `<div class="banner error" role="alert"><span>${esc(message)}</span>` +
    `<button data-action="retry">Retry</button></div>`
  );
}

export function schemaBanner(path: string, message: string): string {
  return (
    `<div class="banner error" role="alert">Server payload failed validation at ` +
    `<code>${esc(path)}</code>: ${esc(message)}. Nothing was rendered.</div>`
  );
}

/** Graph view with stage badge, node kinds and exported formulas. */
export function modelPanel(model: ModelPayload): string {
  const formulaNames = Object.keys(model.formulas);
  const formulas =
    formulaNames.length === 0
      ? `<p class="muted">No symbolic formulas at stage “${esc(model.stage)}”.</p>`
      : `<dl class="formulas">` +
        formulaNames
          .map(
            (name) =>
              `<dt>${esc(name)}</dt><dd><code data-formula="${esc(name)}">` +
              `${esc(model.formulas[name]!)}</code></dd>`,
          )
          .join("") +
        `</dl>`;
  const diag = model.diagnostics;
  const diagLine =
    diag === null
      ? `<p class="muted">No evaluation data attached to this server.</p>`
      : `<p class="diag-summary">Observational MMD <b>${esc(fmt(diag.mmd_obs))}</b>, ` +
        `two-sample accuracy <b>${esc(fmt(diag.rf_acc_obs))}</b>, ` +
        `joint independence p <b>${esc(fmt(diag.dhsic_pvalue))}</b>` +
        (diag.min_hsic_pvalue === null
          ? ""
          : `, weakest per-node independence p <b>${esc(fmt(diag.min_hsic_pvalue))}</b>`) +
        `.</p>`;
  return (
    `<section class="panel" id="panel-model">` +
    `<header><h2>Model</h2><span class="stage-badge stage-${esc(model.stage)}">` +
    `${esc(model.stage)}</span></header>` +
    graphSvg(model.graph) +
    diagLine +
    formulas +
    `</section>`
  );
}

function sliderControl(name: string, state: SessionState, lo: number, hi: number): string {
  const active = Object.prototype.hasOwnProperty.call(state.interventions, name);
  const value = active ? state.interventions[name]! : (lo + hi) / 2;
  const step = (hi - lo) / 100 || 1;
  return (
    `<label class="slider${active ? " active" : ""}">` +
    `<input type="checkbox" data-iv-toggle="${esc(name)}"${active ? " checked" : ""}/>` +
    `do(${esc(name)} = <output>${esc(fmt(value))}</output>)` +
    `<input type="range" data-iv="${esc(name)}" min="${esc(String(lo))}" max="${esc(String(hi))}"` +
    ` step="${esc(String(step))}" value="${esc(String(value))}"${active ? "" : " disabled"}/>` +
    `</label>`
  );
}

function levelControl(name: string, levels: number, state: SessionState): string {
  const active = Object.prototype.hasOwnProperty.call(state.interventions, name);
  const value = active ? state.interventions[name]! : 0;
  const options = Array.from({ length: levels }, (_, level) => {
    const selected = active && value === level ? " selected" : "";
    return `<option value="${level}"${selected}>${level}</option>`;
  }).join("");
  return (
    `<label class="slider${active ? " active" : ""}">` +
    `<input type="checkbox" data-iv-toggle="${esc(name)}"${active ? " checked" : ""}/>` +
    `do(${esc(name)}) = <select data-iv="${esc(name)}"${active ? "" : " disabled"}>` +
    `${options}</select></label>`
  );
}

/**
 * Distribution explorer: one histogram card per node, the observational
 * baseline under the current interventional overlay, with do() controls.
 */
export function samplePanel(
  model: ModelPayload,
  state: SessionState,
  baseline: SamplePayload,
  current: SamplePayload | null,
): string {
  const activeList = Object.keys(state.interventions).sort();
  const header =
    activeList.length === 0
      ? `<p class="muted">Observational distribution — toggle a node to intervene.</p>`
      : `<p>Intervening on ${activeList
          .map((name) => `<code>do(${esc(name)} = ${esc(fmt(state.interventions[name]!))})</code>`)
          .join(", ")} with seed ${state.seed}, n = ${baseline.n}.</p>`;
  const cards = model.graph.nodes
    .map((node) => {
      const base = baseline.histograms[node.name];
      if (base === undefined) return "";
      const overlay = current?.histograms[node.name];
      const control =
        node.kind === "categorical"
          ? levelControl(node.name, model.levels[node.name] ?? 2, state)
          : sliderControl(
              node.name,
              state,
              base.edges?.[0] ?? -3,
              base.edges?.[base.edges.length - 1] ?? 3,
            );
      return (
        `<div class="hist-card" data-node="${esc(node.name)}">` +
        `<h3>${esc(node.name)}</h3>` +
        histogramSvg(base, overlay) +
        control +
        `</div>`
      );
    })
    .join("");
  return (
    `<section class="panel" id="panel-sample">` +
    `<header><h2>Interventions</h2></header>${header}` +
    `<div class="hist-grid">${cards}</div></section>`
  );
}

export type CfOutcome =
  | { kind: "idle" }
  | { kind: "ok"; payload: CounterfactualPayload }
  | { kind: "blocked"; message: string; offenders: string[] };

/** Single-row counterfactual panel: factual inputs, result or explanation. */
export function counterfactualPanel(
  model: ModelPayload,
  factual: Record<string, number>,
  outcome: CfOutcome,
): string {
  const inputs = model.graph.nodes
    .map(
      (node) =>
        `<label>${esc(node.name)} <input type="number" data-cf-input="${esc(node.name)}"` +
        ` value="${esc(String(factual[node.name] ?? 0))}"/></label>`,
    )
    .join("");
  let result = "";
  if (outcome.kind === "ok") {
    const cf = outcome.payload;
    const rows = model.graph.nodes
      .map((node) => {
        const name = node.name;
        const probs = cf.category_probs[name];
        const value =
          probs !== undefined
            ? probs.map((p) => esc(fmt(p))).join(" / ")
            : esc(fmt(cf.row[name] ?? NaN));
        return (
          `<tr><td>${esc(name)}</td><td>${esc(fmt(factual[name] ?? NaN))}</td>` +
          `<td data-cf-value="${esc(name)}">${value}</td></tr>`
        );
      })
      .join("");
    result =
      `<p>${cf.point_valued ? "Point-valued counterfactual." : "Distribution-valued counterfactual (override) — categorical cells show level probabilities."}</p>` +
      `<table class="cf-table"><thead><tr><th>node</th><th>factual</th><th>counterfactual</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`;
  } else if (outcome.kind === "blocked") {
    result =
      `<div class="banner warn" role="alert">Not point-identifiable: ${esc(outcome.message)}` +
      ` Discrete descendants in the way: ${outcome.offenders
        .map((name) => `<code>${esc(name)}</code>`)
        .join(", ")}. Re-run with override to get level probabilities.</div>`;
  }
  return (
    `<section class="panel" id="panel-cf">` +
    `<header><h2>Counterfactual</h2></header>` +
    `<div class="cf-inputs">${inputs}</div>` +
    `<button data-action="run-cf">Evaluate</button>` +
    result +
    `</section>`
  );
}

/** Dependence curve panel for the selected node/parent pair. */
export function pdpPanel(curve: PdpPayload | null): string {
  const body =
    curve === null
      ? `<p class="muted">Pick a node and one of its parents.</p>`
      : `<h3><code>${esc(curve.node)}</code> vs <code>${esc(curve.parent)}</code></h3>` +
        pdpSvg(curve) +
        `<p class="muted">${curve.grid.length} grid points, relative to ${esc(curve.baseline)}.</p>`;
  return `<section class="panel" id="panel-pdp"><header><h2>Dependence</h2></header>${body}</section>`;
}

export type PrpOutcome =
  | { kind: "idle" }
  | { kind: "ok"; payload: PrpPayload }
  | { kind: "unsupported"; message: string };

/** Per-individual contribution radar, or the explanation when unavailable. */
export function prpPanel(outcome: PrpOutcome): string {
  let body: string;
  if (outcome.kind === "idle") {
    body = `<p class="muted">Pick an individual row to decompose.</p>`;
  } else if (outcome.kind === "unsupported") {
    body =
      `<div class="banner warn" role="alert">This mechanism is not additive, so a ` +
      `per-parent decomposition is undefined here: ${esc(outcome.message)}</div>`;
  } else {
    const prp = outcome.payload;
    body =
      `<h3><code>${esc(prp.node)}</code>${prp.row_id === null ? "" : ` — row ${prp.row_id}`}</h3>` +
      radarSvg(prp) +
      `<p>Intercept <b data-prp-intercept>${esc(fmt(prp.intercept))}</b>, ` +
      `total <b data-prp-total>${esc(fmt(prp.total))}</b>.</p>`;
  }
  return `<section class="panel" id="panel-prp"><header><h2>Contributions</h2></header>${body}</section>`;
}

/** Average-effect calculator readout. */
export function atePanel(result: AtePayload | null): string {
  const body =
    result === null
      ? `<p class="muted">Choose node, parent and the from/to parent values.</p>`
      : `<p>Average effect on <code>${esc(result.node)}</code> of moving ` +
        `<code>${esc(result.parent)}</code> from ${esc(fmt(result.from))} to ${esc(fmt(result.to))}: ` +
        `<b data-ate-value>${esc(fmt(result.ate))}</b></p>`;
  return (
    `<section class="panel" id="panel-ate"><header><h2>Average effect</h2></header>` +
    `<div class="ate-controls">` +
    `<label>node <input data-ate="node"/></label>` +
    `<label>parent <input data-ate="parent"/></label>` +
    `<label>from <input type="number" data-ate="from"/></label>` +
    `<label>to <input type="number" data-ate="to"/></label>` +
    `<button data-action="run-ate">Compute</button></div>${body}</section>`
  );
}

/** Validation report panel. */
export function diagnosticsPanel(report: DiagnosticsPayload): string {
  const rows = report.node_tests
    .map(
      (test) =>
        `<tr><td>${esc(test.node)}</td><td>${esc(test.parents.join(", "))}</td>` +
        `<td>${esc(fmt(test.hsic_statistic))}</td><td>${esc(fmt(test.hsic_pvalue))}</td></tr>`,
    )
    .join("");
  const interventionRows = report.interventions
    .map(
      (entry) =>
        `<tr><td>${esc(entry.label)}</td><td>${esc(fmt(entry.mmd))}</td>` +
        `<td>${esc(fmt(entry.rf_accuracy))}</td></tr>`,
    )
    .join("");
  const notes =
    report.notes.length === 0
      ? ""
      : `<ul class="notes">${report.notes.map((n) => `<li>${esc(n)}</li>`).join("")}</ul>`;
  return (
    `<section class="panel" id="panel-diagnostics">` +
    `<header><h2>Validation</h2></header>` +
    `<p>Observational MMD <b>${esc(fmt(report.mmd_obs))}</b>, two-sample accuracy ` +
    `<b>${esc(fmt(report.rf_acc_obs))}</b>, joint residual independence statistic ` +
    `<b>${esc(fmt(report.dhsic_statistic))}</b> (p = ${esc(fmt(report.dhsic_pvalue))}).</p>` +
    `<table class="diag-table"><thead><tr><th>node</th><th>parents</th>` +
    `<th>HSIC</th><th>p</th></tr></thead><tbody>${rows}</tbody></table>` +
    (interventionRows === ""
      ? ""
      : `<table class="diag-table"><thead><tr><th>intervention</th><th>MMD</th>` +
        `<th>accuracy</th></tr></thead><tbody>${interventionRows}</tbody></table>`) +
    notes +
    `</section>`
  );
}
