/**
 * Browser bootstrap: fetches payloads, keeps SessionState in the URL
 * fragment, and re-renders the pure panels on every change.
 *
 * All statistics on screen come from server responses; this file only moves
 * payloads between the client and the templates.
 */

import { ApiClient, ApiError, type ModelPayload, type SamplePayload } from "./api.js";
import {
  atePanel,
  counterfactualPanel,
  diagnosticsPanel,
  modelPanel,
  pdpPanel,
  prpPanel,
  retryBanner,
  samplePanel,
  schemaBanner,
  type CfOutcome,
  type PrpOutcome,
} from "./panels.js";
import { DEFAULT_STATE, decodeState, encodeState, type SessionState } from "./state.js";
import { SchemaError, assertModelEnvelope } from "./validate.js";

const client = new ApiClient("");

interface AppData {
  model: ModelPayload | null;
  baseline: SamplePayload | null;
  current: SamplePayload | null;
  state: SessionState;
  cfFactual: Record<string, number>;
  cfOutcome: CfOutcome;
  prpOutcome: PrpOutcome;
}

const data: AppData = {
  model: null,
  baseline: null,
  current: null,
  state: { ...DEFAULT_STATE, interventions: {} },
  cfFactual: {},
  cfOutcome: { kind: "idle" },
  prpOutcome: { kind: "idle" },
};

function root(): HTMLElement {
  const el = document.getElementById("app");
  if (el === null) throw new Error("missing #app mount point");
  return el;
}

function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}

function render(): void {
  const el = root();
  if (data.model === null || data.baseline === null) return;
  el.innerHTML =
    modelPanel(data.model) +
    samplePanel(data.model, data.state, data.baseline, data.current) +
    counterfactualPanel(data.model, data.cfFactual, data.cfOutcome) +
    pdpPanel(null) +
    prpPanel(data.prpOutcome) +
    atePanel(null);
  wireControls(el);
  void refreshSidePanels(el);
}

function pushState(): void {
  const fragment = encodeState(data.state);
  history.replaceState(null, "", fragment === "" ? "#" : `#${fragment}`);
}

async function refreshSamples(): Promise<void> {
  try {
    const names = Object.keys(data.state.interventions);
    if (names.length === 0) {
      data.current = null;
    } else {
      const reply = await client.sample({
        n: data.state.n,
        seed: data.state.seed,
        interventions: data.state.interventions,
      });
      data.current = reply.payload;
    }
    render();
  } catch (err) {
    if (!isAbort(err)) showError(err);
  }
}

async function refreshSidePanels(el: HTMLElement): Promise<void> {
  if (data.state.pdp !== null) {
    try {
      const reply = await client.pdp(
        data.state.pdp.node,
        data.state.pdp.parent,
        data.state.pdp.points,
      );
      const slot = el.querySelector("#panel-pdp");
      if (slot !== null) slot.outerHTML = pdpPanel(reply.payload);
    } catch (err) {
      if (!isAbort(err)) showError(err);
    }
  }
  if (data.state.prpRow !== null && data.model !== null) {
    const sinks = data.model.graph.nodes.filter((n) =>
      data.model!.graph.edges.some(([, to]) => to === n.name),
    );
    const node = sinks[sinks.length - 1]?.name;
    if (node !== undefined) {
      try {
        const reply = await client.prpByRow(node, data.state.prpRow);
        data.prpOutcome = { kind: "ok", payload: reply.payload };
      } catch (err) {
        if (err instanceof ApiError && err.code === "unsupported-decomposition") {
          data.prpOutcome = { kind: "unsupported", message: err.message };
        } else if (!isAbort(err)) {
          showError(err);
          return;
        }
      }
      const slot = el.querySelector("#panel-prp");
      if (slot !== null) slot.outerHTML = prpPanel(data.prpOutcome);
      wireControls(el);
    }
  }
}

function showError(err: unknown): void {
  const message =
    err instanceof SchemaError
      ? schemaBanner(err.path, err.message.slice(err.path.length + 2))
      : retryBanner(err instanceof Error ? err.message : String(err));
  root().innerHTML = message;
  root().querySelector("[data-action=retry]")?.addEventListener("click", () => void boot());
}

function wireControls(el: HTMLElement): void {
  el.querySelectorAll<HTMLInputElement>("[data-iv-toggle]").forEach((box) => {
    box.onchange = () => {
      const name = box.dataset.ivToggle!;
      if (box.checked) {
        const input = el.querySelector<HTMLInputElement | HTMLSelectElement>(
          `[data-iv="${name}"]`,
        );
        data.state.interventions[name] = Number(input?.value ?? 0);
      } else {
        delete data.state.interventions[name];
      }
      pushState();
      void refreshSamples();
    };
  });
  el.querySelectorAll<HTMLInputElement>("input[data-iv]").forEach((slider) => {
    slider.onchange = () => {
      const name = slider.dataset.iv!;
      if (name in data.state.interventions) {
        data.state.interventions[name] = Number(slider.value);
        pushState();
        void refreshSamples();
      }
    };
  });
  el.querySelectorAll<HTMLSelectElement>("select[data-iv]").forEach((select) => {
    select.onchange = () => {
      const name = select.dataset.iv!;
      if (name in data.state.interventions) {
        data.state.interventions[name] = Number(select.value);
        pushState();
        void refreshSamples();
      }
    };
  });
  const runCf = el.querySelector<HTMLButtonElement>("[data-action=run-cf]");
  if (runCf !== null) {
    runCf.onclick = () => {
      el.querySelectorAll<HTMLInputElement>("[data-cf-input]").forEach((input) => {
        data.cfFactual[input.dataset.cfInput!] = Number(input.value);
      });
      void (async () => {
        try {
          const reply = await client.counterfactual({
            factual_row: data.cfFactual,
            interventions: data.state.interventions,
            seed: data.state.seed,
          });
          data.cfOutcome = { kind: "ok", payload: reply.payload };
        } catch (err) {
          if (err instanceof ApiError && err.status === 409) {
            data.cfOutcome = { kind: "blocked", message: err.message, offenders: err.offenders };
          } else if (isAbort(err)) {
            return;
          } else {
            showError(err);
            return;
          }
        }
        render();
      })();
    };
  }
  const runAte = el.querySelector<HTMLButtonElement>("[data-action=run-ate]");
  if (runAte !== null) {
    runAte.onclick = () => {
      const get = (key: string) =>
        el.querySelector<HTMLInputElement>(`[data-ate="${key}"]`)?.value ?? "";
      void (async () => {
        try {
          const reply = await client.ate({
            node: get("node"),
            parent: get("parent"),
            from: Number(get("from")),
            to: Number(get("to")),
          });
          const slot = el.querySelector("#panel-ate");
          if (slot !== null) {
            slot.outerHTML = atePanel(reply.payload);
            wireControls(el);
          }
        } catch (err) {
          if (!isAbort(err)) showError(err);
        }
      })();
    };
  }
}

async function boot(): Promise<void> {
  try {
    const raw = await client.model();
    const envelope = assertModelEnvelope(raw);
    data.model = envelope.payload;
    const names = data.model.graph.nodes.map((node) => node.name);
    data.state = decodeState(location.hash, names);
    data.cfFactual = Object.fromEntries(names.map((name) => [name, 0]));
    const baseline = await client.sample({ n: data.state.n, seed: data.state.seed });
    data.baseline = baseline.payload;
    await refreshSamples();
  } catch (err) {
    if (!isAbort(err)) showError(err);
  }
}

window.addEventListener("hashchange", () => {
  if (data.model === null) return;
  const names = data.model.graph.nodes.map((node) => node.name);
  try {
    data.state = decodeState(location.hash, names);
  } catch (err) {
    showError(err);
    return;
  }
  void refreshSamples();
});

void boot();
