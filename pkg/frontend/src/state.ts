/**
 * Session state and its shareable URL-fragment form.
 *
 * The fragment captures everything needed to reproduce a view against the
 * same server: intervention set, seed, sample size and panel selections.
 * Server payloads (model summary, last sample) are re-fetched on restore.
 * Number round trips are exact: ECMAScript number-to-string conversion is
 * reversible for every finite double.
 */

export interface PdpSelection {
  node: string;
  parent: string;
  points: number;
}

export interface SessionState {
  /** Active do() assignments in raw units, keyed by node name. */
  interventions: Record<string, number>;
  /** Seed sent with sampling requests. */
  seed: number;
  /** Requested sample size. */
  n: number;
  /** Selected node/parent pair for the dependence curve, if any. */
  pdp: PdpSelection | null;
  /** Selected evaluation-data row for the contribution radar, if any. */
  prpRow: number | null;
}

export const DEFAULT_STATE: SessionState = {
  interventions: {},
  seed: 0,
  n: 500,
  pdp: null,
  prpRow: null,
};

/** Raised when a fragment is syntactically valid but inconsistent. */
export class StateError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "StateError";
  }
}

function encodeName(name: string): string {
  return encodeURIComponent(name);
}

/**
 * Serialize to a URL fragment (without the leading `#`).
 *
 * Keys appear in a fixed order and interventions are sorted by node name,
 * so equal states always produce identical fragments.
 */
export function encodeState(state: SessionState): string {
  const parts: string[] = [`seed=${state.seed}`, `n=${state.n}`];
  const names = Object.keys(state.interventions).sort();
  if (names.length > 0) {
    const body = names
      .map((name) => `${encodeName(name)}:${state.interventions[name]}`)
      .join(",");
    parts.push(`iv=${body}`);
  }
  if (state.pdp !== null) {
    parts.push(
      `pdp=${encodeName(state.pdp.node)}~${encodeName(state.pdp.parent)}~${state.pdp.points}`,
    );
  }
  if (state.prpRow !== null) {
    parts.push(`prp=${state.prpRow}`);
  }
  return parts.join("&");
}

function parseNumber(text: string, what: string): number {
  const value = Number(text);
  if (text.trim() === "" || Number.isNaN(value)) {
    throw new StateError(`${what} is not a number: ${JSON.stringify(text)}`);
  }
  return value;
}

function parseInteger(text: string, what: string): number {
  const value = parseNumber(text, what);
  if (!Number.isInteger(value)) {
    throw new StateError(`${what} must be an integer: ${JSON.stringify(text)}`);
  }
  return value;
}

/**
 * Parse a fragment produced by {@link encodeState}.
 *
 * When `knownNodes` is given, interventions and the dependence selection may
 * only reference those nodes; anything else raises {@link StateError} so the
 * caller can refuse to restore a stale link against a different model.
 */
export function decodeState(fragment: string, knownNodes?: string[]): SessionState {
  const state: SessionState = {
    ...DEFAULT_STATE,
    interventions: {},
  };
  const text = fragment.startsWith("#") ? fragment.slice(1) : fragment;
  if (text === "") return state;
  const known = knownNodes === undefined ? null : new Set(knownNodes);
  const checkNode = (name: string, where: string) => {
    if (known !== null && !known.has(name)) {
      throw new StateError(`${where} references unknown node ${JSON.stringify(name)}`);
    }
  };
  for (const part of text.split("&")) {
    const eq = part.indexOf("=");
    if (eq < 0) throw new StateError(`malformed fragment entry: ${JSON.stringify(part)}`);
    const key = part.slice(0, eq);
    const value = part.slice(eq + 1);
    if (key === "seed") {
      state.seed = parseInteger(value, "seed");
    } else if (key === "n") {
      state.n = parseInteger(value, "n");
    } else if (key === "iv") {
      for (const item of value.split(",")) {
        const colon = item.lastIndexOf(":");
        if (colon < 0) throw new StateError(`malformed intervention: ${JSON.stringify(item)}`);
        const name = decodeURIComponent(item.slice(0, colon));
        checkNode(name, "intervention");
        state.interventions[name] = parseNumber(item.slice(colon + 1), `do(${name})`);
      }
    } else if (key === "pdp") {
      const bits = value.split("~");
      if (bits.length !== 3) throw new StateError(`malformed pdp selection: ${JSON.stringify(value)}`);
      const node = decodeURIComponent(bits[0]!);
      const parent = decodeURIComponent(bits[1]!);
      checkNode(node, "pdp selection");
      checkNode(parent, "pdp selection");
      state.pdp = { node, parent, points: parseInteger(bits[2]!, "pdp points") };
    } else if (key === "prp") {
      state.prpRow = parseInteger(value, "prp row");
    } else {
      throw new StateError(`unknown fragment key: ${JSON.stringify(key)}`);
    }
  }
  return state;
}
