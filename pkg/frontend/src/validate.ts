/**
 * Structural validation of the model payload before any rendering.
 *
 * A payload that fails these checks is reported as a single schema error and
 * nothing is rendered — panels never work from a half-understood document.
 */

import type { Envelope, ModelPayload } from "./api.js";

export class SchemaError extends Error {
  readonly path: string;

  constructor(path: string, message: string) {
    super(`${path}: ${message}`);
    this.name = "SchemaError";
    this.path = path;
  }
}

function isObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function need(condition: boolean, path: string, message: string): asserts condition {
  if (!condition) throw new SchemaError(path, message);
}

const KINDS = new Set(["continuous", "categorical"]);
const STAGES = new Set(["raw", "pruned", "symbolic"]);

/** Validate a /api/model response body; returns it typed on success. */
export function assertModelEnvelope(doc: unknown): Envelope<ModelPayload> {
  need(isObject(doc), "$", "response is not an object");
  need(typeof doc.request_id === "string", "$.request_id", "missing or not a string");
  const payload = doc.payload;
  need(isObject(payload), "$.payload", "missing or not an object");

  const graph = payload.graph;
  need(isObject(graph), "$.payload.graph", "missing or not an object");
  need(Array.isArray(graph.nodes), "$.payload.graph.nodes", "missing or not an array");
  graph.nodes.forEach((node: unknown, i: number) => {
    const path = `$.payload.graph.nodes[${i}]`;
    need(isObject(node), path, "not an object");
    need(typeof node.name === "string", `${path}.name`, "missing or not a string");
    need(
      typeof node.kind === "string" && KINDS.has(node.kind),
      `${path}.kind`,
      "must be continuous or categorical",
    );
  });
  need(Array.isArray(graph.edges), "$.payload.graph.edges", "missing or not an array");
  graph.edges.forEach((edge: unknown, i: number) => {
    const path = `$.payload.graph.edges[${i}]`;
    need(
      Array.isArray(edge) && edge.length === 2 && edge.every((e) => typeof e === "string"),
      path,
      "must be a [from, to] pair of node names",
    );
  });

  need(isObject(payload.kinds), "$.payload.kinds", "missing or not an object");
  for (const [name, kind] of Object.entries(payload.kinds)) {
    need(
      typeof kind === "string" && KINDS.has(kind),
      `$.payload.kinds.${name}`,
      "must be continuous or categorical",
    );
  }
  need(isObject(payload.levels), "$.payload.levels", "missing or not an object");
  need(
    typeof payload.stage === "string" && STAGES.has(payload.stage),
    "$.payload.stage",
    "must be raw, pruned or symbolic",
  );
  need(isObject(payload.formulas), "$.payload.formulas", "missing or not an object");
  for (const [name, text] of Object.entries(payload.formulas)) {
    need(typeof text === "string", `$.payload.formulas.${name}`, "must be a string");
  }
  need(
    payload.diagnostics === null || isObject(payload.diagnostics),
    "$.payload.diagnostics",
    "must be an object or null",
  );

  const names = new Set(graph.nodes.map((node: { name?: unknown }) => node.name as string));
  graph.edges.forEach((edge: unknown, i: number) => {
    const [from, to] = edge as [string, string];
    need(
      names.has(from) && names.has(to),
      `$.payload.graph.edges[${i}]`,
      "references an undeclared node",
    );
  });

  return doc as unknown as Envelope<ModelPayload>;
}
