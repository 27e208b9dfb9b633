/**
 * DAG rendering: nodes placed by longest-path depth, edges as arrows.
 * Layout only — node names, kinds and edges come straight from the model
 * payload.
 */

import type { GraphDoc } from "./api.js";
import { esc } from "./charts.js";

const LAYER_X = 150;
const ROW_Y = 78;
const MARGIN = 70;
const RADIUS = 22;

function depths(graph: GraphDoc): Map<string, number> {
  const parents = new Map<string, string[]>();
  for (const node of graph.nodes) parents.set(node.name, []);
  for (const [from, to] of graph.edges) parents.get(to)?.push(from);
  const memo = new Map<string, number>();
  const depth = (name: string): number => {
    const seen = memo.get(name);
    if (seen !== undefined) return seen;
    memo.set(name, 0); // breaks cycles defensively; the server ships DAGs
    const ps = parents.get(name) ?? [];
    const d = ps.length === 0 ? 0 : 1 + Math.max(...ps.map(depth));
    memo.set(name, d);
    return d;
  };
  for (const node of graph.nodes) depth(node.name);
  return memo;
}

/** Render the causal graph as an SVG string. */
export function graphSvg(graph: GraphDoc): string {
  const layer = depths(graph);
  const byLayer = new Map<number, string[]>();
  for (const node of graph.nodes) {
    const d = layer.get(node.name) ?? 0;
    const bucket = byLayer.get(d) ?? [];
    bucket.push(node.name);
    byLayer.set(d, bucket);
  }
  const pos = new Map<string, [number, number]>();
  for (const [d, names] of byLayer) {
    names.forEach((name, i) => {
      pos.set(name, [MARGIN + d * LAYER_X, MARGIN + i * ROW_Y]);
    });
  }
  const maxDepth = Math.max(0, ...byLayer.keys());
  const maxRows = Math.max(1, ...[...byLayer.values()].map((names) => names.length));
  const width = MARGIN * 2 + maxDepth * LAYER_X;
  const height = MARGIN * 2 + (maxRows - 1) * ROW_Y;

  const edges = graph.edges
    .map(([from, to]) => {
      const [x1, y1] = pos.get(from) ?? [0, 0];
      const [x2, y2] = pos.get(to) ?? [0, 0];
      const len = Math.hypot(x2 - x1, y2 - y1) || 1;
      // stop the arrow at the node boundary so the head stays visible
      const tx = x2 - ((x2 - x1) / len) * (RADIUS + 6);
      const ty = y2 - ((y2 - y1) / len) * (RADIUS + 6);
      return (
        `<line class="edge" x1="${x1}" y1="${y1}" x2="${tx.toFixed(2)}" y2="${ty.toFixed(2)}"` +
        ` marker-end="url(#arrow)" data-edge="${esc(from)}-&gt;${esc(to)}"/>`
      );
    })
    .join("");

  const nodes = graph.nodes
    .map((node) => {
      const [x, y] = pos.get(node.name) ?? [0, 0];
      const shape =
        node.kind === "categorical"
          ? `<rect class="node categorical" x="${x - RADIUS}" y="${y - RADIUS}"` +
            ` width="${2 * RADIUS}" height="${2 * RADIUS}" rx="5"/>`
          : `<circle class="node continuous" cx="${x}" cy="${y}" r="${RADIUS}"/>`;
      const levels = node.levels !== undefined ? ` (${node.levels})` : "";
      return (
        `<g class="graph-node" data-node="${esc(node.name)}" data-kind="${node.kind}">` +
        shape +
        `<text class="node-label" x="${x}" y="${y + 4}" text-anchor="middle">${esc(node.name)}</text>` +
        `<text class="node-kind" x="${x}" y="${y + RADIUS + 14}" text-anchor="middle">` +
        `${node.kind}${esc(levels)}</text></g>`
      );
    })
    .join("");

  return (
    `<svg class="graph" viewBox="0 0 ${width} ${height}" role="img">` +
    `<defs><marker id="arrow" markerWidth="8" markerHeight="8" refX="6" refY="3"` +
    ` orient="auto"><path d="M0,0 L6,3 L0,6 z"/></marker></defs>` +
    `${edges}${nodes}</svg>`
  );
}
