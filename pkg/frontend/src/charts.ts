/**
 * Pure SVG builders for the explorer panels.
 *
 * Every displayed number is a field of a server payload; the only arithmetic
 * here is pixel layout (scaling values onto the canvas).  Each chart embeds
 * the exact payload series in `data-*` attributes so tests can verify that
 * nothing was recomputed on the client.
 */

import type { HistogramData, PdpPayload, PrpPayload } from "./api.js";

export const CHART_WIDTH = 360;
export const CHART_HEIGHT = 160;
const PAD = { left: 10, right: 10, top: 8, bottom: 22 };

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Deterministic display form: up to 5 significant digits, no noise. */
export function fmt(value: number): string {
  if (Number.isInteger(value) && Math.abs(value) < 1e15) return String(value);
  const text = value.toPrecision(5);
  return text.includes("e") ? text : String(Number(text));
}

function px(value: number): string {
  return (Math.round(value * 100) / 100).toString();
}

interface Span {
  lo: number;
  hi: number;
}

function edgeSpan(hist: HistogramData): Span {
  const edges = hist.edges ?? [];
  const lo = edges[0] ?? 0;
  const hi = edges[edges.length - 1] ?? 1;
  return { lo, hi: hi > lo ? hi : lo + 1 };
}

function xScale(span: Span): (v: number) => number {
  const width = CHART_WIDTH - PAD.left - PAD.right;
  return (v) => PAD.left + ((v - span.lo) / (span.hi - span.lo)) * width;
}

function continuousBars(
  hist: HistogramData,
  span: Span,
  cls: string,
): string {
  const x = xScale(span);
  const counts = hist.counts;
  const edges = hist.edges ?? [];
  const peak = Math.max(...counts, 1);
  const floor = CHART_HEIGHT - PAD.bottom;
  const plotH = floor - PAD.top;
  const bars: string[] = [];
  for (let i = 0; i < counts.length; i++) {
    const left = x(edges[i] ?? span.lo);
    const right = x(edges[i + 1] ?? span.hi);
    const h = (counts[i]! / peak) * plotH;
    bars.push(
      `<rect class="${cls}" x="${px(left)}" y="${px(floor - h)}" ` +
        `width="${px(Math.max(right - left, 0.5))}" height="${px(h)}"/>`,
    );
  }
  return bars.join("");
}

function categoricalBars(
  hist: HistogramData,
  allLevels: number[],
  slot: 0 | 1,
  slots: 1 | 2,
  cls: string,
): string {
  const width = CHART_WIDTH - PAD.left - PAD.right;
  const group = width / Math.max(allLevels.length, 1);
  const barW = (group * 0.7) / slots;
  const peak = Math.max(...hist.counts, 1);
  const floor = CHART_HEIGHT - PAD.bottom;
  const plotH = floor - PAD.top;
  const byLevel = new Map<number, number>();
  (hist.levels ?? []).forEach((level, i) => byLevel.set(level, hist.counts[i] ?? 0));
  const bars: string[] = [];
  allLevels.forEach((level, i) => {
    const count = byLevel.get(level) ?? 0;
    const h = (count / peak) * plotH;
    const xLeft = PAD.left + i * group + group * 0.15 + slot * barW;
    bars.push(
      `<rect class="${cls}" x="${px(xLeft)}" y="${px(floor - h)}" ` +
        `width="${px(barW)}" height="${px(h)}"/>`,
    );
  });
  return bars.join("");
}

function axisLabels(left: string, right: string): string {
  const y = CHART_HEIGHT - 6;
  return (
    `<text class="axis" x="${PAD.left}" y="${y}">${esc(left)}</text>` +
    `<text class="axis" x="${CHART_WIDTH - PAD.right}" y="${y}" text-anchor="end">${esc(right)}</text>`
  );
}

/**
 * Histogram for one node: the observational baseline, optionally overlaid
 * with the current interventional series.
 */
export function histogramSvg(baseline: HistogramData, current?: HistogramData): string {
  const data =
    ` data-baseline-counts="${esc(JSON.stringify(baseline.counts))}"` +
    (current ? ` data-current-counts="${esc(JSON.stringify(current.counts))}"` : "");
  let body = "";
  let labels = "";
  if (baseline.kind === "continuous") {
    const spans = [edgeSpan(baseline)].concat(current ? [edgeSpan(current)] : []);
    const span = {
      lo: Math.min(...spans.map((s) => s.lo)),
      hi: Math.max(...spans.map((s) => s.hi)),
    };
    body = continuousBars(baseline, span, "bar-base");
    if (current) body += continuousBars(current, span, "bar-current");
    labels = axisLabels(fmt(span.lo), fmt(span.hi));
  } else {
    const union = new Set<number>(baseline.levels ?? []);
    for (const level of current?.levels ?? []) union.add(level);
    const levels = [...union].sort((a, b) => a - b);
    const slots = current ? 2 : 1;
    body = categoricalBars(baseline, levels, 0, slots, "bar-base");
    if (current) body += categoricalBars(current, levels, 1, 2, "bar-current");
    labels = levels
      .map((level, i) => {
        const group = (CHART_WIDTH - PAD.left - PAD.right) / levels.length;
        const cx = PAD.left + (i + 0.5) * group;
        return `<text class="axis" x="${px(cx)}" y="${CHART_HEIGHT - 6}" text-anchor="middle">${level}</text>`;
      })
      .join("");
  }
  return (
    `<svg class="chart histogram" viewBox="0 0 ${CHART_WIDTH} ${CHART_HEIGHT}"` +
    `${data} role="img">${body}${labels}</svg>`
  );
}

/** Dependence curve: the server-computed delta against the parent grid. */
export function pdpSvg(curve: PdpPayload): string {
  const span = { lo: curve.grid[0] ?? 0, hi: curve.grid[curve.grid.length - 1] ?? 1 };
  if (span.hi <= span.lo) span.hi = span.lo + 1;
  const x = xScale(span);
  let deltaLo = Infinity;
  let deltaHi = -Infinity;
  for (const v of curve.delta) {
    if (v < deltaLo) deltaLo = v;
    if (v > deltaHi) deltaHi = v;
  }
  if (!(deltaHi > deltaLo)) {
    deltaLo -= 1;
    deltaHi += 1;
  }
  const floor = CHART_HEIGHT - PAD.bottom;
  const plotH = floor - PAD.top;
  const y = (v: number) => floor - ((v - deltaLo) / (deltaHi - deltaLo)) * plotH;
  const points = curve.grid
    .map((g, i) => `${px(x(g))},${px(y(curve.delta[i] ?? 0))}`)
    .join(" ");
  return (
    `<svg class="chart pdp" viewBox="0 0 ${CHART_WIDTH} ${CHART_HEIGHT}"` +
    ` data-grid="${esc(JSON.stringify(curve.grid))}"` +
    ` data-delta="${esc(JSON.stringify(curve.delta))}" role="img">` +
    `<polyline class="curve" fill="none" points="${points}"/>` +
    `<text class="axis" x="${PAD.left}" y="${PAD.top + 8}">${esc(fmt(deltaHi))}</text>` +
    `<text class="axis" x="${PAD.left}" y="${px(floor)}">${esc(fmt(deltaLo))}</text>` +
    axisLabels(fmt(span.lo), fmt(span.hi)) +
    `</svg>`
  );
}

const RADAR_SIZE = 260;

/**
 * Contribution radar for one individual: one spoke per parent, radius
 * proportional to |contribution|, dashed polygon edge toward negative values.
 */
export function radarSvg(prp: PrpPayload): string {
  const names = Object.keys(prp.contributions);
  const values = names.map((name) => prp.contributions[name]!);
  const center = RADAR_SIZE / 2;
  const radius = center - 58;
  let maxAbs = 0;
  for (const v of values) maxAbs = Math.max(maxAbs, Math.abs(v));
  if (maxAbs === 0) maxAbs = 1;
  const spoke = (i: number) => (-Math.PI / 2 + (2 * Math.PI * i) / Math.max(names.length, 1));
  const pointAt = (i: number, r: number): [number, number] => [
    center + r * Math.cos(spoke(i)),
    center + r * Math.sin(spoke(i)),
  ];
  const spokes = names
    .map((name, i) => {
      const [ex, ey] = pointAt(i, radius);
      const [lx, ly] = pointAt(i, radius + 14);
      const value = prp.contributions[name]!;
      return (
        `<line class="spoke" x1="${center}" y1="${center}" x2="${px(ex)}" y2="${px(ey)}"/>` +
        `<text class="radar-label" x="${px(lx)}" y="${px(ly)}" text-anchor="middle"` +
        ` data-name="${esc(name)}" data-value="${esc(String(value))}">` +
        `${esc(name)} ${esc(fmt(value))}</text>`
      );
    })
    .join("");
  const polygon = names
    .map((name, i) => {
      const r = (Math.abs(prp.contributions[name]!) / maxAbs) * radius;
      const [xx, yy] = pointAt(i, r);
      return `${px(xx)},${px(yy)}`;
    })
    .join(" ");
  const anyNegative = values.some((v) => v < 0);
  return (
    `<svg class="chart radar" viewBox="0 0 ${RADAR_SIZE} ${RADAR_SIZE}"` +
    ` data-contributions="${esc(JSON.stringify(prp.contributions))}" role="img">` +
    `<circle class="radar-ring" cx="${center}" cy="${center}" r="${radius}"/>` +
    spokes +
    `<polygon class="radar-shape${anyNegative ? " has-negative" : ""}" points="${polygon}"/>` +
    `</svg>`
  );
}
