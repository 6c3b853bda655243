import { scaleLinear, scaleLog } from "d3-scale";

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  color: string;
  points: Point[];
  dashed?: boolean;
}

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logY?: boolean;
}

export const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
  "#17becf", "#7f7f7f", "#bcbd22", "#e377c2", "#393b79",
];

export const REFERENCE_COLOR = "#d62728"; // dashed stationary reference

const PANEL_W = 380;
const PANEL_H = 260;
const MARGIN = { top: 34, right: 12, bottom: 42, left: 64 };

const fmt = (v: number): string => (Math.abs(v) < 1e-12 ? "0" : v.toFixed(2));

/** Decide the log-scale switch for distance panels: positive data spanning
 * more than three decades. */
export function wantsLogScale(values: number[]): boolean {
  const positive = values.filter((v) => v > 0);
  if (positive.length !== values.length || positive.length === 0) return false;
  return Math.max(...positive) / Math.min(...positive) > 1e3;
}

function tickLabel(scale: { tickFormat: (n?: number) => (v: number) => string }, v: number): string {
  return scale.tickFormat(6)(v);
}

/** Render one panel (axes, ticks, grid, series) as an SVG group. */
export function renderPanel(spec: PanelSpec, x0: number, y0: number): string {
  const innerW = PANEL_W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const xs = spec.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = spec.series.flatMap((s) => s.points.map((p) => p.y));
  if (xs.length === 0) {
    throw new Error(`panel '${spec.title}': no data points`);
  }
  const xScale = scaleLinear()
    .domain([Math.min(...xs), Math.max(...xs)])
    .range([0, innerW])
    .nice();
  let yMin = Math.min(...ys);
  let yMax = Math.max(...ys);
  if (yMin === yMax) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  const yScale = spec.logY
    ? scaleLog().domain([yMin, yMax]).range([innerH, 0]).nice()
    : scaleLinear().domain([yMin, yMax]).range([innerH, 0]).nice();

  const parts: string[] = [];
  parts.push(
    `<g transform="translate(${x0 + MARGIN.left},${y0 + MARGIN.top})" data-scale="${spec.logY ? "log" : "linear"}">`,
  );
  parts.push(
    `<rect x="0" y="0" width="${innerW}" height="${innerH}" fill="none" stroke="#333" stroke-width="1"/>`,
  );
  for (const t of xScale.ticks(6)) {
    const px = fmt(xScale(t));
    parts.push(`<line x1="${px}" y1="${innerH}" x2="${px}" y2="${innerH + 4}" stroke="#333"/>`);
    parts.push(
      `<text x="${px}" y="${innerH + 16}" font-size="10" text-anchor="middle">${tickLabel(xScale, t)}</text>`,
    );
  }
  for (const t of yScale.ticks(6)) {
    const py = fmt(yScale(t));
    parts.push(`<line x1="-4" y1="${py}" x2="0" y2="${py}" stroke="#333"/>`);
    parts.push(`<line x1="0" y1="${py}" x2="${innerW}" y2="${py}" stroke="#ddd" stroke-width="0.5"/>`);
    parts.push(
      `<text x="-7" y="${py}" font-size="10" text-anchor="end" dominant-baseline="middle">${tickLabel(yScale, t)}</text>`,
    );
  }
  for (const s of spec.series) {
    const path = s.points
      .map((p, i) => `${i === 0 ? "M" : "L"}${fmt(xScale(p.x))},${fmt(yScale(p.y))}`)
      .join("");
    const dash = s.dashed ? ' stroke-dasharray="6,4"' : "";
    parts.push(`<path d="${path}" fill="none" stroke="${s.color}" stroke-width="1.4"${dash}/>`);
  }
  parts.push(
    `<text x="${innerW / 2}" y="-12" font-size="12" text-anchor="middle" font-weight="bold">${spec.title}</text>`,
  );
  parts.push(
    `<text x="${innerW / 2}" y="${innerH + 32}" font-size="11" text-anchor="middle">${spec.xLabel}</text>`,
  );
  parts.push(
    `<text transform="translate(${-MARGIN.left + 14},${innerH / 2}) rotate(-90)" font-size="11" text-anchor="middle">${spec.yLabel}</text>`,
  );
  parts.push("</g>");
  return parts.join("\n");
}

/** Compose panels into a full SVG document with a shared legend. */
export function composeFigure(
  panels: PanelSpec[],
  columns: number,
  legend: Series[],
): string {
  const rows = Math.ceil(panels.length / columns);
  const legendH = legend.length > 0 ? 24 : 0;
  const width = columns * PANEL_W;
  const height = rows * PANEL_H + legendH;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  let lx = 10;
  for (const item of legend) {
    const dash = item.dashed ? ' stroke-dasharray="6,4"' : "";
    parts.push(
      `<line x1="${lx}" y1="12" x2="${lx + 22}" y2="12" stroke="${item.color}" stroke-width="2"${dash}/>`,
    );
    parts.push(`<text x="${lx + 27}" y="16" font-size="11">${item.label}</text>`);
    lx += 27 + 9 * item.label.length + 18;
  }
  panels.forEach((panel, i) => {
    const col = i % columns;
    const row = Math.floor(i / columns);
    parts.push(renderPanel(panel, col * PANEL_W, row * PANEL_H + legendH));
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
