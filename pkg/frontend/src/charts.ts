/** Pure SVG builders: everything here is presentation scaling only; all
 * displayed quantities come verbatim from service responses. */

import type { GapEvent, PeakEvent, StatePoint, SweepAxis, SweepCell } from './types.js';

export const REGIME_COLORS: Record<string, string> = {
  Flat: '#9aa5b1',
  SmoothBubble: '#4c8fd6',
  GapBubble: '#e0923a',
  MultiBubble: '#9467bd',
  UnboundedGrowth: '#2ca06c',
  MonotoneDecline: '#c75146',
};

export interface SeriesOverlay {
  label: string;
  color: string;
  points: Array<{ step: number; value: number }>;
}

export interface LineChartOptions {
  width: number;
  height: number;
  title: string;
  series: SeriesOverlay[];
  gaps?: GapEvent[];
  peaks?: PeakEvent[];
  guide?: { value: number; label: string } | null;
  testId?: string;
}

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;').replace(/"/g, '&quot;');
}

function niceTicks(lo: number, hi: number, target = 5): number[] {
  if (hi <= lo) hi = lo + 1;
  const raw = (hi - lo) / Math.max(target - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const mult = [1, 2, 5, 10].find((m) => raw <= m * mag) ?? 10;
  const step = mult * mag;
  const start = Math.floor(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v < hi + step / 2; v += step) ticks.push(v);
  return ticks;
}

const MARGIN = { left: 58, right: 14, top: 22, bottom: 26 };

export function lineChart(opts: LineChartOptions): string {
  const { width, height } = opts;
  const pw = width - MARGIN.left - MARGIN.right;
  const ph = height - MARGIN.top - MARGIN.bottom;
  const allPoints = opts.series.flatMap((s) => s.points);
  if (allPoints.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}"></svg>`;
  }
  const maxStep = Math.max(1, ...allPoints.map((p) => p.step));
  let lo = Math.min(...allPoints.map((p) => p.value));
  let hi = Math.max(...allPoints.map((p) => p.value));
  if (opts.guide) {
    lo = Math.min(lo, opts.guide.value);
    hi = Math.max(hi, opts.guide.value);
  }
  const yTicks = niceTicks(Math.min(lo, 0), hi);
  const yLo = yTicks[0];
  const yHi = yTicks[yTicks.length - 1];
  const sx = (step: number) => MARGIN.left + (step / maxStep) * pw;
  const sy = (v: number) => MARGIN.top + (1 - (v - yLo) / (yHi - yLo)) * ph;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}"` +
      (opts.testId ? ` data-testid="${esc(opts.testId)}"` : '') +
      ` role="img">`,
  );
  parts.push(`<text x="${MARGIN.left}" y="14" class="chart-title">${esc(opts.title)}</text>`);
  for (const tick of yTicks) {
    const y = sy(tick);
    parts.push(`<line x1="${MARGIN.left}" y1="${y.toFixed(1)}" x2="${width - MARGIN.right}" y2="${y.toFixed(1)}" class="grid"/>`);
    parts.push(`<text x="${MARGIN.left - 6}" y="${(y + 3).toFixed(1)}" class="tick" text-anchor="end">${formatTick(tick)}</text>`);
  }
  for (const tick of niceTicks(0, maxStep)) {
    if (tick > maxStep) continue;
    const x = sx(tick);
    parts.push(`<text x="${x.toFixed(1)}" y="${height - 8}" class="tick" text-anchor="middle">${formatTick(tick)}</text>`);
  }
  for (const gap of opts.gaps ?? []) {
    const x = sx(gap.step);
    parts.push(
      `<line x1="${x.toFixed(1)}" y1="${MARGIN.top}" x2="${x.toFixed(1)}" y2="${height - MARGIN.bottom}" ` +
        `class="gap-marker" data-gap-step="${gap.step}"><title>gap at step ${gap.step}: ${(gap.rel_change * 100).toFixed(1)}%</title></line>`,
    );
  }
  if (opts.guide) {
    const y = sy(opts.guide.value);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y.toFixed(1)}" x2="${width - MARGIN.right}" y2="${y.toFixed(1)}" ` +
        `class="critical-guide" data-testid="critical-guide"/>`,
    );
    parts.push(`<text x="${width - MARGIN.right - 4}" y="${(y - 4).toFixed(1)}" class="guide-label" text-anchor="end">${esc(opts.guide.label)}</text>`);
  }
  for (const series of opts.series) {
    const path = series.points.map((p) => `${sx(p.step).toFixed(1)},${sy(p.value).toFixed(1)}`).join(' ');
    parts.push(`<polyline points="${path}" fill="none" stroke="${series.color}" stroke-width="1.6" data-series="${esc(series.label)}"/>`);
  }
  for (const peak of opts.peaks ?? []) {
    parts.push(
      `<circle cx="${sx(peak.step).toFixed(1)}" cy="${sy(peak.value).toFixed(1)}" r="3.5" class="peak-dot" ` +
        `data-peak-step="${peak.step}"><title>peak at step ${peak.step}: ${peak.value.toFixed(1)}</title></circle>`,
    );
  }
  parts.push('</svg>');
  return parts.join('');
}

function formatTick(v: number): string {
  if (Math.abs(v) >= 10000) return v.toExponential(1);
  return Number(v.toFixed(6)).toString();
}

export function seriesOf(states: StatePoint[], field: 'capital' | 'implied' | 'avg_maturity'): SeriesOverlay['points'] {
  return states.map((s) => ({ step: s.step, value: s[field] }));
}

export interface HeatmapOptions {
  width: number;
  cellHeight: number;
  axes: SweepAxis[];
  cells: SweepCell[];
}

/** Regime-colored grid; rect elements carry data-cell-index for click
 * handling. One axis renders as a single row; two axes as a grid with the
 * first axis on rows. */
export function heatmap(opts: HeatmapOptions): string {
  const [first, second] = opts.axes;
  const cols = second ? second.values.length : first.values.length;
  const rows = second ? first.values.length : 1;
  const labelW = 64;
  const cw = (opts.width - labelW) / cols;
  const ch = opts.cellHeight;
  const height = rows * ch + 34;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${opts.width}" height="${height}" data-testid="sweep-heatmap">`,
  );
  opts.cells.forEach((cell, i) => {
    const row = second ? Math.floor(i / cols) : 0;
    const col = second ? i % cols : i;
    const color = REGIME_COLORS[cell.regime] ?? '#cccccc';
    const x = labelW + col * cw;
    const y = row * ch;
    parts.push(
      `<rect x="${x.toFixed(1)}" y="${y}" width="${Math.max(cw - 2, 1).toFixed(1)}" height="${ch - 2}" ` +
        `fill="${color}" class="heat-cell" data-cell-index="${i}">` +
        `<title>${esc(cellTitle(opts.axes, cell))}</title></rect>`,
    );
  });
  first.values.forEach((v, r) => {
    if (second) {
      parts.push(`<text x="${labelW - 6}" y="${r * ch + ch / 2 + 3}" class="tick" text-anchor="end">${formatTick(v)}</text>`);
    }
  });
  const colAxis = second ?? first;
  colAxis.values.forEach((v, c) => {
    if (cols <= 24 || c % Math.ceil(cols / 24) === 0) {
      parts.push(
        `<text x="${(labelW + c * cw + cw / 2).toFixed(1)}" y="${rows * ch + 14}" class="tick" text-anchor="middle">${formatTick(v)}</text>`,
      );
    }
  });
  parts.push(`<text x="${labelW}" y="${rows * ch + 30}" class="tick">${esc(axisCaption(opts.axes))}</text>`);
  parts.push('</svg>');
  return parts.join('');
}

function cellTitle(axes: SweepAxis[], cell: SweepCell): string {
  const coords = axes.map((a, i) => `${a.name}=${cell.values[i]}`).join(', ');
  return `${coords}: ${cell.regime}, final ${cell.final_capital.toFixed(1)}`;
}

function axisCaption(axes: SweepAxis[]): string {
  if (axes.length === 2) return `rows: ${axes[0].name}, columns: ${axes[1].name}`;
  return `axis: ${axes[0].name}`;
}
