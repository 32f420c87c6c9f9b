/** Hand-built SVG line charts: no DOM, no canvas, byte-stable output. */

import { Facet } from './figures';

const WIDTH = 760;
const HEIGHT = 480;
const MARGIN = { top: 48, right: 170, bottom: 56, left: 86 };

const PALETTE = [
  '#3b82f6', '#ef4444', '#22c55e', '#f59e0b', '#8b5cf6',
  '#06b6d4', '#84cc16', '#ec4899', '#64748b', '#a16207',
];

function esc(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function fmt(v: number): string {
  if (!isFinite(v)) return '0';
  if (Math.abs(v) >= 1000) return v.toPrecision(4).replace(/\.?0+$/, '');
  return String(Math.round(v * 1000) / 1000);
}

interface Scale {
  (v: number): number;
}

function linear(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (v) => r0 + ((v - d0) / span) * (r1 - r0);
}

function ticks(lo: number, hi: number, count: number): number[] {
  if (hi <= lo) return [lo];
  const step = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(step)));
  const nice = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= step) ?? mag;
  const out: number[] = [];
  for (let v = Math.ceil(lo / nice) * nice; v <= hi + 1e-9; v += nice) out.push(v);
  return out;
}

export interface RenderOptions {
  yColumn: string; // resolved result column
  xLabel: string;
}

/** throughput is plotted in millions of ops/s; memory in MiB */
function yTransform(yColumn: string): { scale: number; label: string } {
  if (yColumn === 'throughput_ops_per_s') {
    return { scale: 1e-6, label: 'throughput (Mops/s)' };
  }
  if (yColumn === 'peak_live_bytes') {
    return { scale: 1 / (1024 * 1024), label: 'peak memory (MiB)' };
  }
  return { scale: 1, label: yColumn };
}

export function renderFacet(facet: Facet, opts: RenderOptions): string {
  const { scale: yScaleFactor, label: yLabel } = yTransform(opts.yColumn);
  const xs = facet.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = facet.series.flatMap((s) =>
    s.points.flatMap((p) => [p.min * yScaleFactor, p.max * yScaleFactor]),
  );
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yHi = Math.max(...ys, 0) * 1.08 || 1;
  const plotW: [number, number] = [MARGIN.left, WIDTH - MARGIN.right];
  const plotH: [number, number] = [HEIGHT - MARGIN.bottom, MARGIN.top];
  const sx = linear([xLo, xHi], plotW);
  const sy = linear([0, yHi], plotH);

  const title = Object.entries(facet.keys)
    .map(([k, v]) => `${k}=${v}`)
    .join('  ');

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="15" font-weight="bold">${esc(title)}</text>`,
  );

  // axes
  const xTicks = [...new Set(xs)].sort((a, b) => a - b);
  for (const t of xTicks) {
    const px = sx(t);
    parts.push(
      `<line x1="${fmt(px)}" y1="${plotH[0]}" x2="${fmt(px)}" y2="${plotH[0] + 5}" stroke="#333"/>`,
      `<text x="${fmt(px)}" y="${plotH[0] + 20}" text-anchor="middle" font-size="11">${t}</text>`,
    );
  }
  for (const t of ticks(0, yHi, 6)) {
    const py = sy(t);
    parts.push(
      `<line x1="${plotW[0]}" y1="${fmt(py)}" x2="${plotW[1]}" y2="${fmt(py)}" stroke="#eee"/>`,
      `<text x="${plotW[0] - 8}" y="${fmt(py + 4)}" text-anchor="end" font-size="11">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<line x1="${plotW[0]}" y1="${plotH[0]}" x2="${plotW[1]}" y2="${plotH[0]}" stroke="#333"/>`,
    `<line x1="${plotW[0]}" y1="${plotH[0]}" x2="${plotW[0]}" y2="${plotH[1]}" stroke="#333"/>`,
    `<text x="${(plotW[0] + plotW[1]) / 2}" y="${HEIGHT - 14}" text-anchor="middle" font-size="12">${esc(opts.xLabel)}</text>`,
    `<text x="20" y="${(plotH[0] + plotH[1]) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 20 ${(plotH[0] + plotH[1]) / 2})">${esc(yLabel)}</text>`,
  );

  // series: mean line, point markers, min/max whiskers
  facet.series.forEach((series, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = series.points
      .map((p) => `${fmt(sx(p.x))},${fmt(sy(p.mean * yScaleFactor))}`)
      .join(' ');
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="2"/>`,
    );
    for (const p of series.points) {
      const px = fmt(sx(p.x));
      parts.push(
        `<line x1="${px}" y1="${fmt(sy(p.min * yScaleFactor))}" x2="${px}" y2="${fmt(sy(p.max * yScaleFactor))}" stroke="${color}" stroke-width="1"/>`,
        `<circle cx="${px}" cy="${fmt(sy(p.mean * yScaleFactor))}" r="3.2" fill="${color}"/>`,
      );
    }
    const ly = MARGIN.top + i * 18;
    parts.push(
      `<line x1="${WIDTH - MARGIN.right + 12}" y1="${ly}" x2="${WIDTH - MARGIN.right + 34}" y2="${ly}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${WIDTH - MARGIN.right + 40}" y="${ly + 4}" font-size="12">${esc(series.group)}</text>`,
    );
  });

  parts.push('</svg>');
  return parts.join('\n') + '\n';
}
