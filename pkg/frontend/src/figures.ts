/** Faceting and aggregation: one figure per facet, one line per group,
 * mean over trials with min/max whiskers. */

import { MissingColumn, Table, requireColumns } from './csv';

/** Short CLI vocabulary -> result-file columns. */
const COLUMN_ALIASES: Record<string, string> = {
  ds: 'structure',
  smr: 'scheme',
  throughput: 'throughput_ops_per_s',
  memory: 'peak_live_bytes',
};

export function resolveColumn(name: string): string {
  return COLUMN_ALIASES[name] ?? name;
}

export interface FigureSpec {
  csvPaths: string[];
  x: string; // e.g. threads
  y: string; // throughput_ops_per_s | peak_live_bytes
  groupBy: string; // scheme
  facetBy: string[]; // e.g. [structure, workload]
  outDir: string;
}

export interface SeriesPoint {
  x: number;
  mean: number;
  min: number;
  max: number;
  n: number;
}

export interface Series {
  group: string;
  points: SeriesPoint[];
}

export interface Facet {
  keys: Record<string, string>;
  series: Series[];
}

/** The derived workload column: "insert:delete:contains". */
function workloadOf(row: Record<string, string>): string {
  return `${row.insert_pct}:${row.delete_pct}:${row.contains_pct}`;
}

function cell(row: Record<string, string>, column: string): string {
  if (column === 'workload') return workloadOf(row);
  return row[column];
}

function columnsNeeded(column: string): string[] {
  if (column === 'workload') return ['insert_pct', 'delete_pct', 'contains_pct'];
  return [column];
}

export function buildFacets(
  tables: Table[],
  spec: Pick<FigureSpec, 'x' | 'y' | 'groupBy' | 'facetBy'>,
): Facet[] {
  const x = resolveColumn(spec.x);
  const y = resolveColumn(spec.y);
  const group = resolveColumn(spec.groupBy);
  const facetCols = spec.facetBy.map(resolveColumn);

  for (const t of tables) {
    const needed = [x, y, group, ...facetCols].flatMap(columnsNeeded);
    requireColumns(t, [...new Set(needed)]);
  }

  // facet key -> group -> x -> y values
  const acc = new Map<string, Map<string, Map<number, number[]>>>();
  const facetKeys = new Map<string, Record<string, string>>();
  for (const t of tables) {
    for (const row of t.rows) {
      const keys: Record<string, string> = {};
      for (const c of facetCols) keys[c] = cell(row, c);
      const fkey = facetCols.map((c) => `${c}=${keys[c]}`).join('|');
      if (!acc.has(fkey)) {
        acc.set(fkey, new Map());
        facetKeys.set(fkey, keys);
      }
      const byGroup = acc.get(fkey)!;
      const g = cell(row, group);
      if (!byGroup.has(g)) byGroup.set(g, new Map());
      const byX = byGroup.get(g)!;
      const xv = Number(cell(row, x));
      const yv = Number(cell(row, y));
      if (!byX.has(xv)) byX.set(xv, []);
      byX.get(xv)!.push(yv);
    }
  }

  const facets: Facet[] = [];
  for (const [fkey, byGroup] of [...acc.entries()].sort()) {
    const series: Series[] = [];
    for (const [g, byX] of [...byGroup.entries()].sort()) {
      const points: SeriesPoint[] = [...byX.entries()]
        .sort((a, b) => a[0] - b[0])
        .map(([xv, ys]) => ({
          x: xv,
          mean: ys.reduce((s, v) => s + v, 0) / ys.length,
          min: Math.min(...ys),
          max: Math.max(...ys),
          n: ys.length,
        }));
      series.push({ group: g, points });
    }
    facets.push({ keys: facetKeys.get(fkey)!, series });
  }
  return facets;
}

export function facetFileName(facet: Facet): string {
  const parts = Object.entries(facet.keys).map(
    ([k, v]) => `${k}-${v.replace(/[^A-Za-z0-9_.-]+/g, '_')}`,
  );
  return parts.join('__') + '.svg';
}

export { MissingColumn };
