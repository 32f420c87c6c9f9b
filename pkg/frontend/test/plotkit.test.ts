import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { afterEach, beforeEach, describe, expect, it } from 'vitest';

import { parseCsv, readTable, MissingColumn } from '../src/csv';
import { buildFacets, facetFileName } from '../src/figures';
import { renderFacet } from '../src/svg';
import { parseArgs, run } from '../src/cli';

const HEADER =
  'structure,scheme,threads,duration,key_range,insert_pct,delete_pct,contains_pct,' +
  'trials,prefill,stall,alloc_mode,seed,ops_total,throughput_ops_per_s,' +
  'peak_live_bytes,peak_retired_nodes,signals_sent,restarts,fences_on_read_path,' +
  'slow_path_triggers,violations';

function row(
  ds: string,
  smr: string,
  threads: number,
  workload: [number, number, number],
  throughput: number,
  seed = 1,
): string {
  const [i, d, c] = workload;
  return [
    ds, smr, threads, 2.0, 2000, i, d, c, 3, 0.5, 'none', 'release', seed,
    Math.round(throughput * 2), throughput, 1048576, 100, 5, 0, 0, 0, 0,
  ].join(',');
}

function sampleCsv(ds: string): string {
  const lines = [HEADER];
  for (const smr of ['ebr', 'nbrplus']) {
    for (const threads of [1, 2, 4]) {
      for (const wl of [[50, 50, 0], [5, 5, 90]] as [number, number, number][]) {
        for (const seed of [1, 2]) {
          lines.push(row(ds, smr, threads, wl, threads * 1e6 + seed * 1000, seed));
        }
      }
    }
  }
  return lines.join('\n') + '\n';
}

let dir: string;
beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), 'plotkit-'));
});
afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

describe('csv parsing', () => {
  it('handles quoted fields and embedded commas', () => {
    const rows = parseCsv('a,b\n"x,y",2\n"he said ""hi""",3\n');
    expect(rows).toEqual([
      ['a', 'b'],
      ['x,y', '2'],
      ['he said "hi"', '3'],
    ]);
  });

  it('round-trips a results table', () => {
    const t = readTable(sampleCsv('hm_list'), 'mem');
    expect(t.rows.length).toBe(2 * 3 * 2 * 2);
    expect(t.rows[0].structure).toBe('hm_list');
  });
});

describe('faceting', () => {
  it('aggregates trials into mean with min/max whiskers', () => {
    const t = readTable(sampleCsv('hm_list'), 'mem');
    const facets = buildFacets([t], {
      x: 'threads',
      y: 'throughput',
      groupBy: 'smr',
      facetBy: ['ds', 'workload'],
    });
    expect(facets.length).toBe(2); // one structure x two workloads
    const s = facets[0].series.find((x) => x.group === 'ebr')!;
    const p = s.points.find((pt) => pt.x === 2)!;
    expect(p.n).toBe(2); // two seeds
    expect(p.mean).toBeCloseTo((2e6 + 1000 + 2e6 + 2000) / 2);
    expect(p.min).toBe(2e6 + 1000);
    expect(p.max).toBe(2e6 + 2000);
  });

  it('raises MissingColumn with the offending name', () => {
    const t = readTable('a,b\n1,2\n', 'bad.csv');
    expect(() =>
      buildFacets([t], { x: 'threads', y: 'throughput', groupBy: 'smr', facetBy: ['ds'] }),
    ).toThrowError(MissingColumn);
    try {
      buildFacets([t], { x: 'threads', y: 'throughput', groupBy: 'smr', facetBy: ['ds'] });
    } catch (e) {
      expect((e as Error).message).toContain('threads');
    }
  });

  it('renders a single-point facet', () => {
    const csv = HEADER + '\n' + row('ext_bst', 'hp', 4, [50, 50, 0], 123456) + '\n';
    const t = readTable(csv, 'one');
    const facets = buildFacets([t], {
      x: 'threads', y: 'throughput', groupBy: 'smr', facetBy: ['ds', 'workload'],
    });
    expect(facets.length).toBe(1);
    const svg = renderFacet(facets[0], {
      yColumn: 'throughput_ops_per_s', xLabel: 'threads',
    });
    expect(svg).toContain('<circle');
    expect(svg).toContain('Mops/s');
  });
});

describe('cli end to end', () => {
  it('writes one image per facet plus a manifest, deterministically', () => {
    const sweepDir = path.join(dir, 'sweep');
    fs.mkdirSync(sweepDir);
    fs.writeFileSync(path.join(sweepDir, 'hm_list.csv'), sampleCsv('hm_list'));
    fs.writeFileSync(path.join(sweepDir, 'ext_bst.csv'), sampleCsv('ext_bst'));
    const out = path.join(dir, 'figs');
    const args = parseArgs([
      '--csv', sweepDir, '--x', 'threads', '--y', 'throughput',
      '--group', 'smr', '--facet', 'ds,workload', '--out', out,
    ]);
    const res1 = run(args);
    expect(res1.rendered.length).toBe(4); // 2 structures x 2 workloads
    const manifest1 = fs.readFileSync(path.join(out, 'manifest.json'), 'utf-8');
    const res2 = run(args);
    const manifest2 = fs.readFileSync(path.join(out, 'manifest.json'), 'utf-8');
    expect(res2.rendered.length).toBe(4);
    expect(manifest2).toBe(manifest1); // pure render
    const parsed = JSON.parse(manifest1);
    expect(parsed.figures.length).toBe(4);
    expect(parsed.figures[0].groups).toEqual(['ebr', 'nbrplus']);
  });

  it('plots memory columns in MiB', () => {
    const sweepDir = path.join(dir, 'sweep');
    fs.mkdirSync(sweepDir);
    fs.writeFileSync(path.join(sweepDir, 'hm_list.csv'), sampleCsv('hm_list'));
    const out = path.join(dir, 'figs');
    const args = parseArgs([
      '--csv', sweepDir, '--y', 'peak_live_bytes', '--out', out,
    ]);
    run(args);
    const svg = fs.readFileSync(
      fs.readdirSync(out).filter((f) => f.endsWith('.svg')).map((f) => path.join(out, f))[0],
      'utf-8',
    );
    expect(svg).toContain('MiB');
  });

  it('fails with a clear error when --csv is missing', () => {
    expect(() => parseArgs([])).toThrowError('--csv is required');
  });

  it('facet file names are filesystem safe', () => {
    const t = readTable(sampleCsv('hm_list'), 'mem');
    const facets = buildFacets([t], {
      x: 'threads', y: 'throughput', groupBy: 'smr', facetBy: ['ds', 'workload'],
    });
    for (const f of facets) {
      expect(facetFileName(f)).toMatch(/^[A-Za-z0-9_.=|-]+__[A-Za-z0-9_.=|-]+\.svg$/);
    }
  });
});
