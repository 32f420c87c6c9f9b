#!/usr/bin/env node
/** plotkit: turn sweep CSVs into faceted line figures.
 *
 *   plotkit --csv results/ --x threads --y throughput \
 *           --group smr --facet ds,workload --out figs/
 *
 * --csv accepts files and/or directories (directories are scanned for *.csv).
 * One SVG per facet plus a manifest.json land in --out.
 */

import * as fs from 'fs';
import * as path from 'path';

import { readTable, Table } from './csv';
import {
  MissingColumn,
  buildFacets,
  facetFileName,
  resolveColumn,
} from './figures';
import { renderFacet } from './svg';

interface Args {
  csv: string[];
  x: string;
  y: string;
  group: string;
  facet: string[];
  out: string;
}

export function parseArgs(argv: string[]): Args {
  const args: Args = {
    csv: [],
    x: 'threads',
    y: 'throughput',
    group: 'smr',
    facet: ['ds', 'workload'],
    out: 'figs',
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      const v = argv[++i];
      if (v === undefined) throw new Error(`missing value for ${flag}`);
      return v;
    };
    switch (flag) {
      case '--csv':
        args.csv.push(next());
        break;
      case '--x':
        args.x = next();
        break;
      case '--y':
        args.y = next();
        break;
      case '--group':
        args.group = next();
        break;
      case '--facet':
        args.facet = next().split(',').filter(Boolean);
        break;
      case '--out':
        args.out = next();
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (args.csv.length === 0) throw new Error('--csv is required');
  return args;
}

function collectCsvFiles(inputs: string[]): string[] {
  const files: string[] = [];
  for (const input of inputs) {
    const stat = fs.statSync(input);
    if (stat.isDirectory()) {
      for (const entry of fs.readdirSync(input).sort()) {
        if (entry.endsWith('.csv')) files.push(path.join(input, entry));
      }
    } else {
      files.push(input);
    }
  }
  return files;
}

export interface ManifestEntry {
  file: string;
  keys: Record<string, string>;
  groups: string[];
  points: number;
}

export function run(args: Args): { rendered: string[]; skipped: string[] } {
  const files = collectCsvFiles(args.csv);
  if (files.length === 0) throw new Error('no CSV files found');
  const tables: Table[] = files.map((f) =>
    readTable(fs.readFileSync(f, 'utf-8'), f),
  );
  const facets = buildFacets(tables, {
    x: args.x,
    y: args.y,
    groupBy: args.group,
    facetBy: args.facet,
  });

  fs.mkdirSync(args.out, { recursive: true });
  const rendered: string[] = [];
  const skipped: string[] = [];
  const manifest: ManifestEntry[] = [];
  for (const facet of facets) {
    const points = facet.series.reduce((s, ser) => s + ser.points.length, 0);
    const name = facetFileName(facet);
    if (points === 0) {
      skipped.push(name);
      console.warn(`warning: empty facet skipped: ${name}`);
      continue;
    }
    const svg = renderFacet(facet, {
      yColumn: resolveColumn(args.y),
      xLabel: resolveColumn(args.x),
    });
    const outPath = path.join(args.out, name);
    fs.writeFileSync(outPath, svg);
    rendered.push(outPath);
    manifest.push({
      file: name,
      keys: facet.keys,
      groups: facet.series.map((s) => s.group),
      points,
    });
  }
  fs.writeFileSync(
    path.join(args.out, 'manifest.json'),
    JSON.stringify({ x: args.x, y: args.y, sources: files, figures: manifest }, null, 2) + '\n',
  );
  return { rendered, skipped };
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const { rendered } = run(args);
    for (const f of rendered) console.log(f);
    return 0;
  } catch (err) {
    if (err instanceof MissingColumn) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
