/** Strict RFC-4180 CSV reading for benchmark result files. */

export class MissingColumn extends Error {
  constructor(column: string, file: string) {
    super(`column "${column}" not found in ${file}`);
    this.name = 'MissingColumn';
  }
}

/** Parse CSV text (quoted fields, embedded commas/newlines) into rows. */
export function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let field = '';
  let inQuotes = false;
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i++;
        continue;
      }
      field += ch;
      i++;
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
      i++;
    } else if (ch === ',') {
      row.push(field);
      field = '';
      i++;
    } else if (ch === '\n' || ch === '\r') {
      if (ch === '\r' && text[i + 1] === '\n') i++;
      row.push(field);
      rows.push(row);
      row = [];
      field = '';
      i++;
    } else {
      field += ch;
      i++;
    }
  }
  if (field.length > 0 || row.length > 0) {
    row.push(field);
    rows.push(row);
  }
  return rows.filter((r) => !(r.length === 1 && r[0] === ''));
}

export interface Table {
  header: string[];
  rows: Record<string, string>[];
  source: string;
}

export function readTable(text: string, source: string): Table {
  const raw = parseCsv(text);
  if (raw.length === 0) return { header: [], rows: [], source };
  const header = raw[0];
  const rows = raw.slice(1).map((cells) => {
    const rec: Record<string, string> = {};
    header.forEach((h, i) => (rec[h] = cells[i] ?? ''));
    return rec;
  });
  return { header, rows, source };
}

export function requireColumns(table: Table, columns: string[]): void {
  for (const c of columns) {
    if (!table.header.includes(c)) throw new MissingColumn(c, table.source);
  }
}
