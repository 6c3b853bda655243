import { readFileSync } from "node:fs";
import Papa from "papaparse";

export interface Table {
  columns: string[];
  rows: Record<string, number>[];
}

/** Read a numeric CSV with a header row; throws on empty or malformed files. */
export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Record<string, number>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new Error(`${path}: ${parsed.errors[0].message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0 || parsed.data.length === 0) {
    throw new Error(`${path}: empty CSV`);
  }
  return { columns, rows: parsed.data };
}

/** Assert the table carries the named columns (schema validation). */
export function requireColumns(table: Table, needed: string[], context: string): void {
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new Error(`${context}: missing column(s) ${missing.join(", ")}`);
  }
}

/** Distinct values of a column, in ascending order. */
export function distinct(table: Table, column: string): number[] {
  return [...new Set(table.rows.map((r) => r[column]))].sort((a, b) => a - b);
}
