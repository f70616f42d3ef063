/**
 * CSV loading and schema checks for the benchmark artifacts.
 *
 * Three documented layouts:
 *   residuals.csv  method,iteration,residual_norm
 *   condition.csv  n,m,horizon,signal_length,kappa_s,kappa_bs
 *   scaling.csv    n,m,horizon,signal_length,total_inner,total_s,
 *                  mean_s_per_iter,operator_bytes,dense_equiv_bytes
 *
 * Validation names the first offending column so a mismatched file is
 * diagnosable from the error alone.
 */

import { readFileSync } from "fs";
import Papa from "papaparse";

export interface Table {
  /** header order as found in the file */
  columns: string[];
  /** raw string cells, one record per data row */
  rows: Record<string, string>[];
  /** originating path, for error messages */
  path: string;
}

export class SchemaError extends Error {}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  // delimiter auto-detection "fails" on single-column files; that is fine
  const errors = parsed.errors.filter((e) => e.type !== "Delimiter");
  if (errors.length > 0) {
    const e = errors[0];
    throw new SchemaError(`${path}: row ${e.row}: ${e.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0) {
    throw new SchemaError(`${path}: no header row`);
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return { columns, rows: parsed.data, path };
}

/** Asserts every named column is present; reports the first one missing. */
export function requireColumns(table: Table, needed: string[]): void {
  for (const col of needed) {
    if (!table.columns.includes(col)) {
      throw new SchemaError(
        `${table.path}: schema mismatch: missing column '${col}' ` +
          `(found: ${table.columns.join(", ")})`
      );
    }
  }
}

/** Numeric view of one column; a non-numeric cell names column and row. */
export function numericColumn(table: Table, col: string): number[] {
  return table.rows.map((row, i) => {
    const value = Number(row[col]);
    if (!Number.isFinite(value)) {
      throw new SchemaError(
        `${table.path}: column '${col}', row ${i + 1}: ` +
          `not a finite number (${JSON.stringify(row[col])})`
      );
    }
    return value;
  });
}
