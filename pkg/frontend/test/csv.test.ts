import { mkdtempSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import path from "path";
import { describe, expect, it } from "vitest";

import { numericColumn, readTable, requireColumns, SchemaError } from "../src/csv.js";

const FIXTURES = path.join(__dirname, "fixtures");

function tempCsv(content: string): string {
  const dir = mkdtempSync(path.join(tmpdir(), "plotkit-"));
  const file = path.join(dir, "t.csv");
  writeFileSync(file, content);
  return file;
}

describe("readTable", () => {
  it("reads the harness residual artifact", () => {
    const table = readTable(path.join(FIXTURES, "residuals.csv"));
    expect(table.columns).toEqual(["method", "iteration", "residual_norm"]);
    expect(table.rows.length).toBeGreaterThan(10);
  });

  it("rejects a file with no data rows", () => {
    const file = tempCsv("method,iteration,residual_norm\n");
    expect(() => readTable(file)).toThrow(/no data rows/);
  });

  it("rejects an empty file", () => {
    expect(() => readTable(tempCsv(""))).toThrow(SchemaError);
  });
});

describe("requireColumns", () => {
  it("names the first missing column", () => {
    const table = readTable(tempCsv("a,b\n1,2\n"));
    expect(() => requireColumns(table, ["a", "kappa_s"])).toThrow(
      /missing column 'kappa_s'/
    );
  });

  it("passes when extra columns are present", () => {
    const table = readTable(path.join(FIXTURES, "scaling.csv"));
    requireColumns(table, ["n", "total_s"]);
  });
});

describe("numericColumn", () => {
  it("parses numbers including exponent notation", () => {
    const table = readTable(tempCsv("v\n1.5\n2e-7\n"));
    expect(numericColumn(table, "v")).toEqual([1.5, 2e-7]);
  });

  it("names column and row of a non-numeric cell", () => {
    const table = readTable(tempCsv("v,w\n1,2\nx,3\n"));
    expect(() => numericColumn(table, "v")).toThrow(/column 'v', row 2/);
  });
});
