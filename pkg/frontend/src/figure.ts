/**
 * Figure specification and series extraction.
 *
 * Five kinds, each tied to one artifact layout:
 *   residual    one curve per entry of the method column, y = residual_norm
 *   condition   both condition-number columns against the state dimension
 *   iterations  inner-iteration count vs n, one curve per (m, horizon) sweep
 *   total-time  wall-clock per sweep point vs n
 *   mean-time   wall-clock per inner iteration vs n
 */

import { numericColumn, requireColumns, SchemaError, Table } from "./csv.js";

export type FigureKind =
  | "residual"
  | "condition"
  | "iterations"
  | "total-time"
  | "mean-time";

export type AxisScale = "linear" | "log";

export interface FigureSpec {
  inputs: string[];
  kind: FigureKind;
  output: string;
  xScale?: AxisScale;
  yScale?: AxisScale;
  title?: string;
}

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface FigureData {
  series: Series[];
  xLabel: string;
  yLabel: string;
  xScale: AxisScale;
  yScale: AxisScale;
  title: string;
}

export const FIGURE_KINDS: FigureKind[] = [
  "residual",
  "condition",
  "iterations",
  "total-time",
  "mean-time",
];

// residual and condition magnitudes span many decades: log y by default;
// the sweep kinds read best log-log (time) or log-x (counts).
const DEFAULTS: Record<FigureKind, { x: AxisScale; y: AxisScale }> = {
  residual: { x: "linear", y: "log" },
  condition: { x: "linear", y: "log" },
  iterations: { x: "log", y: "linear" },
  "total-time": { x: "log", y: "log" },
  "mean-time": { x: "log", y: "log" },
};

const SCALING_Y: Record<string, { column: string; label: string }> = {
  iterations: { column: "total_inner", label: "inner iterations" },
  "total-time": { column: "total_s", label: "total time (s)" },
  "mean-time": { column: "mean_s_per_iter", label: "time per iteration (s)" },
};

function checkLogPositive(data: FigureData, column: string): void {
  if (data.yScale !== "log") return;
  for (const s of data.series) {
    if (s.y.some((v) => v <= 0)) {
      throw new SchemaError(
        `log y-axis requires positive values in column '${column}' ` +
          `(series '${s.label}')`
      );
    }
  }
}

/** Turns validated tables into plottable series for the requested kind. */
export function extractSeries(spec: FigureSpec, tables: Table[]): FigureData {
  const kind = spec.kind;
  const scales = DEFAULTS[kind];
  const data: FigureData = {
    series: [],
    xLabel: "",
    yLabel: "",
    xScale: spec.xScale ?? scales.x,
    yScale: spec.yScale ?? scales.y,
    title: spec.title ?? kind,
  };

  if (kind === "residual") {
    for (const table of tables) {
      requireColumns(table, ["method", "iteration", "residual_norm"]);
      const iter = numericColumn(table, "iteration");
      const res = numericColumn(table, "residual_norm");
      const byMethod = new Map<string, Series>();
      table.rows.forEach((row, i) => {
        const label = row.method;
        let s = byMethod.get(label);
        if (!s) {
          s = { label, x: [], y: [] };
          byMethod.set(label, s);
          data.series.push(s);
        }
        s.x.push(iter[i]);
        s.y.push(res[i]);
      });
    }
    data.xLabel = "iteration";
    data.yLabel = "residual norm";
    checkLogPositive(data, "residual_norm");
    return data;
  }

  if (kind === "condition") {
    for (const table of tables) {
      requireColumns(table, ["n", "kappa_s", "kappa_bs"]);
      const n = numericColumn(table, "n");
      data.series.push(
        { label: "kappa(S)", x: n, y: numericColumn(table, "kappa_s") },
        { label: "kappa(BS)", x: n, y: numericColumn(table, "kappa_bs") }
      );
    }
    data.xLabel = "state dimension n";
    data.yLabel = "condition number";
    checkLogPositive(data, "kappa_s/kappa_bs");
    return data;
  }

  // the three scaling kinds share the sweep layout, keyed by (m, horizon)
  const target = SCALING_Y[kind];
  for (const table of tables) {
    requireColumns(table, ["n", "m", "horizon", target.column]);
    const n = numericColumn(table, "n");
    const y = numericColumn(table, target.column);
    const bySweep = new Map<string, Series>();
    table.rows.forEach((row, i) => {
      const label = `m=${row.m}, L=${row.horizon}`;
      let s = bySweep.get(label);
      if (!s) {
        s = { label, x: [], y: [] };
        bySweep.set(label, s);
        data.series.push(s);
      }
      s.x.push(n[i]);
      s.y.push(y[i]);
    });
  }
  data.xLabel = "state dimension n";
  data.yLabel = target.label;
  checkLogPositive(data, target.column);
  return data;
}
