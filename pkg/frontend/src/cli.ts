#!/usr/bin/env node
/**
 * plotkit — renders benchmark CSVs to SVG figures.
 *
 * Usage:
 *   plotkit render --kind residual --in residuals.csv --out residual.svg
 *   plotkit render --kind mean-time --in scaling.csv --out fig.svg --y-scale log
 */

import { writeFileSync } from "fs";
import path from "path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { readTable, SchemaError } from "./csv.js";
import { AxisScale, extractSeries, FIGURE_KINDS, FigureKind, FigureSpec } from "./figure.js";
import { renderSvg } from "./svg.js";

/** Full pipeline: read, validate, extract, render, write. */
export function render(spec: FigureSpec): string {
  if (path.extname(spec.output).toLowerCase() !== ".svg") {
    throw new SchemaError(
      `unsupported output extension '${path.extname(spec.output)}' (use .svg)`
    );
  }
  const tables = spec.inputs.map(readTable);
  const svg = renderSvg(extractSeries(spec, tables));
  writeFileSync(spec.output, svg);
  return spec.output;
}

export function main(argv: string[]): number {
  const parser = yargs(argv)
    .scriptName("plotkit")
    .command("render", "render one figure from benchmark CSVs", (cmd) =>
      cmd
        .option("kind", {
          choices: FIGURE_KINDS,
          demandOption: true,
          describe: "figure kind",
        })
        .option("in", {
          type: "string",
          array: true,
          demandOption: true,
          describe: "input CSV path(s)",
        })
        .option("out", {
          type: "string",
          demandOption: true,
          describe: "output .svg path",
        })
        .option("x-scale", { choices: ["linear", "log"] as const })
        .option("y-scale", { choices: ["linear", "log"] as const })
        .option("title", { type: "string" })
    )
    .demandCommand(1)
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    });

  try {
    const args = parser.parseSync();
    const written = render({
      inputs: args.in as string[],
      kind: args.kind as FigureKind,
      output: args.out as string,
      xScale: args.xScale as AxisScale | undefined,
      yScale: args.yScale as AxisScale | undefined,
      title: args.title as string | undefined,
    });
    console.log(`wrote ${written}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invoked = process.argv[1] ?? "";
if (invoked.endsWith("cli.js") || invoked.endsWith("plotkit")) {
  process.exit(main(hideBin(process.argv)));
}
