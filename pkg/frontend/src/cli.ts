import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { renderFalseSelection } from "./falseSelection.js";
import { renderRankIntervals } from "./rankIntervals.js";
import {
  SchemaError,
  parseFalseSelectionCsv,
  parseRankIntervalsCsv,
} from "./schemas.js";

export const KINDS = ["false_selection", "rank_intervals"] as const;
export type FigureKind = (typeof KINDS)[number];

export interface PlotSpec {
  kind: FigureKind;
  input: string;
  output: string;
  logX: boolean;
}

class UsageError extends Error {}

/** Read, validate, render, and write one figure. */
export function plot(spec: PlotSpec): void {
  let text: string;
  try {
    text = readFileSync(spec.input, "utf8");
  } catch (err) {
    throw new Error(`cannot read ${spec.input}: ${(err as Error).message}`);
  }
  const svg =
    spec.kind === "false_selection"
      ? renderFalseSelection(parseFalseSelectionCsv(text), { logX: spec.logX })
      : renderRankIntervals(parseRankIntervalsCsv(text));
  writeFileSync(spec.output, svg, "utf8");
}

async function parseArgs(argv: string[]): Promise<PlotSpec> {
  const args = await yargs(argv)
    .scriptName("plots")
    .usage("$0 --kind <figure> --in <csv> --out <svg>")
    .option("kind", {
      choices: KINDS,
      demandOption: true,
      describe: "figure to render",
    })
    .option("in", {
      type: "string",
      demandOption: true,
      describe: "input CSV path",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output SVG path",
    })
    .option("log-x", {
      type: "boolean",
      default: true,
      describe: "logarithmic sample axis (false-selection figure)",
    })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new UsageError(msg);
    })
    .parse();
  return {
    kind: args.kind,
    input: args.in,
    output: args.out,
    logX: args["log-x"],
  };
}

/** CLI entry point; returns the process exit code instead of exiting. */
export async function runCli(
  argv: string[],
  stderr: (line: string) => void = (line) => process.stderr.write(`${line}\n`),
): Promise<number> {
  try {
    plot(await parseArgs(argv));
    return 0;
  } catch (err) {
    stderr(`plots: ${(err as Error).message}`);
    return err instanceof SchemaError || err instanceof UsageError ? 2 : 1;
  }
}
