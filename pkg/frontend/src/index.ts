export { renderFalseSelection } from "./falseSelection.js";
export type { FalseSelectionOptions } from "./falseSelection.js";
export { renderRankIntervals } from "./rankIntervals.js";
export {
  FALSE_SELECTION_COLUMNS,
  RANK_INTERVAL_COLUMNS,
  SchemaError,
  parseFalseSelectionCsv,
  parseRankIntervalsCsv,
} from "./schemas.js";
export type { FalseSelectionRow, RankIntervalRow } from "./schemas.js";
export { KINDS, plot, runCli } from "./cli.js";
export type { FigureKind, PlotSpec } from "./cli.js";
