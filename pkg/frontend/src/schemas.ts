import Papa from "papaparse";
import { z } from "zod";

/** Raised for any input that does not match a declared CSV schema. */
export class SchemaError extends Error {}

const numeric = z
  .string()
  .trim()
  .min(1)
  .pipe(z.coerce.number().finite());

const positiveInt = numeric.pipe(z.number().int().positive());

const falseSelectionRow = z.object({
  algorithm: z.string().trim().min(1),
  k: positiveInt,
  j: positiveInt,
  n: positiveInt,
  replications: positiveInt,
  f_hat: numeric.pipe(z.number().min(0).max(1)),
});

const rankIntervalRow = z
  .object({
    algorithm: z.string().trim().min(1),
    n: positiveInt,
    line: positiveInt,
    true_rank: numeric.pipe(z.number().min(1)),
    mean_rank: numeric.pipe(z.number().min(1)),
    lo: numeric.pipe(z.number().min(1)),
    hi: numeric.pipe(z.number().min(1)),
  })
  .refine((r) => r.lo <= r.hi, { message: "lo exceeds hi" });

export type FalseSelectionRow = z.infer<typeof falseSelectionRow>;
export type RankIntervalRow = z.infer<typeof rankIntervalRow>;

export const FALSE_SELECTION_COLUMNS = [
  "algorithm",
  "k",
  "j",
  "n",
  "replications",
  "f_hat",
] as const;

export const RANK_INTERVAL_COLUMNS = [
  "algorithm",
  "n",
  "line",
  "true_rank",
  "mean_rank",
  "lo",
  "hi",
] as const;

function parseRows<T>(
  text: string,
  columns: readonly string[],
  rowSchema: z.ZodType<T, z.ZodTypeDef, unknown>,
): T[] {
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: "greedy",
  });
  const fields = parsed.meta.fields ?? [];
  for (const column of columns) {
    if (!fields.includes(column)) {
      throw new SchemaError(`missing column "${column}"`);
    }
  }
  for (const field of fields) {
    if (!columns.includes(field)) {
      throw new SchemaError(`unexpected column "${field}"`);
    }
  }
  const fatal = parsed.errors.find((e) => e.code !== "TooFewFields");
  if (fatal !== undefined) {
    throw new SchemaError(
      `malformed CSV at row ${(fatal.row ?? 0) + 2}: ${fatal.message}`,
    );
  }
  if (parsed.data.length === 0) {
    throw new SchemaError("no data rows");
  }
  return parsed.data.map((raw, i) => {
    const result = rowSchema.safeParse(raw);
    if (!result.success) {
      const issue = result.error.issues[0];
      const where = issue?.path.length ? ` in column "${issue.path.join(".")}"` : "";
      throw new SchemaError(
        `invalid value${where} at row ${i + 2}: ${issue?.message ?? "unknown"}`,
      );
    }
    return result.data;
  });
}

/** Parse and validate a false-selection experiment CSV. */
export function parseFalseSelectionCsv(text: string): FalseSelectionRow[] {
  return parseRows(text, FALSE_SELECTION_COLUMNS, falseSelectionRow);
}

/** Parse and validate a rank-intervals experiment CSV. */
export function parseRankIntervalsCsv(text: string): RankIntervalRow[] {
  return parseRows(text, RANK_INTERVAL_COLUMNS, rankIntervalRow);
}
