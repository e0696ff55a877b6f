import { z } from "zod";

/** Raised for any input that does not match the published file schemas. */
export class SchemaError extends Error {}

export const SCAN_HEADER = ["r", "m", "variant", "L_max_km", "delta_at_Lmax"] as const;

export interface ScanRow {
  r: number;
  m: number;
  variant: string;
  lMaxKm: number;
  deltaAtLmax: number;
}

/** Parse the repeater sweep CSV (schema: r,m,variant,L_max_km,delta_at_Lmax). */
export function parseScanCsv(text: string): ScanRow[] {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("scan CSV is empty");
  }
  const header = lines[0].split(",").map((c) => c.trim());
  if (header.join(",") !== SCAN_HEADER.join(",")) {
    throw new SchemaError(
      `scan CSV header mismatch: expected "${SCAN_HEADER.join(",")}", got "${header.join(",")}"`,
    );
  }
  if (lines.length === 1) {
    throw new SchemaError("scan CSV has a header but no data rows");
  }
  return lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== SCAN_HEADER.length) {
      throw new SchemaError(`scan CSV row ${i + 2} has ${cells.length} cells`);
    }
    const [r, m, variant, lMax, delta] = cells;
    const row: ScanRow = {
      r: Number(r),
      m: Number(m),
      variant: variant.trim(),
      lMaxKm: Number(lMax),
      deltaAtLmax: Number(delta),
    };
    if (!Number.isFinite(row.r) || !Number.isFinite(row.m) || !Number.isFinite(row.lMaxKm)) {
      throw new SchemaError(`scan CSV row ${i + 2} has non-numeric fields`);
    }
    return row;
  });
}

const seriesPoint = z.object({ N: z.number(), value: z.number() });

const momentRow = z.object({
  k: z.number(),
  N: z.number(),
  deviation: z.number(),
});

const elementRow = z.object({
  N: z.number(),
  bra: z.array(z.number()),
  ket: z.array(z.number()),
  tau: z.tuple([z.number(), z.number()]),
});

export const convergenceReport = z.object({
  sup_deviation: z.array(seriesPoint),
  moments: z.array(momentRow),
  matrix_elements: z.object({
    rows: z.array(elementRow),
    limit_tau: z.record(z.tuple([z.number(), z.number()])),
  }),
  fidelity: z.array(seriesPoint),
});

export type ConvergenceReport = z.infer<typeof convergenceReport>;

/** Parse and validate the gaussify JSON report. */
export function parseConvergenceReport(text: string): ConvergenceReport {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`report is not valid JSON: ${(err as Error).message}`);
  }
  const result = convergenceReport.safeParse(raw);
  if (!result.success) {
    const issue = result.error.issues[0];
    throw new SchemaError(`report field ${issue.path.join(".") || "<root>"}: ${issue.message}`);
  }
  return result.data;
}
