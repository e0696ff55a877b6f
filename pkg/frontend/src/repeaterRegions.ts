import { writeFileSync } from "fs";

import { parseScanCsv, ScanRow, SchemaError } from "./schema.js";
import { drawAxes, Frame, linearScale, PALETTE, SvgDoc } from "./svg.js";

export const GUIDE_LINE_KM = 780;

export interface RegionsOptions {
  variant?: string; // which repeater variant to draw next to the direct curve
}

/** Render the maximum-reach regions: one curve per chain size m for the
 * chosen variant, the direct-transmission curve, and the 780 km guide. */
export function renderRepeaterRegions(csvText: string, opts: RegionsOptions = {}): string {
  const rows = parseScanCsv(csvText);
  const variant = opts.variant ?? "i";
  const repeater = rows.filter((row) => row.variant === variant);
  const direct = rows.filter((row) => row.variant === "direct");
  if (repeater.length === 0) {
    throw new SchemaError(`scan CSV has no rows for variant "${variant}"`);
  }

  const width = 640;
  const height = 420;
  const frame: Frame = { x0: 62, x1: width - 16, y0: 18, y1: height - 48 };
  const rMax = Math.max(...rows.map((row) => row.r));
  const lMax = Math.max(GUIDE_LINE_KM, ...rows.map((row) => row.lMaxKm));
  const x = linearScale([0, rMax], [frame.x0, frame.x1]);
  const y = linearScale([0, lMax * 1.05], [frame.y1, frame.y0]);

  const doc = new SvgDoc(width, height);
  drawAxes(doc, frame, x, y, "initial squeezing r", "reach L (km)");

  doc.line(frame.x0, y(GUIDE_LINE_KM), frame.x1, y(GUIDE_LINE_KM), "#888",
    `stroke-dasharray="6 4" data-guide="780km"`);
  doc.text(frame.x1 - 120, y(GUIDE_LINE_KM) - 5, "780 km (direct limit)", `fill="#888"`);

  let colorIndex = 0;
  let legendY = frame.y0 + 12;
  const series = (rowsFor: ScanRow[], label: string, dataAttr: string) => {
    const pts = rowsFor
      .slice()
      .sort((a, b) => a.r - b.r)
      .map((row): [number, number] => [x(row.r), y(row.lMaxKm)]);
    const color = PALETTE[colorIndex % PALETTE.length];
    colorIndex += 1;
    doc.polyline(pts, color, dataAttr);
    doc.line(frame.x0 + 8, legendY, frame.x0 + 30, legendY, color);
    doc.text(frame.x0 + 36, legendY + 4, label);
    legendY += 16;
  };

  if (direct.length > 0) {
    series(direct, "direct transmission", `data-series="direct"`);
  }
  for (const m of [...new Set(repeater.map((row) => row.m))].sort((a, b) => a - b)) {
    series(
      repeater.filter((row) => row.m === m),
      `m = ${m} links (${variant})`,
      `data-series="m${m}"`,
    );
  }
  return doc.render();
}

export function plotRepeaterRegions(csvText: string, outPath: string, opts: RegionsOptions = {}): void {
  writeFileSync(outPath, renderRepeaterRegions(csvText, opts));
}
