import { writeFileSync } from "fs";

import { ConvergenceReport, parseConvergenceReport, SchemaError } from "./schema.js";
import { drawAxes, Frame, linearScale, logScale, PALETTE, SvgDoc } from "./svg.js";

const FLOOR = 1e-16; // zero deviations are clipped here for the log axis

interface Series {
  label: string;
  key: string;
  points: Array<{ n: number; value: number }>;
}

function collectSeries(report: ConvergenceReport): Series[] {
  const series: Series[] = [];
  series.push({
    label: "sup |chi_N - chi_inf|",
    key: "sup_deviation",
    points: report.sup_deviation.map((p) => ({ n: p.N, value: p.value })),
  });
  for (const k of [...new Set(report.moments.map((row) => row.k))].sort()) {
    if (k % 2 !== 0) continue; // odd moments are identically zero targets
    series.push({
      label: `|<H^${k}> - Wick|`,
      key: `moment_k${k}`,
      points: report.moments
        .filter((row) => row.k === k)
        .map((row) => ({ n: row.N, value: row.deviation })),
    });
  }
  const elements = report.matrix_elements;
  const byPair = new Map<string, Array<{ n: number; value: number }>>();
  // occupation tuples serialize with a trailing comma when single-mode
  const tuple = (xs: number[]) => (xs.length === 1 ? `(${xs[0]},)` : `(${xs.join(", ")})`);
  for (const row of elements.rows) {
    const pairKey = `(${tuple(row.bra)}, ${tuple(row.ket)})`;
    const limit = elements.limit_tau[pairKey];
    if (!limit) continue;
    const gap = Math.hypot(row.tau[0] - limit[0], row.tau[1] - limit[1]);
    const list = byPair.get(pairKey) ?? [];
    list.push({ n: row.N, value: gap });
    byPair.set(pairKey, list);
  }
  let idx = 0;
  for (const [pairKey, points] of byPair) {
    series.push({ label: `|tau_N - tau_inf| at ${pairKey}`, key: `element${idx}`, points });
    idx += 1;
  }
  return series;
}

/** Render log-scale deviation-vs-N curves for every reported diagnostic. */
export function renderConvergence(jsonText: string): string {
  const report = parseConvergenceReport(jsonText);
  const series = collectSeries(report).filter((s) => s.points.length > 0);
  if (series.length === 0) {
    throw new SchemaError("report contains no plottable series");
  }

  const width = 640;
  const height = 420;
  const frame: Frame = { x0: 70, x1: width - 16, y0: 18, y1: height - 48 };
  const allN = series.flatMap((s) => s.points.map((p) => p.n));
  const allV = series.flatMap((s) => s.points.map((p) => Math.max(p.value, FLOOR)));
  const x = linearScale([1, Math.max(...allN)], [frame.x0, frame.x1]);
  const lo = Math.min(...allV);
  const hi = Math.max(...allV);
  const y = logScale([lo / 2, hi * 2], [frame.y1, frame.y0]);

  const doc = new SvgDoc(width, height);
  drawAxes(doc, frame, x, y, "protocol size N", "deviation (log scale)",
    (v) => v.toExponential(0));

  let legendY = frame.y0 + 12;
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.points
      .slice()
      .sort((a, b) => a.n - b.n)
      .map((p): [number, number] => [x(p.n), y(Math.max(p.value, FLOOR))]);
    doc.polyline(pts, color, `data-series="${s.key}"`);
    doc.line(frame.x0 + 8, legendY, frame.x0 + 30, legendY, color);
    doc.text(frame.x0 + 36, legendY + 4, s.label);
    legendY += 16;
  });
  return doc.render();
}

export function plotConvergence(jsonText: string, outPath: string): void {
  writeFileSync(outPath, renderConvergence(jsonText));
}
