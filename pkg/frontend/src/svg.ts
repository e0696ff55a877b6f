/** Minimal SVG chart primitives: linear/log scales, axes, polylines.
 * Output is plain standalone SVG markup, no DOM required. */

export interface Scale {
  (x: number): number;
  ticks(): number[];
}

export function linearScale(domain: [number, number], range: [number, number], tickCount = 6): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const f = ((x: number) => r0 + ((x - d0) / (d1 - d0 || 1)) * (r1 - r0)) as Scale;
  f.ticks = () => {
    const step = niceStep((d1 - d0) / tickCount);
    const start = Math.ceil(d0 / step) * step;
    const out: number[] = [];
    for (let v = start; v <= d1 + 1e-9; v += step) out.push(Number(v.toPrecision(12)));
    return out;
  };
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const f = ((x: number) => r0 + ((Math.log10(x) - l0) / (l1 - l0 || 1)) * (r1 - r0)) as Scale;
  f.ticks = () => {
    const out: number[] = [];
    for (let e = Math.ceil(l0); e <= Math.floor(l1); e += 1) out.push(10 ** e);
    return out;
  };
  return f;
}

function niceStep(raw: number): number {
  const mag = 10 ** Math.floor(Math.log10(Math.abs(raw) || 1));
  const norm = raw / mag;
  const step = norm >= 5 ? 5 : norm >= 2 ? 2 : 1;
  return step * mag;
}

export const PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"];

export class SvgDoc {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  polyline(points: Array<[number, number]>, stroke: string, attrs = ""): void {
    const pts = points.map(([x, y]) => `${x.toFixed(2)},${y.toFixed(2)}`).join(" ");
    this.add(`<polyline fill="none" stroke="${stroke}" stroke-width="1.8" points="${pts}" ${attrs}/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, attrs = ""): void {
    this.add(
      `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" x2="${x2.toFixed(2)}" y2="${y2.toFixed(2)}" stroke="${stroke}" ${attrs}/>`,
    );
  }

  text(x: number, y: number, content: string, attrs = ""): void {
    this.add(`<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" font-size="11" font-family="sans-serif" ${attrs}>${content}</text>`);
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect width="${this.width}" height="${this.height}" fill="white"/>`,
      ...this.parts,
      "</svg>",
    ].join("\n");
  }
}

export interface Frame {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

export function drawAxes(
  doc: SvgDoc,
  frame: Frame,
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
  yTickFormat: (v: number) => string = (v) => String(v),
): void {
  doc.line(frame.x0, frame.y1, frame.x1, frame.y1, "#333");
  doc.line(frame.x0, frame.y0, frame.x0, frame.y1, "#333");
  for (const t of xScale.ticks()) {
    const x = xScale(t);
    doc.line(x, frame.y1, x, frame.y1 + 4, "#333");
    doc.text(x - 8, frame.y1 + 16, String(t));
  }
  for (const t of yScale.ticks()) {
    const y = yScale(t);
    doc.line(frame.x0 - 4, y, frame.x0, y, "#333");
    doc.text(4, y + 4, yTickFormat(t));
  }
  doc.text((frame.x0 + frame.x1) / 2 - 20, frame.y1 + 32, xLabel);
  doc.text(6, frame.y0 - 8, yLabel);
}
