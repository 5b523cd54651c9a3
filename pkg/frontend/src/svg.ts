/** Minimal deterministic SVG string construction and axis helpers. */

/** Okabe–Ito colour-blind-safe palette. */
export const PALETTE = [
  "#0072b2",
  "#d55e00",
  "#009e73",
  "#cc79a7",
  "#e69f00",
  "#56b4e9",
  "#000000",
  "#999999",
] as const;

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Fixed two-decimal coordinate formatting so output is byte-stable. */
export function fmt(value: number): string {
  const s = value.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function el(
  tag: string,
  attrs: Record<string, string | number>,
  children = "",
): string {
  const parts = Object.entries(attrs).map(([k, v]) => `${k}="${v}"`);
  const head = [tag, ...parts].join(" ");
  return children === "" ? `<${head}/>` : `<${head}>${children}</${tag}>`;
}

export type Scale = (value: number) => number;

export function linearScale(
  [d0, d1]: [number, number],
  [r0, r1]: [number, number],
): Scale {
  const span = d1 - d0;
  return (v) => (span === 0 ? (r0 + r1) / 2 : r0 + ((v - d0) * (r1 - r0)) / span);
}

export function logScale(
  [d0, d1]: [number, number],
  range: [number, number],
): Scale {
  const inner = linearScale([Math.log10(d0), Math.log10(d1)], range);
  return (v) => inner(Math.log10(v));
}

/** Round-valued ticks at 1/2/5 x 10^k steps covering [lo, hi]. */
export function linearTicks(lo: number, hi: number, target = 6): number[] {
  if (hi <= lo) {
    return [lo];
  }
  const raw = (hi - lo) / target;
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= raw) ?? 10 * mag;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step / 1e9; v += step) {
    ticks.push(Math.abs(v) < step / 1e9 ? 0 : v);
  }
  return ticks;
}

/** Powers of ten covering [lo, hi]. */
export function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let k = Math.ceil(Math.log10(lo) - 1e-9); 10 ** k <= hi * (1 + 1e-9); k += 1) {
    ticks.push(10 ** k);
  }
  return ticks;
}

export function tickLabel(value: number): string {
  return value !== 0 && (Math.abs(value) >= 1e5 || Math.abs(value) < 1e-3)
    ? value.toExponential(0).replace("e+", "e")
    : String(Number(value.toPrecision(10)));
}
