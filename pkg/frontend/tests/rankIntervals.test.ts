import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { renderRankIntervals } from "../src/rankIntervals.js";
import { parseRankIntervalsCsv } from "../src/schemas.js";

const rows = parseRankIntervalsCsv(
  readFileSync(new URL("./fixtures/rank_intervals.csv", import.meta.url), "utf8"),
);

describe("renderRankIntervals", () => {
  it("draws one bar and one mean dot per line", () => {
    const svg = renderRankIntervals(rows);
    expect(svg.match(/class="bar"/g)).toHaveLength(46);
    expect(svg.match(/class="bar-dot"/g)).toHaveLength(46);
    expect(svg.match(/class="panel"/g)).toHaveLength(1);
    expect(svg).toContain(">alg1, n=50</text>");
  });

  it("spans each bar from lo to hi around the mean dot", () => {
    const svg = renderRankIntervals(rows);
    const bars = [
      ...svg.matchAll(/class="bar" x1="([^"]+)".*?y1="([^"]+)" y2="([^"]+)"/g),
    ];
    const dots = [
      ...svg.matchAll(/class="bar-dot" cx="([^"]+)" cy="([^"]+)"/g),
    ];
    expect(bars).toHaveLength(46);
    for (let i = 0; i < bars.length; i += 1) {
      const [yLo, yHi] = [Number(bars[i]![2]), Number(bars[i]![3])];
      const yMean = Number(dots[i]![2]);
      // SVG y grows downward, so lo maps to the larger coordinate.
      expect(yHi).toBeLessThanOrEqual(yLo);
      expect(yMean).toBeLessThanOrEqual(yLo + 1e-9);
      expect(yMean).toBeGreaterThanOrEqual(yHi - 1e-9);
    }
  });

  it("orders bars by true rank", () => {
    const svg = renderRankIntervals(rows);
    const xs = [...svg.matchAll(/class="bar" x1="([^"]+)"/g)].map((m) =>
      Number(m[1]),
    );
    const sorted = [...xs].sort((a, b) => a - b);
    expect(xs).toEqual(sorted);
    expect(new Set(xs).size).toBe(46);
  });

  it("renders one panel per algorithm/sample-size group", () => {
    const doubled = [
      ...rows,
      ...rows.map((r) => ({ ...r, algorithm: "alg3" })),
    ];
    const svg = renderRankIntervals(doubled);
    expect(svg.match(/class="panel"/g)).toHaveLength(2);
    expect(svg.match(/class="bar"/g)).toHaveLength(92);
    expect(svg).toContain(">alg3, n=50</text>");
  });

  it("is deterministic", () => {
    expect(renderRankIntervals(rows)).toBe(renderRankIntervals(rows));
  });

  it("refuses to render nothing", () => {
    expect(() => renderRankIntervals([])).toThrowError(/no data rows/);
  });
});
