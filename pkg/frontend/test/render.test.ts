import { mkdtempSync, mkdirSync, readFileSync, writeFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { render } from "../src/figures.js";
import { renderAll } from "../src/renderAll.js";
import { wantsLogScale } from "../src/svg.js";

function csvLines(header: string, rows: (number | string)[][]): string {
  return [header, ...rows.map((r) => r.join(","))].join("\n") + "\n";
}

/** Write a small but complete sweep output directory. */
function makeFixtureDir(): string {
  const dir = mkdtempSync(join(tmpdir(), "sweep-"));
  const sweepRows: (number | string)[][] = [];
  const momentRows: (number | string)[][] = [];
  for (const N of [6, 10]) {
    for (let k = 0; k <= N; k++) {
      sweepRows.push([N, k, 4.0 * Math.exp(-0.8 * k) + 1e-5]);
      for (const comp of [1, 2]) {
        momentRows.push([N, k, comp, Math.cos(0.3 * k) * comp, 0.1 + 0.01 * k]);
      }
    }
  }
  writeFileSync(join(dir, "msd.csv"), csvLines("N,k,value", sweepRows));
  writeFileSync(join(dir, "wasserstein.csv"), csvLines("N,k,value", sweepRows));
  writeFileSync(join(dir, "moments.csv"),
    csvLines("N,k,component,mean,variance", momentRows));
  writeFileSync(join(dir, "stationary_reference.csv"),
    csvLines("component,mean,variance", [[1, -1.1, 0.06], [2, -0.2, 0.62]]));

  const pathRows: (number | string)[][] = [];
  for (const real of [0, 1]) {
    for (const N of [6, 10]) {
      for (let k = 0; k < N; k++) {
        pathRows.push([real, N, k, 0.5 - 0.1 * k, 0.8 - 0.05 * k, -1.0,
                       -1.1 + 0.01 * k, -0.2, -1.3]);
      }
    }
  }
  const pathHeader = "realization,N,k,X1,X2,U1,Xs1,Xs2,Us1";
  writeFileSync(join(dir, "paths.csv"), csvLines(pathHeader, pathRows));
  mkdirSync(join(dir, "uniform"));
  writeFileSync(join(dir, "uniform", "paths.csv"), csvLines(pathHeader, pathRows));
  return dir;
}

describe("renderAll", () => {
  it("renders all five standard figures", () => {
    const dir = makeFixtureDir();
    const out = join(dir, "figures");
    const report = renderAll(dir, out);
    expect(report.errors).toEqual([]);
    expect(report.rendered.sort()).toEqual([
      "moments_sweep", "msd_sweep", "path_grid", "uniform_path_grid", "wasserstein_sweep",
    ]);
    for (const name of ["msd_sweep", "path_grid", "wasserstein_sweep",
                        "moments_sweep", "uniform_path_grid"]) {
      expect(existsSync(join(out, `${name}.svg`))).toBe(true);
    }
  });

  it("is deterministic across repeated invocations", () => {
    const dir = makeFixtureDir();
    renderAll(dir, join(dir, "f1"));
    renderAll(dir, join(dir, "f2"));
    for (const name of ["msd_sweep.svg", "path_grid.svg", "moments_sweep.svg"]) {
      const a = readFileSync(join(dir, "f1", name), "utf8");
      const b = readFileSync(join(dir, "f2", name), "utf8");
      expect(a).toBe(b);
    }
  });

  it("skips recipes with missing inputs", () => {
    const dir = mkdtempSync(join(tmpdir(), "partial-"));
    writeFileSync(join(dir, "msd.csv"),
      csvLines("N,k,value", [[6, 0, 1.0], [6, 1, 0.5]]));
    const report = renderAll(dir, join(dir, "figures"));
    expect(report.rendered).toEqual(["msd_sweep"]);
    expect(report.skipped.length).toBe(4);
    expect(report.errors).toEqual([]);
  });

  it("does not mutate its inputs", () => {
    const dir = makeFixtureDir();
    const before = readFileSync(join(dir, "msd.csv"), "utf8");
    renderAll(dir, join(dir, "figures"));
    expect(readFileSync(join(dir, "msd.csv"), "utf8")).toBe(before);
  });
});

describe("render", () => {
  it("rejects a CSV with a missing column", () => {
    const dir = mkdtempSync(join(tmpdir(), "bad-"));
    writeFileSync(join(dir, "msd.csv"), csvLines("N,k,distance", [[6, 0, 1.0]]));
    expect(() =>
      render({ kind: "msd_sweep", inputs: [join(dir, "msd.csv")],
               output: join(dir, "o.svg") }),
    ).toThrow(/missing column/);
  });

  it("rejects an empty CSV", () => {
    const dir = mkdtempSync(join(tmpdir(), "empty-"));
    writeFileSync(join(dir, "msd.csv"), "");
    expect(() =>
      render({ kind: "msd_sweep", inputs: [join(dir, "msd.csv")],
               output: join(dir, "o.svg") }),
    ).toThrow(/empty/);
  });

  it("switches the distance panel to a log axis for wide ranges", () => {
    const dir = makeFixtureDir();
    const out = join(dir, "log.svg");
    render({ kind: "msd_sweep", inputs: [join(dir, "msd.csv")], output: out });
    // fixture spans 4.0 down to ~1e-5, beyond the three-decade switch
    expect(readFileSync(out, "utf8")).toContain('data-scale="log"');
  });

  it("keeps a linear axis for narrow ranges", () => {
    const dir = mkdtempSync(join(tmpdir(), "lin-"));
    writeFileSync(join(dir, "msd.csv"),
      csvLines("N,k,value", [[6, 0, 1.0], [6, 1, 0.7], [6, 2, 0.5]]));
    const out = join(dir, "lin.svg");
    render({ kind: "msd_sweep", inputs: [join(dir, "msd.csv")], output: out });
    expect(readFileSync(out, "utf8")).toContain('data-scale="linear"');
  });

  it("draws the dashed stationary reference in the moments figure", () => {
    const dir = makeFixtureDir();
    const out = join(dir, "m.svg");
    render({
      kind: "moments_sweep",
      inputs: [join(dir, "moments.csv"), join(dir, "stationary_reference.csv")],
      output: out,
    });
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain("stroke-dasharray");
    expect(svg).toContain("#d62728");
  });
});

describe("wantsLogScale", () => {
  it("needs positive data spanning three decades", () => {
    expect(wantsLogScale([1, 1e-4])).toBe(true);
    expect(wantsLogScale([1, 0.5])).toBe(false);
    expect(wantsLogScale([1, 0, 1e-4])).toBe(false);
    expect(wantsLogScale([])).toBe(false);
  });
});
