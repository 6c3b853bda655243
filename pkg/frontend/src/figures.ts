import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import { distinct, readCsv, requireColumns, Table } from "./csv.js";
import { composeFigure, PALETTE, PanelSpec, REFERENCE_COLOR, Series, wantsLogScale } from "./svg.js";

export type FigureKind =
  | "msd_sweep"
  | "path_grid"
  | "wasserstein_sweep"
  | "moments_sweep"
  | "uniform_path_grid";

export interface FigureRecipe {
  kind: FigureKind;
  /** input CSV paths; moments_sweep takes [moments, stationary_reference] */
  inputs: string[];
  output: string;
}

const colorForHorizon = (horizons: number[]) => {
  const map = new Map<number, string>();
  horizons.forEach((n, i) => map.set(n, PALETTE[i % PALETTE.length]));
  return map;
};

function horizonSeries(table: Table, context: string): { series: Series[]; legend: Series[] } {
  requireColumns(table, ["N", "k", "value"], context);
  const horizons = distinct(table, "N");
  const colors = colorForHorizon(horizons);
  const series = horizons.map((n) => ({
    label: `N=${n}`,
    color: colors.get(n)!,
    points: table.rows
      .filter((r) => r.N === n)
      .sort((a, b) => a.k - b.k)
      .map((r) => ({ x: r.k, y: r.value })),
  }));
  return { series, legend: series.map((s) => ({ ...s, points: [] })) };
}

function sweepFigure(path: string, title: string, yLabel: string): string {
  const table = readCsv(path);
  const { series, legend } = horizonSeries(table, path);
  const values = series.flatMap((s) => s.points.map((p) => p.y));
  const panel: PanelSpec = {
    title,
    xLabel: "time step k",
    yLabel,
    series,
    logY: wantsLogScale(values),
  };
  return composeFigure([panel], 1, legend);
}

function momentsFigure(momentsPath: string, referencePath: string): string {
  const table = readCsv(momentsPath);
  requireColumns(table, ["N", "k", "component", "mean", "variance"], momentsPath);
  const ref = readCsv(referencePath);
  requireColumns(ref, ["component", "mean", "variance"], referencePath);

  const horizons = distinct(table, "N");
  const components = distinct(table, "component");
  const colors = colorForHorizon(horizons);
  const kMax = Math.max(...table.rows.map((r) => r.k));

  const panels: PanelSpec[] = [];
  for (const stat of ["mean", "variance"] as const) {
    for (const comp of components) {
      const series: Series[] = horizons.map((n) => ({
        label: `N=${n}`,
        color: colors.get(n)!,
        points: table.rows
          .filter((r) => r.N === n && r.component === comp)
          .sort((a, b) => a.k - b.k)
          .map((r) => ({ x: r.k, y: r[stat] })),
      }));
      const refRow = ref.rows.find((r) => r.component === comp);
      if (refRow !== undefined) {
        series.push({
          label: "stationary",
          color: REFERENCE_COLOR,
          dashed: true,
          points: [
            { x: 0, y: refRow[stat] },
            { x: kMax, y: refRow[stat] },
          ],
        });
      }
      panels.push({
        title: `${stat === "mean" ? "E[X" : "Var[X"}${comp}]`,
        xLabel: "time step k",
        yLabel: stat,
        series,
      });
    }
  }
  const legend: Series[] = horizons.map((n) => ({
    label: `N=${n}`,
    color: colors.get(n)!,
    points: [],
  }));
  legend.push({ label: "stationary", color: REFERENCE_COLOR, dashed: true, points: [] });
  return composeFigure(panels, components.length, legend);
}

function pathGridFigure(path: string): string {
  const table = readCsv(path);
  requireColumns(table, ["realization", "N", "k"], path);
  const varCols = table.columns.filter(
    (c) => /^[XU]\d+$/.test(c),
  );
  if (varCols.length === 0) {
    throw new Error(`${path}: no state/control columns (X1..,U1..)`);
  }
  for (const col of varCols) {
    requireColumns(table, [stationaryTwin(col)], path);
  }
  const horizons = distinct(table, "N");
  const realizations = distinct(table, "realization");
  const colors = colorForHorizon(horizons);
  const maxN = horizons[horizons.length - 1];

  const panels: PanelSpec[] = [];
  for (const real of realizations) {
    for (const col of varCols) {
      const series: Series[] = horizons.map((n) => ({
        label: `N=${n}`,
        color: colors.get(n)!,
        points: table.rows
          .filter((r) => r.realization === real && r.N === n)
          .sort((a, b) => a.k - b.k)
          .map((r) => ({ x: r.k, y: r[col] })),
      }));
      series.push({
        label: "stationary",
        color: REFERENCE_COLOR,
        dashed: true,
        points: table.rows
          .filter((r) => r.realization === real && r.N === maxN)
          .sort((a, b) => a.k - b.k)
          .map((r) => ({ x: r.k, y: r[stationaryTwin(col)] })),
      });
      panels.push({
        title: `${col}, realization ${real + 1}`,
        xLabel: "time step k",
        yLabel: col,
        series,
      });
    }
  }
  const legend: Series[] = horizons.map((n) => ({
    label: `N=${n}`,
    color: colors.get(n)!,
    points: [],
  }));
  legend.push({ label: "stationary", color: REFERENCE_COLOR, dashed: true, points: [] });
  return composeFigure(panels, varCols.length, legend);
}

function stationaryTwin(col: string): string {
  // X1 -> Xs1, U1 -> Us1
  return col[0] + "s" + col.slice(1);
}

/** Render one figure recipe to its output path. */
export function render(recipe: FigureRecipe): void {
  let svg: string;
  switch (recipe.kind) {
    case "msd_sweep":
      svg = sweepFigure(recipe.inputs[0], "Mean-square distance to the stationary pair",
                        "E|X(k)-Xs(k)|^2");
      break;
    case "wasserstein_sweep":
      svg = sweepFigure(recipe.inputs[0], "Wasserstein-2 distance to the stationary law",
                        "W2(k)");
      break;
    case "moments_sweep":
      svg = momentsFigure(recipe.inputs[0], recipe.inputs[1]);
      break;
    case "path_grid":
    case "uniform_path_grid":
      svg = pathGridFigure(recipe.inputs[0]);
      break;
    default:
      throw new Error(`unknown figure kind ${String(recipe.kind)}`);
  }
  mkdirSync(dirname(recipe.output), { recursive: true });
  writeFileSync(recipe.output, svg);
}
