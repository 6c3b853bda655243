import { existsSync } from "node:fs";
import { join } from "node:path";

import { FigureRecipe, render } from "./figures.js";

export interface RenderAllReport {
  rendered: string[];
  skipped: string[];
  errors: { kind: string; message: string }[];
}

/** Standard recipes over a sweep output directory. */
export function standardRecipes(inDir: string, outDir: string): FigureRecipe[] {
  return [
    { kind: "msd_sweep", inputs: [join(inDir, "msd.csv")], output: join(outDir, "msd_sweep.svg") },
    { kind: "path_grid", inputs: [join(inDir, "paths.csv")], output: join(outDir, "path_grid.svg") },
    {
      kind: "wasserstein_sweep",
      inputs: [join(inDir, "wasserstein.csv")],
      output: join(outDir, "wasserstein_sweep.svg"),
    },
    {
      kind: "moments_sweep",
      inputs: [join(inDir, "moments.csv"), join(inDir, "stationary_reference.csv")],
      output: join(outDir, "moments_sweep.svg"),
    },
    {
      kind: "uniform_path_grid",
      inputs: [join(inDir, "uniform", "paths.csv")],
      output: join(outDir, "uniform_path_grid.svg"),
    },
  ];
}

/** Render every standard figure whose inputs are present; aggregate
 * per-recipe failures instead of aborting the batch. */
export function renderAll(inDir: string, outDir: string): RenderAllReport {
  const report: RenderAllReport = { rendered: [], skipped: [], errors: [] };
  for (const recipe of standardRecipes(inDir, outDir)) {
    if (!recipe.inputs.every((p) => existsSync(p))) {
      report.skipped.push(recipe.kind);
      continue;
    }
    try {
      render(recipe);
      report.rendered.push(recipe.kind);
    } catch (err) {
      report.errors.push({ kind: recipe.kind, message: (err as Error).message });
    }
  }
  return report;
}
