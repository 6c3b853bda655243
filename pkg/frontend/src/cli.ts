import { renderAll } from "./renderAll.js";

function parseArgs(argv: string[]): { inDir: string; outDir: string } {
  let inDir: string | undefined;
  let outDir: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--in") inDir = argv[++i];
    else if (argv[i] === "--out") outDir = argv[++i];
    else {
      console.error(`unknown argument: ${argv[i]}`);
      process.exit(2);
    }
  }
  if (!inDir || !outDir) {
    console.error("usage: cli --in <sweep output dir> --out <figure dir>");
    process.exit(2);
  }
  return { inDir, outDir };
}

const { inDir, outDir } = parseArgs(process.argv.slice(2));
const report = renderAll(inDir, outDir);
for (const kind of report.rendered) console.log(`rendered ${kind}`);
for (const kind of report.skipped) console.log(`skipped ${kind} (inputs missing)`);
for (const err of report.errors) console.error(`error ${err.kind}: ${err.message}`);
process.exit(report.errors.length > 0 ? 1 : 0);
