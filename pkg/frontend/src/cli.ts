#!/usr/bin/env node
import { readFileSync } from "fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { plotConvergence } from "./convergence.js";
import { plotRepeaterRegions } from "./repeaterRegions.js";
import { SchemaError } from "./schema.js";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .command("repeater-regions", "render the reach-regions figure from a sweep CSV", (y) =>
      y
        .option("in", { type: "string", demandOption: true, describe: "repeater_scan.csv path" })
        .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
        .option("variant", { type: "string", default: "i", choices: ["i", "ii"] }),
    )
    .command("convergence", "render convergence curves from a gaussify report", (y) =>
      y
        .option("in", { type: "string", demandOption: true, describe: "gaussify_report.json path" })
        .option("out", { type: "string", demandOption: true, describe: "output SVG path" }),
    )
    .demandCommand(1)
    .strict()
    .parse();

  const command = String(argv._[0]);
  const input = readFileSync(String(argv.in), "utf8");
  if (command === "repeater-regions") {
    plotRepeaterRegions(input, String(argv.out), { variant: String(argv.variant) });
  } else {
    plotConvergence(input, String(argv.out));
  }
  console.log(`wrote ${argv.out}`);
  return 0;
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
    } else {
      console.error(String(err));
    }
    process.exit(1);
  });
