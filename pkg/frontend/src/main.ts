#!/usr/bin/env node
// systolic-gen --rows M --inner K --cols N --width W [-o out.fil]

import * as fs from "fs";
import { ArrayConfig, generate } from "./systolic";

function usage(): never {
  process.stderr.write(
    "usage: systolic-gen --rows M --inner K --cols N --width W [--pe-static L] [-o out.fil]\n"
  );
  process.exit(1);
}

export function parseArgs(argv: string[]): { config: ArrayConfig; out?: string } {
  const values: Record<string, string> = {};
  let out: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i++;
      if (i >= argv.length) usage();
      return argv[i];
    };
    switch (arg) {
      case "--rows":
      case "--inner":
      case "--cols":
      case "--width":
      case "--pe-static":
        values[arg.slice(2)] = next();
        break;
      case "-o":
      case "--output":
        out = next();
        break;
      default:
        usage();
    }
  }
  for (const key of ["rows", "inner", "cols", "width"]) {
    if (!(key in values)) usage();
  }
  const config: ArrayConfig = {
    rows: Number(values.rows),
    inner: Number(values.inner),
    cols: Number(values.cols),
    width: Number(values.width),
  };
  if ("pe-static" in values) {
    config.peStatic = Number(values["pe-static"]);
  }
  return { config, out };
}

function main(): void {
  const { config, out } = parseArgs(process.argv.slice(2));
  let text: string;
  try {
    text = generate(config);
  } catch (e) {
    process.stderr.write(`error: ${(e as Error).message}\n`);
    process.exit(1);
  }
  if (out) {
    fs.writeFileSync(out, text);
  } else {
    process.stdout.write(text);
  }
}

if (require.main === module) {
  main();
}
