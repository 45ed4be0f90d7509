// The generator's own acceptance: structural checks against the known
// 2x2 schedule, and end-to-end correctness through the compiler CLI
// (generate -> compile -> interpret == integer matrix product).

import { describe, expect, it } from "vitest";
import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import {
  ArrayConfig,
  generate,
  matmul,
  memoryImage,
  schedule,
  validateConfig,
} from "../src/systolic";

const REPO_ROOT = path.resolve(__dirname, "..", "..");

function filc(args: string[], input: string, data?: Record<string, number[]>) {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "systolic-"));
  try {
    const design = path.join(dir, "design.fil");
    fs.writeFileSync(design, input);
    const full = [design, ...args];
    if (data) {
      const dataPath = path.join(dir, "data.json");
      fs.writeFileSync(dataPath, JSON.stringify(data));
      full.push("-d", dataPath);
    }
    return execFileSync("python3", ["-m", "filc.cli", ...full], {
      encoding: "utf8",
    });
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

function randMatrix(rng: () => number, rows: number, cols: number): number[][] {
  // entries below 2^(width/2) so a 32-bit accumulator cannot overflow
  return Array.from({ length: rows }, () =>
    Array.from({ length: cols }, () => Math.floor(rng() * 256))
  );
}

// deterministic LCG so failures reproduce
function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

describe("configuration", () => {
  it("rejects invalid dimensions and widths", () => {
    expect(validateConfig({ rows: 0, inner: 1, cols: 1, width: 8 })).toMatch(/rows/);
    expect(validateConfig({ rows: 1, inner: 1, cols: 1, width: 1 })).toMatch(/width/);
    expect(() => generate({ rows: 1, inner: -2, cols: 1, width: 8 })).toThrow();
    expect(validateConfig({ rows: 2, inner: 2, cols: 2, width: 32 })).toBeNull();
  });
});

describe("wavefront schedule", () => {
  it("2x2 control starts with the four known steps", () => {
    const steps = schedule({ rows: 2, inner: 2, cols: 2, width: 32 });
    expect(steps[0].movers).toEqual(["t0", "l0"]);
    expect(steps[0].computes).toEqual(["pe_00"]);
    expect(steps[1].movers.sort()).toEqual(
      ["t0", "t1", "l0", "l1", "pe_00_down", "pe_00_right"].sort()
    );
    expect(steps[1].computes.sort()).toEqual(["pe_00", "pe_01", "pe_10"].sort());
  });

  it("1x1 degenerates to load, compute, write back", () => {
    const text = generate({ rows: 1, inner: 1, cols: 1, width: 8 });
    const control = text.slice(text.indexOf("control {"));
    const stmts = control.match(/par \{[^}]*\}|wb_\d+;/gs)!;
    expect(stmts.length).toBe(3);
    expect(stmts[0]).toContain("t0;");
    expect(stmts[0]).toContain("l0;");
    expect(stmts[1]).toContain("pe_00;");
    expect(stmts[2]).toBe("wb_00;");
  });

  it("every compute group's operands are written in a strictly earlier step", () => {
    for (const [M, K, N] of [[2, 2, 2], [3, 2, 4], [4, 4, 4], [1, 3, 2]]) {
      const steps = schedule({ rows: M, inner: K, cols: N, width: 32 });
      const written = new Set<string>();
      for (const step of steps) {
        // the mover par is its own control step, strictly before the
        // compute par that consumes what it wrote
        for (const g of step.movers) {
          let mm = g.match(/^t(\d)$/);
          if (mm) written.add(`top_0${mm[1]}`);
          mm = g.match(/^l(\d)$/);
          if (mm) written.add(`left_${mm[1]}0`);
          mm = g.match(/^pe_(\d)(\d)_down$/);
          if (mm) written.add(`top_${Number(mm[1]) + 1}${mm[2]}`);
          mm = g.match(/^pe_(\d)(\d)_right$/);
          if (mm) written.add(`left_${mm[1]}${Number(mm[2]) + 1}`);
        }
        for (const pe of step.computes) {
          const m = pe.match(/^pe_(\d)(\d)$/)!;
          expect(written.has(`top_${m[1]}${m[2]}`)).toBe(true);
          expect(written.has(`left_${m[1]}${m[2]}`)).toBe(true);
        }
      }
    }
  });
});

describe("generated text", () => {
  it("matches the committed 2x2 fixture used by the compiler's stats golden", () => {
    const fixture = fs.readFileSync(
      path.join(REPO_ROOT, "tests", "fixtures", "systolic_2x2.fil"),
      "utf8"
    );
    expect(generate({ rows: 2, inner: 2, cols: 2, width: 32 })).toBe(fixture);
  });

  it("emits no static attributes; latencies are inferred downstream", () => {
    const text = generate({ rows: 3, inner: 2, cols: 2, width: 16 });
    expect(text).not.toContain('"static"');
  });
});

describe("end to end through the compiler", () => {
  it("2x2 worked example produces [[19,22],[43,50]]", () => {
    const text = generate({ rows: 2, inner: 2, cols: 2, width: 32 });
    const image = memoryImage(
      [
        [1, 2],
        [3, 4],
      ],
      [
        [5, 6],
        [7, 8],
      ]
    );
    const result = JSON.parse(filc(["-b", "interp"], text, image));
    expect(result.memories.out_mem).toEqual([19, 22, 43, 50]);
  });

  it("20 random shapes and matrices equal the integer product exactly", () => {
    const rng = makeRng(0xc0ffee);
    for (let trial = 0; trial < 20; trial++) {
      const M = 1 + Math.floor(rng() * 4);
      const K = 1 + Math.floor(rng() * 4);
      const N = 1 + Math.floor(rng() * 4);
      const a = randMatrix(rng, M, K);
      const b = randMatrix(rng, K, N);
      const text = generate({ rows: M, inner: K, cols: N, width: 32 });
      const result = JSON.parse(
        filc(["-b", "interp"], text, memoryImage(a, b))
      );
      expect(result.memories.out_mem, `${M}x${K}x${N}`).toEqual(matmul(a, b));
    }
  }, 120_000);

  it("full pipeline leaves no dynamic-handshake registers behind", () => {
    const text = generate({ rows: 2, inner: 3, cols: 2, width: 32 });
    const lowered = filc(["-b", "futil"], text);
    const cells = lowered.slice(
      lowered.indexOf("cells {"),
      lowered.indexOf("wires {")
    );
    expect(cells).not.toMatch(/\b(pd|cc|cs)\d+\s*=/);
    expect(cells).toMatch(/fsm\d+ =/); // the one static counter remains
  });

  it("latency-sensitive compilation beats the latency-insensitive build", () => {
    const text = generate({ rows: 2, inner: 2, cols: 2, width: 32 });
    const image = memoryImage(
      [
        [1, 2],
        [3, 4],
      ],
      [
        [5, 6],
        [7, 8],
      ]
    );
    const fast = JSON.parse(filc(["-b", "interp"], text, image));
    const slow = JSON.parse(
      filc(["-b", "interp", "--disable", "static"], text, image)
    );
    expect(fast.memories.out_mem).toEqual(slow.memories.out_mem);
    expect(fast.cycles).toBeLessThan(slow.cycles);
  });
});

describe("processing element latency", () => {
  it("accepts the built-in PE latency and rejects others", () => {
    expect(
      validateConfig({ rows: 2, inner: 2, cols: 2, width: 32, peStatic: 1 })
    ).toBeNull();
    expect(
      validateConfig({ rows: 2, inner: 2, cols: 2, width: 32, peStatic: 4 })
    ).toMatch(/pe-static/);
  });
});
