// Output-stationary systolic array generator. Emits .fil text computing
// A(MxK) x B(KxN): row memories feed processing elements from the left,
// column memories from the top, and data advances one PE per step along
// each axis following the diagonal wavefront. The generator never links
// against the compiler; the .fil format is the only contract.
//
// Data-movement groups pulse a dedicated 1-bit tick register and guard
// their real effects with !tick.done: the effect lands exactly once per
// activation whether the group runs a 1-cycle static window or a 2-cycle
// dynamic handshake, and the group stays latency-inferable (exactly one
// unguarded go-equivalent pulse, done wired to it). No "static"
// attributes are emitted; the compiler infers every latency.

export interface ArrayConfig {
  rows: number; // M
  inner: number; // K
  cols: number; // N
  width: number;
  // Latency the processing element advertises. The generator currently
  // instantiates the multiply-accumulate cell, whose latency is one
  // cycle; this field is the extension point for swapping in other PE
  // components.
  peStatic?: number;
}

export const MAC_PE_LATENCY = 1;

export function clog2(n: number): number {
  if (n <= 1) return 1;
  return 32 - Math.clz32(n - 1);
}

export function validateConfig(config: ArrayConfig): string | null {
  const { rows, inner, cols, width, peStatic } = config;
  for (const [name, v] of [
    ["rows", rows],
    ["inner", inner],
    ["cols", cols],
  ] as const) {
    if (!Number.isInteger(v) || v < 1) {
      return `${name} must be a positive integer, got ${v}`;
    }
  }
  if (!Number.isInteger(width) || width < 2) {
    return `width must be an integer >= 2, got ${width}`;
  }
  if (peStatic !== undefined && peStatic !== MAC_PE_LATENCY) {
    return `the built-in multiply-accumulate PE has latency ${MAC_PE_LATENCY}; got pe-static ${peStatic}`;
  }
  return null;
}

interface Step {
  movers: string[];
  computes: string[];
}

// Wavefront windows: loader t<j>/l<i> feeds element k of its stream at
// step i+k (resp. j+k); a mover at (i,j) forwards during steps
// [i+j+1, i+j+K]; PE (i,j) accumulates its K products during steps
// [i+j, i+j+K).
export function schedule(config: ArrayConfig): Step[] {
  const { rows: M, inner: K, cols: N } = config;
  const last = (M - 1) + (N - 1) + K;
  const steps: Step[] = [];
  for (let s = 0; s <= last; s++) {
    const movers: string[] = [];
    for (let j = 0; j < N; j++) if (j <= s && s < j + K) movers.push(`t${j}`);
    for (let i = 0; i < M; i++) if (i <= s && s < i + K) movers.push(`l${i}`);
    for (let i = 0; i < M - 1; i++)
      for (let j = 0; j < N; j++)
        if (i + j + 1 <= s && s <= i + j + K) movers.push(`pe_${i}${j}_down`);
    for (let i = 0; i < M; i++)
      for (let j = 0; j < N - 1; j++)
        if (i + j + 1 <= s && s <= i + j + K) movers.push(`pe_${i}${j}_right`);
    const computes: string[] = [];
    for (let i = 0; i < M; i++)
      for (let j = 0; j < N; j++)
        if (i + j <= s && s < i + j + K) computes.push(`pe_${i}${j}`);
    steps.push({ movers, computes });
  }
  return steps;
}

export function generate(config: ArrayConfig): string {
  const problem = validateConfig(config);
  if (problem !== null) throw new Error(problem);
  const { rows: M, inner: K, cols: N, width } = config;
  const aw = clog2(K);
  const ow = clog2(M * N);
  const lines: string[] = [];
  const out = (s: string) => lines.push(s);

  out(`// Output-stationary systolic array: computes A(${M}x${K}) x B(${K}x${N}).`);
  out("// Row memories feed from the left, column memories from the top;");
  out("// data advances one processing element per step along each axis.");
  out("component main() -> () {");
  out("  cells {");
  for (let i = 0; i < M; i++) out(`    a_mem${i} = std_mem_d1(${width}, ${K}, ${aw});`);
  for (let j = 0; j < N; j++) out(`    b_mem${j} = std_mem_d1(${width}, ${K}, ${aw});`);
  out(`    out_mem = std_mem_d1(${width}, ${M * N}, ${ow});`);
  for (let i = 0; i < M; i++)
    for (let j = 0; j < N; j++) out(`    mac_${i}${j} = std_mac(${width});`);
  for (let i = 0; i < M; i++)
    for (let j = 0; j < N; j++) {
      out(`    top_${i}${j} = std_reg(${width});`);
      out(`    left_${i}${j} = std_reg(${width});`);
    }
  for (let j = 0; j < N; j++) {
    out(`    t_idx${j} = std_counter(${aw});`);
    out(`    t_tick${j} = std_reg(1);`);
  }
  for (let i = 0; i < M; i++) {
    out(`    l_idx${i} = std_counter(${aw});`);
    out(`    l_tick${i} = std_reg(1);`);
  }
  for (let i = 0; i < M; i++)
    for (let j = 0; j < N; j++) {
      if (i + 1 < M) out(`    d_tick${i}${j} = std_reg(1);`);
      if (j + 1 < N) out(`    r_tick${i}${j} = std_reg(1);`);
    }
  out("  }");
  out("  wires {");

  const tickGroup = (name: string, tick: string, effects: [string, string][]) => {
    out(`    group ${name} {`);
    for (const [dst, src] of effects) out(`      ${dst} = ${src};`);
    out(`      ${tick}.in = 1'd1;`);
    out(`      ${tick}.write_en = 1'd1;`);
    out(`      ${name}[done] = ${tick}.done;`);
    out("    }");
  };

  for (let j = 0; j < N; j++) {
    const cut = `!t_tick${j}.done ? `;
    tickGroup(`t${j}`, `t_tick${j}`, [
      [`b_mem${j}.addr0`, `${cut}t_idx${j}.out`],
      [`top_0${j}.in`, `b_mem${j}.read_data`],
      [`top_0${j}.write_en`, `${cut}1'd1`],
      [`t_idx${j}.incr`, `${cut}1'd1`],
    ]);
  }
  for (let i = 0; i < M; i++) {
    const cut = `!l_tick${i}.done ? `;
    tickGroup(`l${i}`, `l_tick${i}`, [
      [`a_mem${i}.addr0`, `${cut}l_idx${i}.out`],
      [`left_${i}0.in`, `a_mem${i}.read_data`],
      [`left_${i}0.write_en`, `${cut}1'd1`],
      [`l_idx${i}.incr`, `${cut}1'd1`],
    ]);
  }
  for (let i = 0; i < M; i++)
    for (let j = 0; j < N; j++) {
      if (i + 1 < M) {
        const cut = `!d_tick${i}${j}.done ? `;
        tickGroup(`pe_${i}${j}_down`, `d_tick${i}${j}`, [
          [`top_${i + 1}${j}.in`, `top_${i}${j}.out`],
          [`top_${i + 1}${j}.write_en`, `${cut}1'd1`],
        ]);
      }
      if (j + 1 < N) {
        const cut = `!r_tick${i}${j}.done ? `;
        tickGroup(`pe_${i}${j}_right`, `r_tick${i}${j}`, [
          [`left_${i}${j + 1}.in`, `left_${i}${j}.out`],
          [`left_${i}${j + 1}.write_en`, `${cut}1'd1`],
        ]);
      }
    }
  for (let i = 0; i < M; i++)
    for (let j = 0; j < N; j++) {
      out(`    group pe_${i}${j} {`);
      out(`      mac_${i}${j}.left = left_${i}${j}.out;`);
      out(`      mac_${i}${j}.right = top_${i}${j}.out;`);
      out(`      mac_${i}${j}.go = 1'd1;`);
      out(`      pe_${i}${j}[done] = mac_${i}${j}.done;`);
      out("    }");
    }
  for (let i = 0; i < M; i++)
    for (let j = 0; j < N; j++) {
      out(`    group wb_${i}${j} {`);
      out(`      out_mem.addr0 = ${ow}'d${i * N + j};`);
      out(`      out_mem.write_data = mac_${i}${j}.out;`);
      out(`      out_mem.write_en = 1'd1;`);
      out(`      wb_${i}${j}[done] = out_mem.done;`);
      out("    }");
    }
  out("  }");
  out("  control {");
  out("    seq {");
  for (const step of schedule(config)) {
    for (const stmts of [step.movers, step.computes]) {
      if (stmts.length) {
        out("      par {");
        for (const g of stmts) out(`        ${g};`);
        out("      }");
      }
    }
  }
  for (let i = 0; i < M; i++)
    for (let j = 0; j < N; j++) out(`      wb_${i}${j};`);
  out("    }");
  out("  }");
  out("}");
  return lines.join("\n") + "\n";
}

// Memory image for the interpreter: A's rows and B's columns, each a
// K-deep memory, keyed the way the generated design names them.
export function memoryImage(
  a: number[][],
  b: number[][]
): Record<string, number[]> {
  const image: Record<string, number[]> = {};
  a.forEach((row, i) => {
    image[`a_mem${i}`] = row;
  });
  const n = b[0].length;
  for (let j = 0; j < n; j++) {
    image[`b_mem${j}`] = b.map((row) => row[j]);
  }
  return image;
}

export function matmul(a: number[][], b: number[][]): number[] {
  const m = a.length;
  const k = b.length;
  const n = b[0].length;
  const flat: number[] = [];
  for (let i = 0; i < m; i++)
    for (let j = 0; j < n; j++) {
      let acc = 0;
      for (let x = 0; x < k; x++) acc += a[i][x] * b[x][j];
      flat.push(acc);
    }
  return flat;
}
