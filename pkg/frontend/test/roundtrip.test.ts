import { execFileSync } from "node:child_process";
import { existsSync, mkdirSync, readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Bridge, Solver, solveDense } from "../src/index.js";
import { Registers, dot, driveToDone, matvec } from "./registers.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const CACHE = join(HERE, ".fixtures");
const EXPECTED = join(CACHE, "expected.json");
const COUNT = 1000;

interface Expected {
  seed: number;
  n: number;
  delta: number;
  x: number[];
  lam: number;
  obj: number;
  status: string;
}

interface Instance {
  n: number;
  h: number[][];
  g: number[];
  delta: number;
}

let bridge: Bridge;
let expectedRuns: Expected[];

beforeAll(() => {
  bridge = new Bridge();
  if (!existsSync(EXPECTED)) {
    mkdirSync(CACHE, { recursive: true });
    execFileSync(
      process.env.TRKRYLOV_PYTHON ?? "python3",
      [join(HERE, "gen_expected.py"), String(COUNT), EXPECTED],
      { stdio: "inherit" },
    );
  }
  expectedRuns = JSON.parse(readFileSync(EXPECTED, "utf-8"));
}, 120_000);

afterAll(async () => {
  await bridge.close();
});

const cfg = (n: number) => ({
  tol_rel_i: 1e-11,
  tol_rel_b: 1e-11,
  max_iter: 10 * n,
});

describe("solve_dense round trip", () => {
  it(
    `matches the primary backend on the ${COUNT}-instance random matrix`,
    async () => {
      for (const run of expectedRuns) {
        const inst = await bridge.request<Instance>({
          op: "gen_instance",
          seed: run.seed,
        });
        const got = await solveDense(inst.h, inst.g, inst.delta, {
          config: cfg(inst.n),
          bridge,
        });
        const scale = Math.max(1, Math.abs(run.obj));
        expect(Math.abs(got.obj - run.obj)).toBeLessThanOrEqual(1e-12 * scale);
        expect(Math.abs(got.lam - run.lam)).toBeLessThanOrEqual(
          1e-12 * Math.max(1, run.lam),
        );
        got.x.forEach((xi, i) => {
          expect(Math.abs(xi - run.x[i])).toBeLessThanOrEqual(1e-12 * scale);
        });
        // the objective payload is the coordinate-space model value; the
        // value recomputed from the retransformed vector agrees with it up
        // to basis drift (a garbled wire would be off by orders more)
        const x = Float64Array.from(got.x);
        const hx = matvec(inst.h, x);
        const gArr = Float64Array.from(inst.g);
        const qx = 0.5 * dot(x, hx) + dot(gArr, x);
        let termScale = 0;
        for (let i = 0; i < x.length; i++) {
          termScale += 0.5 * Math.abs(x[i] * hx[i]) + Math.abs(gArr[i] * x[i]);
        }
        expect(Math.abs(qx - got.obj)).toBeLessThanOrEqual(
          1e-7 * Math.max(scale, termScale),
        );
      }
    },
    240_000,
  );

  it("is deterministic across calls", async () => {
    const inst = await bridge.request<Instance>({ op: "gen_instance", seed: 3 });
    const a = await solveDense(inst.h, inst.g, inst.delta, {
      config: cfg(inst.n),
      bridge,
    });
    const b = await solveDense(inst.h, inst.g, inst.delta, {
      config: cfg(inst.n),
      bridge,
    });
    expect(b.x).toEqual(a.x);
    expect(b.obj).toBe(a.obj);
  });
});

describe("step-wise sessions against solve_dense", () => {
  it("agrees on a spread of seeded instances", { timeout: 240_000 }, async () => {
    let compared = 0;
    for (let seed = 0; seed < 40; seed++) {
      const inst = await bridge.request<Instance>({
        op: "gen_instance",
        seed,
      });
      const dense = await solveDense(inst.h, inst.g, inst.delta, {
        config: cfg(inst.n),
        bridge,
      });
      const solver = await Solver.create(inst.delta, cfg(inst.n), bridge);
      const regs = new Registers(inst.h, inst.g);
      const done = await driveToDone(solver, regs);
      const scale = Math.max(1, Math.abs(dense.obj));
      expect(Math.abs(done.obj! - dense.obj)).toBeLessThanOrEqual(1e-9 * scale);
      compared += 1;
    }
    expect(compared).toBe(40);
  });
});
