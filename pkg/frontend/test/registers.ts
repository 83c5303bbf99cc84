/**
 * Caller-side register file used by the tests: serves actions with plain
 * Float64 vector math (identity metric), mirroring the protocol contract.
 */

import { ActionKind, type ActionDescriptor } from "../src/actions.js";
import type { Solver } from "../src/solver.js";

export function matvec(h: number[][], x: Float64Array): Float64Array {
  const n = x.length;
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    let acc = 0;
    const row = h[i];
    for (let j = 0; j < n; j++) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

export function dot(a: Float64Array, b: Float64Array): number {
  let acc = 0;
  for (let i = 0; i < a.length; i++) acc += a[i] * b[i];
  return acc;
}

export class Registers {
  readonly h: number[][];
  readonly g0: Float64Array;
  G: Float64Array;
  G_PREV: Float64Array;
  V: Float64Array;
  P: Float64Array;
  S: Float64Array;
  HP: Float64Array;
  X: Float64Array;
  basis: Float64Array[] = [];
  hessProducts = 0;

  constructor(h: number[][], g: number[]) {
    const n = g.length;
    this.h = h;
    this.g0 = Float64Array.from(g);
    this.G = Float64Array.from(g);
    this.G_PREV = new Float64Array(n);
    this.V = new Float64Array(n);
    this.P = new Float64Array(n);
    this.S = new Float64Array(n);
    this.HP = new Float64Array(n);
    this.X = new Float64Array(n);
  }

  private reorthogonalize(gNew: Float64Array): Float64Array {
    for (let pass = 0; pass < 2; pass++) {
      for (const p of this.basis) {
        const c = dot(gNew, p);
        for (let i = 0; i < gNew.length; i++) gNew[i] -= c * p[i];
      }
    }
    return gNew;
  }

  /** Pick a deterministic unit vector orthogonal to the stored basis. */
  restartVector(): Float64Array {
    const n = this.g0.length;
    for (let k = 0; k < n; k++) {
      const w = new Float64Array(n);
      w[k] = 1;
      for (let pass = 0; pass < 2; pass++) {
        for (const p of this.basis) {
          const c = dot(w, p);
          for (let i = 0; i < n; i++) w[i] -= c * p[i];
        }
      }
      const nrm = Math.sqrt(dot(w, w));
      if (nrm > 1e-6) {
        for (let i = 0; i < n; i++) w[i] /= nrm;
        return w;
      }
    }
    throw new Error("subspace full");
  }

  /** Perform the vector work of one action; return its demanded scalars. */
  serve(action: ActionDescriptor): number[] {
    const n = this.g0.length;
    switch (action.kind) {
      case ActionKind.INIT_PRECOND: {
        this.G = Float64Array.from(this.g0);
        this.G_PREV = new Float64Array(n);
        this.V = Float64Array.from(this.G);
        return [dot(this.G, this.V)];
      }
      case ActionKind.CG_DIR: {
        if (action.store !== undefined) {
          this.basis.push(this.V.map((v) => action.store! * v));
        }
        for (let i = 0; i < n; i++) {
          this.P[i] = -this.V[i] + (action.beta ?? 0) * this.P[i];
        }
        return [];
      }
      case ActionKind.HESS_PROD: {
        if (action.p_scale !== undefined) {
          this.P = this.V.map((v) => action.p_scale! * v);
        }
        if (action.store !== undefined) {
          this.basis.push(this.V.map((v) => action.store! * v));
        }
        this.HP = matvec(this.h, this.P);
        this.hessProducts += 1;
        const out = [dot(this.P, this.HP)];
        if (action.expects.length === 2) out.push(dot(this.P, this.P));
        return out;
      }
      case ActionKind.CG_UPDATE: {
        const alpha = action.alpha!;
        const gNew = new Float64Array(n);
        for (let i = 0; i < n; i++) {
          gNew[i] = this.G[i] + alpha * this.HP[i];
          this.S[i] += alpha * this.P[i];
        }
        this.G_PREV = this.G;
        this.G = gNew;
        this.V = Float64Array.from(this.G);
        return [dot(this.G, this.V)];
      }
      case ActionKind.LANCZOS_GRAD: {
        let gNew = new Float64Array(n);
        for (let i = 0; i < n; i++) {
          gNew[i] =
            this.HP[i] - action.a! * this.G[i] - action.b! * this.G_PREV[i];
        }
        gNew = this.reorthogonalize(gNew);
        this.G_PREV = this.G;
        this.G = gNew;
        this.V = Float64Array.from(this.G);
        return [dot(this.G, this.V)];
      }
      case ActionKind.RETRANSFORM: {
        this.X = new Float64Array(n);
        action.h!.forEach((coeff, j) => {
          const p = this.basis[j];
          for (let i = 0; i < n; i++) this.X[i] += coeff * p[i];
        });
        return [];
      }
      case ActionKind.OBJ_VALUE: {
        const hx = matvec(this.h, this.X);
        return [0.5 * dot(this.X, hx) + dot(this.g0, this.X)];
      }
      default:
        throw new Error(`test registers cannot serve ${action.name}`);
    }
  }
}

/**
 * Drive a session to DONE, opening new invariant subspaces on exhaustion
 * until the basis spans the space (the same policy as the core's dense
 * backend, minus the interior-on-the-boundary edge case the test instances
 * never hit).
 */
export async function driveToDone(
  solver: Solver,
  regs: Registers,
): Promise<ActionDescriptor> {
  let action = solver.pending!;
  const n = regs.g0.length;
  for (;;) {
    while (action.kind !== ActionKind.DONE) {
      if (action.kind === ActionKind.NEW_KRYLOV) {
        const w = regs.restartVector();
        regs.V = w;
        regs.G = Float64Array.from(w);
        regs.G_PREV = new Float64Array(n);
        action = await solver.step([dot(regs.G, regs.V)]);
        continue;
      }
      action = await solver.step(regs.serve(action));
    }
    const state = await solver.state();
    const strictlyInterior =
      action.status === "interior" &&
      Math.sqrt(dot(regs.X, regs.X)) < (1 - 1e-9) * state.delta;
    if (state.exhausted && !strictlyInterior && regs.basis.length < n) {
      action = await solver.newKrylov();
      continue;
    }
    return action;
  }
}
