/** Convenience dense solve: ships the operators to the core in one call. */

import type { TerminationOptions } from "./actions.js";
import { Bridge, type BridgeOptions } from "./bridge.js";

export interface DenseSolution {
  x: number[];
  lam: number;
  obj: number;
  hess_products: number;
  iterations: number;
  outcome: string;
  status: string;
  kkt_residual: number;
}

export interface SolveDenseOptions {
  /** Symmetric positive definite metric (identity when omitted). */
  m?: number[][];
  config?: TerminationOptions;
  seed?: number;
  bridge?: Bridge;
  bridgeOptions?: BridgeOptions;
}

export async function solveDense(
  h: number[][],
  g: number[],
  delta: number,
  options: SolveDenseOptions = {},
): Promise<DenseSolution> {
  const bridge = options.bridge ?? new Bridge(options.bridgeOptions);
  try {
    return await bridge.request<DenseSolution>({
      op: "solve_dense",
      h,
      g,
      delta,
      m: options.m,
      config: options.config ?? {},
      seed: options.seed ?? 0,
    });
  } finally {
    if (options.bridge === undefined) {
      await bridge.close();
    }
  }
}
