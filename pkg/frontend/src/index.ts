export { ActionKind } from "./actions.js";
export type {
  ActionDescriptor,
  ActionKindName,
  ActionKindTag,
  TerminationOptions,
} from "./actions.js";
export { Bridge, BridgeError } from "./bridge.js";
export type { BridgeOptions } from "./bridge.js";
export { Solver } from "./solver.js";
export type { SolverState } from "./solver.js";
export { solveDense } from "./solveDense.js";
export type { DenseSolution, SolveDenseOptions } from "./solveDense.js";
