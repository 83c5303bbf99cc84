/**
 * Step-wise reverse-communication solver handle.
 *
 * Mirrors the core's low-level interface one to one: each `step(scalars)`
 * serves the pending action and returns the next one.  The caller owns all
 * vector data; only dot products and coefficient payloads cross the
 * boundary.
 */

import type { ActionDescriptor, TerminationOptions } from "./actions.js";
import { ActionKind } from "./actions.js";
import { Bridge, BridgeError, type BridgeOptions } from "./bridge.js";

interface ActionResponse {
  action: ActionDescriptor;
}

export interface SolverState {
  i: number;
  gamma0: number;
  alpha: number[];
  beta: number[];
  gammas: number[];
  diag: number[];
  offdiag: number[];
  block_starts: number[];
  lam: number;
  phase: string;
  exhausted: boolean;
  delta: number;
}

export class Solver {
  private bridge: Bridge;
  private ownsBridge: boolean;
  private pendingAction: ActionDescriptor | null = null;

  private constructor(bridge: Bridge, ownsBridge: boolean) {
    this.bridge = bridge;
    this.ownsBridge = ownsBridge;
  }

  /** Start a session; the returned solver holds the first pending action. */
  static async create(
    delta: number,
    config: TerminationOptions = {},
    bridge?: Bridge,
    options?: BridgeOptions,
  ): Promise<Solver> {
    const owned = bridge === undefined;
    const solver = new Solver(bridge ?? new Bridge(options), owned);
    const resp = await solver.bridge.request<ActionResponse>({
      op: "init",
      delta,
      config,
    });
    solver.pendingAction = resp.action;
    return solver;
  }

  /** The action awaiting service, or null before init / after close. */
  get pending(): ActionDescriptor | null {
    return this.pendingAction;
  }

  /** Serve the pending action's demanded scalars; returns the next action. */
  async step(scalars: number[] = []): Promise<ActionDescriptor> {
    const pending = this.pendingAction;
    if (pending === null) {
      throw new BridgeError("no pending action; create a session first");
    }
    if (pending.kind === ActionKind.DONE) {
      throw new BridgeError(
        "solver is finished; use reenterRadius or a new session",
      );
    }
    if (scalars.length !== pending.expects.length) {
      throw new BridgeError(
        `action ${pending.name} expects [${pending.expects.join(", ")}], ` +
          `got ${scalars.length} value(s)`,
        pending.expects,
      );
    }
    const resp = await this.bridge.request<ActionResponse>({
      op: "step",
      scalars,
    });
    this.pendingAction = resp.action;
    return resp.action;
  }

  /** Hotstart after a radius change on a finished session. */
  async reenterRadius(delta: number): Promise<ActionDescriptor> {
    const resp = await this.bridge.request<ActionResponse>({
      op: "reenter",
      delta,
    });
    this.pendingAction = resp.action;
    return resp.action;
  }

  /** Open a new invariant subspace after Lanczos breakdown. */
  async newKrylov(): Promise<ActionDescriptor> {
    const resp = await this.bridge.request<ActionResponse>({
      op: "new_krylov",
    });
    this.pendingAction = resp.action;
    return resp.action;
  }

  /** Coefficient histories and tridiagonal data of the live session. */
  state(): Promise<SolverState> {
    return this.bridge.request<SolverState>({ op: "state" });
  }

  async close(): Promise<void> {
    this.pendingAction = null;
    if (this.ownsBridge) {
      await this.bridge.close();
    }
  }
}
