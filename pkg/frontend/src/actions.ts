/** Reverse-communication instruction tags, stable across versions. */
export const ActionKind = {
  INIT_PRECOND: 1,
  HESS_PROD: 2,
  CG_UPDATE: 3,
  CG_DIR: 4,
  LANCZOS_GRAD: 5,
  RETRANSFORM: 6,
  NEW_KRYLOV: 7,
  OBJ_VALUE: 8,
  DONE: 9,
} as const;

export type ActionKindName = keyof typeof ActionKind;
export type ActionKindTag = (typeof ActionKind)[ActionKindName];

/** One instruction from the core, with its scalar payload. */
export interface ActionDescriptor {
  kind: ActionKindTag;
  name: ActionKindName;
  /** Names of the scalars the next step() call must return, in order. */
  expects: string[];
  alpha?: number;
  beta?: number;
  a?: number;
  b?: number;
  p_scale?: number;
  store?: number;
  /** Retransform coefficients over the stored basis. */
  h?: number[];
  outcome?: string;
  lam?: number;
  obj?: number;
  status?: string;
  iterations?: number;
}

/** Termination tolerances of the Krylov loop (all optional). */
export interface TerminationOptions {
  tol_abs_i?: number;
  tol_rel_i?: number;
  tol_abs_b?: number;
  tol_rel_b?: number;
  tol_curvature?: number;
  max_iter?: number;
}
