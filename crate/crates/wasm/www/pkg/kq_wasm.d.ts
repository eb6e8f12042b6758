/* tslint:disable */
/* eslint-disable */

/**
 * Certifies the explicit balanced metric over `CP¹(k)` and, for the ball
 * part, runs the CP¹ Gram oracle at the same `k` for comparison.
 */
export function balanced_check(k: number, r: number, m: number, total_space: boolean): string;

/**
 * `a1` and `a2` on `count` points of `[x_min, x_max]`, with the constancy
 * verdict and the branch that matched.
 */
export function coefficient_curve(family: string, a: number, lambda: number, d: number, d0: number, x_min: number, x_max: number, count: number): string;

/**
 * `ε` on `count` points of `[0, rho_max]`, with the closed target when the
 * setup lies on a branch.
 */
export function epsilon_curve(family: string, a: number, lambda: number, d: number, d0: number, alpha: number, rho_max: number, count: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly balanced_check: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly coefficient_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly epsilon_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
