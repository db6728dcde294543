/* tslint:disable */
/* eslint-disable */

/**
 * Fits the single-index model to `n` draws of arm 1 of a generated
 * environment (d = 4) and returns the fitted and true link.
 */
export function fit_link(seed: number, n: number, beta: number): string;

/**
 * Cumulative regret of the single-index policy and the binned comparator on
 * the same generated environment (d = 4, K = 3).
 */
export function simulate_regret(seed: number, n: number, beta: number): string;

/**
 * Smoothness estimate for a generated environment with true exponent `beta`.
 */
export function smoothness(seed: number, n: number, beta: number, beta_lo: number, beta_hi: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly fit_link: (a: number, b: number, c: number) => [number, number];
    readonly simulate_regret: (a: number, b: number, c: number) => [number, number];
    readonly smoothness: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
