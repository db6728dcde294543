/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const fit_link: (a: number, b: number, c: number) => [number, number];
export const simulate_regret: (a: number, b: number, c: number) => [number, number];
export const smoothness: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
