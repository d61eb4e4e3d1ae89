/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const channel_accuracy_curve: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const default_landscape: () => [number, number];
export const plan_vs_greedy: (a: number, b: number, c: number) => [number, number, number, number];
export const thermostat_loop: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
