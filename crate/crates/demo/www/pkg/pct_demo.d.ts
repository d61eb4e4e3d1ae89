/* tslint:disable */
/* eslint-disable */

/**
 * Flattened `(p, sampled, enumerated)` triples.
 */
export function channel_accuracy_curve(alphabet_size: number, points: number, episodes: number, seed: bigint): Float64Array;

export function default_landscape(): Float64Array;

/**
 * `[greedy length, greedy positions..., planned positions...]`.
 */
export function plan_vs_greedy(table: Float64Array, start: number): Float64Array;

/**
 * `[temperature..., output..., diverged]`.
 */
export function thermostat_loop(kp: number, ki: number, kd: number, reference: number, disturbance: number, ticks: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly channel_accuracy_curve: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly default_landscape: () => [number, number];
    readonly plan_vs_greedy: (a: number, b: number, c: number) => [number, number, number, number];
    readonly thermostat_loop: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
