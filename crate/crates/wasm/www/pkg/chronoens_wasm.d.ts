/* tslint:disable */
/* eslint-disable */

/**
 * Analytical AVAR of each clock and of their equal-weight mean on a
 * log-spaced grid of averaging times.
 */
export function avar_curves(sigma1_sq: Float64Array, sigma2_sq: Float64Array, tau_min: number, tau_max: number, points: number): string;

/**
 * Simulates a preset in one mode and returns MAC and mean-GAC phases
 * (every `stride` steps) plus the mean-over-MACs statistical AVAR at
 * power-of-two windows.
 */
export function simulate(preset_name: string, mode: string, seed: bigint, horizon: number, stride: number): string;

/**
 * Tracking objective over a `grid × grid` lattice of `(f_b1 τ s, f_b2)` in
 * `[0, 4] × [0, 2]`; points outside the stability triangle are `null`.
 */
export function tracking_heatmap(preset_name: string, grid: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly avar_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: bigint, f: number, g: number) => [number, number, number, number];
    readonly tracking_heatmap: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
