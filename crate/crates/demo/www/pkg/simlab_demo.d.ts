/* tslint:disable */
/* eslint-disable */

export function beam_scan(m: number, theta_deg: number, kappa: number, tone_snr_db: number, seed: bigint): Float64Array;

export function grid_angles(m: number): Float64Array;

/**
 * Empirical and closed-form estimation MSE against `M P`, as CSV.
 */
export function mse_curve(pilot_snr_db: number, users: number, trials: number, seed: bigint): string;

/**
 * Hybrid vs fully digital rate against SNR, as CSV.
 */
export function rate_curves(m: number, users: number, kappa: number, trials: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly beam_scan: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly grid_angles: (a: number) => [number, number, number, number];
    readonly mse_curve: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly rate_curves: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
