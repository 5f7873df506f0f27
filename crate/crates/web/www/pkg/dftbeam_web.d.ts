/* tslint:disable */
/* eslint-disable */

export class Trial {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Received amplitude of each sweep codeword.
     */
    readonly amplitudes: Float64Array;
    readonly iterations: number;
    readonly near: boolean;
    readonly rHat: number;
    readonly rateIdeal: number;
    readonly rate: number;
    readonly thetaHat: number;
}

export class WidthCurve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Range beyond which the codebook sees the user as far field.
     */
    readonly boundary: number;
    readonly closed: Float64Array;
    readonly measured: Float64Array;
    readonly ranges: Float64Array;
}

/**
 * Normalized beam pattern of the far-field codebook for a user at (theta, range).
 */
export function pattern(n_elements: number, theta: number, range: number): Float64Array;

/**
 * Codeword angles of an `n_elements` sweep.
 */
export function sweepAngles(n_elements: number): Float64Array;

export function trainOnce(n_elements: number, theta: number, range: number, snr_db: number, seed: number): Trial;

export function widthCurve(n_elements: number, theta: number, from: number, to: number, points: number): WidthCurve;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trial_free: (a: number, b: number) => void;
    readonly __wbg_widthcurve_free: (a: number, b: number) => void;
    readonly pattern: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sweepAngles: (a: number) => [number, number];
    readonly trainOnce: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly trial_amplitudes: (a: number) => [number, number];
    readonly trial_iterations: (a: number) => number;
    readonly trial_near: (a: number) => number;
    readonly trial_rHat: (a: number) => number;
    readonly trial_rate: (a: number) => number;
    readonly trial_rateIdeal: (a: number) => number;
    readonly trial_thetaHat: (a: number) => number;
    readonly widthCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly widthcurve_boundary: (a: number) => number;
    readonly widthcurve_closed: (a: number) => [number, number];
    readonly widthcurve_measured: (a: number) => [number, number];
    readonly widthcurve_ranges: (a: number) => [number, number];
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
