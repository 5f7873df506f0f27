/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_trial_free: (a: number, b: number) => void;
export const __wbg_widthcurve_free: (a: number, b: number) => void;
export const pattern: (a: number, b: number, c: number) => [number, number, number, number];
export const sweepAngles: (a: number) => [number, number];
export const trainOnce: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const trial_amplitudes: (a: number) => [number, number];
export const trial_iterations: (a: number) => number;
export const trial_near: (a: number) => number;
export const trial_rHat: (a: number) => number;
export const trial_rate: (a: number) => number;
export const trial_rateIdeal: (a: number) => number;
export const trial_thetaHat: (a: number) => number;
export const widthCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const widthcurve_boundary: (a: number) => number;
export const widthcurve_closed: (a: number) => [number, number];
export const widthcurve_measured: (a: number) => [number, number];
export const widthcurve_ranges: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
