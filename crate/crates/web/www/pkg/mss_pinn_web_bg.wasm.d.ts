/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curves_free: (a: number, b: number) => void;
export const __wbg_session_free: (a: number, b: number) => void;
export const curves_channel: (a: number, b: number) => [number, number];
export const curves_names: (a: number) => [number, number];
export const curves_times: (a: number) => [number, number];
export const model_names: () => [number, number];
export const pcgrad_2d: (a: number, b: number, c: number, d: number) => [number, number];
export const session_iteration: (a: number) => number;
export const session_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const session_oracle: (a: number) => [number, number, number];
export const session_prediction: (a: number) => [number, number, number];
export const session_rmse: (a: number) => [number, number, number];
export const session_step: (a: number, b: number) => [number, number, number, number];
export const solve: (a: number, b: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
