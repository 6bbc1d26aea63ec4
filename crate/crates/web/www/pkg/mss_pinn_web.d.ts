/* tslint:disable */
/* eslint-disable */

/**
 * Trajectory in column form for plotting.
 */
export class Curves {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    channel(c: number): Float64Array;
    names(): string[];
    times(): Float64Array;
}

/**
 * A training run advanced from JavaScript in small batches.
 */
export class Session {
    free(): void;
    [Symbol.dispose](): void;
    iteration(): number;
    constructor(model: string, pcgrad: boolean, points: number, seed: bigint);
    oracle(): Curves;
    prediction(): Curves;
    /**
     * Pooled RMSE of the current network against the oracle.
     */
    rmse(): number;
    /**
     * Runs `n` iterations; returns `[iteration, L_u, L_f, total, cos_uf]`
     * of the last one (`cos_uf` NaN when undefined).
     */
    step(n: number): Float64Array;
}

export function model_names(): string[];

/**
 * Gradient surgery on two 2-D task gradients. Returns
 * `[p1x, p1y, p2x, p2y, update_x, update_y, cos]`, with `cos` NaN for a zero vector.
 */
export function pcgrad_2d(g1x: number, g1y: number, g2x: number, g2y: number): Float64Array;

/**
 * RK4 solution of a catalog model on its preset range.
 */
export function solve(model: string): Curves;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curves_free: (a: number, b: number) => void;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly curves_channel: (a: number, b: number) => [number, number];
    readonly curves_names: (a: number) => [number, number];
    readonly curves_times: (a: number) => [number, number];
    readonly model_names: () => [number, number];
    readonly pcgrad_2d: (a: number, b: number, c: number, d: number) => [number, number];
    readonly session_iteration: (a: number) => number;
    readonly session_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly session_oracle: (a: number) => [number, number, number];
    readonly session_prediction: (a: number) => [number, number, number];
    readonly session_rmse: (a: number) => [number, number, number];
    readonly session_step: (a: number, b: number) => [number, number, number, number];
    readonly solve: (a: number, b: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
