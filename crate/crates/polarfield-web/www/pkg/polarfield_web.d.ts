/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    clear(): void;
    glyphs(): Float64Array;
    constructor(rings: number, sectors: number);
    set_n(n: number): void;
    /**
     * Placed singularities as x, y, index triples.
     */
    singularities(): Float64Array;
    /**
     * Solves and returns a JSON summary.
     */
    solve(): string;
    streamlines(count: number): Float64Array;
    toggle(x: number, y: number, index: number): boolean;
    triangles(): Uint32Array;
    /**
     * Vertex positions as x, y pairs.
     */
    vertices(): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_clear: (a: number) => void;
    readonly demo_glyphs: (a: number) => [number, number];
    readonly demo_new: (a: number, b: number) => number;
    readonly demo_set_n: (a: number, b: number) => void;
    readonly demo_singularities: (a: number) => [number, number];
    readonly demo_solve: (a: number) => [number, number, number, number];
    readonly demo_streamlines: (a: number, b: number) => [number, number];
    readonly demo_toggle: (a: number, b: number, c: number, d: number) => number;
    readonly demo_triangles: (a: number) => [number, number];
    readonly demo_vertices: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
