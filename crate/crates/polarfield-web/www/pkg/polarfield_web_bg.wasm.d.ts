/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_clear: (a: number) => void;
export const demo_glyphs: (a: number) => [number, number];
export const demo_new: (a: number, b: number) => number;
export const demo_set_n: (a: number, b: number) => void;
export const demo_singularities: (a: number) => [number, number];
export const demo_solve: (a: number) => [number, number, number, number];
export const demo_streamlines: (a: number, b: number) => [number, number];
export const demo_toggle: (a: number, b: number, c: number, d: number) => number;
export const demo_triangles: (a: number) => [number, number];
export const demo_vertices: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
