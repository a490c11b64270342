/**
 * Typed-array bindings for the foveakit transform core.
 *
 * Points are flat row-major Float64Arrays of shape N x 2, boxes N x 4 in
 * [cx, cy, w, h] normalized form.  Outputs are bit-identical to calling
 * the core directly: the bindings add no arithmetic of their own, only
 * full-precision transport.  All functions are synchronous and pure; the
 * core process they drive is stateless.
 */

import { readFileSync, writeFileSync } from "node:fs";

import {
    flatFromRows,
    rowsFromFlat,
    runPoints,
    validateParams,
} from "./engine.js";
import {
    BatchInverseResult,
    BoxInverseResult,
    FoveationParams,
    InverseOptions,
    ShapeError,
} from "./types.js";

export * from "./types.js";
export { corePython } from "./engine.js";

type FloatInput = Float64Array | Float32Array;

function asFlat64(data: FloatInput, stride: number, what: string): Float64Array {
    let flat: Float64Array;
    if (data instanceof Float64Array) {
        flat = data;
    } else if (data instanceof Float32Array) {
        // the core solves to tolerances single precision cannot express
        console.warn(`foveakit-bindings: up-casting ${what} from float32 to float64`);
        flat = Float64Array.from(data);
    } else {
        throw new ShapeError(`${what} must be a Float64Array or Float32Array`);
    }
    if (flat.length % stride !== 0) {
        throw new ShapeError(
            `${what} length ${flat.length} is not a multiple of ${stride}`);
    }
    return flat;
}

function inverseArgs(options: InverseOptions): string[] {
    const method = options.method ?? "newton";
    if (method !== "newton" && method !== "fixed_point") {
        throw new ShapeError(`unknown method ${String(method)}`);
    }
    const args = ["--inverse", "--method", method];
    if (options.tol !== undefined) args.push("--tol", String(options.tol));
    if (options.maxIter !== undefined) {
        args.push("--max-iter", String(options.maxIter));
    }
    if (options.eta !== undefined) args.push("--eta", String(options.eta));
    return args;
}

/** Apply the transform to N x 2 points. */
export function batchForward(
    points: FloatInput,
    params: FoveationParams,
): Float64Array {
    const flat = asFlat64(points, 2, "points");
    if (flat.length === 0) return new Float64Array(0);
    const out = runPoints({ points: rowsFromFlat(flat, 2) }, params, []);
    return flatFromRows(out.points ?? [], 2, "point");
}

/** Invert the transform for N x 2 target points. */
export function batchInverse(
    points: FloatInput,
    params: FoveationParams,
    options: InverseOptions = {},
): BatchInverseResult {
    const flat = asFlat64(points, 2, "points");
    if (flat.length === 0) {
        return { points: new Float64Array(0), iterations: new Int32Array(0), converged: [] };
    }
    const out = runPoints({ points: rowsFromFlat(flat, 2) }, params,
        inverseArgs(options));
    return {
        points: flatFromRows(out.points ?? [], 2, "point"),
        iterations: Int32Array.from(out.iterations ?? []),
        converged: (out.converged ?? []).map(Boolean),
    };
}

/** Project N x 4 boxes [cx, cy, w, h] into the transformed space. */
export function boxesToRiemannian(
    boxes: FloatInput,
    params: FoveationParams,
): Float64Array {
    const flat = asFlat64(boxes, 4, "boxes");
    if (flat.length === 0) return new Float64Array(0);
    const out = runPoints({ boxes: rowsFromFlat(flat, 4) }, params, []);
    return flatFromRows(out.boxes ?? [], 4, "box");
}

/** Recover Euclidean boxes from their projected form. */
export function boxesToEuclidean(
    boxes: FloatInput,
    params: FoveationParams,
    options: InverseOptions = {},
): BoxInverseResult {
    const flat = asFlat64(boxes, 4, "boxes");
    if (flat.length === 0) {
        return { boxes: new Float64Array(0), iterations: new Int32Array(0), converged: [] };
    }
    const out = runPoints({ boxes: rowsFromFlat(flat, 4) }, params,
        inverseArgs(options));
    return {
        boxes: flatFromRows(out.boxes ?? [], 4, "box"),
        iterations: Int32Array.from(out.iterations ?? []),
        converged: (out.converged ?? []).map(Boolean),
    };
}

/** Read transform parameters from their JSON file form. */
export function loadParams(path: string): FoveationParams {
    const obj = JSON.parse(readFileSync(path, "utf8"));
    const params: FoveationParams = {
        ox: obj.ox, oy: obj.oy, R: obj.R, alpha: obj.alpha, p: obj.p,
    };
    validateParams(params);
    return params;
}

/** Write transform parameters in their JSON file form (full precision). */
export function saveParams(params: FoveationParams, path: string): void {
    validateParams(params);
    const { ox, oy, R, alpha, p } = params;
    writeFileSync(path, JSON.stringify({ ox, oy, R, alpha, p }));
}

/** Convenience: [[x, y], ...] to the flat form the API takes. */
export function fromPairs(pairs: readonly (readonly number[])[]): Float64Array {
    const out = new Float64Array(pairs.length * (pairs[0]?.length ?? 2));
    const stride = pairs[0]?.length ?? 2;
    pairs.forEach((row, i) => {
        if (row.length !== stride) {
            throw new ShapeError("ragged rows in fromPairs input");
        }
        row.forEach((v, j) => { out[i * stride + j] = v; });
    });
    return out;
}

/** Convenience: flat array back to row tuples. */
export function toPairs(flat: Float64Array, stride = 2): number[][] {
    const rows: number[][] = [];
    for (let i = 0; i < flat.length; i += stride) {
        rows.push(Array.from(flat.subarray(i, i + stride)));
    }
    return rows;
}
