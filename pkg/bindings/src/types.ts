/** Transform parameters, mirroring the core JSON schema. */
export interface FoveationParams {
    /** Transform origin, each coordinate in [-1, 1]. */
    ox: number;
    oy: number;
    /** Blend radius; 0 disables the transform entirely. */
    R: number;
    /** Contraction strength, > 0. */
    alpha: number;
    /** Blend exponent, > 0. */
    p: number;
}

/** Per-row outcome of a batch inverse solve. */
export interface BatchInverseResult {
    /** Flat row-major N x 2 solutions; non-finite rows stay NaN. */
    points: Float64Array;
    /** Update steps taken per row (0 for rows skipped as non-finite). */
    iterations: Int32Array;
    /** Whether each row reached the requested tolerance. */
    converged: boolean[];
}

/** Outcome of recovering Euclidean boxes from their projected form. */
export interface BoxInverseResult {
    /** Flat row-major N x 4 boxes [cx, cy, w, h]. */
    boxes: Float64Array;
    iterations: Int32Array;
    converged: boolean[];
}

export interface InverseOptions {
    /** Residual tolerance, > 0. Default 1e-8. */
    tol?: number;
    /** Iteration cap. Defaults: 25 (newton), 200 (fixed_point). */
    maxIter?: number;
    /** Step size for the damped residual update, in (0, 1]. Default 1. */
    eta?: number;
    /** "newton" (quadratic) or "fixed_point" (the damped residual form). */
    method?: "newton" | "fixed_point";
}

/** An array argument had the wrong length, parity, or dtype. */
export class ShapeError extends Error {
    override name = "ShapeError";
}

/** Transform parameters violate their invariants. */
export class ParamError extends Error {
    override name = "ParamError";
}

/** The core process failed or returned something unreadable. */
export class EngineError extends Error {
    override name = "EngineError";
}
