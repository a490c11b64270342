/**
 * Process-boundary plumbing.
 *
 * The core ships a `points` subcommand that reads one JSON document on
 * stdin and writes one on stdout.  JavaScript numbers and the core's
 * float64 values both serialize as shortest-round-trip decimal, so values
 * cross the boundary bit-exactly; JSON has no NaN, so non-finite slots
 * travel as null in either direction.
 */

import { spawnSync } from "node:child_process";

import { EngineError, FoveationParams, ParamError } from "./types.js";

/** Interpreter used to run the core; override via FOVEAKIT_PYTHON. */
export function corePython(): string {
    return process.env.FOVEAKIT_PYTHON ?? "python3";
}

export function validateParams(params: FoveationParams): void {
    const { ox, oy, R, alpha, p } = params;
    for (const [key, v] of Object.entries({ ox, oy, R, alpha, p })) {
        if (typeof v !== "number" || !Number.isFinite(v)) {
            throw new ParamError(`non-finite parameter ${key}=${v}`);
        }
    }
    if (alpha <= 0) throw new ParamError(`alpha must be > 0, got ${alpha}`);
    if (p <= 0) throw new ParamError(`blend exponent must be > 0, got ${p}`);
    if (R < 0) throw new ParamError(`radius must be >= 0, got ${R}`);
    if (Math.abs(ox) > 1 || Math.abs(oy) > 1) {
        throw new ParamError(`origin (${ox}, ${oy}) outside [-1, 1]^2`);
    }
}

function paramFlags(params: FoveationParams): string[] {
    return [
        "--alpha", String(params.alpha),
        "--p", String(params.p),
        "--R", String(params.R),
        "--origin", `${params.ox},${params.oy}`,
    ];
}

export type PointsPayload = {
    points?: (number | null)[][];
    boxes?: (number | null)[][];
    iterations?: number[];
    converged?: boolean[];
};

/** One batched core invocation: payload in on stdin, payload out on stdout. */
export function runPoints(
    payload: PointsPayload,
    params: FoveationParams,
    extraArgs: string[],
): PointsPayload {
    validateParams(params);
    const args = [
        "-m", "foveakit", "points", "--input", "-", "--output", "-",
        ...paramFlags(params), ...extraArgs,
    ];
    const proc = spawnSync(corePython(), args, {
        input: JSON.stringify(payload),
        encoding: "utf8",
        maxBuffer: 1 << 28,
    });
    if (proc.error) {
        throw new EngineError(`failed to launch core: ${proc.error.message}`);
    }
    if (proc.status !== 0) {
        const detail = (proc.stderr ?? "").trim() || `exit code ${proc.status}`;
        throw new EngineError(detail);
    }
    try {
        return JSON.parse(proc.stdout) as PointsPayload;
    } catch {
        throw new EngineError(`unreadable core output: ${proc.stdout.slice(0, 200)}`);
    }
}

/** Flat Float64Array -> [[x, y], ...] rows with nulls for non-finite. */
export function rowsFromFlat(
    flat: Float64Array,
    stride: number,
): (number | null)[][] {
    const rows: (number | null)[][] = [];
    for (let i = 0; i < flat.length; i += stride) {
        const row: (number | null)[] = [];
        for (let j = 0; j < stride; j++) {
            const v = flat[i + j];
            row.push(Number.isFinite(v) ? v : null);
        }
        rows.push(row);
    }
    return rows;
}

/** Row-wise JSON payload -> flat Float64Array, null -> NaN. */
export function flatFromRows(
    rows: (number | null)[][],
    stride: number,
    what: string,
): Float64Array {
    const out = new Float64Array(rows.length * stride);
    rows.forEach((row, i) => {
        if (row.length !== stride) {
            throw new EngineError(`core returned a ${what} row of length ${row.length}`);
        }
        row.forEach((v, j) => {
            out[i * stride + j] = v === null ? Number.NaN : v;
        });
    });
    return out;
}
