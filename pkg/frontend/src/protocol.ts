/**
 * Wire protocol against the pruning engine: the JSONL trace format going in,
 * the JSONL masks file and CSV stats coming back, and the CLI invocation
 * between them. JavaScript and the engine both print shortest round-trip
 * decimals, so float64 values cross the boundary losslessly.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

import { EngineError } from "./errors.js";

export const TRACE_FORMAT = "trimask-trace/1";
export const MASKS_FORMAT = "trimask-masks/1";

export interface Shape {
  numPatches: number;
  featDim: number;
  attnDim: number;
}

export interface StepBuffers {
  f2d: Float64Array;
  f3d: Float64Array;
  a2d: Float64Array;
  a3d: Float64Array;
}

export interface StepStats {
  t: number;
  pr2d: number;
  pr3d: number;
  retained: number;
  conflicts: number;
  n_obj: number;
  n_rob: number;
  n_bg: number;
}

export interface MaskRecord {
  t: number;
  mask2d: Uint8Array;
  mask3d: Uint8Array;
  pr2d: number;
  pr3d: number;
  conflicts: number;
}

function row(buffer: Float64Array, width: number, index: number): number[] {
  return Array.from(buffer.subarray(index * width, (index + 1) * width));
}

/** One trace step line from row-major per-stream buffers. */
export function stepLine(t: number, shape: Shape, buffers: StepBuffers): string {
  const patches = [];
  for (let p = 0; p < shape.numPatches; p++) {
    patches.push({
      id: p,
      f2d: row(buffers.f2d, shape.featDim, p),
      f3d: row(buffers.f3d, shape.featDim, p),
      a2d: row(buffers.a2d, shape.attnDim, p),
      a3d: row(buffers.a3d, shape.attnDim, p),
    });
  }
  return JSON.stringify({ t, patches });
}

export function headerLine(episodeId: string, shape: Shape): string {
  return JSON.stringify({
    format: TRACE_FORMAT,
    episode_id: episodeId,
    num_patches: shape.numPatches,
    feat_dim: shape.featDim,
    attn_dim: shape.attnDim,
  });
}

export function writeTrace(tracePath: string, header: string, stepLines: string[]): void {
  fs.writeFileSync(tracePath, [header, ...stepLines].join("\n") + "\n", "utf-8");
}

/** Run one engine subcommand; throws EngineError on a nonzero exit. */
export function runEngine(cli: string[], args: string[]): void {
  const [command, ...prefix] = cli;
  if (command === undefined) {
    throw new EngineError("empty engine command");
  }
  const proc = spawnSync(command, [...prefix, ...args], { encoding: "utf-8" });
  if (proc.error) {
    throw new EngineError(`cannot spawn engine '${command}': ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    throw new EngineError(
      `engine exited with ${proc.status}: ${(proc.stderr || proc.stdout || "").trim()}`
    );
  }
}

export function readMasks(masksPath: string): MaskRecord[] {
  const lines = fs
    .readFileSync(masksPath, "utf-8")
    .split("\n")
    .filter((ln) => ln.trim().length > 0);
  if (lines.length === 0) {
    throw new EngineError(`empty masks file: ${masksPath}`);
  }
  const header = JSON.parse(lines[0]!);
  if (header.format !== MASKS_FORMAT) {
    throw new EngineError(`unsupported masks format: ${header.format}`);
  }
  return lines.slice(1).map((line) => {
    const record = JSON.parse(line);
    return {
      t: record.t as number,
      mask2d: Uint8Array.from(record.mask2d as number[]),
      mask3d: Uint8Array.from(record.mask3d as number[]),
      pr2d: record.pr2d as number,
      pr3d: record.pr3d as number,
      conflicts: record.conflicts as number,
    };
  });
}

/** Parse the engine's per-step stats CSV (header row first). */
export function readStatsCsv(csvPath: string): StepStats[] {
  const lines = fs
    .readFileSync(csvPath, "utf-8")
    .split("\n")
    .filter((ln) => ln.trim().length > 0);
  const header = (lines[0] ?? "").split(",");
  const col = (name: string) => {
    const i = header.indexOf(name);
    if (i < 0) throw new EngineError(`stats CSV is missing column ${name}`);
    return i;
  };
  const idx = {
    t: col("t"),
    pr2d: col("pr2d"),
    pr3d: col("pr3d"),
    retained: col("retained"),
    conflicts: col("conflicts"),
    n_obj: col("n_obj"),
    n_rob: col("n_rob"),
    n_bg: col("n_bg"),
  };
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    const num = (i: number) => Number(cells[i]);
    return {
      t: num(idx.t),
      pr2d: num(idx.pr2d),
      pr3d: num(idx.pr3d),
      retained: num(idx.retained),
      conflicts: num(idx.conflicts),
      n_obj: num(idx.n_obj),
      n_rob: num(idx.n_rob),
      n_bg: num(idx.n_bg),
    };
  });
}

/** Parse a trace file back into per-step row-major buffers (test utility). */
export function readTrace(tracePath: string): { shape: Shape; steps: StepBuffers[] } {
  const lines = fs
    .readFileSync(tracePath, "utf-8")
    .split("\n")
    .filter((ln) => ln.trim().length > 0);
  const header = JSON.parse(lines[0]!);
  const shape: Shape = {
    numPatches: header.num_patches,
    featDim: header.feat_dim,
    attnDim: header.attn_dim,
  };
  const steps = lines.slice(1).map((line) => {
    const record = JSON.parse(line);
    const f2d = new Float64Array(shape.numPatches * shape.featDim);
    const f3d = new Float64Array(shape.numPatches * shape.featDim);
    const a2d = new Float64Array(shape.numPatches * shape.attnDim);
    const a3d = new Float64Array(shape.numPatches * shape.attnDim);
    for (const patch of record.patches) {
      f2d.set(patch.f2d, patch.id * shape.featDim);
      f3d.set(patch.f3d, patch.id * shape.featDim);
      a2d.set(patch.a2d, patch.id * shape.attnDim);
      a3d.set(patch.a3d, patch.id * shape.attnDim);
    }
    return { f2d, f3d, a2d, a3d };
  });
  return { shape, steps };
}

export function enginePath(outDir: string, name: string): string {
  return path.join(outDir, name);
}
