/**
 * Buffer-level bindings over the trimask pruning engine.
 *
 * A handle owns a pruner configuration and the episode history so far.
 * Each step() call takes the current observation as flat row-major
 * Float64Array buffers (one row per patch), runs the engine over the
 * accumulated episode through its trace/masks file formats, and returns the
 * step's retention masks plus its stats record. Replaying the prefix is
 * exact by the engine's contract: smoothing state depends only on past
 * steps and background draws are keyed by (seed, step, patch), so the masks
 * are bit-identical to a one-shot run over the full trace.
 *
 * A handle is not shareable across concurrent callers; serialize step()
 * calls per handle. Distinct handles are fully independent.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { ClosedHandle, ConfigError, ShapeMismatch } from "./errors.js";
import {
  Shape,
  StepBuffers,
  StepStats,
  headerLine,
  readMasks,
  readStatsCsv,
  runEngine,
  stepLine,
  writeTrace,
} from "./protocol.js";

export { ClosedHandle, ConfigError, EngineError, ShapeMismatch } from "./errors.js";
export type { Shape, StepStats } from "./protocol.js";

const VERSION = "0.1.0";

/** Engine run configuration; field names and defaults match the CLI. */
export interface PrunerConfig {
  tau2d?: number;
  tau3d?: number;
  beta?: number;
  k?: number;
  theta_2dext?: number;
  eps_3d?: number;
  bg_keep_prob?: number;
  budget?: number | null;
  seed?: number;
  smoothing?: boolean;
  c_fix?: number;
  c_lin?: number;
  c_attn?: number;
  c_method?: number;
}

export interface StepResult {
  mask2d: Uint8Array;
  mask3d: Uint8Array;
  /** Serialized StepStats record for the step. */
  stats: string;
}

interface HandleState {
  config: PrunerConfig;
  configPath: string;
  workDir: string;
  cli: string[];
  episodeId: string;
  shape: Shape | null;
  stepLines: string[];
  t: number;
  closed: boolean;
}

export interface PrunerHandle {
  /** Opaque; use step()/close(). */
  readonly __state: HandleState;
}

const CONFIG_FIELDS = new Set([
  "tau2d",
  "tau3d",
  "beta",
  "k",
  "theta_2dext",
  "eps_3d",
  "bg_keep_prob",
  "budget",
  "seed",
  "smoothing",
  "c_fix",
  "c_lin",
  "c_attn",
  "c_method",
]);

function validateConfig(config: PrunerConfig): void {
  for (const key of Object.keys(config)) {
    if (!CONFIG_FIELDS.has(key)) {
      throw new ConfigError(`unknown config field: ${key}`);
    }
  }
  const tau2d = config.tau2d ?? 0.08;
  const tau3d = config.tau3d ?? 0.2;
  if (!(tau2d > 0 && tau2d < 1)) throw new ConfigError(`tau2d must lie in (0,1), got ${tau2d}`);
  if (!(tau3d > 0 && tau3d < 1)) throw new ConfigError(`tau3d must lie in (0,1), got ${tau3d}`);
  if (!(tau2d < tau3d)) {
    throw new ConfigError(`tau2d must be strictly below tau3d, got ${tau2d} >= ${tau3d}`);
  }
  const beta = config.beta ?? 0.85;
  if (!(beta > 0 && beta < 1)) throw new ConfigError(`beta must lie strictly inside (0,1), got ${beta}`);
  const k = config.k ?? 7;
  if (!(Number.isInteger(k) && k >= 2)) throw new ConfigError(`k must be an integer >= 2, got ${k}`);
  const bg = config.bg_keep_prob ?? 0.1;
  if (!(bg >= 0 && bg <= 1)) throw new ConfigError(`bg_keep_prob must lie in [0,1], got ${bg}`);
  if (config.budget != null && !(config.budget >= 0 && config.budget < 1)) {
    throw new ConfigError(`budget must lie in [0,1), got ${config.budget}`);
  }
  if (config.seed != null && !(Number.isInteger(config.seed) && config.seed >= 0)) {
    throw new ConfigError(`seed must be a nonnegative integer, got ${config.seed}`);
  }
  for (const name of ["c_fix", "c_lin", "c_attn", "c_method"] as const) {
    const value = config[name];
    if (value != null && !(Number.isFinite(value) && value >= 0)) {
      throw new ConfigError(`${name} must be finite and >= 0, got ${value}`);
    }
  }
}

function engineCommand(): string[] {
  const override = process.env.TRIMASK_CLI;
  if (override && override.trim().length > 0) {
    return override.trim().split(/\s+/);
  }
  return ["trimask"];
}

/**
 * Create a pruner from a configuration (object or serialized JSON).
 * The state starts at step 0; the first step() call is the cold start.
 */
export function create(config: PrunerConfig | string = {}): PrunerHandle {
  let parsed: PrunerConfig;
  if (typeof config === "string") {
    try {
      parsed = JSON.parse(config);
    } catch (err) {
      throw new ConfigError(`config is not valid JSON: ${(err as Error).message}`);
    }
  } else {
    parsed = { ...config };
  }
  validateConfig(parsed);
  if (parsed.seed == null) {
    parsed.seed = 0; // pin the seed so prefix replays are reproducible
  }
  const workDir = fs.mkdtempSync(path.join(os.tmpdir(), "trimask-bindings-"));
  const configPath = path.join(workDir, "config.json");
  fs.writeFileSync(configPath, JSON.stringify(parsed) + "\n", "utf-8");
  const state: HandleState = {
    config: parsed,
    configPath,
    workDir,
    cli: engineCommand(),
    episodeId: "bindings",
    shape: null,
    stepLines: [],
    t: 0,
    closed: false,
  };
  return { __state: state };
}

function checkBuffer(name: string, buffer: Float64Array, expected: number): void {
  if (!(buffer instanceof Float64Array)) {
    throw new ShapeMismatch(`${name} must be a Float64Array`);
  }
  if (buffer.length !== expected) {
    throw new ShapeMismatch(`${name} has length ${buffer.length}, expected ${expected}`);
  }
  for (let i = 0; i < buffer.length; i++) {
    if (!Number.isFinite(buffer[i]!)) {
      throw new ShapeMismatch(`${name} contains a non-finite entry at index ${i}`);
    }
  }
}

/**
 * Feed one observation; returns the step's retention masks and stats.
 *
 * Buffers are row-major with one row per patch: f2d/f3d are P x featDim,
 * a2d/a3d are P x attnDim. The shape argument is required on the first call
 * and optional (but checked) afterwards.
 */
export function step(
  handle: PrunerHandle,
  f2d: Float64Array,
  f3d: Float64Array,
  a2d: Float64Array,
  a3d: Float64Array,
  shape?: Shape
): StepResult {
  const state = handle.__state;
  if (state.closed) {
    throw new ClosedHandle("step() on a closed handle");
  }
  if (state.shape === null) {
    if (!shape) {
      throw new ShapeMismatch("the first step() call must carry an explicit shape");
    }
    const { numPatches, featDim, attnDim } = shape;
    for (const [name, value] of Object.entries({ numPatches, featDim, attnDim })) {
      if (!(Number.isInteger(value) && value >= 1)) {
        throw new ShapeMismatch(`${name} must be a positive integer, got ${value}`);
      }
    }
    state.shape = { numPatches, featDim, attnDim };
  } else if (shape) {
    const fixed = state.shape;
    if (
      shape.numPatches !== fixed.numPatches ||
      shape.featDim !== fixed.featDim ||
      shape.attnDim !== fixed.attnDim
    ) {
      throw new ShapeMismatch(
        `shape ${JSON.stringify(shape)} differs from the handle's fixed shape ${JSON.stringify(fixed)}`
      );
    }
  }
  const fixed = state.shape;
  checkBuffer("f2d", f2d, fixed.numPatches * fixed.featDim);
  checkBuffer("f3d", f3d, fixed.numPatches * fixed.featDim);
  checkBuffer("a2d", a2d, fixed.numPatches * fixed.attnDim);
  checkBuffer("a3d", a3d, fixed.numPatches * fixed.attnDim);

  const t = state.t + 1;
  state.stepLines.push(stepLine(t, fixed, { f2d, f3d, a2d, a3d }));

  const tracePath = path.join(state.workDir, "trace.jsonl");
  const outDir = path.join(state.workDir, "out");
  writeTrace(tracePath, headerLine(state.episodeId, fixed), state.stepLines);
  try {
    runEngine(state.cli, [
      "run",
      tracePath,
      "--out-dir",
      outDir,
      "--config",
      state.configPath,
    ]);
  } catch (err) {
    state.stepLines.pop(); // keep the handle consistent with the engine state
    throw err;
  }
  state.t = t;

  const masks = readMasks(path.join(outDir, "masks.jsonl"));
  const stats = readStatsCsv(path.join(outDir, "stats.csv"));
  const mask = masks[masks.length - 1];
  const stat = stats[stats.length - 1];
  if (!mask || !stat || mask.t !== t || stat.t !== t) {
    throw new ShapeMismatch(`engine returned ${masks.length} steps, expected step ${t}`);
  }
  return {
    mask2d: mask.mask2d,
    mask3d: mask.mask3d,
    stats: JSON.stringify(stat),
  };
}

/** Release the handle's working directory; further calls error. */
export function close(handle: PrunerHandle): void {
  const state = handle.__state;
  if (state.closed) {
    return;
  }
  state.closed = true;
  fs.rmSync(state.workDir, { recursive: true, force: true });
}

/** Bindings version string. */
export function version(): string {
  return VERSION;
}
