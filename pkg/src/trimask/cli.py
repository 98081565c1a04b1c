"""Command-line front end: run, simulate, sweep, maskgrid, stats.

All outputs are pure functions of (inputs, config, seed); reruns are
byte-identical. Typed engine errors exit 1 with a diagnostic; bad flags or
malformed grids exit 2. The CLI emits CSV/JSON/JSONL only, never images.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig
from .cost import predict_speedup
from .errors import NonSquarePatchCount, TrimaskError
from .pipeline import load_masks, mask_flip_rate, prune_episode, save_masks
from .simulate import ScenarioSpec, default_spec, drifting_spec, generate_episode
from .trace import load_trace, save_trace

STATS_COLUMNS = ("t", "pr2d", "pr3d", "retained", "conflicts", "n_obj", "n_rob", "n_bg")
SWEEP_COLUMNS = (
    "param",
    "value",
    "mean_pr2d",
    "mean_pr3d",
    "overall_pr",
    "predicted_speedup",
    "mask_flip_rate",
)

SWEEPABLE = {
    "tau2d": float,
    "tau3d": float,
    "beta": float,
    "k": int,
    "theta_2dext": float,
    "eps_3d": float,
    "bg_keep_prob": float,
    "budget": float,
    "c_fix": float,
    "c_lin": float,
    "c_attn": float,
    "c_method": float,
}

_PRESETS = {"default": default_spec, "drifting": drifting_spec}


def _config_from_args(args) -> RunConfig:
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        name: getattr(args, name)
        for name in (
            "tau2d",
            "tau3d",
            "beta",
            "k",
            "theta_2dext",
            "eps_3d",
            "bg_keep_prob",
            "budget",
            "seed",
            "c_fix",
            "c_lin",
            "c_attn",
            "c_method",
        )
        if hasattr(args, name)
    }
    if getattr(args, "no_smoothing", False):
        overrides["smoothing"] = False
    return base.with_overrides(**overrides)


def _episode_summary(episode_id: str, num_patches: int, results, config: RunConfig) -> dict:
    masks = [mask for mask, _ in results]
    stats = [s for _, s in results]
    steps = len(results)
    total_tokens = steps * 2 * num_patches
    retained = sum(m.retained_total for m in masks)
    return {
        "episode_id": episode_id,
        "num_patches": num_patches,
        "steps": steps,
        "mean_pr2d": float(np.mean([s.pr2d for s in stats])) if stats else 0.0,
        "mean_pr3d": float(np.mean([s.pr3d for s in stats])) if stats else 0.0,
        "overall_pr": 1.0 - retained / total_tokens if total_tokens else 0.0,
        "total_conflicts": sum(s.conflicts_resolved for s in stats),
        "mask_flip_rate": mask_flip_rate(masks),
        "predicted_speedup": predict_speedup(masks, config.cost_model(), 2 * num_patches),
    }


def _write_stats_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(STATS_COLUMNS)
        for _, s in results:
            writer.writerow(
                [
                    s.step_index,
                    repr(s.pr2d),
                    repr(s.pr3d),
                    s.retained_total,
                    s.conflicts_resolved,
                    s.n_obj,
                    s.n_rob,
                    s.n_bg,
                ]
            )


def cmd_run(args) -> int:
    config = _config_from_args(args)
    trace = load_trace(args.trace)
    results = prune_episode(trace, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_masks(trace.episode_id, trace.num_patches, results, out_dir / "masks.jsonl")
    _write_stats_csv(results, out_dir / "stats.csv")
    summary = _episode_summary(trace.episode_id, trace.num_patches, results, config)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary))
    return 0


def cmd_simulate(args) -> int:
    if args.spec:
        spec = ScenarioSpec.from_file(args.spec)
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
    else:
        spec = _PRESETS[args.preset](seed=args.seed if args.seed is not None else 0)
    if args.steps is not None:
        spec = dataclasses.replace(spec, num_steps=args.steps)
    if args.patches is not None:
        spec = dataclasses.replace(spec, num_patches=args.patches)
    trace, truth = generate_episode(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_trace(trace, out_dir / "trace.jsonl")
    truth.save(out_dir / "ground_truth.json")
    (out_dir / "scenario.json").write_text(
        json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {trace.num_steps}-step trace with {trace.num_patches} patches to {out_dir}")
    return 0


def _sweep_point(payload):
    trace_path, config_dict, param, value = payload
    config = RunConfig.from_dict(config_dict).with_overrides(**{param: value})
    trace = load_trace(trace_path)
    results = prune_episode(trace, config)
    summary = _episode_summary(trace.episode_id, trace.num_patches, results, config)
    return {
        "param": param,
        "value": value,
        "mean_pr2d": summary["mean_pr2d"],
        "mean_pr3d": summary["mean_pr3d"],
        "overall_pr": summary["overall_pr"],
        "predicted_speedup": summary["predicted_speedup"],
        "mask_flip_rate": summary["mask_flip_rate"],
    }


def cmd_sweep(args) -> int:
    try:
        grid = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read grid spec: {exc}", file=sys.stderr)
        return 2
    param = grid.get("param")
    values = grid.get("values")
    if param not in SWEEPABLE:
        print(f"error: grid param must be one of {sorted(SWEEPABLE)}, got {param!r}", file=sys.stderr)
        return 2
    if not isinstance(values, list) or not values:
        print("error: grid values must be a nonempty list", file=sys.stderr)
        return 2
    caster = SWEEPABLE[param]
    try:
        values = [caster(v) for v in values]
    except (TypeError, ValueError) as exc:
        print(f"error: grid values for {param}: {exc}", file=sys.stderr)
        return 2

    config = _config_from_args(args)
    payloads = [(args.trace, config.to_dict(), param, v) for v in values]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, payloads))
    else:
        rows = [_sweep_point(p) for p in payloads]

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "sweep.csv"
    with open(out_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["param"],
                    repr(row["value"]) if isinstance(row["value"], float) else row["value"],
                    repr(row["mean_pr2d"]),
                    repr(row["mean_pr3d"]),
                    repr(row["overall_pr"]),
                    repr(row["predicted_speedup"]),
                    repr(row["mask_flip_rate"]),
                ]
            )
    print(f"wrote {len(rows)} sweep rows to {out_path}")
    return 0


def cmd_maskgrid(args) -> int:
    masks_file = load_masks(args.masks)
    p = masks_file.num_patches
    side = math.isqrt(p)
    if side * side != p:
        raise NonSquarePatchCount(f"num_patches {p} is not a perfect square")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # Cell codes: 0 pruned, 1 = 2D only, 2 = both retained, 3 = 3D only.
    lut = np.array([0, 1, 3, 2])
    for mask in masks_file.masks:
        codes = lut[mask.mask2d.astype(int) + 2 * mask.mask3d.astype(int)]
        grid = codes.reshape(side, side)
        path = out_dir / f"step_{mask.step_index:04d}.csv"
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            for row in grid:
                writer.writerow([int(x) for x in row])
    print(f"wrote {len(masks_file.masks)} grids ({side}x{side}) to {out_dir}")
    return 0


def cmd_stats(args) -> int:
    masks_file = load_masks(args.masks)
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    steps = len(masks_file.masks)
    total_tokens = steps * 2 * masks_file.num_patches
    retained = sum(m.retained_total for m in masks_file.masks)
    summary = {
        "episode_id": masks_file.episode_id,
        "num_patches": masks_file.num_patches,
        "steps": steps,
        "mean_pr2d": float(np.mean(masks_file.pr2d)) if steps else 0.0,
        "mean_pr3d": float(np.mean(masks_file.pr3d)) if steps else 0.0,
        "overall_pr": 1.0 - retained / total_tokens if total_tokens else 0.0,
        "total_conflicts": sum(masks_file.conflicts),
        "mask_flip_rate": mask_flip_rate(list(masks_file.masks)),
        "predicted_speedup": predict_speedup(
            masks_file.masks, config.cost_model(), 2 * masks_file.num_patches
        ),
    }
    text = json.dumps(summary, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(json.dumps(summary))
    return 0


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--tau2d", type=float, help="lower retention threshold")
    parser.add_argument("--tau3d", type=float, help="upper retention threshold")
    parser.add_argument("--beta", type=float, help="EMA momentum")
    parser.add_argument("--k", type=int, help="smoothing window size")
    parser.add_argument("--theta-2dext", type=float, dest="theta_2dext")
    parser.add_argument("--eps-3d", type=float, dest="eps_3d")
    parser.add_argument("--bg-keep-prob", type=float, dest="bg_keep_prob")
    parser.add_argument("--budget", type=float, help="global target pruning rate in [0,1)")
    parser.add_argument("--seed", type=int, help="master seed (TRIMASK_SEED is the fallback)")
    parser.add_argument("--no-smoothing", action="store_true", help="use raw indicators each step")
    parser.add_argument("--c-fix", type=float, dest="c_fix")
    parser.add_argument("--c-lin", type=float, dest="c_lin")
    parser.add_argument("--c-attn", type=float, dest="c_attn")
    parser.add_argument("--c-method", type=float, dest="c_method")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trimask",
        description="Deterministic dual-stream token-pruning engine on trace files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="prune an episode trace, write masks/stats/summary")
    p_run.add_argument("trace", help="input trace (JSONL)")
    p_run.add_argument("--out-dir", required=True)
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sim = sub.add_parser("simulate", help="generate a synthetic trace plus ground truth")
    p_sim.add_argument("spec", nargs="?", help="scenario spec JSON (omit to use --preset)")
    p_sim.add_argument("--out-dir", required=True)
    p_sim.add_argument("--preset", choices=sorted(_PRESETS), default="default")
    p_sim.add_argument("--seed", type=int, help="override the scenario seed")
    p_sim.add_argument("--steps", type=int, help="override the scenario step count")
    p_sim.add_argument("--patches", type=int, help="override the scenario patch count")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="rerun one episode across a hyperparameter grid")
    p_sweep.add_argument("trace")
    p_sweep.add_argument("grid", help='grid spec JSON: {"param": name, "values": [...]}')
    p_sweep.add_argument("--out-dir", required=True)
    p_sweep.add_argument("--workers", type=int, default=1)
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_grid = sub.add_parser("maskgrid", help="export per-step retention grids as CSV matrices")
    p_grid.add_argument("masks", help="masks file (JSONL)")
    p_grid.add_argument("--out-dir", required=True)
    p_grid.set_defaults(func=cmd_maskgrid)

    p_stats = sub.add_parser("stats", help="summarize a masks file")
    p_stats.add_argument("masks")
    p_stats.add_argument("--out", help="also write the summary JSON here")
    p_stats.add_argument("--config", help="config file supplying cost-model coefficients")
    p_stats.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrimaskError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
