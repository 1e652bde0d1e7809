"""Experiment runner: per-scene episodes for both planners, metrics, scene generation.

Subcommands:
  run        --config experiment.json [--jobs N]
  metrics    --pred cloud.ply --gt cloud.ply [--threshold t]
  gen-scenes --out dir --seed n

Exit codes: 0 success, 1 runtime failure, 2 usage error.
Set PREDNBV_LOG to error|info|debug to control logging.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .cloud_io import _atomic_write, load_cloud
from .errors import PredNBVError
from .geometry import cloud_stats, look_at
from .metrics import compute_report, default_fscore_threshold
from .planner import PlannerConfig, run_baseline_episode, run_episode
from .predictor import make_predictor
from .scenes import generate_suite, load_scene
from .visibility import CameraIntrinsics

log = logging.getLogger("prednbv")

SUMMARY_COLUMNS = ["scene", "method", "seed", "points_seen", "coverage", "distance", "steps", "improvement"]

# start pose rule: same pose for every method at a given (scene, seed), rotated per seed
START_DISTANCE_FACTOR = 1.6
START_HEIGHT_FACTOR = 0.3
START_AZIMUTH0_DEG = 17.0
START_AZIMUTH_STEP_DEG = 109.0


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("PREDNBV_LOG", "error").lower(), logging.ERROR
    )
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _build_planner_config(d: dict) -> PlannerConfig:
    d = dict(d)
    intr = d.pop("intrinsics", None)
    if intr is not None:
        d["intrinsics"] = CameraIntrinsics(**intr)
    return PlannerConfig(**d)


def _start_pose(scene, seed: int):
    stats = cloud_stats(scene.object)
    az = np.radians(START_AZIMUTH0_DEG + START_AZIMUTH_STEP_DEG * seed)
    offset = stats.d_max * np.array(
        [
            START_DISTANCE_FACTOR * np.cos(az),
            START_DISTANCE_FACTOR * np.sin(az),
            START_HEIGHT_FACTOR,
        ]
    )
    return look_at(stats.centroid + offset, stats.centroid)


def _method_label(method: dict) -> str:
    if "label" in method:
        return method["label"]
    if method["name"] == "prednbv":
        return f"prednbv-{method['predictor']['kind']}"
    return "baseline"


def _run_task(scene_path: str, method: dict, seed: int, planner_dict: dict) -> dict:
    """One episode; returns the report dict. Runs in worker processes under --jobs."""
    scene = load_scene(scene_path)
    cfg = _build_planner_config({**planner_dict, "seed": seed})
    start = _start_pose(scene, seed)
    t0 = time.monotonic()
    if method["name"] == "baseline":
        report = run_baseline_episode(scene, start, cfg)
    else:
        predictor = make_predictor(method["predictor"], ground_truth=scene.object, leaf=cfg.leaf)
        report = run_episode(scene, start, predictor, cfg)
    elapsed = time.monotonic() - t0
    label = _method_label(method)
    log.info("%s / %s / seed %d: coverage %.3f in %.1fs", scene.name, label, seed, report.coverage, elapsed)
    return report.to_dict(meta={"scene": scene.name, "method": label, "seed": seed})


def _summary_rows(results: list) -> list:
    baseline_points = {
        (r["scene"], r["seed"]): r["observed_count"] for r in results if r["method"] == "baseline"
    }
    rows = []
    for r in results:
        improvement = ""
        if r["method"] != "baseline":
            base = baseline_points.get((r["scene"], r["seed"]))
            if base:
                improvement = repr((r["observed_count"] - base) / base)
        rows.append(
            {
                "scene": r["scene"],
                "method": r["method"],
                "seed": r["seed"],
                "points_seen": r["observed_count"],
                "coverage": repr(r["coverage"]),
                "distance": repr(r["total_distance"]),
                "steps": r["steps"],
                "improvement": improvement,
            }
        )
    return rows


def cmd_run(config_path: str, jobs: int = 1) -> int:
    try:
        with open(config_path) as f:
            config = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config {config_path}: {exc}", file=sys.stderr)
        return 1
    scenes = config.get("scenes", [])
    methods = config.get("methods", [])
    seeds = config.get("seeds", [])
    if not scenes or not methods or not seeds:
        print("config needs at least one scene, method, and seed", file=sys.stderr)
        return 2
    for m in methods:
        if m.get("name") not in ("prednbv", "baseline"):
            print(f"unknown method {m.get('name')!r}", file=sys.stderr)
            return 2
        if m["name"] == "prednbv" and "predictor" not in m:
            print("prednbv method needs a predictor spec", file=sys.stderr)
            return 2
    planner_dict = config.get("planner", {})
    out_dir = config.get("output_dir", "out")
    # resolve scene paths relative to the config file
    base = os.path.dirname(os.path.abspath(config_path))
    scene_paths = [p if os.path.isabs(p) else os.path.join(base, p) for p in scenes]
    os.makedirs(out_dir, exist_ok=True)

    tasks = [(sp, m, s) for sp in scene_paths for m in methods for s in seeds]
    results, errors = [], []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_task, sp, m, s, planner_dict) for sp, m, s in tasks]
            outcomes = []
            for fut, (sp, m, s) in zip(futures, tasks):
                try:
                    outcomes.append(fut.result())
                except (PredNBVError, OSError, ValueError) as exc:
                    outcomes.append({"scene": sp, "method": _method_label(m), "seed": s, "error": str(exc)})
    else:
        outcomes = []
        for sp, m, s in tasks:
            try:
                outcomes.append(_run_task(sp, m, s, planner_dict))
            except (PredNBVError, OSError, ValueError) as exc:
                outcomes.append({"scene": sp, "method": _method_label(m), "seed": s, "error": str(exc)})
    for out in outcomes:
        if "error" in out:
            log.error("episode failed: %s", out)
            errors.append(out)
        else:
            results.append(out)

    for r in results:
        name = f"{r['scene']}_{r['method']}_{r['seed']}.json"
        _atomic_write(os.path.join(out_dir, name), json.dumps(r, sort_keys=True, indent=2) + "\n")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in _summary_rows(results):
        writer.writerow(row)
    _atomic_write(os.path.join(out_dir, "summary.csv"), buf.getvalue())
    if errors:
        _atomic_write(os.path.join(out_dir, "errors.json"), json.dumps(errors, sort_keys=True, indent=2) + "\n")
        return 1
    return 0


def cmd_metrics(pred_path: str, gt_path: str, threshold=None) -> int:
    try:
        pred = load_cloud(pred_path)
        gt = load_cloud(gt_path)
    except (PredNBVError, OSError, ValueError) as exc:
        print(f"cannot load clouds: {exc}", file=sys.stderr)
        return 1
    if threshold is None:
        threshold = default_fscore_threshold(gt)
    report = compute_report(pred, gt, threshold)
    print(report.to_json())
    return 0


def cmd_gen_scenes(out_dir: str, seed: int) -> int:
    try:
        manifests = generate_suite(out_dir, seed)
    except OSError as exc:
        print(f"cannot write scenes: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifests)} scenes to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prednbv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--jobs", type=int, default=1)

    p_metrics = sub.add_parser("metrics", help="compare a predicted cloud against ground truth")
    p_metrics.add_argument("--pred", required=True)
    p_metrics.add_argument("--gt", required=True)
    p_metrics.add_argument("--threshold", type=float, default=None)

    p_gen = sub.add_parser("gen-scenes", help="write the synthetic 10-scene suite")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.jobs)
    if args.command == "metrics":
        return cmd_metrics(args.pred, args.gt, args.threshold)
    return cmd_gen_scenes(args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
