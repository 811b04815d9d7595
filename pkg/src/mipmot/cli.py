"""Command-line interface: track, eval, simulate and sweep.

Sequence directories hold one detection file and one optional label
file per sequence, named ``<seq>.dets.txt`` and ``<seq>.labels.txt``.
Tracking writes one KITTI-format result file ``<seq>.txt`` per
sequence. All randomness is seeded, so repeated runs produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import sys
import time
from pathlib import Path

from . import evaluation, io_formats, simgen
from .config import RunConfig
from .geometry import Box3D
from .tracker import FrameResult, run_sequence


class CliError(Exception):
    """User-facing failure: printed to stderr, exit status 1."""


def _load_config(path: str | None, args) -> RunConfig:
    cfg = RunConfig() if path is None else RunConfig.from_file(path)
    try:
        return cfg.override(
            associator=getattr(args, "associator", None),
            theta_cls=getattr(args, "theta_cls", None),
            beta_over_alpha=getattr(args, "beta_over_alpha", None),
            w_cls=getattr(args, "w_cls", None),
            w_aff=getattr(args, "w_aff", None),
            w_se=getattr(args, "w_se", None),
            ha_gate=getattr(args, "ha_gate", None),
        )
    except ValueError as e:
        raise CliError(str(e))


def _sequences(directory: Path, suffix: str) -> dict[str, Path]:
    if not directory.is_dir():
        raise CliError(f"not a directory: {directory}")
    return {
        p.name[: -len(suffix)]: p for p in sorted(directory.glob(f"*{suffix}"))
    }


def results_to_frames(results: list[FrameResult]) -> dict[int, dict[int, Box3D]]:
    return {
        r.frame: {tid: box for tid, box, _ in r.tracks} for r in results if r.tracks
    }


def labels_to_frames(records) -> dict[int, dict[int, Box3D]]:
    frames: dict[int, dict[int, Box3D]] = {}
    for rec in records:
        frames.setdefault(rec.frame, {})[rec.track_id] = rec.box
    return frames


def cmd_track(args) -> int:
    cfg = _load_config(args.config, args)
    input_dir = Path(args.input_dir)
    output_dir = Path(args.output_dir)
    sequences = _sequences(input_dir, ".dets.txt")
    if not sequences:
        raise CliError(f"no *.dets.txt files in {input_dir}")
    output_dir.mkdir(parents=True, exist_ok=True)
    for name, det_path in sequences.items():
        dets = io_formats.read_detections(det_path)
        num_frames = (max(dets) + 1) if dets else 0
        start = time.perf_counter()
        results = run_sequence(dets, cfg.tracker_config(), num_frames=num_frames)
        elapsed = time.perf_counter() - start
        io_formats.write_kitti_tracking(
            results, output_dir / f"{name}.txt", object_type=cfg.object_type
        )
        per_frame_ms = 1000.0 * elapsed / num_frames if num_frames else 0.0
        print(f"{name}: {num_frames} frames, {per_frame_ms:.2f} ms/frame")
    return 0


def _evaluate_dirs(results_dir: Path, labels_dir: Path, iou_threshold: float):
    label_files = _sequences(labels_dir, ".labels.txt")
    if not label_files:
        label_files = _sequences(labels_dir, ".txt")
    result_files = {
        name: path
        for name, path in _sequences(results_dir, ".txt").items()
        if not name.endswith((".dets", ".labels"))
    }
    missing = sorted(set(label_files) - set(result_files))
    extra = sorted(set(result_files) - set(label_files))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing results for: {', '.join(missing)}")
        if extra:
            parts.append(f"results without labels: {', '.join(extra)}")
        raise CliError("; ".join(parts))
    reports = {}
    for name in sorted(label_files):
        gt = labels_to_frames(io_formats.read_kitti_labels(label_files[name]))
        hyp = labels_to_frames(io_formats.read_kitti_labels(result_files[name]))
        reports[name] = evaluation.evaluate_sequence(gt, hyp, iou_threshold)
    return reports


def cmd_eval(args) -> int:
    reports = _evaluate_dirs(
        Path(args.results_dir), Path(args.labels_dir), args.iou_threshold
    )
    overall = evaluation.aggregate_reports(list(reports.values()))
    table = dict(reports)
    table["OVERALL"] = overall
    print(evaluation.format_report_table(table))
    if not overall.mota_defined:
        print("note: no ground-truth boxes, MOTA reported as 100%")
    if args.json_out:
        payload = {name: r.as_dict() for name, r in table.items()}
        with open(args.json_out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0


def _scenario_from_args(args) -> simgen.ScenarioConfig:
    if args.template:
        return simgen.scenario_template(args.template, seed=args.seed)
    with open(args.scenario, "r", encoding="utf-8") as f:
        data = json.load(f)
    known = {f.name for f in dataclasses.fields(simgen.ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise CliError(f"unknown scenario keys: {sorted(unknown)}")
    if "objects" in data and data["objects"] is not None:
        data["objects"] = [simgen.ObjectSpec(**o) for o in data["objects"]]
    if "occlusions" in data:
        data["occlusions"] = [tuple(o) for o in data["occlusions"]]
    return simgen.ScenarioConfig(**data)


def cmd_simulate(args) -> int:
    cfg = _scenario_from_args(args)
    output_dir = Path(args.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    labels, detections = simgen.generate(cfg)
    name = args.name or (args.template or "scenario")
    io_formats.write_detections(detections, output_dir / f"{name}.dets.txt")
    io_formats.write_kitti_labels(labels, output_dir / f"{name}.labels.txt")
    print(f"wrote {name}.dets.txt and {name}.labels.txt to {output_dir}")
    return 0


SWEEP_METRICS = ["mota", "motp", "fp", "fn", "idsw", "frag", "mt", "pt", "ml"]


def cmd_sweep(args) -> int:
    base = _load_config(args.config, args)
    scenario = _scenario_from_args(args)
    labels, detections = simgen.generate(scenario)
    gt = labels_to_frames(labels)
    dets_by_frame: dict[int, list] = {}
    for det in detections:
        dets_by_frame.setdefault(det.frame, []).append(det)

    with open(args.grid, "r", encoding="utf-8") as f:
        grid = json.load(f)
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise CliError("grid file must map config keys to value lists")
    unknown = set(grid) - RunConfig.field_names()
    if unknown:
        raise CliError(f"unknown grid keys: {sorted(unknown)}")

    keys = sorted(grid)
    rows = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cfg = base.override(**dict(zip(keys, combo)))
        results = run_sequence(
            dets_by_frame, cfg.tracker_config(), num_frames=scenario.num_frames
        )
        report = evaluation.evaluate_sequence(
            gt, results_to_frames(results), cfg.eval_iou_threshold
        )
        metrics = report.as_dict()
        rows.append(
            list(combo) + [metrics[m.upper()] for m in SWEEP_METRICS]
        )

    with open(args.output, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(keys + SWEEP_METRICS)
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mipmot", description="3D multi-object tracking backend"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_overrides(p):
        p.add_argument("--associator", choices=["mip", "hungarian"])
        p.add_argument("--theta-cls", dest="theta_cls", type=float)
        p.add_argument("--beta-over-alpha", dest="beta_over_alpha", type=float)
        p.add_argument("--w-cls", dest="w_cls", type=float)
        p.add_argument("--w-aff", dest="w_aff", type=float)
        p.add_argument("--w-se", dest="w_se", type=float)
        p.add_argument("--ha-gate", dest="ha_gate", type=float)

    p_track = sub.add_parser("track", help="run the tracker over sequences")
    p_track.add_argument("--config")
    p_track.add_argument("--input-dir", required=True)
    p_track.add_argument("--output-dir", required=True)
    add_overrides(p_track)
    p_track.set_defaults(func=cmd_track)

    p_eval = sub.add_parser("eval", help="score results against labels")
    p_eval.add_argument("--results-dir", required=True)
    p_eval.add_argument("--labels-dir", required=True)
    p_eval.add_argument("--iou-threshold", type=float, default=0.5)
    p_eval.add_argument("--json-out")
    p_eval.set_defaults(func=cmd_eval)

    p_sim = sub.add_parser("simulate", help="generate a synthetic sequence")
    group = p_sim.add_mutually_exclusive_group(required=True)
    group.add_argument("--template", choices=["clean", "crossing", "clutter"])
    group.add_argument("--scenario", help="scenario config JSON file")
    p_sim.add_argument("--output-dir", required=True)
    p_sim.add_argument("--name")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="grid-run track+eval on a scenario")
    p_sweep.add_argument("--config")
    group = p_sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--template", choices=["clean", "crossing", "clutter"])
    group.add_argument("--scenario")
    p_sweep.add_argument("--grid", required=True, help="JSON {key: [values]}")
    p_sweep.add_argument("--output", required=True, help="metrics CSV path")
    p_sweep.add_argument("--seed", type=int, default=0)
    add_overrides(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
