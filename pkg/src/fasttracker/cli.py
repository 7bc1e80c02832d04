"""``fasttracker`` command line: track, eval, synth, smooth, link, overlay.

Exit codes: 0 success, 1 bad usage or invalid input, 2 unreadable or
unwritable file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import SCALAR_FIELDS, ConfigError, env_overrides, load_config
from .environment import InvalidRegionError, load_map
from .metrics import evaluate
from .mot_io import ParseError, parse_detections, parse_ground_truth, parse_results, write_results
from .motion import NumericalError
from .postproc import (GSP_LENGTH_SCALE, GSP_MAX_GAP, GSP_NOISE, LINK_MAX_DIST, LINK_MAX_GAP,
                       LINK_MIN_SCORE, link_tracklets, smooth_tracks)
from .synth import SCENARIOS, GenerationError, NoiseModel, ScenarioSpec, default_spec, generate_files
from .tracker import SequenceError, run_sequence

log = logging.getLogger("fasttracker")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
_INVALID = (ConfigError, ParseError, InvalidRegionError, GenerationError, NumericalError,
            SequenceError, ValueError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _add_tracker_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tracker settings (flag > FASTTRACK_<KEY> env > --config file > default)")
    for key, (default, text) in SCALAR_FIELDS.items():
        help_text = f"{text}; config key {key!r}, default {default}"
        if isinstance(default, bool):
            g.add_argument(_flag(key), dest=key, action=argparse.BooleanOptionalAction, default=None,
                           help=help_text)
        else:
            g.add_argument(_flag(key), dest=key, type=type(default), default=None, metavar="X",
                           help=help_text)


def _track_one(job):
    det_path, out_path, cfg, map_path = job
    env = load_map(map_path, cfg.class_ids) if map_path else None
    records = run_sequence(parse_detections(det_path), env, cfg)
    write_results(records, out_path)
    return str(out_path), len(records)


def _cmd_track(args) -> int:
    overrides = env_overrides()
    overrides.update({k: getattr(args, k) for k in SCALAR_FIELDS if getattr(args, k) is not None})
    cfg = load_config(args.config, overrides)
    if len(args.det) == 1:
        outs = [Path(args.out)]
    else:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        names = [Path(d).parent.name if Path(d).stem == "det" else Path(d).stem for d in args.det]
        if len(set(names)) != len(names):
            names = [f"{i:03d}_{n}" for i, n in enumerate(names, start=1)]
        outs = [out_dir / f"{n}.txt" for n in names]
    jobs = [(d, o, cfg, args.map) for d, o in zip(args.det, outs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(_track_one, jobs))
    else:
        done = [_track_one(j) for j in jobs]
    for path, n in done:
        log.info("wrote %d rows to %s", n, path)
    return EXIT_OK


def _cmd_eval(args) -> int:
    report = evaluate(parse_ground_truth(args.gt), parse_results(args.res), args.iou)
    print(report.to_json() if args.json else report.to_text())
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.spec:
        spec = ScenarioSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    else:
        if not args.scenario:
            raise ValueError("--scenario is required unless --spec is given")
        noise = NoiseModel(center_std=args.center_std, extent_std=args.extent_std)
        spec = default_spec(args.scenario, args.seed, args.n_objects, args.n_frames, noise)
    paths = generate_files(spec, args.out)
    for kind, path in paths.items():
        log.info("%s: %s", kind, path)
    return EXIT_OK


def _cmd_smooth(args) -> int:
    records = smooth_tracks(parse_results(args.res), args.max_gap, args.length_scale, args.noise)
    write_results(records, args.out)
    return EXIT_OK


def _cmd_link(args) -> int:
    records = link_tracklets(parse_results(args.res), args.max_gap, args.max_dist, args.min_score)
    write_results(records, args.out)
    return EXIT_OK


def _cmd_overlay(args) -> int:
    rows = []
    for r in parse_results(args.res):
        rows.append(("res", r.frame, r.id, *r.box.center(), r.box.width, r.box.height))
    if args.gt:
        for frame, items in parse_ground_truth(args.gt).items():
            for g in items:
                rows.append(("gt", frame, g.id, *g.box.center(), g.box.width, g.box.height))
    rows.sort(key=lambda t: (t[1], t[0], t[2]))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "source", "id", "cx", "cy", "w", "h"])
        for src, frame, tid, cx, cy, bw, bh in rows:
            w.writerow([frame, src, tid, f"{cx:.2f}", f"{cy:.2f}", f"{bw:.2f}", f"{bh:.2f}"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fasttracker", description="Online multi-object tracking with occlusion handling.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    t = sub.add_parser("track", help="track a detection file")
    t.add_argument("--det", action="append", required=True, metavar="FILE",
                   help="detection file; repeat for several sequences")
    t.add_argument("--config", metavar="FILE", help="JSON config file")
    t.add_argument("--map", metavar="FILE", help="environment map JSON")
    t.add_argument("--out", required=True, metavar="PATH",
                   help="result file, or a directory when --det is repeated")
    t.add_argument("--jobs", type=int, default=1, metavar="N", help="sequences tracked in parallel (default 1)")
    _add_tracker_flags(t)
    t.set_defaults(func=_cmd_track)

    e = sub.add_parser("eval", help="score a result file against ground truth")
    e.add_argument("--gt", required=True, metavar="FILE")
    e.add_argument("--res", required=True, metavar="FILE")
    e.add_argument("--json", action="store_true", help="print JSON instead of a table")
    e.add_argument("--report", metavar="FILE", help="also write the JSON report here")
    e.add_argument("--iou", type=float, default=0.5, help="match threshold (default 0.5)")
    e.set_defaults(func=_cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic scenario")
    s.add_argument("--scenario", choices=SCENARIOS)
    s.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    s.add_argument("--out", required=True, metavar="DIR", help="output directory for det/gt/map files")
    s.add_argument("--spec", metavar="FILE", help="scenario spec JSON (overrides the other flags)")
    s.add_argument("--n-objects", type=int, default=None, help="objects per frame")
    s.add_argument("--n-frames", type=int, default=None, help="sequence length")
    s.add_argument("--center-std", type=float, default=1.0, help="center jitter in px (default 1.0)")
    s.add_argument("--extent-std", type=float, default=0.5, help="extent jitter in px (default 0.5)")
    s.set_defaults(func=_cmd_synth)

    m = sub.add_parser("smooth", help="Gaussian-process smoothing with gap filling")
    m.add_argument("--res", required=True, metavar="FILE")
    m.add_argument("--out", required=True, metavar="FILE")
    m.add_argument("--max-gap", type=int, default=GSP_MAX_GAP,
                   help=f"longest gap filled, in frames (default {GSP_MAX_GAP})")
    m.add_argument("--length-scale", type=float, default=GSP_LENGTH_SCALE,
                   help=f"kernel length scale in frames (default {GSP_LENGTH_SCALE:g})")
    m.add_argument("--noise", type=float, default=GSP_NOISE,
                   help=f"observation noise in px (default {GSP_NOISE:g})")
    m.set_defaults(func=_cmd_smooth)

    k = sub.add_parser("link", help="join fragmented tracklets by motion consistency")
    k.add_argument("--res", required=True, metavar="FILE")
    k.add_argument("--out", required=True, metavar="FILE")
    k.add_argument("--max-gap", type=int, default=LINK_MAX_GAP,
                   help=f"largest frame gap bridged (default {LINK_MAX_GAP})")
    k.add_argument("--max-dist", type=float, default=LINK_MAX_DIST,
                   help=f"largest endpoint distance in px (default {LINK_MAX_DIST:g})")
    k.add_argument("--min-score", type=float, default=LINK_MIN_SCORE,
                   help=f"links need a score above this (default {LINK_MIN_SCORE:g})")
    k.set_defaults(func=_cmd_link)

    o = sub.add_parser("overlay", help="per-frame trajectory CSV for plotting")
    o.add_argument("--res", required=True, metavar="FILE")
    o.add_argument("--gt", metavar="FILE")
    o.add_argument("--out", required=True, metavar="CSV")
    o.set_defaults(func=_cmd_overlay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"fasttracker: {exc}", file=sys.stderr)
        return EXIT_IO
    except _INVALID as exc:
        print(f"fasttracker: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
