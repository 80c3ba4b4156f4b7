"""Command-line entry point.

Exit codes: 0 success, 1 fatal input error, 2 completed with warnings.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import PipelineConfig
from .errors import AttentionError, InputFileError, InvalidInput
from .pipeline import run_pipeline

EXIT_OK, EXIT_FATAL, EXIT_WARN = 0, 1, 2


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driver-attention", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("defaults", help="print every config key with its default")
    _add_config_args(p)

    descriptions = {
        "ingest": "validate input logs and print record counts",
        "headpose": "estimate and filter head yaw; writes headpose.jsonl, yaw.jsonl, yaw_filter.csv",
        "track": "GM-PHD tracking; writes tracks.jsonl",
        "analyze": "split cases and compute metrics; writes cases.jsonl",
        "classify": "pooled k-means classification; writes labels.json",
        "report": "assemble report.json and plot CSVs from persisted stages",
        "run": "run every stage from scratch and write all outputs",
    }
    for name, text in descriptions.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("input", help="session directory or directory of sessions")
        if name != "ingest":
            p.add_argument("--out", required=True, help="output directory")
        _add_config_args(p)

    p = sub.add_parser("synth", help="write a synthetic scenario directory")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--driver", default="A")
    p.add_argument("--laps", type=int, default=1)
    p.add_argument("--scenarios", default="I", help="comma list of I/II, one or one per lap")
    p.add_argument("--gaze", default="attentive", help="comma list of attentive/inattentive, one or one per lap")
    p.add_argument("--p-detect", type=float, default=0.95)
    p.add_argument("--clutter-rate", type=float, default=0.2)
    p.add_argument("--meas-noise", type=float, default=0.3)
    p.add_argument("--noise-px", type=float, default=0.5)
    p.add_argument("--outlier-rate", type=float, default=0.02)
    p.add_argument("--mount-offset", type=float, default=8.0)
    p.add_argument("--frame", choices=("world", "ego"), default="world")
    return parser


def _synth(args) -> int:
    from .synth import CameraSpec, ScenarioSpec, SensorSpec, generate, write_scenario

    spec = ScenarioSpec(
        seed=args.seed, driver_id=args.driver, laps=args.laps,
        scenarios=tuple(args.scenarios.split(",")), gaze=tuple(args.gaze.split(",")),
        sensor=SensorSpec(p_detect=args.p_detect, clutter_rate=args.clutter_rate, meas_noise=args.meas_noise,
                          frame=args.frame),
        camera=CameraSpec(noise_px=args.noise_px, outlier_rate=args.outlier_rate, mount_offset=args.mount_offset),
    )
    out = write_scenario(generate(spec), args.out)
    print(out)
    return EXIT_OK


def _stage(args, cfg: PipelineConfig) -> int:
    if args.command == "ingest":
        res = run_pipeline(args.input, cfg, None, until="ingest")
        summary = {"sessions": res.report["sessions"], "accounting": res.ledger.to_dict()["accounting"]}
    else:
        until = "report" if args.command == "run" else args.command
        res = run_pipeline(args.input, cfg, args.out, until=until, reuse=args.command != "run")
        summary = {"stage": until, "out": args.out, "sessions": len(res.report["sessions"]),
                   "summary": res.report["summary"]}
    summary["warnings"] = len(res.ledger)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_WARN if len(res.ledger) else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = PipelineConfig.load(args.config, args.overrides)
        if args.command == "defaults":
            sys.stdout.write(cfg.dump())
            return EXIT_OK
        return _stage(args, cfg)
    except InputFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (InvalidInput, AttentionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
