"""
Command-line entry point.

    lidartrack simulate [SCENARIO] [--corpus NAME] --out DIR [--seed N]
    lidartrack track SCANS --out RESULTS [--config CFG]
    lidartrack evaluate RESULTS TRUTH --out DIR [--compare NAME=PATH ...]
    lidartrack run-all [SCENARIO] [--corpus NAME] --out DIR [--seed N] [--config CFG]

Failures exit with status 2 and one stderr line starting ``lidartrack: error:``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import load_pipeline_config, load_scenario
from .errors import AlignmentError, InvalidSpec
from .evaluation import evaluate
from .io import read_jsonl, read_scans, write_results, write_scans, write_truth
from .pipeline import run_pipeline
from .sim import CORPORA, simulate

log = logging.getLogger("lidartrack")
EXIT_ERROR = 2


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _scenario(args):
    if args.scenario and args.corpus:
        raise CliError("usage", "give either a scenario file or --corpus, not both")
    if args.corpus:
        if args.corpus not in CORPORA:
            raise CliError("usage", f"unknown corpus {args.corpus!r} (choose from {', '.join(CORPORA)})")
        seed = 0 if args.seed is None else args.seed
        return CORPORA[args.corpus](seed), seed
    if not args.scenario:
        raise CliError("usage", "a scenario file or --corpus is required")
    spec, file_seed = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else (file_seed or 0)
    return spec, seed


def cmd_simulate(args) -> None:
    spec, seed = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scans, gt = simulate(spec, seed)
    write_scans(out / "scans.jsonl", scans)
    write_truth(out / "truth.jsonl", gt)
    log.info("wrote %d frames to %s", len(scans), out)


def _track(scans_path, config_path, out_path, models: str | None = None):
    cfg = load_pipeline_config(config_path)
    if models:
        cfg = dataclasses.replace(cfg, track=dataclasses.replace(cfg.track, models=models))
    try:
        scans = read_scans(scans_path)
    except ValueError as exc:
        raise CliError("parse", str(exc)) from None
    start = time.perf_counter()
    outputs = run_pipeline(scans, cfg)
    elapsed = time.perf_counter() - start
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_results(out_path, outputs)
    if scans:
        log.info("tracked %d frames in %.2f s (%.1f frames/s)", len(scans), elapsed,
                 len(scans) / max(elapsed, 1e-9))
    return outputs


def cmd_track(args) -> None:
    _track(args.scans, args.config, args.out)


def _read_records(path, what: str):
    if not Path(path).is_file():
        raise CliError("io", f"{what} file not found: {path}")
    try:
        return read_jsonl(path)
    except ValueError as exc:
        raise CliError("parse", str(exc)) from None


def cmd_evaluate(args) -> None:
    results = {args.name: _read_records(args.results, "results")}
    for item in args.compare or []:
        name, sep, path = item.partition("=")
        if not sep or not name:
            raise CliError("usage", f"--compare expects NAME=PATH, got {item!r}")
        results[name] = _read_records(path, "results")
    gt = _read_records(args.truth, "ground-truth")
    summary = evaluate(results, gt, args.out)
    log.info("heading MAE (best): %.4f deg", summary["heading"]["best"]["abs_mean"])


def cmd_run_all(args) -> None:
    spec, seed = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scans, gt = simulate(spec, seed)
    write_scans(out / "scans.jsonl", scans)
    write_truth(out / "truth.jsonl", gt)
    _track(out / "scans.jsonl", args.config, out / "results_mma.jsonl")
    _track(out / "scans.jsonl", args.config, out / "results_cv.jsonl", models="cv")
    results = {"mma": read_jsonl(out / "results_mma.jsonl"), "cv": read_jsonl(out / "results_cv.jsonl")}
    evaluate(results, read_jsonl(out / "truth.jsonl"), out / "metrics")
    (out / "run.json").write_text(json.dumps({"seed": seed, "frames": len(scans),
                                              "version": __version__}, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lidartrack", description="LIDAR vehicle detection and tracking toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def shared(p, need_out=True):
        p.add_argument("--seed", type=int, default=None, help="random seed")
        p.add_argument("--config", default=None, help="pipeline key=value config file")
        p.add_argument("--out", required=need_out, help="output path")

    p = sub.add_parser("simulate", help="render a scenario to scan and ground-truth JSONL")
    p.add_argument("scenario", nargs="?", help="scenario key=value file")
    p.add_argument("--corpus", help=f"canned scenario: {', '.join(CORPORA)}")
    shared(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run the detection and tracking pipeline on a scan file")
    p.add_argument("scans", help="scan JSONL")
    shared(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="score results against ground truth")
    p.add_argument("results", help="results JSONL")
    p.add_argument("truth", help="ground-truth JSONL")
    p.add_argument("--name", default="mma", help="method label for RESULTS")
    p.add_argument("--compare", action="append", metavar="NAME=PATH", help="extra result sets")
    shared(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-all", help="simulate, track (MMA and single CV) and evaluate")
    p.add_argument("scenario", nargs="?", help="scenario key=value file")
    p.add_argument("--corpus", help=f"canned scenario: {', '.join(CORPORA)}")
    shared(p)
    p.set_defaults(func=cmd_run_all)
    return parser


def _fail(kind: str, message: str) -> int:
    text = " ".join(str(message).split())
    print(f"lidartrack: error: {kind}: {text}", file=sys.stderr)
    return EXIT_ERROR


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError("usage", "a subcommand is required (simulate, track, evaluate, run-all)")
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="lidartrack: %(message)s", stream=sys.stderr)
        args.func(args)
    except CliError as exc:
        return _fail(exc.kind, exc)
    except InvalidSpec as exc:
        return _fail("invalid-spec", f"{exc.key}: {exc}")
    except AlignmentError as exc:
        return _fail("alignment", exc)
    except OSError as exc:
        return _fail("io", f"{exc.strerror or exc}: {exc.filename or ''}")
    except ValueError as exc:
        return _fail("parse", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
