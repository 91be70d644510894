"""
Command Line
Argument parsing and exit-code mapping for the steering lab
"""

import argparse
import logging
import sys
from typing import List, Optional

from grad_core.errors import LabError

from .commands import COMMANDS
from .config import load_experiment_config

logger = logging.getLogger(__name__)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment JSON file")
    parser.add_argument("--seed", type=int, help="global seed, inherited by blocks that set none")
    parser.add_argument("--output-dir", dest="output_dir", help="run directory")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="BLOCK.FIELD=VALUE",
        help="override one config field; repeatable",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steerlab", description="Zero-shot geometric steering lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="render the shape x texture dataset")
    _common(p)
    p.add_argument("--export-triplets", dest="export_triplets", help="also write an anchor,positive,negative CSV")
    p.add_argument("--export-ppm", dest="export_ppm", action="store_true", help="also write every image as PPM")

    for name, text in (("train-teacher", "train the triplet embedding"), ("train-baseline", "train the texture classifier")):
        _common(sub.add_parser(name, help=text))

    p = sub.add_parser("evaluate", help="odd-one-out accuracy on an external triplet CSV")
    _common(p)
    p.add_argument("--triplets", required=True)
    p.add_argument("--model", choices=["teacher", "baseline"], default="teacher")

    p = sub.add_parser("train-gen", help="train the decoder and one generator")
    _common(p)
    p.add_argument("--paradigm", choices=["ddim", "flow"])

    p = sub.add_parser("steer", help="one guided run and its alpha=0 control")
    _common(p)
    p.add_argument("--paradigm", choices=["ddim", "flow"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--schedule", help="continuous, stop_after:K or window:A:B")
    p.add_argument("--target", help="'auto', a dataset image id or an image path")
    p.add_argument("--raw-gradient", dest="raw_gradient", action="store_true", help="skip gradient normalization")

    p = sub.add_parser("sweep", help="guidance strength or duration sweep over seeds")
    _common(p)
    p.add_argument("--parameter", choices=["alpha", "guided_steps"])
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--seeds", type=int)
    p.add_argument("--paradigm", choices=["ddim", "flow"])

    p = sub.add_parser("healing", help="early-stop versus continuous guidance on both samplers")
    _common(p)
    p.add_argument("--seeds", type=int)

    p = sub.add_parser("report", help="aggregate run directories into tables and figures")
    _common(p)
    p.add_argument("run_dirs", nargs="*")
    p.add_argument("--report-dir", dest="report_dir")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_experiment_config(args.config, args.seed, args.output_dir, args.overrides)
        return COMMANDS[args.command](config, args)
    except LabError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
