"""Command-line entry: pick an executor and device, then serve stdin/stdout."""

from __future__ import annotations

import argparse
from pathlib import Path

from .executors import load_device_params, make_executor
from .server import Server


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sweepworker",
        description="Benchmark worker speaking the sweep wire protocol on stdin/stdout.",
    )
    parser.add_argument(
        "--executor",
        choices=("stub", "torch"),
        default="stub",
        help="inference executor (default: stub, no hardware required)",
    )
    parser.add_argument(
        "--device-file",
        default=None,
        help="JSON file with device parameters (capacity, power envelope)",
    )
    parser.add_argument(
        "--torch-device",
        default="cpu",
        help="torch device string for --executor torch (e.g. cuda:0)",
    )
    parser.add_argument(
        "--cache-dir",
        default=None,
        help="directory for engine-build cache artifacts",
    )
    return parser


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    params = load_device_params(args.device_file)
    executor = make_executor(
        args.executor,
        params,
        args.torch_device,
        Path(args.cache_dir) if args.cache_dir else None,
    )
    Server(executor).serve()


if __name__ == "__main__":
    main()
