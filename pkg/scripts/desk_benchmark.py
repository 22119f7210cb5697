#!/usr/bin/env python
"""End-to-end desk benchmark: render the three presets, sweep every tracker
over a small f_lim grid, and print the pooled table.

Usage:
    python scripts/desk_benchmark.py [--workdir DIR] [--seed N] [--frames N]
"""
from __future__ import annotations

import argparse
import csv
import sys
import tempfile
from pathlib import Path

from trackbench.cli import main as cli_main

PRESETS = ("calm", "agile", "moving-background")


def run(argv: list[str]) -> None:
    code = cli_main(argv)
    if code != 0:
        raise SystemExit(f"command {' '.join(argv)} failed with code {code}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default=None, help="keep outputs here instead of a tempdir")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--frames", type=int, default=150)
    parser.add_argument("--f-lims", default="10,30,60")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    if args.workdir:
        base = Path(args.workdir)
        base.mkdir(parents=True, exist_ok=True)
    else:
        base = Path(tempfile.mkdtemp(prefix="trackbench-"))
    print(f"working in {base}")

    video_flags: list[str] = []
    for preset in PRESETS:
        out = base / preset
        run(
            [
                "synth",
                "--preset",
                preset,
                "--frames",
                str(args.frames),
                "--seed",
                str(args.seed),
                "--out",
                str(out),
            ]
        )
        video_flags += ["--video", str(out)]

    sweep_out = base / "sweep"
    run(
        [
            "sweep",
            *video_flags,
            "--f-lims",
            args.f_lims,
            "--jitter-sigma",
            "1.0",
            "--seed",
            str(args.seed),
            "--jobs",
            str(args.jobs),
            "--out",
            str(sweep_out),
        ]
    )

    with open(sweep_out / "pooled.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    print()
    print(f"{'tracker':<12} {'f_lim':>5} {'F':>7} {'P':>7} {'R':>7}")
    for row in rows:
        print(
            f"{row['tracker']:<12} {row['f_lim']:>5} "
            f"{float(row['f_score']):>7.4f} {float(row['precision']):>7.4f} "
            f"{float(row['recall']):>7.4f}"
        )
    print(f"\nfull tables in {sweep_out}")


if __name__ == "__main__":
    sys.exit(main())
