#!/usr/bin/env python
"""Plot-ready study of the accuracy/latency trade-off in the re-detection
interval: runs one tracker over one sequence for a range of f_lim values and
prints F-Score next to the simulated average per-frame cost.

Usage:
    python scripts/redetect_tradeoff.py --sequence DIR [--tracker kcf] [--seed N]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from trackbench.config import derive_seed
from trackbench.detector import OracleConfig, OracleDetector
from trackbench.media import load_annotations, load_sequence
from trackbench.orchestrator import RunConfig, evaluate, run, timing_summary
from trackbench.trackers import TrackerKind


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sequence", required=True)
    parser.add_argument("--truth", default=None)
    parser.add_argument("--tracker", default="kcf")
    parser.add_argument("--f-lims", default="5,10,20,40,60,80,100")
    parser.add_argument("--jitter-sigma", type=float, default=1.0)
    parser.add_argument("--latency-ms", type=float, default=60.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    seq_dir = Path(args.sequence)
    truth_path = Path(args.truth) if args.truth else seq_dir / "truth.csv"
    sequence = load_sequence(seq_dir)
    truth = load_annotations(truth_path, sequence.frame_count)
    kind = TrackerKind(args.tracker)

    print(f"{'f_lim':>5} {'F':>8} {'avg_ms':>8} {'detector_calls':>15}")
    for f_lim in (int(v) for v in args.f_lims.split(",")):
        oracle = OracleConfig(
            jitter_sigma=args.jitter_sigma,
            latency_ms=args.latency_ms,
            seed=derive_seed(args.seed, "detector"),
        )
        config = RunConfig(
            f_lim=f_lim,
            tracker_kind=kind,
            detector=OracleDetector(oracle, truth),
            seed=derive_seed(args.seed, "tracker"),
        )
        trace = run(sequence, truth, config)
        report = evaluate(trace, truth)
        timing = timing_summary(trace)
        print(
            f"{f_lim:>5} {report.f_score:>8.4f} {timing.average_time_ms:>8.3f} "
            f"{trace.totals.detector_calls:>15}"
        )


if __name__ == "__main__":
    main()
