"""Benchmark command line: synth / run / sweep / report."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path
from typing import Optional

from .config import (
    build_section,
    derive_seed,
    parse_kv_file,
    section_overrides,
    tracker_params_from,
    validate_known_sections,
)
from .detector import NccConfig, NccDetector, OracleConfig, OracleDetector
from .geometry import MetricsReport, accumulate, classify_frame, macro_f_score, pool
from .media import (
    AnnotationError,
    LoadError,
    SynthConfig,
    generate_synthetic,
    load_annotations,
    load_sequence,
)
from .orchestrator import (
    RunConfig,
    evaluate,
    load_predictions_csv,
    run,
    save_predictions_csv,
    save_trace_jsonl,
    timing_summary,
)
from .trackers import TrackerKind

DEFAULT_F_LIMS = tuple(range(10, 101, 10))


class UsageError(ValueError):
    """Bad flags or malformed inputs; maps to exit code 2."""


def _format_float(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise UsageError(f"--size expects WIDTHxHEIGHT, got {text!r}") from exc


def _parse_f_lims(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise UsageError(f"--f-lims expects comma-separated integers, got {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise UsageError("--f-lims values must be positive")
    return values


def _parse_trackers(text: str) -> tuple[TrackerKind, ...]:
    kinds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            kinds.append(TrackerKind(part))
        except ValueError as exc:
            raise UsageError(f"unknown tracker {part!r}") from exc
    if not kinds:
        raise UsageError("--trackers must name at least one tracker")
    return tuple(kinds)


def _load_overrides(config_path: Optional[str]) -> dict[str, str]:
    if not config_path:
        return {}
    overrides = parse_kv_file(config_path)
    validate_known_sections(overrides)
    return overrides


def _video_spec(text: str) -> tuple[Path, Path]:
    """DIR or DIR:TRUTH; bare DIR implies DIR/truth.csv."""
    if ":" in text:
        d, t = text.rsplit(":", 1)
        return Path(d), Path(t)
    d = Path(text)
    return d, d / "truth.csv"


@lru_cache(maxsize=8)
def _cached_sequence(directory: str):
    return load_sequence(directory)


def _build_detector(args, sequence, truth, overrides, master_seed: int):
    if args.detector == "oracle":
        base = build_section(OracleConfig, overrides, "oracle")
        cfg = OracleConfig(
            miss_prob=args.miss_prob if args.miss_prob is not None else base.miss_prob,
            multi_prob=args.multi_prob if args.multi_prob is not None else base.multi_prob,
            jitter_sigma=(
                args.jitter_sigma if args.jitter_sigma is not None else base.jitter_sigma
            ),
            latency_ms=args.latency_ms if args.latency_ms is not None else base.latency_ms,
            seed=derive_seed(master_seed, "detector"),
        )
        return OracleDetector(cfg, truth)
    # NCC: template comes from the ground-truth box of a chosen frame.
    ncc_over = section_overrides(overrides, "ncc")
    ref = args.template_frame
    if not (0 <= ref < sequence.frame_count):
        raise UsageError(f"--template-frame {ref} outside the sequence")
    box = truth[ref]
    if box is None:
        raise UsageError(f"--template-frame {ref} has no ground-truth box")
    from .detector import capture_template

    scales = (
        tuple(float(s) for s in args.scales.split(","))
        if args.scales
        else tuple(float(s) for s in ncc_over.get("scales", "1.0").split(","))
    )
    cfg = NccConfig(
        template=capture_template(sequence[ref], box),
        scales=scales,
        score_threshold=(
            args.ncc_threshold
            if args.ncc_threshold is not None
            else float(ncc_over.get("score_threshold", 0.6))
        ),
        nms_jaccard=(
            args.ncc_nms if args.ncc_nms is not None else float(ncc_over.get("nms_jaccard", 0.1))
        ),
        stride=args.ncc_stride if args.ncc_stride is not None else int(ncc_over.get("stride", 4)),
    )
    return NccDetector(cfg)


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    width, height = _parse_size(args.size)
    config = SynthConfig(
        preset=args.preset,
        frame_count=args.frames,
        width=width,
        height=height,
        target_size=args.target_size,
        noise_sigma=args.noise_sigma,
        blur=not args.no_blur,
        seed=args.seed,
    )
    sequence, _ = generate_synthetic(config, args.out)
    print(f"wrote {sequence.frame_count} frames and truth.csv to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# run


def _run_once(
    seq_dir: Path,
    truth_path: Path,
    kind: TrackerKind,
    f_lim: int,
    args,
    overrides: dict[str, str],
):
    sequence = _cached_sequence(str(seq_dir))
    truth = load_annotations(truth_path, sequence.frame_count)
    detector = _build_detector(args, sequence, truth, overrides, args.seed)
    config = RunConfig(
        f_lim=f_lim,
        tracker_kind=kind,
        detector=detector,
        tracker_params=tracker_params_from(overrides, kind),
        iou_threshold=args.iou_thresh,
        seed=derive_seed(args.seed, "tracker"),
        clock="wall" if args.wall_clock else "simulated",
    )
    trace = run(sequence, truth, config)
    report = evaluate(trace, truth, args.iou_thresh)
    timing = timing_summary(trace)
    return sequence, truth, trace, report, timing


def cmd_run(args) -> int:
    if args.f_lim < 1:
        raise UsageError("--f-lim must be at least 1")
    overrides = _load_overrides(args.config)
    kind = _parse_trackers(args.tracker)[0]
    seq_dir = Path(args.sequence)
    truth_path = Path(args.truth) if args.truth else seq_dir / "truth.csv"
    if not seq_dir.is_dir():
        raise UsageError(f"sequence directory {seq_dir} does not exist")
    if not truth_path.is_file():
        raise UsageError(f"truth file {truth_path} does not exist")
    _, truth, trace, report, timing = _run_once(
        seq_dir, truth_path, kind, args.f_lim, args, overrides
    )
    if trace.warning:
        print(f"warning: {trace.warning}", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_predictions_csv(trace, out / "predictions.csv")
        save_trace_jsonl(trace, out / "trace.jsonl")
        payload = {
            "config": trace.config_echo,
            "metrics": report.to_dict(),
            "timing": timing.to_dict(),
            "warning": trace.warning,
        }
        (out / "report.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
    print(
        f"F={report.f_score:.4f} P={report.precision:.4f} "
        f"R={report.recall:.4f} avg_ms={timing.average_time_ms:.3f}"
    )
    return 0


# ---------------------------------------------------------------------------
# sweep


def _sweep_cell(payload: dict) -> dict:
    sequence = _cached_sequence(payload["seq_dir"])
    truth = load_annotations(payload["truth_path"], sequence.frame_count)
    kind = TrackerKind(payload["tracker"])
    overrides = payload["overrides"]
    oracle_base = build_section(OracleConfig, overrides, "oracle")
    oracle = OracleConfig(
        miss_prob=payload["miss_prob"] if payload["miss_prob"] is not None else oracle_base.miss_prob,
        multi_prob=(
            payload["multi_prob"] if payload["multi_prob"] is not None else oracle_base.multi_prob
        ),
        jitter_sigma=(
            payload["jitter_sigma"]
            if payload["jitter_sigma"] is not None
            else oracle_base.jitter_sigma
        ),
        latency_ms=(
            payload["latency_ms"] if payload["latency_ms"] is not None else oracle_base.latency_ms
        ),
        seed=derive_seed(payload["seed"], "detector"),
    )
    config = RunConfig(
        f_lim=payload["f_lim"],
        tracker_kind=kind,
        detector=OracleDetector(oracle, truth),
        tracker_params=tracker_params_from(overrides, kind),
        iou_threshold=payload["iou_thresh"],
        seed=derive_seed(payload["seed"], "tracker"),
        clock=payload["clock"],
    )
    trace = run(sequence, truth, config)
    report = evaluate(trace, truth, payload["iou_thresh"])
    timing = timing_summary(trace)
    return {
        "video": payload["video"],
        "tracker": kind.value,
        "f_lim": payload["f_lim"],
        "report": report,
        "init_ms_median": timing.init.median if timing.init else None,
        "update_ms_median": timing.update.median if timing.update else None,
        "avg_ms": timing.average_time_ms,
    }


def _write_cells_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(
            "video,tracker,f_lim,tp,fp,fn,excluded,precision,recall,f_score,"
            "init_ms_median,update_ms_median,avg_ms\n"
        )
        for row in rows:
            r: MetricsReport = row["report"]
            cols = [
                row["video"],
                row["tracker"],
                str(row["f_lim"]),
                str(r.counts.tp),
                str(r.counts.fp),
                str(r.counts.fn),
                str(r.counts.excluded),
                _format_float(r.precision),
                _format_float(r.recall),
                _format_float(r.f_score),
                "" if row["init_ms_median"] is None else _format_float(row["init_ms_median"]),
                "" if row["update_ms_median"] is None else _format_float(row["update_ms_median"]),
                _format_float(row["avg_ms"]),
            ]
            fh.write(",".join(cols) + "\n")


def _write_pooled_csv(path: Path, rows: list[dict]) -> None:
    groups: dict[tuple[str, int], list[MetricsReport]] = {}
    for row in rows:
        groups.setdefault((row["tracker"], row["f_lim"]), []).append(row["report"])
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(
            "tracker,f_lim,tp,fp,fn,excluded,precision,recall,f_score,macro_f_score\n"
        )
        for (tracker, f_lim) in sorted(groups):
            pooled = pool(groups[(tracker, f_lim)])
            macro = macro_f_score(groups[(tracker, f_lim)])
            fh.write(
                f"{tracker},{f_lim},{pooled.counts.tp},{pooled.counts.fp},"
                f"{pooled.counts.fn},{pooled.counts.excluded},"
                f"{_format_float(pooled.precision)},{_format_float(pooled.recall)},"
                f"{_format_float(pooled.f_score)},{_format_float(macro)}\n"
            )


def _write_plot_tables(out: Path, rows: list[dict]) -> None:
    """Per-tracker f_lim x video F-Score tables, plot-ready."""
    videos = sorted({row["video"] for row in rows})
    trackers = sorted({row["tracker"] for row in rows})
    f_lims = sorted({row["f_lim"] for row in rows})
    by_key = {(r["video"], r["tracker"], r["f_lim"]): r["report"] for r in rows}
    for tracker in trackers:
        path = out / f"fscore_vs_flim_{tracker}.csv"
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("f_lim," + ",".join(videos) + ",pooled\n")
            for f_lim in f_lims:
                reports = [by_key[(v, tracker, f_lim)] for v in videos]
                cols = [str(f_lim)]
                cols += [_format_float(r.f_score) for r in reports]
                cols.append(_format_float(pool(reports).f_score))
                fh.write(",".join(cols) + "\n")


def cmd_sweep(args) -> int:
    overrides = _load_overrides(args.config)
    f_lims = _parse_f_lims(args.f_lims)
    kinds = _parse_trackers(args.trackers)
    jobs = args.jobs
    if args.wall_clock and jobs != 1:
        print("note: --wall-clock forces --jobs 1", file=sys.stderr)
        jobs = 1
    videos = []
    for spec in args.video:
        seq_dir, truth_path = _video_spec(spec)
        if not seq_dir.is_dir():
            raise UsageError(f"sequence directory {seq_dir} does not exist")
        if not truth_path.is_file():
            raise UsageError(f"truth file {truth_path} does not exist")
        videos.append((seq_dir, truth_path))
    if not videos:
        raise UsageError("sweep needs at least one --video")

    payloads = []
    for seq_dir, truth_path in videos:
        for kind in kinds:
            for f_lim in f_lims:
                payloads.append(
                    {
                        "video": seq_dir.name,
                        "seq_dir": str(seq_dir),
                        "truth_path": str(truth_path),
                        "tracker": kind.value,
                        "f_lim": f_lim,
                        "overrides": overrides,
                        "miss_prob": args.miss_prob,
                        "multi_prob": args.multi_prob,
                        "jitter_sigma": args.jitter_sigma,
                        "latency_ms": args.latency_ms,
                        "seed": args.seed,
                        "iou_thresh": args.iou_thresh,
                        "clock": "wall" if args.wall_clock else "simulated",
                    }
                )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(_sweep_cell, payloads))
    else:
        rows = [_sweep_cell(p) for p in payloads]
    rows.sort(key=lambda r: (r["video"], r["tracker"], r["f_lim"]))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_cells_csv(out / "cells.csv", rows)
    _write_pooled_csv(out / "pooled.csv", rows)
    _write_plot_tables(out, rows)
    print(f"wrote {len(rows)} cells to {out / 'cells.csv'}")
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    reports = []
    for spec in args.pair:
        if ":" not in spec:
            raise UsageError(f"--pair expects PREDICTIONS:TRUTH, got {spec!r}")
        pred_path, truth_path = spec.rsplit(":", 1)
        if not Path(pred_path).is_file():
            raise UsageError(f"predictions file {pred_path} does not exist")
        if not Path(truth_path).is_file():
            raise UsageError(f"truth file {truth_path} does not exist")
        try:
            boxes = load_predictions_csv(pred_path)
        except ValueError as exc:
            raise UsageError(f"{pred_path}: {exc}") from exc
        truth = load_annotations(truth_path, len(boxes))
        outcomes = [
            classify_frame(box, truth[i], args.iou_thresh) for i, box in enumerate(boxes)
        ]
        report = MetricsReport.from_counts(accumulate(outcomes), args.iou_thresh)
        reports.append(report)
        print(json.dumps({"pair": spec, **report.to_dict()}))
    if len(reports) > 1:
        pooled = pool(reports)
        print(
            json.dumps(
                {"pair": "pooled", **pooled.to_dict(), "macro_f_score": macro_f_score(reports)}
            )
        )
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="master seed; components derive from it")
    sub.add_argument("--iou-thresh", type=float, default=0.6, help="overlap threshold for TP")
    sub.add_argument("--jobs", type=int, default=1, help="parallel workers (sweep only)")
    sub.add_argument("--config", default=None, help="flat key-value parameter file")
    sub.add_argument(
        "--wall-clock",
        action="store_true",
        help="measure real times instead of the simulated clock (forces --jobs 1)",
    )


def _add_oracle_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--detector", choices=("oracle", "ncc"), default="oracle")
    sub.add_argument("--miss-prob", type=float, default=None)
    sub.add_argument("--multi-prob", type=float, default=None)
    sub.add_argument("--jitter-sigma", type=float, default=None)
    sub.add_argument("--latency-ms", type=float, default=None)
    sub.add_argument("--template-frame", type=int, default=0, help="NCC template source frame")
    sub.add_argument("--scales", default=None, help="NCC scales, e.g. 0.9,1.0,1.1")
    sub.add_argument("--ncc-threshold", type=float, default=None)
    sub.add_argument("--ncc-nms", type=float, default=None)
    sub.add_argument("--ncc-stride", type=int, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackbench",
        description="Benchmark single-target trackers inside a track-by-detection loop.",
    )
    subs = parser.add_subparsers(dest="command")

    synth = subs.add_parser("synth", help="render a synthetic sequence")
    synth.add_argument("--preset", required=True, choices=("calm", "agile", "moving-background"))
    synth.add_argument("--frames", type=int, default=300)
    synth.add_argument("--size", default="640x360")
    synth.add_argument("--target-size", type=int, default=48)
    synth.add_argument("--noise-sigma", type=float, default=2.0)
    synth.add_argument("--no-blur", action="store_true")
    synth.add_argument("--out", required=True)
    _add_common(synth)
    synth.set_defaults(func=cmd_synth)

    runp = subs.add_parser("run", help="run one tracker over one sequence")
    runp.add_argument("--sequence", required=True, help="frame directory")
    runp.add_argument("--truth", default=None, help="ground-truth CSV (default: DIR/truth.csv)")
    runp.add_argument("--tracker", default="mosse", help="mosse | kcf | medianflow")
    runp.add_argument("--f-lim", type=int, required=True, help="frames between re-detections")
    runp.add_argument("--out", default=None, help="directory for predictions/trace/report")
    _add_oracle_flags(runp)
    _add_common(runp)
    runp.set_defaults(func=cmd_run)

    sweep = subs.add_parser("sweep", help="grid of (video, tracker, f_lim) cells")
    sweep.add_argument(
        "--video",
        action="append",
        default=[],
        help="sequence directory (or DIR:TRUTH); repeatable",
    )
    sweep.add_argument("--trackers", default="mosse,kcf,medianflow")
    sweep.add_argument("--f-lims", default=",".join(str(v) for v in DEFAULT_F_LIMS))
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--miss-prob", type=float, default=None)
    sweep.add_argument("--multi-prob", type=float, default=None)
    sweep.add_argument("--jitter-sigma", type=float, default=None)
    sweep.add_argument("--latency-ms", type=float, default=None)
    _add_common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    report = subs.add_parser("report", help="recompute metrics from saved predictions")
    report.add_argument(
        "--pair",
        action="append",
        default=[],
        required=True,
        help="PREDICTIONS:TRUTH, repeatable",
    )
    _add_common(report)
    report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage problems
        code = exc.code
        return int(code) if code is not None else 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return int(args.func(args) or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LoadError, AnnotationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected: internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main(sys.argv[1:]))
