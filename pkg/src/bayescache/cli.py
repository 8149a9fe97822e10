"""Command-line surface: simulate, run, eval, ablate.

Exit codes: 0 success, 2 schema error in an input file, 3 configuration
error.  BAYESCACHE_LOG sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import io as bio
from . import metrics
from .errors import (
    BadRange,
    BadShiftSpec,
    BayesCacheError,
    SchemaError,
)
from .pipeline import VARIANTS, run_session, run_variant_suite
from .surrogate import generate_stream

log = logging.getLogger("bayescache")

_TASKS = {"rec": "recognition", "det": "detection",
          "recognition": "recognition", "detection": "detection"}
_FUSIONS = {"entropy": "entropy", "average": "average",
            "init-only": "init_only", "cache-only": "cache_only"}


class ConfigError(Exception):
    """CLI arguments or config files are inconsistent."""


def _cmd_simulate(args) -> int:
    spec = bio.read_sim_config(args.config)
    records = generate_stream(
        spec["bank"], spec["shift"], spec["n_images"],
        proposals_per_image=spec["proposals_per_image"], task=spec["task"],
    )
    header = bio.StreamHeader(
        task=spec["task"], K=spec["bank"].K, d=spec["bank"].d,
        class_names=spec["class_names"], precision=spec["precision"],
        encoding=spec["encoding"],
    )
    bio.write_stream(args.out, header, records)
    log.info("wrote %d images to %s", len(records), args.out)
    print(f"{args.out}: {len(records)} images, task={spec['task']}, "
          f"K={spec['bank'].K}, d={spec['bank'].d}")
    return 0


def _session_config(header: bio.StreamHeader, args):
    if args.task is not None and _TASKS[args.task] != header.task:
        raise ConfigError(
            f"--task {args.task} contradicts the stream header ({header.task})"
        )
    return header.config(
        tau1=args.tau1, tau2=args.tau2, ws=args.ws,
        update_strategy=args.strategy,
        fusion_strategy=_FUSIONS[args.fusion],
    )


def _cmd_run(args) -> int:
    header, records = bio.read_stream(args.stream)
    cfg = _session_config(header, args)
    result = run_session(records, cfg)
    if args.results:
        bio.write_results(args.results, result)
    if args.snapshot_out:
        bio.write_snapshot(args.snapshot_out, result.cache)
    absorbed = sum(o.triple.absorbed for img in result.images
                   for o in img.outcomes)
    print(f"{result.n_images} images processed in "
          f"{result.elapsed_seconds:.2f}s; cache entries={len(result.cache)}, "
          f"absorbed={absorbed}")
    return 0


def _parse_segments(text: str) -> list[tuple[float, float]]:
    segments = []
    for part in text.split(","):
        try:
            lo, hi = part.split(":")
            segments.append((float(lo), float(hi)))
        except ValueError as exc:
            raise ConfigError(f"bad segment {part!r} (expected lo:hi)") from exc
    return segments


def _cmd_eval(args) -> int:
    result = bio.read_results(args.results)
    rows = metrics.segment_report(result, _parse_segments(args.segments))
    if args.format == "csv":
        sys.stdout.write(metrics.report_to_csv(rows))
    else:
        json.dump(rows, sys.stdout, indent=2)
        sys.stdout.write("\n")
    if args.plot_data:
        Path(args.plot_data).write_text(json.dumps(metrics.plot_data(result)),
                                        encoding="utf-8")
    return 0


def _cmd_ablate(args) -> int:
    header, records = bio.read_stream(args.stream)
    cfg = header.config()
    variants = args.variants.split(",")
    alias = {"la": "la", "baseline": "baseline", "full": "full",
             "average": "average", "cache-only": "cache_only",
             "cache_only": "cache_only", "momentum": "momentum",
             "delayed": "delayed"}
    try:
        names = [alias[v] for v in variants]
    except KeyError as exc:
        raise ConfigError(f"unknown variant {exc.args[0]!r}") from exc
    results = run_variant_suite(list(records), cfg, names)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = []
    for name, result in results.items():
        bio.write_results(outdir / f"{name}.results.jsonl", result)
        row = {"variant": name, "cache_entries": len(result.cache),
               "elapsed_seconds": round(result.elapsed_seconds, 3)}
        if header.task == "recognition":
            if name == "cache_only":
                row["accuracy"] = metrics.protocol_accuracy(result)
            else:
                row["accuracy"] = metrics.top1_accuracy(result)
        else:
            row["map50"] = metrics.ap50(result)
        summary.append(row)
    summary_csv = metrics.report_to_csv(summary)
    (outdir / "summary.csv").write_text(summary_csv, encoding="utf-8")
    sys.stdout.write(summary_csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayescache",
        description="Online cache-based refinement of embedding streams",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic stream")
    sim.add_argument("--config", required=True, help="simulation config JSON")
    sim.add_argument("--out", required=True, help="output stream path")
    sim.set_defaults(func=_cmd_simulate)

    run = sub.add_parser("run", help="run an adaptation session over a stream")
    run.add_argument("--stream", required=True)
    run.add_argument("--tau1", type=float, default=0.8)
    run.add_argument("--tau2", type=float, default=0.8)
    run.add_argument("--ws", type=float, default=0.2)
    run.add_argument("--task", choices=sorted(_TASKS), default=None,
                     help="must agree with the stream header when given")
    run.add_argument("--strategy", choices=["count", "momentum", "delayed"],
                     default="count")
    run.add_argument("--fusion", choices=sorted(_FUSIONS), default="entropy")
    run.add_argument("--snapshot-out", default=None)
    run.add_argument("--results", default=None)
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="evaluate a results file by segments")
    ev.add_argument("--results", required=True)
    ev.add_argument("--segments", default="0:1")
    ev.add_argument("--format", choices=["csv", "json"], default="csv")
    ev.add_argument("--plot-data", default=None,
                    help="also write accuracy-over-time / cache-trace JSON here")
    ev.set_defaults(func=_cmd_eval)

    ab = sub.add_parser("ablate", help="run the variant suite over a stream")
    ab.add_argument("--stream", required=True)
    ab.add_argument("--variants", default=",".join(VARIANTS))
    ab.add_argument("--out", required=True, help="output directory")
    ab.set_defaults(func=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BAYESCACHE_LOG", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, BadShiftSpec, BadRange, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except BayesCacheError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
