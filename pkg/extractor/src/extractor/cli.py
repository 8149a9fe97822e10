"""Command line: extract an image folder into a record stream."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .backends import ModelLoadError
from .extract import ExtractorConfig, extract, iter_image_files

_TASKS = {"rec": "recognition", "det": "detection",
          "recognition": "recognition", "detection": "detection"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayescache-extract",
        description="Embed an image folder and write a record stream",
    )
    parser.add_argument("--model", required=True,
                        help="model id, or builtin[:seed[:dim]] for the "
                             "weights-free featurizer")
    parser.add_argument("--task", choices=sorted(_TASKS), required=True)
    parser.add_argument("--classes", required=True,
                        help="text file with one class name per line")
    parser.add_argument("--images", required=True, help="image folder")
    parser.add_argument("--out", required=True, help="output stream path")
    parser.add_argument("--template", default=None,
                        help="prompt template containing '[class k]'")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--score-floor", type=float, default=0.0,
                        help="detection: drop proposals below this confidence")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BAYESCACHE_LOG", "WARNING"))
    args = build_parser().parse_args(argv)
    try:
        class_names = [line.strip() for line
                       in Path(args.classes).read_text(encoding="utf-8").splitlines()
                       if line.strip()]
        kwargs = {}
        if args.template is not None:
            kwargs["prompt_template"] = args.template
        cfg = ExtractorConfig(
            model_id=args.model, task=_TASKS[args.task],
            class_names=class_names, output_path=args.out,
            device=args.device, score_floor=args.score_floor, **kwargs,
        )
        images = iter_image_files(args.images)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    try:
        report = extract(images, cfg)
    except ModelLoadError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 4
    print(f"{args.out}: {report.n_images} images, "
          f"{report.n_proposals} proposals, {len(report.skipped)} skipped")
    return 0


if __name__ == "__main__":
    sys.exit(main())
