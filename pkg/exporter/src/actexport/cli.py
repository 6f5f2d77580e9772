"""Command line: export activations (optionally after fine-tuning).

    actexport export --model tinycnn --nodes nodes.txt --images imgs/ \
        --labels labels.csv --out out/ [--tune epochs=5] [--pretrained]
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .export import ExportError, ExportSpec, export_activations
from .models import UnknownModelError, available_nodes, get_model_entry
from .tune import fine_tune


def _parse_tune(value: str) -> int:
    key, _, count = value.partition("=")
    if key != "epochs" or not count.isdigit():
        raise argparse.ArgumentTypeError("expected epochs=N")
    return int(count)


def _parse_resize(value: str):
    try:
        height, width = (int(part) for part in value.lower().split("x"))
        return height, width
    except ValueError:
        raise argparse.ArgumentTypeError("expected HxW, e.g. 224x224")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actexport",
        description="Dump per-layer CNN activations as .actv tensors plus a manifest.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_export = sub.add_parser("export", help="run the network over images and dump taps")
    p_export.add_argument("--model", required=True, help="registry model name")
    p_export.add_argument("--nodes", help="file with one module name per line")
    p_export.add_argument("--images", help="directory holding the input images")
    p_export.add_argument("--labels", help="CSV mapping image filename to class name")
    p_export.add_argument("--out", help="output directory for manifest and tensors")
    p_export.add_argument("--tune", type=_parse_tune, default=None, metavar="epochs=N",
                          help="fine-tune the head for N epochs before exporting")
    p_export.add_argument("--pretrained", action="store_true",
                          help="load zoo weights instead of seeded random init")
    p_export.add_argument("--checkpoint", help="load weights from this checkpoint")
    p_export.add_argument("--resize", type=_parse_resize, default=None,
                          help="input size HxW (default: the model's native size)")
    p_export.add_argument("--seed", type=int, default=0)
    p_export.add_argument("--list-nodes", action="store_true",
                          help="print the model's tappable nodes and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.list_nodes:
            entry = get_model_entry(args.model)
            for node in available_nodes(entry.build(args.pretrained)):
                print(node)
            return 0
        missing = [name for name in ("nodes", "images", "labels", "out")
                   if getattr(args, name) is None]
        if missing:
            print(f"error: missing required arguments: {missing}", file=sys.stderr)
            return 2
        nodes = [
            line.strip()
            for line in Path(args.nodes).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        spec = ExportSpec(
            model_name=args.model,
            nodes=tuple(nodes),
            image_dir=Path(args.images),
            labels_csv=Path(args.labels),
            out_dir=Path(args.out),
            pretrained=args.pretrained,
            checkpoint=Path(args.checkpoint) if args.checkpoint else None,
            resize=args.resize,
            tune_epochs=args.tune or 0,
            seed=args.seed,
        )
        if args.tune is not None:  # epochs=0 still freezes a checkpoint
            report = fine_tune(spec)
            print(
                f"tuned {report.epochs} epoch(s): training accuracy "
                f"{report.accuracy_before:.3f} -> {report.accuracy_after:.3f}"
            )
            spec = dataclasses.replace(spec, checkpoint=report.checkpoint)
        manifest = export_activations(spec)
        print(f"manifest: {manifest}")
        return 0
    except (ExportError, UnknownModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
