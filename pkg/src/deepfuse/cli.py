"""Command-line surface: validate manifests, run configured pipelines, compare results.

Exit code is 0 exactly when the command's report contains no errors. Output
files are written atomically (temp file + rename) and runs are pure functions
of the config, manifest and tensor bytes, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_config, resolve_layers
from .errors import ConfigError, FormatError, ValidationError
from .evaluation import run_cv, wilcoxon_signed_rank
from .tensor_store import load_manifest, stratified_folds

RESULTS_FORMAT_VERSION = 1


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def cmd_validate(manifest_path: str, fmt: str = "table") -> int:
    problems = []
    manifest = None
    try:
        manifest = load_manifest(manifest_path)
    except (FormatError, ValidationError, OSError) as exc:
        problems.append(str(exc))
    if manifest is not None:
        for sample in manifest.samples:
            for layer in manifest.layers:
                try:
                    manifest.load_tensor(sample, layer.id)
                except (FormatError, ValidationError, OSError) as exc:
                    problems.append(str(exc))
    if fmt == "json":
        print(json.dumps({"ok": not problems, "problems": problems}, indent=2))
    else:
        if problems:
            for p in problems:
                print(f"error: {p}")
            print(f"{len(problems)} problem(s) found")
        else:
            print("ok")
    return 0 if not problems else 1


def _results_document(config, cv_results) -> dict:
    rows = []
    for result in cv_results:
        row = {
            "id": result.row.name,
            "fold_accuracies": result.fold_accuracies,
            "mean_accuracy": result.mean_accuracy,
        }
        if result.selections is not None:
            row["sffs"] = [
                {
                    "chosen": list(sel.chosen_ids),
                    "criterion_trace": list(sel.criterion_trace),
                }
                for sel in result.selections
            ]
        rows.append(row)
    return {
        "format_version": RESULTS_FORMAT_VERSION,
        "manifest": str(config.manifest_path),
        "cv": {"k": config.cv_k, "seed": config.cv_seed},
        "rows": rows,
    }


def _results_table(doc: dict) -> str:
    k = doc["cv"]["k"]
    headers = ["Method"] + [f"fold{i}" for i in range(k)] + ["Avg"]
    lines = [headers]
    for row in doc["rows"]:
        lines.append(
            [row["id"]]
            + [f"{a:.4f}" for a in row["fold_accuracies"]]
            + [f"{row['mean_accuracy']:.4f}"]
        )
    widths = [max(len(line[i]) for line in lines) for i in range(len(headers))]
    rendered = []
    for line in lines:
        rendered.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(rendered) + "\n"


def cmd_run(config_path: str, fmt: str = "table", jobs: int = 1) -> int:
    config = parse_config(config_path)
    manifest = load_manifest(config.manifest_path)
    layer_ids = resolve_layers(config, [l.id for l in manifest.layers])
    folds = stratified_folds(manifest.labels(), config.cv_k, config.cv_seed)
    models_dir = config.output_dir / "models"
    results = run_cv(
        manifest,
        folds,
        plans=config.plans,
        rows=list(config.rows),
        svm_settings=config.svm_settings,
        sffs_settings=config.sffs_settings,
        raw_tail=config.raw_tail,
        layer_ids=layer_ids,
        jobs=jobs,
        sink=models_dir,
    )
    doc = _results_document(config, results)
    json_text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    table_text = _results_table(doc)
    _atomic_write_text(config.output_dir / "results.json", json_text)
    _atomic_write_text(config.output_dir / "results.txt", table_text)
    print(json_text if fmt == "json" else table_text, end="")
    return 0


def cmd_compare(results_a: str, results_b: str, fmt: str = "table") -> int:
    docs = []
    for p in (results_a, results_b):
        try:
            docs.append(json.loads(Path(p).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read results file {p}: {exc}", file=sys.stderr)
            return 1
    means = []
    for doc, p in zip(docs, (results_a, results_b)):
        try:
            means.append({row["id"]: row["mean_accuracy"] for row in doc["rows"]})
        except (KeyError, TypeError):
            print(f"error: {p} is not a results file", file=sys.stderr)
            return 1
    ids_a, ids_b = set(means[0]), set(means[1])
    if ids_a != ids_b:
        print(
            "error: result ids do not match\n"
            f"  only in {results_a}: {sorted(ids_a - ids_b)}\n"
            f"  only in {results_b}: {sorted(ids_b - ids_a)}",
            file=sys.stderr,
        )
        return 1
    ids = sorted(ids_a)
    a = np.array([means[0][i] for i in ids])
    b = np.array([means[1][i] for i in ids])
    outcome = wilcoxon_signed_rank(a, b)
    if fmt == "json":
        print(
            json.dumps(
                {
                    "ids": ids,
                    "n_effective": outcome.n_effective,
                    "w_statistic": outcome.w_statistic,
                    "p_value": outcome.p_value,
                    "method": outcome.method,
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print(f"paired ids: {len(ids)}")
        print(f"W = {outcome.w_statistic:g}   n = {outcome.n_effective}")
        print(f"two-sided p = {outcome.p_value:.6g}   ({outcome.method})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepfuse",
        description="Activation-tensor reduction, SVM ensembles and CV evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a manifest and all its tensors")
    p_validate.add_argument("manifest")
    p_validate.add_argument("--format", choices=("json", "table"), default="table")

    p_run = sub.add_parser("run", help="run the configured CV pipeline")
    p_run.add_argument("config")
    p_run.add_argument("--format", choices=("json", "table"), default="table")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel fold workers")

    p_compare = sub.add_parser("compare", help="Wilcoxon signed-rank test of two results files")
    p_compare.add_argument("results_a")
    p_compare.add_argument("results_b")
    p_compare.add_argument("--format", choices=("json", "table"), default="table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.manifest, fmt=args.format)
        if args.command == "run":
            return cmd_run(args.config, fmt=args.format, jobs=args.jobs)
        if args.command == "compare":
            return cmd_compare(args.results_a, args.results_b, fmt=args.format)
    except (ConfigError, FormatError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
