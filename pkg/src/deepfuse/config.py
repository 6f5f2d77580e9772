"""Declarative pipeline configuration: one JSON file drives a whole run.

Unknown keys are rejected everywhere so typos fail loudly before any
training starts. All randomness (folds, solver shuffles, SFFS splits) comes
from the seeds declared here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .evaluation import RowSpec, SffsSettings, SvmSettings
from .reducers import Method, ReductionPlan, Scope, select_layers, valid_method_names
from .svm import CODINGS

_PLAN_KEYS = (
    "scope",
    "target_dim",
    "pca_postprocess",
    "pca_postprocess_dim",
    "chi_bins",
    "cooc_radius",
    "cooc_epsilon",
)


@dataclass(frozen=True)
class PipelineConfig:
    manifest_path: Path
    output_dir: Path
    plans: dict  # method name -> ReductionPlan
    rows: tuple  # of RowSpec
    svm_settings: SvmSettings
    sffs_settings: SffsSettings
    cv_k: int
    cv_seed: int
    raw_tail: int = 4
    layer_ids: Optional[tuple] = None
    layer_rule: Optional[dict] = None  # {"stride": int, "tail": int}


def _reject_unknown(obj: dict, allowed, context: str) -> None:
    unknown = sorted(k for k in obj if k not in allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown} (allowed: {sorted(allowed)})")


def _expect(obj, key, kind, context, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"{context}: missing required key {key!r}")
        return default
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (isinstance(value, bool) and kind is not bool):
        raise ConfigError(f"{context}: key {key!r} must be {kind.__name__}")
    return value


def parse_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _reject_unknown(
        doc,
        ("manifest", "output_dir", "layers", "layer_rule", "raw_tail", "methods",
         "rows", "svm", "sffs", "cv"),
        str(path),
    )
    base = path.parent

    manifest = _expect(doc, "manifest", str, str(path), required=True)
    output_dir = _expect(doc, "output_dir", str, str(path), required=True)

    methods_doc = _expect(doc, "methods", dict, str(path), default={})
    plans = {}
    for name, body in methods_doc.items():
        if name not in valid_method_names():
            raise ConfigError(
                f"{path}: unknown method {name!r}; valid methods: {valid_method_names()}"
            )
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: method {name!r} body must be an object")
        _reject_unknown(body, _PLAN_KEYS, f"{path} method {name!r}")
        kwargs = {}
        if "scope" in body:
            try:
                kwargs["scope"] = Scope(body["scope"])
            except ValueError:
                raise ConfigError(
                    f"{path}: method {name!r}: scope must be 'local' or 'global'"
                )
        for key in _PLAN_KEYS[1:]:
            if key in body:
                kwargs[key] = body[key]
        plans[name] = ReductionPlan(method=Method(name), **kwargs)
    plans.setdefault("raw", ReductionPlan(method=Method.RAW))

    rows_doc = doc.get("rows")
    if not isinstance(rows_doc, list) or not rows_doc:
        raise ConfigError(f"{path}: 'rows' must be a non-empty list")
    rows = []
    seen_names = set()
    for i, body in enumerate(rows_doc):
        context = f"{path} rows[{i}]"
        if not isinstance(body, dict):
            raise ConfigError(f"{context}: must be an object")
        _reject_unknown(body, ("name", "methods", "drop_last", "sffs", "max_size"), context)
        name = _expect(body, "name", str, context, required=True)
        if name in seen_names:
            raise ConfigError(f"{context}: duplicate row name {name!r}")
        seen_names.add(name)
        sffs = _expect(body, "sffs", bool, context, default=False)
        methods = body.get("methods", [])
        if not isinstance(methods, list) or not all(isinstance(m, str) for m in methods):
            raise ConfigError(f"{context}: 'methods' must be a list of method names")
        bad = sorted(m for m in methods if m not in plans)
        if bad:
            raise ConfigError(
                f"{context}: undeclared methods {bad}; valid methods: {valid_method_names()}"
            )
        if not sffs and not methods:
            raise ConfigError(f"{context}: non-SFFS rows need at least one method")
        rows.append(
            RowSpec(
                name=name,
                methods=tuple(methods),
                drop_last=_expect(body, "drop_last", int, context, default=0),
                sffs=sffs,
                max_size=_expect(body, "max_size", int, context) if sffs else None,
            )
        )
        if sffs and rows[-1].max_size is None:
            raise ConfigError(f"{context}: SFFS rows need 'max_size'")

    svm_doc = _expect(doc, "svm", dict, str(path), default={})
    _reject_unknown(svm_doc, ("coding", "C", "tol", "max_epochs", "seed"), f"{path} svm")
    coding = _expect(svm_doc, "coding", str, f"{path} svm", default="one_vs_all")
    if coding not in CODINGS:
        raise ConfigError(f"{path}: svm coding must be one of {CODINGS}")
    svm_settings = SvmSettings(
        coding=coding,
        c=_expect(svm_doc, "C", float, f"{path} svm", default=1.0),
        tol=_expect(svm_doc, "tol", float, f"{path} svm", default=1e-4),
        max_epochs=_expect(svm_doc, "max_epochs", int, f"{path} svm", default=1000),
        seed=_expect(svm_doc, "seed", int, f"{path} svm", default=0),
    )

    sffs_doc = _expect(doc, "sffs", dict, str(path), default={})
    _reject_unknown(sffs_doc, ("validation_fraction", "seed"), f"{path} sffs")
    sffs_settings = SffsSettings(
        validation_fraction=_expect(
            sffs_doc, "validation_fraction", float, f"{path} sffs", default=0.2
        ),
        seed=_expect(sffs_doc, "seed", int, f"{path} sffs", default=0),
    )
    if not 0.0 < sffs_settings.validation_fraction < 1.0:
        raise ConfigError(f"{path}: sffs validation_fraction must be in (0, 1)")

    cv_doc = _expect(doc, "cv", dict, str(path), default={})
    _reject_unknown(cv_doc, ("k", "seed"), f"{path} cv")
    cv_k = _expect(cv_doc, "k", int, f"{path} cv", default=5)
    cv_seed = _expect(cv_doc, "seed", int, f"{path} cv", default=0)
    if cv_k < 2:
        raise ConfigError(f"{path}: cv k must be >= 2")

    layers = doc.get("layers")
    if layers is not None and (
        not isinstance(layers, list) or not all(isinstance(l, str) for l in layers)
    ):
        raise ConfigError(f"{path}: 'layers' must be a list of layer ids")

    layer_rule = doc.get("layer_rule")
    if layer_rule is not None:
        if not isinstance(layer_rule, dict):
            raise ConfigError(f"{path}: 'layer_rule' must be an object")
        _reject_unknown(layer_rule, ("stride", "tail"), f"{path} layer_rule")
        if layers is not None:
            raise ConfigError(f"{path}: give either 'layers' or 'layer_rule', not both")

    raw_tail = _expect(doc, "raw_tail", int, str(path), default=4)
    if raw_tail < 0:
        raise ConfigError(f"{path}: raw_tail must be >= 0")

    return PipelineConfig(
        manifest_path=(base / manifest).resolve(),
        output_dir=base / output_dir,
        plans=plans,
        rows=tuple(rows),
        svm_settings=svm_settings,
        sffs_settings=sffs_settings,
        cv_k=cv_k,
        cv_seed=cv_seed,
        raw_tail=raw_tail,
        layer_ids=tuple(layers) if layers is not None else None,
        layer_rule=dict(layer_rule) if layer_rule is not None else None,
    )


def resolve_layers(config: PipelineConfig, manifest_layer_ids) -> Optional[list]:
    """Layer ids the run uses, applying an explicit list or the selection rule."""
    if config.layer_ids is not None:
        return list(config.layer_ids)
    if config.layer_rule is not None:
        picks = select_layers(
            len(manifest_layer_ids),
            stride=config.layer_rule.get("stride", 10),
            tail=config.layer_rule.get("tail", 4),
        )
        return [manifest_layer_ids[p - 1] for p in picks]
    return None
