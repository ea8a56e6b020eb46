"""Command-line interface.

Subcommands: synth, split, plan, eval, preview, validate. Flags can also
be supplied through ``--config FILE`` where the file holds flat
``key = value`` lines with keys equal to the long flag names (a previously
written run.json works too); explicit flags win over config values. Every
writing run records argv, the effective configuration, seed, and tool
version in ``<out>/run.json`` so it can be replayed byte-identically.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
from PIL import Image

from . import __version__, dataset, evaluate, exemplar, synth
from .errors import LogoSynthError

_THREADS_ENV = "LOGOSYNTH_THREADS"


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class _Opt:
    key: str
    parse: Callable[[str], Any]
    default: Any
    help: str
    required: bool = False
    flag: bool = False
    choices: tuple[str, ...] | None = None


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off", ""):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_range(s: str) -> tuple[float, float]:
    parts = s.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'lo,hi', got {s!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_opt_int(s: str) -> int | None:
    return None if s.strip() == "" else int(s)


def _default_threads() -> int:
    raw = os.environ.get(_THREADS_ENV, "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _to_str(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


_COMMON = [
    _Opt("seed", int, 0, "master random seed"),
    _Opt("threads", int, None, f"worker threads (default ${_THREADS_ENV} or 1)"),
    _Opt("verbose", _parse_bool, False, "chattier progress output", flag=True),
]

_SYNTH_SHARED = [
    _Opt("exemplars", str, "", "directory of <class>.png exemplar images", required=True),
    _Opt("contexts", str, "", "directory of context images (scene mode)"),
    _Opt("out", str, "", "output directory", required=True),
    _Opt("classes", str, "", "comma-separated class subset (default: all)"),
    _Opt("context-mode", str, "scene", "scene or clean_black", choices=("scene", "clean_black")),
    _Opt("no-scaling", _parse_bool, False, "disable the scaling transform", flag=True),
    _Opt("no-shearing", _parse_bool, False, "disable the shearing transform", flag=True),
    _Opt("no-rotation", _parse_bool, False, "disable the rotation transform", flag=True),
    _Opt("no-colouring", _parse_bool, False, "disable the colour transform", flag=True),
    _Opt("tilt", _parse_bool, False, "enable out-of-plane tilt", flag=True),
    _Opt("scale-range", _parse_range, (0.05, 0.4), "logo/context width ratio range"),
    _Opt("shear-range", _parse_range, (-0.3, 0.3), "shear coefficient range"),
    _Opt("rotation-range", _parse_range, (0.0, 360.0), "rotation range in degrees"),
    _Opt("colour-range", _parse_range, (0.0, 2.0), "colour factor range"),
    _Opt("tilt-range", _parse_range, (-45.0, 45.0), "tilt range in degrees"),
    _Opt("focal", float, 1000.0, "pinhole focal length for tilt, in pixels"),
    _Opt("canvas", int, 512, "clean-context canvas size in pixels"),
    _Opt("long-side", _parse_opt_int, None, "resize contexts to this long side"),
    _Opt("interp", str, "bilinear", "resampling filter", choices=("nearest", "bilinear")),
    _Opt("alpha-threshold", int, 0, "opacity threshold for tight boxes"),
    _Opt("black-substitute", int, 100, "value replacing pure black before colouring"),
    _Opt("format", str, "png", "output image format", choices=("png", "jpg")),
]

_OPTIONS: dict[str, list[_Opt]] = {
    "synth": _SYNTH_SHARED
    + [
        _Opt("per-class", int, 100, "synthetic images per class"),
        _Opt("name", str, "synthetic", "dataset name stamped into the manifest"),
    ]
    + _COMMON,
    "preview": _SYNTH_SHARED
    + [_Opt("n", int, 4, "number of sample tiles")]
    + _COMMON,
    "split": [
        _Opt("manifest", str, "", "annotations.jsonl or manifest.json to split", required=True),
        _Opt("per-class", int, 10, "training images per class"),
        _Opt("out", str, "", "output directory", required=True),
    ]
    + _COMMON,
    "plan": [
        _Opt("name", str, "", "plan name", required=True, choices=dataset.PLAN_NAMES),
        _Opt("synth", str, "", "synthetic training manifest file"),
        _Opt("real", str, "", "real training manifest file"),
        _Opt("out", str, "", "output directory", required=True),
    ]
    + _COMMON,
    "eval": [
        _Opt("pred", str, "", "predictions JSONL file", required=True),
        _Opt("gt", str, "", "ground-truth annotations file", required=True),
        _Opt("iou", float, 0.5, "IoU threshold for a match"),
        _Opt("interp", str, "all_point", "AP interpolation",
             choices=("all_point", "eleven_point")),
        _Opt("out", str, ".", "directory for report.json"),
    ]
    + _COMMON,
    "validate": [
        _Opt("annotations", str, "", "annotations file to check"),
        _Opt("exemplars", str, "", "exemplar directory to check"),
        _Opt("contexts", str, "", "context directory to check"),
        _Opt("alpha-threshold", int, 0, "opacity threshold for exemplar checks"),
        _Opt("out", str, "", "optional directory for run.json"),
    ]
    + _COMMON,
}

_HELP = {
    "synth": "generate a synthetic context-logo dataset",
    "split": "split a real dataset into train/test per class",
    "plan": "emit a machine-readable training plan",
    "eval": "score predictions with per-class AP and mAP",
    "preview": "render a contact sheet of sample composites",
    "validate": "check annotation files and image directories",
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="logosynth", description=__doc__)
    parser.add_argument("--version", action="version", version=f"logosynth {__version__}")
    subs = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name, opts in _OPTIONS.items():
        sp = subs.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", default=None, help="flat key=value config file or run.json")
        for o in opts:
            flag = f"--{o.key}"
            if o.flag:
                sp.add_argument(flag, dest=o.key, action="store_const", const=True,
                                default=None, help=o.help)
            else:
                sp.add_argument(flag, dest=o.key, type=str, default=None,
                                metavar=o.key.upper().replace("-", "_"), help=o.help)
    return parser


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines ('#' comments); a run.json is also accepted."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        mapping = doc.get("effective_config", doc)
        return {str(k): _to_str(v) if not isinstance(v, str) else v for k, v in mapping.items()}
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{n}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def _resolve(name: str, ns: argparse.Namespace, parser: _Parser) -> dict[str, Any]:
    file_values: dict[str, str] = {}
    if ns.config:
        file_values = load_config_file(ns.config)
    known = {o.key for o in _OPTIONS[name]}
    unknown = set(file_values) - known
    if unknown and ns.config and not str(ns.config).endswith(".json"):
        parser.error(f"unknown config keys for {name}: {sorted(unknown)}")
    resolved: dict[str, Any] = {}
    for o in _OPTIONS[name]:
        raw = getattr(ns, o.key)
        if raw is not None:
            value = raw if o.flag else o.parse(raw)
        elif o.key in file_values:
            value = o.parse(file_values[o.key]) if not o.flag else _parse_bool(file_values[o.key])
        elif o.key == "threads":
            value = _default_threads()
        else:
            value = o.default
        if o.choices and value not in o.choices:
            parser.error(f"--{o.key} must be one of {', '.join(o.choices)}")
        if o.required and (value == "" or value is None):
            parser.error(f"the following argument is required: --{o.key}")
        resolved[o.key] = value
    return resolved


def _effective(name: str, resolved: dict[str, Any]) -> dict[str, str]:
    return {o.key: _to_str(resolved[o.key]) for o in _OPTIONS[name]}


def _write_run_json(out_dir: Path, name: str, argv: list[str], resolved: dict[str, Any]):
    doc = {
        "schema_version": 1,
        "kind": "run_record",
        "tool": "logosynth",
        "version": __version__,
        "subcommand": name,
        "argv": list(argv),
        "seed": int(resolved.get("seed", 0)),
        "effective_config": _effective(name, resolved),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _synth_config(o: dict[str, Any]) -> synth.SynthConfig:
    return synth.SynthConfig(
        images_per_class=o.get("per-class", 1),
        context_mode=o["context-mode"],
        enable_scaling=not o["no-scaling"],
        enable_shearing=not o["no-shearing"],
        enable_rotation=not o["no-rotation"],
        enable_colouring=not o["no-colouring"],
        enable_tilt=o["tilt"],
        scale_range=o["scale-range"],
        shear_range=o["shear-range"],
        rotation_range=o["rotation-range"],
        colour_r_range=o["colour-range"],
        tilt_range=o["tilt-range"],
        focal=o["focal"],
        clean_canvas_size=o["canvas"],
        master_seed=o["seed"],
        output_long_side=o["long-side"],
        interpolation=o["interp"],
        alpha_threshold=o["alpha-threshold"],
        black_substitute=o["black-substitute"],
        image_format=o["format"],
    )


def _load_registry(o: dict[str, Any]) -> exemplar.Registry:
    contexts = o["contexts"] or None
    return exemplar.load_registry(
        o["exemplars"], contexts, alpha_threshold=o["alpha-threshold"], threads=o["threads"]
    )


def _class_filter(o: dict[str, Any]) -> list[str] | None:
    raw = o.get("classes", "")
    if not raw:
        return None
    return [c.strip() for c in raw.split(",") if c.strip()]


def _cmd_synth(o: dict[str, Any], argv: list[str]) -> int:
    config = _synth_config(o)
    registry = _load_registry(o)
    out_dir = Path(o["out"])
    _write_run_json(out_dir, "synth", argv, o)
    manifest = synth.generate_dataset(
        registry,
        config,
        out_dir,
        threads=o["threads"],
        dataset_name=o["name"],
        class_names=_class_filter(o),
    )
    print(
        f"wrote {len(manifest.images)} images, {len(manifest.annotations)} annotations "
        f"for {len(manifest.classes)} classes to {out_dir}"
    )
    return 0


def _cmd_preview(o: dict[str, Any], argv: list[str]) -> int:
    n = o["n"]
    if n < 1:
        raise ValueError("preview needs --n >= 1")
    config = _synth_config(o)
    registry = _load_registry(o)
    out_dir = Path(o["out"])
    _write_run_json(out_dir, "preview", argv, o)
    sheet = synth.render_preview(registry, config, n)
    path = out_dir / "preview.png"
    Image.fromarray(sheet).save(path, format="PNG")
    print(f"wrote {path} ({n} tiles)")
    return 0


def _cmd_split(o: dict[str, Any], argv: list[str]) -> int:
    manifest = dataset.load_manifest(o["manifest"])
    train, test = dataset.split_dataset(manifest, o["per-class"], o["seed"])
    out_dir = Path(o["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_run_json(out_dir, "split", argv, o)
    dataset.write_annotations(train, out_dir / "train.jsonl")
    dataset.write_annotations(test, out_dir / "test.jsonl")
    print(
        f"split {len(manifest.images)} images into {len(train.images)} train / "
        f"{len(test.images)} test"
    )
    return 0


def _cmd_plan(o: dict[str, Any], argv: list[str]) -> int:
    synth_m = dataset.load_manifest(o["synth"]) if o["synth"] else None
    real_m = dataset.load_manifest(o["real"]) if o["real"] else None
    plan = dataset.make_plan(
        o["name"], synth_m, real_m, synth_path=o["synth"], real_path=o["real"]
    )
    out_dir = Path(o["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_run_json(out_dir, "plan", argv, o)
    dataset.write_plan(plan, out_dir / "plan.json")
    print(f"wrote plan {plan.plan_name!r} with {len(plan.stages)} stage(s)")
    return 0


def _cmd_eval(o: dict[str, Any], argv: list[str]) -> int:
    detections = evaluate.read_detections(o["pred"])
    gt = dataset.load_manifest(o["gt"])
    report = evaluate.evaluate(
        detections, gt, iou_threshold=o["iou"], interpolation=o["interp"]
    )
    out_dir = Path(o["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_run_json(out_dir, "eval", argv, o)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    print(report.format_table())
    return 0


def _cmd_validate(o: dict[str, Any], argv: list[str]) -> int:
    checked = False
    if o["annotations"]:
        manifest = dataset.load_manifest(o["annotations"])
        print(
            f"{o['annotations']}: ok ({len(manifest.images)} images, "
            f"{len(manifest.annotations)} annotations, {len(manifest.classes)} classes)"
        )
        checked = True
    if o["exemplars"]:
        registry = exemplar.load_registry(
            o["exemplars"],
            o["contexts"] or None,
            alpha_threshold=o["alpha-threshold"],
            threads=o["threads"],
        )
        print(
            f"{o['exemplars']}: ok ({len(registry.exemplars)} classes, "
            f"{len(registry.contexts)} contexts)"
        )
        checked = True
    if not checked:
        raise ValueError("nothing to validate: pass --annotations and/or --exemplars")
    if o["out"]:
        _write_run_json(Path(o["out"]), "validate", argv, o)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "split": _cmd_split,
    "plan": _cmd_plan,
    "eval": _cmd_eval,
    "preview": _cmd_preview,
    "validate": _cmd_validate,
}


def run(argv: list[str]) -> int:
    """Parse and execute; returns the process exit code."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if not ns.subcommand:
        parser.print_usage(sys.stderr)
        return 1
    try:
        resolved = _resolve(ns.subcommand, ns, parser)
    except (ValueError, OSError) as exc:
        print(f"logosynth: error: {exc}", file=sys.stderr)
        return 1
    if resolved.get("verbose"):
        print(f"logosynth {ns.subcommand} (seed {resolved.get('seed')}, "
              f"threads {resolved.get('threads')})", file=sys.stderr)
    try:
        return _COMMANDS[ns.subcommand](resolved, argv)
    except ValueError as exc:
        print(f"logosynth: error: {exc}", file=sys.stderr)
        return 1
    except LogoSynthError as exc:
        print(f"logosynth: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"logosynth: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
