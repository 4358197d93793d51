"""Command-line pipeline: synthesize, score, analyze, select, report, validate.

Every subcommand is deterministic given its inputs and seed, never mutates its
inputs, and echoes the effective configuration into a ``<output>.meta.json``
sidecar for provenance. Exit codes: 0 success, 2 validation or configuration
error, 3 incomplete coverage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .data import (
    Dataset,
    read_dataset,
    read_score_log,
    read_score_log_lenient,
    validate_dataset_file,
    validate_score_log_file,
    write_dataset,
    write_score_log,
)
from .dynamics import (
    confidence_gap_density,
    data_map_rows,
    read_dynamics,
    validate_dynamics_file,
    write_dynamics,
)
from .errors import ConfigError, CoverageError, McqLensError
from .selection import SelectionConfig, apply_selection, preset, preset_names
from .synthesis import SynthesisConfig, TemplateRegistry, build_dataset, read_triples, validate_triples_file
from . import dynamics as dynamics_mod
from .toyscorer import TrainRun, evaluate_accuracy, train_toy_model

ENV_CONFIG = "MCQLENS_CONFIG"
EXIT_OK = 0
EXIT_INVALID = 2
EXIT_COVERAGE = 3


def _load_config_file(path_arg: str | None) -> dict:
    path = path_arg or os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return obj


def _section(config: dict, name: str) -> dict:
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return section


def _merge(defaults: dict, section: dict, overrides: dict) -> dict:
    """File section over defaults, then explicit CLI flags over both."""
    merged = dict(defaults)
    unknown = set(section) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged.update(section)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def _write_meta(out_path, command: str, inputs: dict, config: dict, extra: dict | None = None):
    meta = {"command": command, "inputs": inputs, "config": config}
    if extra:
        meta.update(extra)
    Path(f"{out_path}.meta.json").write_text(
        json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _write_tsv(path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_cell(v) for v in row) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_synth(args) -> int:
    config = _section(_load_config_file(args.config), "synthesis")
    effective = _merge(
        {"option_count": 3, "rng_seed": 0, "max_resample": 1000},
        config,
        {"option_count": args.options, "rng_seed": args.seed, "max_resample": args.max_resample},
    )
    registry = (
        TemplateRegistry.from_file(args.registry) if args.registry else TemplateRegistry.default()
    )
    triples = read_triples(args.triples)
    if not triples:
        print(f"warning: {args.triples}: no triples, writing an empty dataset", file=sys.stderr)
    cfg = SynthesisConfig(
        option_count=effective["option_count"],
        rng_seed=effective["rng_seed"],
        max_resample=effective["max_resample"],
    )
    dataset = build_dataset(triples, registry, cfg)
    for skip in dataset.metadata.get("skipped", []):
        print(f"warning: skipped triple {skip['source_id']}: {skip['reason']}", file=sys.stderr)
    write_dataset(dataset, args.out, write_sidecar=False)
    _write_meta(
        args.out,
        "synth",
        {"triples": args.triples, "registry": args.registry or "builtin"},
        effective,
        {"result": dataset.metadata},
    )
    print(f"wrote {len(dataset)} pairs to {args.out} ({len(dataset.metadata['skipped'])} skipped)")
    return EXIT_OK


def _cmd_train_toy(args) -> int:
    config = _section(_load_config_file(args.config), "train")
    effective = _merge(
        {"epochs": 5, "margin": 1.0, "rng_seed": 0, "alpha": 0.5, "learning_rate": 0.3,
         "lower_answer": True},
        config,
        {
            "epochs": args.epochs,
            "margin": args.margin,
            "rng_seed": args.seed,
            "alpha": args.alpha,
            "learning_rate": args.learning_rate,
        },
    )
    dataset = read_dataset(args.dataset)
    if len(dataset) == 0:
        raise ConfigError(f"{args.dataset}: cannot train on an empty dataset")
    run = TrainRun(
        epochs=effective["epochs"],
        margin=effective["margin"],
        rng_seed=effective["rng_seed"],
        lower_answer=effective["lower_answer"],
    )
    _, log = train_toy_model(
        dataset, run, alpha=effective["alpha"], learning_rate=effective["learning_rate"]
    )
    write_score_log(log, args.out)
    accuracy = evaluate_accuracy(log[-1], dataset)
    _write_meta(
        args.out,
        "train-toy",
        {"dataset": args.dataset},
        effective,
        {"result": {"checkpoints": len(log), "final_checkpoint_accuracy": accuracy}},
    )
    print(
        f"wrote {len(log)} checkpoints to {args.out}"
        f" (accuracy at checkpoint {len(log)}: {accuracy:.3f})"
    )
    return EXIT_OK


def _cmd_dynamics(args) -> int:
    config = _section(_load_config_file(args.config), "dynamics")
    effective = _merge(
        {"region_fraction": 0.5, "lenient": False},
        config,
        {"region_fraction": args.fraction, "lenient": args.lenient or None},
    )
    dataset = read_dataset(args.dataset)
    if effective["lenient"]:
        matrices, coverage = read_score_log_lenient(args.scores, dataset)
        complete = {
            pid for pid, present in coverage.items() if len(present) == len(matrices)
        }
        skipped = len(dataset) - len(complete)
        if skipped:
            print(
                f"warning: {skipped} pairs lack full checkpoint coverage and are skipped",
                file=sys.stderr,
            )
        dataset = Dataset(
            tuple(p for p in dataset if p.pair_id in complete), dataset.metadata
        )
        matrices = [
            type(mat)(mat.checkpoint_index, {k: v for k, v in mat.scores.items() if k in complete})
            for mat in matrices
        ]
    else:
        matrices = read_score_log(args.scores, dataset)
    records = dynamics_mod.aggregate_dynamics(matrices, dataset)
    write_dynamics(records, args.out)
    map_path = args.map or f"{args.out}.map.tsv"
    rows = data_map_rows(records, effective["region_fraction"])
    _write_tsv(
        map_path,
        ["pair_id", "pair_confidence_mean", "pair_confidence_var", "region"],
        rows,
    )
    _write_meta(
        args.out,
        "dynamics",
        {"dataset": args.dataset, "scores": args.scores},
        effective,
        {"result": {"records": len(records), "checkpoints": len(matrices), "map": str(map_path)}},
    )
    print(f"wrote {len(records)} dynamics records to {args.out}")
    return EXIT_OK


def _build_selection_config(args, file_section: dict) -> SelectionConfig:
    if args.preset:
        base = preset(args.preset)
    elif file_section:
        base = SelectionConfig.from_dict(file_section)
    else:
        base = SelectionConfig()
    overrides = {
        "mislabeled_threshold": args.mislabeled_threshold,
        "false_negative_threshold": args.false_negative_threshold,
        "region_fraction": args.fraction,
        "region": args.region,
        "rng_seed": args.seed,
    }
    flags = {
        "difficult_choice": args.difficult_choice,
        "mislabeled": args.mislabeled,
        "false_negative": args.false_negative,
    }
    overrides.update({k: True for k, v in flags.items() if v})
    return replace(base, **{k: v for k, v in overrides.items() if v is not None})


def _cmd_select(args) -> int:
    file_section = _section(_load_config_file(args.config), "selection")
    cfg = _build_selection_config(args, file_section)
    dataset = read_dataset(args.dataset)
    records = read_dynamics(args.dynamics)
    refined, report = apply_selection(dataset, records, cfg)
    write_dataset(refined, args.out, write_sidecar=False)
    report_path = args.report or f"{args.out}.report.json"
    Path(report_path).parent.mkdir(parents=True, exist_ok=True)
    Path(report_path).write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    _write_meta(
        args.out,
        "select",
        {"dataset": args.dataset, "dynamics": args.dynamics},
        cfg.to_dict(),
        {"result": {"report": str(report_path), "counts": report.counts}},
    )
    print(report.table())
    return EXIT_OK


def _cmd_report(args) -> int:
    config = _section(_load_config_file(args.config), "report")
    effective = _merge(
        {"bins": 40, "region_fraction": 0.5},
        config,
        {"bins": args.bins, "region_fraction": args.fraction},
    )
    records = read_dynamics(args.dynamics)
    prefix = args.out_prefix
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)

    map_path = f"{prefix}.map.tsv"
    _write_tsv(
        map_path,
        ["pair_id", "pair_confidence_mean", "pair_confidence_var", "region"],
        data_map_rows(records, effective["region_fraction"]),
    )
    density = confidence_gap_density(records, bins=effective["bins"])
    gap_path = f"{prefix}.gap.tsv"
    gap_rows = [
        (density.bin_edges[i], density.bin_edges[i + 1],
         density.pairwise_mass[i], density.softmax_mass[i])
        for i in range(len(density.pairwise_mass))
    ]
    _write_tsv(gap_path, ["bin_left", "bin_right", "pairwise_mass", "softmax_mass"], gap_rows)
    outputs = {"map": map_path, "gap": gap_path}
    if args.plot:
        outputs.update(_render_plots(records, density, prefix, effective["region_fraction"]))
    _write_meta(
        prefix + ".report",
        "report",
        {"dynamics": args.dynamics},
        effective,
        {"result": {"records": len(records), "outputs": outputs}},
    )
    print(f"wrote {', '.join(sorted(outputs))} under prefix {prefix}")
    return EXIT_OK


def _render_plots(records, density, prefix: str, fraction: float) -> dict:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "mcqlens"

    region_colors = {"hard": "tab:red", "easy": "tab:green", "ambiguous": "tab:orange",
                     "none": "tab:gray"}
    rows = data_map_rows(records, fraction)
    fig, ax = plt.subplots(figsize=(5, 4))
    for region, color in region_colors.items():
        xs = [r[2] for r in rows if r[3] == region]
        ys = [r[1] for r in rows if r[3] == region]
        if xs:
            ax.scatter(xs, ys, s=8, c=color, label=region, alpha=0.7, linewidths=0)
    ax.set_xlabel("variability")
    ax.set_ylabel("pair confidence")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    map_svg = f"{prefix}.map.svg"
    fig.savefig(map_svg, format="svg", metadata={"Date": None})
    plt.close(fig)

    centers = [
        (density.bin_edges[i] + density.bin_edges[i + 1]) / 2
        for i in range(len(density.pairwise_mass))
    ]
    width = density.bin_edges[1] - density.bin_edges[0]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(centers, density.pairwise_mass, width=width, alpha=0.6, label="pairwise")
    ax.bar(centers, density.softmax_mass, width=width, alpha=0.6, label="softmax")
    ax.set_xlabel("answer confidence - distractor confidence")
    ax.set_ylabel("mass")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    gap_svg = f"{prefix}.gap.svg"
    fig.savefig(gap_svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return {"map_svg": map_svg, "gap_svg": gap_svg}


_VALIDATORS = {
    "dataset": lambda path: (validate_dataset_file(path), None),
    "scores": lambda path: validate_score_log_file(path),
    "triples": lambda path: (validate_triples_file(path), None),
    "dynamics": lambda path: (validate_dynamics_file(path), None),
}


def _detect_kind(path) -> str | None:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    return None
                if not isinstance(obj, dict):
                    return None
                if {"pair_id", "question", "options"} <= set(obj):
                    return "dataset"
                if {"checkpoint", "pair_id", "scores"} <= set(obj):
                    return "scores"
                if {"head", "relation", "tail"} <= set(obj):
                    return "triples"
                if {"pair_id", "answer_confidence_mean"} <= set(obj):
                    return "dynamics"
                return None
    except OSError:
        return None
    return None


def _cmd_validate(args) -> int:
    if not Path(args.path).exists():
        print(f"{args.path}: file not found", file=sys.stderr)
        return EXIT_INVALID
    kind = args.kind
    if kind == "auto":
        kind = _detect_kind(args.path)
        if kind is None:
            print(
                f"{args.path}: cannot detect the file kind; pass --kind explicitly",
                file=sys.stderr,
            )
            return EXIT_INVALID
    diagnostics, summary = _VALIDATORS[kind](args.path)
    for line in diagnostics:
        print(line)
    if diagnostics:
        print(f"{args.path}: {len(diagnostics)} problem(s) found")
        return EXIT_INVALID
    if summary:
        detail = ", ".join(f"{summary[k]} {k}" for k in sorted(summary))
        print(f"{args.path}: OK ({kind}, {detail})")
    else:
        print(f"{args.path}: OK ({kind})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcqlens",
        description="Diagnose and refine synthetic multiple-choice QA datasets"
        " from checkpoint score dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize QA pairs from knowledge triples")
    p.add_argument("triples", help="triples JSONL file")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    p.add_argument("--registry", help="template registry JSON (defaults to the built-ins)")
    p.add_argument("--options", "-m", type=int, help="options per pair (default 3)")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--max-resample", type=int, dest="max_resample", help="distractor draw budget")
    p.add_argument("--config", help=f"config file (or ${ENV_CONFIG})")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("train-toy", help="train the toy scorer and emit a checkpoint score log")
    p.add_argument("dataset", help="dataset JSONL file")
    p.add_argument("--out", required=True, help="output score-log JSONL")
    p.add_argument("--epochs", type=int, help="checkpoints to emit (default 5)")
    p.add_argument("--margin", type=float, help="ranking-loss margin (default 1.0)")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--alpha", type=float, help="smoothing mass (default 0.5)")
    p.add_argument("--seed", type=int, help="training seed")
    p.add_argument("--config", help=f"config file (or ${ENV_CONFIG})")
    p.set_defaults(handler=_cmd_train_toy)

    p = sub.add_parser("dynamics", help="aggregate checkpoint confidences per pair")
    p.add_argument("dataset", help="dataset JSONL file")
    p.add_argument("scores", help="score-log JSONL file")
    p.add_argument("--out", required=True, help="output dynamics JSONL")
    p.add_argument("--map", help="data-map TSV path (default <out>.map.tsv)")
    p.add_argument("--fraction", type=float, help="region fraction for map labels (default 0.5)")
    p.add_argument("--lenient", action="store_true", help="skip pairs with partial coverage")
    p.add_argument("--config", help=f"config file (or ${ENV_CONFIG})")
    p.set_defaults(handler=_cmd_dynamics)

    p = sub.add_parser("select", help="refine a dataset from its dynamics records")
    p.add_argument("dataset", help="dataset JSONL file")
    p.add_argument("dynamics", help="dynamics JSONL file")
    p.add_argument("--out", required=True, help="output refined dataset JSONL")
    p.add_argument("--report", help="report JSON path (default <out>.report.json)")
    p.add_argument("--preset", choices=preset_names(), help="named strategy pipeline")
    p.add_argument("--difficult-choice", action="store_true", dest="difficult_choice")
    p.add_argument("--mislabeled", action="store_true")
    p.add_argument("--false-negative", action="store_true", dest="false_negative")
    p.add_argument("--region", choices=REGION_ARG_CHOICES)
    p.add_argument("--fraction", type=float, help="region fraction")
    p.add_argument("--mislabeled-threshold", type=float, dest="mislabeled_threshold")
    p.add_argument("--false-negative-threshold", type=float, dest="false_negative_threshold")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help=f"config file (or ${ENV_CONFIG})")
    p.set_defaults(handler=_cmd_select)

    p = sub.add_parser("report", help="emit data-map and gap-density tables (and plots)")
    p.add_argument("dynamics", help="dynamics JSONL file")
    p.add_argument("--out-prefix", required=True, dest="out_prefix")
    p.add_argument("--bins", type=int, help="histogram bins (default 40)")
    p.add_argument("--fraction", type=float, help="region fraction for map labels")
    p.add_argument("--plot", action="store_true", help="also render SVG figures")
    p.add_argument("--config", help=f"config file (or ${ENV_CONFIG})")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("validate", help="diagnose a data file against its schema")
    p.add_argument("path")
    p.add_argument("--kind", choices=("auto", "dataset", "scores", "triples", "dynamics"),
                   default="auto")
    p.set_defaults(handler=_cmd_validate)
    return parser


REGION_ARG_CHOICES = ("easy", "ambiguous", "hard", "none")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CoverageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except McqLensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
