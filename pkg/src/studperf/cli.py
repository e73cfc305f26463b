"""Command-line entry point: ingest, validate, describe, synth and run."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .experiments import (EXPERIMENTS, ConfigError, ExperimentError, config_from_dict, describe,
                          emit_report, load_dataset, load_datasets, run_experiment)
from .features import FeatureError, build_features
from .ingest import SchemaError, validate_bundle
from .learners.validation import FoldError
from .resample import TECHNIQUES, BalanceError
from .synthgen import PlantError, PlantSpec, generate_bundle, write_bundle

logger = logging.getLogger("studperf")

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2
INPUT_ERRORS = (ConfigError, SchemaError, FeatureError, FoldError, BalanceError, PlantError,
                jsonschema.ValidationError, json.JSONDecodeError, FileNotFoundError)


def _packaged(name: str) -> dict:
    return json.loads(resources.files("studperf").joinpath("data", name).read_text())


def default_config() -> dict:
    return _packaged("default_config.json")


def resolve_config(file_values: dict | None = None, flags: dict | None = None) -> dict:
    """Merge settings: command-line flags over the config file over the shipped defaults.

    ``None`` flag values mean "not given". The merged document is checked
    against the packaged JSON schema.
    """
    merged = default_config()
    merged.update(file_values or {})
    merged.update({k: v for k, v in (flags or {}).items() if v is not None})
    if merged.get("jobs") is None:
        merged["jobs"] = os.cpu_count() or 1
    jsonschema.validate(merged, _packaged("config.schema.json"))
    return merged


def _dataset_entry(args) -> dict:
    entry = {"kind": args.kind}
    if args.path:
        entry["path"] = args.path
    if getattr(args, "label_column", None):
        entry["label_column"] = args.label_column
    return entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="studperf", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def dataset_args(sp):
        sp.add_argument("--kind", required=True, choices=["D1", "D2", "D3"],
                        help="D1: course CSV folder; D2: OULAD folder; D3: Canvas person-course CSV")
        sp.add_argument("--path", help="dataset location (default: $EDM_DATA_DIR/<kind>)")
        sp.add_argument("--label-column", help="D3 outcome column (default: grade)")

    sp = sub.add_parser("ingest", help="load a dataset, report issues and write its feature matrix")
    dataset_args(sp)
    sp.add_argument("--out", required=True, help="output directory for features.csv")

    sp = sub.add_parser("validate", help="check a dataset against the table invariants")
    dataset_args(sp)

    sp = sub.add_parser("describe", help="per-feature counts and histograms")
    dataset_args(sp)
    sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("synth", help="write a synthetic course bundle with a planted label rule")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--n", type=int, default=200, help="number of learners (default 200)")
    sp.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    sp.add_argument("--noise", type=float, default=0.05, help="share of labels flipped (default 0.05)")
    sp.add_argument("--pass-rate", type=float, default=0.5, help="target share of passes (default 0.5)")
    sp.add_argument("--informative", default="time=1,verbal=1",
                    help="planted features as name=weight pairs (default time=1,verbal=1)")

    sp = sub.add_parser("run", help="run one experiment and write its tables")
    sp.add_argument("--experiment", required=True, choices=[e for e in EXPERIMENTS])
    sp.add_argument("--config", help="JSON config file (defaults ship with the package)")
    sp.add_argument("--out", help="output directory (config 'out', default results/)")
    sp.add_argument("--seed", type=int, help="root seed (config 'seed', default 0)")
    sp.add_argument("--folds", type=int, help="cross-validation folds, >= 2 (config 'folds', default 10)")
    sp.add_argument("--balance", choices=TECHNIQUES,
                    help="balancing technique for non-balancing experiments (default up_and_down)")
    sp.add_argument("--jobs", type=int, help="worker processes (default: available cores)")
    return p


def _cmd_ingest(args) -> int:
    bundle = load_dataset(_dataset_entry(args), args.kind)
    report = validate_bundle(bundle)
    print(report.summary())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    build_features(bundle).to_csv(out / "features.csv")
    return EXIT_OK if report.ok else EXIT_INVALID


def _cmd_validate(args) -> int:
    report = validate_bundle(load_dataset(_dataset_entry(args), args.kind))
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_INVALID


def _cmd_describe(args) -> int:
    bundle = load_dataset(_dataset_entry(args), args.kind)
    emit_report(describe(bundle), args.out, "describe")
    return EXIT_OK


def _cmd_synth(args) -> int:
    informative = {}
    for part in args.informative.split(","):
        name, _, weight = part.partition("=")
        informative[name.strip()] = float(weight or 1.0)
    spec = PlantSpec(n_learners=args.n, seed=args.seed, noise=args.noise,
                     pass_rate=args.pass_rate, informative=informative)
    bundle, truth = generate_bundle(spec)
    write_bundle(bundle, truth, args.out)
    print(f"wrote {len(bundle)} learners to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    file_values = None
    if args.config:
        file_values = json.loads(Path(args.config).read_text())
    flags = {"experiment": args.experiment, "out": args.out, "seed": args.seed,
             "folds": args.folds, "balance": args.balance, "jobs": args.jobs}
    config = config_from_dict(resolve_config(file_values, flags))
    bundles = load_datasets(config)
    manifest = {
        "tool_version": __version__,
        "config_path": args.config,
        "root_seed": config.seed,
        "datasets": {k: dict(v) for k, v in config.datasets.items()},
        "input_digests": {k: b.digest() for k, b in bundles.items()},
        "config": config.to_dict(),
    }
    # the worker count never changes results, so it stays out of the manifest
    manifest["config"].pop("jobs")
    try:
        tables = run_experiment(config, bundles)
    except INPUT_ERRORS:
        raise
    except Exception as exc:
        raise ExperimentError(str(exc)) from exc
    for t in tables:
        t.provenance["manifest"] = manifest
    paths = emit_report(tables, config.out, config.experiment, manifest)
    print(f"wrote {len(tables)} table(s) to {Path(config.out) / config.experiment}")
    logger.info("%d file(s) written", len(paths))
    return EXIT_OK


COMMANDS = {"ingest": _cmd_ingest, "validate": _cmd_validate, "describe": _cmd_describe,
            "synth": _cmd_synth, "run": _cmd_run}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ExperimentError as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
