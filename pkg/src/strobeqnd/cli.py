"""Command-line entry point: ``strobeqnd run | validate | plotdata``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

from . import __version__, config
from .errors import ConfigError, NumericalError
from .plotdata import SchemaError, emit_plotdata

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def default_config_text(experiment: str) -> str:
    """Shipped default YAML for ``experiment``."""
    return resources.files("strobeqnd").joinpath("configs", f"{experiment}.yaml").read_text()


def _load(args) -> config.RunConfig:
    if args.config:
        cfg = config.load(args.config)
    elif getattr(args, "experiment", None):
        cfg = config.loads(default_config_text(args.experiment), f"<default {args.experiment}>")
    else:
        raise ConfigError([("--config", "a config file or --experiment is required")])
    overrides = {}
    for name in ("seed", "trajectories", "threads"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if overrides:
        data = config.to_dict(cfg)
        data.update(overrides)
        cfg = config.from_dict(data)
    return cfg


def cmd_run(args) -> int:
    from .experiments import run_experiment

    cfg = _load(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files = run_experiment(cfg, out)
    (out / "config.yaml").write_text(config.dumps(cfg))
    manifest = config.make_manifest(cfg, files, time.perf_counter() - start, out)
    (out / "manifest.json").write_text(manifest.to_json())
    for f in files:
        print(f)
    print(out / "manifest.json")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    print("ok")
    print(config.dumps(cfg), end="")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    try:
        files = emit_plotdata(args.csv, args.out or Path(args.csv).parent, args.kind)
    except FileNotFoundError as exc:
        raise ConfigError([(str(args.csv), f"cannot read: {exc.strerror}")]) from None
    except SchemaError as exc:
        raise ConfigError([(str(args.csv), str(exc))]) from None
    for f in files:
        print(f)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strobeqnd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p):
        p.add_argument("--config", metavar="PATH", help="YAML run configuration")
        p.add_argument("--experiment", choices=config.EXPERIMENTS,
                       help="use the shipped default configuration for this experiment")

    run = sub.add_parser("run", help="run an experiment and write CSVs plus a manifest")
    config_args(run)
    run.add_argument("--seed", type=int, metavar="U64")
    run.add_argument("--out", metavar="DIR", help="output directory")
    run.add_argument("--trajectories", type=int, metavar="N")
    run.add_argument("--threads", type=int, metavar="N")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a configuration without running it")
    config_args(val)
    val.add_argument("path", nargs="?", help="config file (same as --config)")
    val.set_defaults(func=cmd_validate)

    plot = sub.add_parser("plotdata", help="turn an experiment CSV into plot-ready column files")
    plot.add_argument("csv", help="CSV written by 'run'")
    plot.add_argument("--out", metavar="DIR", help="output directory (default: next to the CSV)")
    plot.add_argument("--kind", help="expected CSV schema (default: detect from the header)")
    plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "path", None) and not args.config:
        args.config = args.path
    try:
        return args.func(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for path, msg in exc.issues:
            print(f"  {path}: {msg}" if path else f"  {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error in {exc.module}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
