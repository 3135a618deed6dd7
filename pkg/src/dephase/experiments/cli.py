"""Command-line front end: ``dephase run | sweep | validate | version``.

Output directory resolution, most specific first: ``--out``, the scenario's
``[output] dir``, ``$DEPHASE_OUT_DIR/<config stem>``, and finally
``./dephase-out/<config stem>``.  Exit codes: 0 success, 1 validation error,
2 check failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .. import __version__
from ..errors import NumericalError, ValidationError
from .config import load_config, validate_config
from .runner import run_experiment, sweep_experiment


def _resolve_out_dir(args, config: dict) -> Path:
    if args.out:
        return Path(args.out)
    output = config.get("output", {})
    if isinstance(output, dict) and output.get("dir"):
        return Path(output["dir"])
    root = os.environ.get("DEPHASE_OUT_DIR", "dephase-out")
    return Path(root) / Path(args.config).stem


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", required=True, help="scenario file (.toml) "
                        "or manifest of an earlier run (.json)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress non-error output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dephase",
        description="Phase-averaged evolution experiments: run scenarios, "
                    "sweep parameters, validate configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    _add_common(run_p)

    sweep_p = sub.add_parser("sweep", help="run one scenario per parameter value")
    _add_common(sweep_p)
    sweep_p.add_argument("--param", required=True,
                         choices=("dt", "coupling", "n_max", "samples"))
    sweep_p.add_argument("--values", required=True, nargs="*", type=float,
                         help="parameter values, one run each")

    validate_p = sub.add_parser("validate", help="check a config without running")
    validate_p.add_argument("--config", required=True)
    validate_p.add_argument("--quiet", action="store_true")

    sub.add_parser("version", help="print the library version")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    try:
        config = load_config(args.config)
        if args.command == "validate":
            resolved = validate_config(config)
            if not args.quiet:
                print(f"config ok: kind={resolved['kind']} seed={resolved['seed']}")
            return 0
        out_dir = _resolve_out_dir(args, config)
        if args.command == "run":
            return run_experiment(config, out_dir, seed_override=args.seed,
                                  quiet=args.quiet)
        return sweep_experiment(config, out_dir, args.param, args.values,
                                seed_override=args.seed, quiet=args.quiet)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
