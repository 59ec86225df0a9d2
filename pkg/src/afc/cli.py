"""Command-line entry point: ``afc run``, ``afc fit``, ``afc list-experiments``.

Exit codes: 0 on success, 2 for configuration problems, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, NumericalError, ResolutionError, ValidationError
from .experiments import EXPERIMENTS, load_config, parse_config, run_experiment, run_fit

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("afc")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="afc", description="Atomic frequency comb experiments")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment described by a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--output-dir", type=Path, help="override the config's output_dir")
    run.add_argument("--workers", type=int, help="override the number of worker processes")

    fit = sub.add_parser("fit", help="fit the pump power to a measured absorption spectrum")
    fit.add_argument("measured", type=Path, help="CSV with columns detuning_hz, alpha_per_m")
    fit.add_argument("config", type=Path)

    sub.add_parser("list-experiments", help="print the available experiments")
    return ap


def _report(problems: list[str]) -> None:
    print("configuration error:", file=sys.stderr)
    for p in problems:
        print(f"  - {p}", file=sys.stderr)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-experiments":
            for name, text in EXPERIMENTS.items():
                print(f"{name:20s} {text}")
            return EXIT_OK
        if args.command == "run":
            data = load_config(args.config)
            if isinstance(data, dict):
                if args.output_dir is not None:
                    data["output_dir"] = str(args.output_dir)
                if args.workers is not None:
                    data["workers"] = args.workers
            cfg = parse_config(data, base_dir=args.config.parent if args.output_dir is None else None)
            log.info("running %s into %s", cfg.experiment, cfg.output_dir)
            manifest = run_experiment(cfg)
            print(json.dumps({"experiment": manifest["experiment"], "output_dir": str(cfg.output_dir),
                              "outputs": manifest["outputs"]}))
            return EXIT_OK
        if args.command == "fit":
            data = load_config(args.config)
            report = run_fit(args.measured, data, base_dir=args.config.parent)
            print(json.dumps(report.as_dict()))
            return EXIT_OK
    except ValidationError as exc:
        _report(exc.problems)
        return EXIT_CONFIG
    except (ConfigurationError, ResolutionError) as exc:
        _report([str(exc)])
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
