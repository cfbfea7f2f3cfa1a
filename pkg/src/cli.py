"""
Command-line interface for epiforecast.

Commands: synth, train, evaluate, forecast, plotdata. Settings come from
built-in defaults, then ``--config``, then ``--set KEY=VALUE``, then the
dedicated flags (``--seed``, ``--out``, ``--data``); later sources win.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from config import DISPLAY_DECIMALS, EXIT_OK, load_configs
from error_handling import InvalidConfigError, handle_error
from logger import setup_logger
import pipeline

__version__ = "1.0.0"


def _add_common(parser: argparse.ArgumentParser, nested: bool) -> None:
    # Subcommand copies must not overwrite values given before the command name
    default = argparse.SUPPRESS if nested else None
    parser.add_argument(
        "--config", default=default, help="Path to a key = value config file"
    )
    # Nested --set values land in their own list and are appended in resolve_configs
    parser.add_argument(
        "--set",
        dest="command_overrides" if nested else "overrides",
        action="append",
        default=default if nested else [],
        metavar="KEY=VALUE",
        help="Override a config key (repeatable), e.g. --set max_epochs=500",
    )
    parser.add_argument(
        "--seed", type=int, default=default, help="RNG seed for the run"
    )
    parser.add_argument("--out", default=default, help="Output directory")
    parser.add_argument(
        "--data", default=default, help="Input CSV (overrides data_path)"
    )
    parser.add_argument(
        "--debug", action="store_true", default=default or False, help="Debug logging"
    )
    parser.add_argument(
        "--quiet", action="store_true", default=default or False, help="Warnings only"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epiforecast",
        description="Regression vs. backpropagation network forecasts of daily deaths.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    _add_common(parser, nested=False)
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="Write a seeded synthetic dataset")
    synth.add_argument("--output", help="CSV path (default: <out>/synthetic.csv)")

    commands.add_parser("train", help="Fit regression and select a network")

    evaluate = commands.add_parser("evaluate", help="Compare models with MSE/MAPE")
    evaluate.add_argument(
        "--fixture",
        help="Replay an actual,ann,regression CSV instead of trained models",
    )

    forecast = commands.add_parser("forecast", help="Plain and adjusted forecasts")
    forecast.add_argument(
        "--fixture",
        help="Re-score an actual,plain,adjusted CSV instead of trained models",
    )
    forecast.add_argument(
        "--horizon", help="CSV of rows to forecast (default: test split)"
    )

    commands.add_parser("plotdata", help="Write figure point files")

    for sub in commands.choices.values():
        _add_common(sub, nested=True)
    return parser


def _parse_overrides(pairs: List[str]) -> Dict[str, str]:
    values = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise InvalidConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        values[key.strip()] = value.strip()
    return values


def resolve_configs(args: argparse.Namespace):
    pairs = list(args.overrides) + list(getattr(args, "command_overrides", []))
    overrides = _parse_overrides(pairs)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
        overrides["synth.seed"] = str(args.seed)
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.data is not None:
        overrides["data_path"] = args.data
    return load_configs(args.config, overrides)


def cmd_synth(args) -> int:
    cfg, spec = resolve_configs(args)
    output = args.output or str(Path(cfg.out_dir) / "synthetic.csv")
    ds = pipeline.write_synthetic(spec, output)
    print(f"Wrote {len(ds)} days to {output}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, _ = resolve_configs(args)
    _, results = pipeline.train_models(cfg)
    for result in results:
        marker = "*" if result.selected else " "
        print(
            f"{marker} layers {'-'.join(str(s) for s in result.layer_sizes):<10} "
            f"score {result.score:.{DISPLAY_DECIMALS}f} "
            f"epochs {result.report.epochs_run}"
        )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg, _ = resolve_configs(args)
    if args.fixture:
        report = pipeline.evaluate_fixture(args.fixture, cfg.out_dir)
    else:
        report = pipeline.evaluate_models(cfg)
    print(report.to_markdown(DISPLAY_DECIMALS), end="")
    return EXIT_OK


def cmd_forecast(args) -> int:
    cfg, _ = resolve_configs(args)
    if args.fixture:
        summary = pipeline.rescore_fixture(args.fixture, cfg.out_dir)
    else:
        _, _, summary = pipeline.forecast_horizon(cfg, args.horizon)
    for key, value in summary.items():
        try:
            value = f"{float(value):.{DISPLAY_DECIMALS}f}"
        except ValueError:
            pass
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    cfg, _ = resolve_configs(args)
    for name, path in pipeline.write_plot_data(cfg).items():
        print(f"{name}: {path}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "forecast": cmd_forecast,
    "plotdata": cmd_plotdata,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main function"""
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.INFO
    if args.debug:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    setup_logger(level=level)

    try:
        return COMMANDS[args.command](args)
    except Exception as e:
        return handle_error(e, args.command)


if __name__ == "__main__":
    sys.exit(main())
