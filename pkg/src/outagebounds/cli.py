"""Command-line front end: ``bounds``, ``sweep``, ``mse`` and ``accept``."""

import argparse
import logging
import sys

from . import acceptance, bench
from ._validation import CapabilityError, ConfigurationError
from .config import load_config

log = logging.getLogger("outagebounds")


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _scenario(args):
    if not args.config:
        raise ConfigurationError(f"{args.command} needs --config")
    cfg = load_config(args.config)
    return cfg.override(seed=args.seed, trials=args.trials, threads=args.threads)


def cmd_bounds(args):
    _emit(bench.run_bounds(_scenario(args)), args.out)
    return 0


def cmd_sweep(args):
    _emit(bench.run_sweep(_scenario(args)), args.out)
    return 0


def cmd_mse(args):
    _emit(bench.run_mse(_scenario(args)), args.out)
    return 0


def cmd_accept(args):
    settings = acceptance.AcceptanceSettings()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["sweep_trials"] = args.trials
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.perturb_oracle:
        changes["perturb_oracle"] = args.perturb_oracle
    if args.config:
        changes.update(_accept_overrides(args.config))
    settings = acceptance.AcceptanceSettings(**{**settings.__dict__, **changes})
    results = acceptance.run_acceptance(settings, log=log.info)
    _emit(acceptance.render_report(results), args.out)
    return 0 if all(r.passed for r in results) else 1


def _accept_overrides(path):
    """Optional ``[accept]`` section overriding AcceptanceSettings fields."""
    import configparser

    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc
    if not parser.has_section("accept"):
        return {}
    fields = acceptance.AcceptanceSettings.__dataclass_fields__
    out = {}
    for key, value in parser["accept"].items():
        if key not in fields or key == "perturb_oracle":
            raise ConfigurationError(f"accept.{key}: unknown setting")
        cast = float if fields[key].type in (float, "float") else int
        try:
            out[key] = cast(value)
        except ValueError as exc:
            raise ConfigurationError(f"accept.{key}: cannot parse {value!r}") from exc
    return out


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (INI)")
    common.add_argument("--out", help="output path; stdout when omitted")
    common.add_argument("--seed", type=_u64, help="override the scenario seed")
    common.add_argument("--trials", type=_positive, help="override the Monte-Carlo trial count")
    common.add_argument("--threads", type=_positive, help="worker threads for h-grid evaluation")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="outagebounds",
        description="Bayesian outage-probability and MSE lower bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bounds", parents=[common], help="outage bound curves over h").set_defaults(
        func=cmd_bounds
    )
    sub.add_parser("sweep", parents=[common], help="bounds at fixed h over a model parameter").set_defaults(
        func=cmd_sweep
    )
    sub.add_parser("mse", parents=[common], help="MSE and moment bounds").set_defaults(func=cmd_mse)
    acc = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    acc.add_argument("--perturb-oracle", type=float, default=0.0, help=argparse.SUPPRESS)
    acc.set_defaults(func=cmd_accept)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigurationError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
