"""Command-line entry point: ``secrate run | region | list``."""

import argparse
import json
import sys
from pathlib import Path

from .harness import EXPERIMENTS, ConfigError, ExperimentConfig, run
from .ratedist import rd_curve
from .region import gamma
from .source import CapExceeded, source_and_measure

EXIT_OK, EXIT_CONFIG, EXIT_CAP = 0, 1, 2

# flag name -> config field
OVERRIDES = {
    "seed": "seed", "out": "out", "trials": "trials", "n": "n", "l": "l", "rate": "R",
    "key_rate": "R_K", "delta": "delta", "eps": "eps", "de": "D_E", "workers": "workers",
}


def build_parser():
    p = argparse.ArgumentParser(prog="secrate", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a canned experiment and write CSV")
    r.add_argument("--experiment", help="experiment name (see `secrate list`)")
    r.add_argument("--config", type=Path, help="JSON config; flags override its fields")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory")
    r.add_argument("--trials", type=int)
    r.add_argument("--n", type=int)
    r.add_argument("--l", type=int)
    r.add_argument("--rate", type=float)
    r.add_argument("--key-rate", type=float)
    r.add_argument("--delta", type=float)
    r.add_argument("--eps", type=float)
    r.add_argument("--de", type=float)
    r.add_argument("--budgets", type=float, nargs="+")
    r.add_argument("--workers", type=int)

    g = sub.add_parser("region", help="print Gamma(R_K, D_E) and its optimal timesharing")
    g.add_argument("--key-rate", type=float, required=True)
    g.add_argument("--de", type=float, required=True)
    g.add_argument("--pmf", type=float, nargs="+", default=[0.5, 0.5])

    sub.add_parser("list", help="list experiments")
    return p


def _config_from_args(args):
    data = {}
    if args.config is not None:
        data = json.loads(args.config.read_text())
    for flag, name in OVERRIDES.items():
        v = getattr(args, flag)
        if v is not None:
            data[name] = v
    if args.budgets is not None:
        data["budgets"] = args.budgets
    if args.experiment is not None:
        data["experiment"] = args.experiment
    if "experiment" not in data:
        raise ConfigError("no experiment given")
    return ExperimentConfig.from_dict(data)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            for name in sorted(EXPERIMENTS):
                print(name)
            return EXIT_OK
        if args.command == "region":
            source, measure = source_and_measure({"pmf": args.pmf})
            if args.key_rate < 0 or args.de < 0:
                raise ConfigError("key rate and distortion must be >= 0")
            res = gamma(args.key_rate, args.de, rd_curve(source, measure))
            print(json.dumps({"R_K": args.key_rate, "D_E": args.de, "gamma": res.value,
                              "lambda_star": res.lambda_star, "d_star": res.d_star}))
            return EXIT_OK
        manifest, _ = run(_config_from_args(args))
        for path in manifest.outputs:
            print(path)
        return EXIT_OK
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"secrate: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as exc:
        print(f"secrate: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
