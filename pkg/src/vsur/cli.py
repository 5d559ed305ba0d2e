"""Command-line entry point.

    vsur run --config <path> [--seed N] [--strategy sur|random|sweep]
             [--functional ibv|emv|both] [--out DIR] [--replicates N] [--jobs N]

Exit codes: 0 success, 1 configuration error, 2 some replicates failed.
``VSUR_LOG`` sets the log level (default WARNING).
"""

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, load_config


def _parser():
    p = argparse.ArgumentParser(prog="vsur", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a replicated design experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--strategy", choices=["sur", "random", "sweep"])
    run.add_argument("--functional", choices=["ibv", "emv", "both"])
    run.add_argument("--out")
    run.add_argument("--replicates", type=int)
    run.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("VSUR_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config).override(
            seed=args.seed,
            strategy=args.strategy,
            functional=args.functional,
            out=args.out,
            n_replicates=args.replicates,
        )
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    from .experiment import run_experiment

    summary, code = run_experiment(cfg, jobs=max(1, args.jobs))
    print(json.dumps(summary["final"], indent=2, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
