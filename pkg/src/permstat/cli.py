"""``permstat`` command line."""
from __future__ import annotations

import argparse
import os
import sys

from .experiments import COMMANDS, DEFAULT_SEED, ConfigError, ExperimentConfig, run_command, write_result
from .moments import NearDegenerateSingularities
from .spectral import TailNotControlled

EXIT_FAIL = 1
EXIT_CONFIG = 2


def _default_seed() -> int:
    env = os.environ.get("PERMSTAT_SEED")
    if env is None or env.strip() == "":
        return DEFAULT_SEED
    try:
        return int(env, 0)
    except ValueError:
        raise SystemExit(f"permstat: PERMSTAT_SEED={env!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", default="ewens:1", help="ewens:th | geom:th,q | perturbed:th,c,g | table:t1,t2,...")
    common.add_argument("--n", type=int, default=100)
    common.add_argument("--samples", type=int, default=10_000)
    common.add_argument("--seed", type=int, default=None, help="default: $PERMSTAT_SEED or a fixed constant")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--format", dest="output_format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="output path (stdout when omitted)")
    common.add_argument("--d", type=int, default=None, help="power for tr(sigma^d)")
    common.add_argument("--s-grid", dest="s_grid", default="0:1:11", help="a:b:steps")
    common.add_argument("--x1", default=None, help="re,im")
    common.add_argument("--x2", default=None, help="re,im")
    common.add_argument("--s1", type=int, default=1)
    common.add_argument("--s2", type=int, default=0)
    common.add_argument("--function", default=None, help="laurent:d=c,... | arc:a,b | fourier:file.json | cos")
    common.add_argument("--zlaw", default="point", help="point | uniform | atoms:angle=prob,...")
    common.add_argument("--p", type=float, default=None)
    common.add_argument("--kmax", type=int, default=None)
    common.add_argument("--asym", action="store_true", help="require the asymptotic column (hn)")
    common.add_argument("--step", type=int, default=1, help="row stride for N-indexed tables")
    common.add_argument("--only", default=None, help="selftest: comma-separated criterion numbers")

    parser = argparse.ArgumentParser(prog="permstat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "hn": "normalisers h_N, exact and asymptotic",
        "sample": "cycle types (and eigenangles with marks)",
        "trace-dist": "law of tr(sigma^d) or tr(F) against its limit",
        "clt": "standardised tr(F) against the Gaussian",
        "moments": "E[(1 - x1)^s1 (1 - x2)^s2 multiplicative moments]",
        "autocorr": "characteristic polynomial autocorrelation on the circle",
        "selftest": "run the acceptance suite",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fields = vars(args)
    if fields["seed"] is None:
        fields["seed"] = _default_seed()
    cfg = ExperimentConfig(**fields)
    try:
        res = run_command(cfg)
    except ConfigError as exc:
        print(f"permstat {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NearDegenerateSingularities as exc:
        print(f"permstat {cfg.command}: degenerate singularities at (k1, k2) = {exc.offending}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TailNotControlled as exc:
        print(f"permstat {cfg.command}: {exc} (k_max = {exc.k_max})", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_result(res, cfg.output_format, cfg.out)
    except BrokenPipeError:
        # downstream reader (e.g. head) closed early
        sys.stderr.close()
        return 0
    if cfg.command == "selftest" and not res.all_passed:
        return EXIT_FAIL
    return 0


if __name__ == "__main__":
    sys.exit(main())
