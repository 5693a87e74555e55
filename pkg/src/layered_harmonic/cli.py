"""Command line entry point: ``layered-harmonic {sweep,field,trig}``."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import ConfigurationError, HarmonicSpaceError
from .harness import ExperimentConfig, error_field, run_sweep, run_trig, write_grid_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layered-harmonic",
        description="Layered harmonic approximation spaces: convergence experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for sweep rows")
        p.add_argument("--seed", type=int, default=None, help="reserved; the method is deterministic")

    p = sub.add_parser("sweep", help="convergence table over L_list")
    common(p)
    p.add_argument("--L", dest="L_list", type=_int_list, help="override L_list, e.g. 2,4,6")

    p = sub.add_parser("field", help="pointwise error grid over K")
    common(p)
    p.add_argument("--L", dest="L", type=int, required=True, help="number of layers")

    p = sub.add_parser("trig", help="trigonometric approximation on a disk")
    common(p)
    p.add_argument("--n-list", dest="n_list", type=_int_list, help="override n_list, e.g. 2,4,8")
    return parser


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_json(args.config)
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        if args.command == "sweep":
            if args.L_list:
                cfg = dataclasses.replace(cfg, L_list=args.L_list)
            table = run_sweep(cfg, threads=args.threads)
            _emit(table.to_csv(), args.out)
            return EXIT_OK if any(r.ok for r in table) else EXIT_NUMERICAL
        if args.command == "trig":
            if args.n_list:
                cfg = dataclasses.replace(cfg, n_list=args.n_list)
            table = run_trig(cfg)
            _emit(table.to_csv(), args.out)
            return EXIT_OK if any(r.ok for r in table) else EXIT_NUMERICAL
        if args.L < 1:
            raise ConfigurationError("--L must be >= 1")
        rows = error_field(cfg, args.L, path=args.out)
        if not args.out:
            write_grid_csv(rows, sys.stdout)
        return EXIT_OK
    except (ConfigurationError, NotImplementedError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HarmonicSpaceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
