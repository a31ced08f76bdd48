"""Command line entry point.

    rwre <experiment> --config path [--seed N] [--out dir]
    rwre report dir... [--format text|csv]

Exit codes: 0 pass, 1 check failure (or estimator error), 2 usage/config
error, 3 model valid but inelliptic (``validate`` only).
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, RWREError
from .harness import config as hconfig
from .harness import report as hreport
from .harness import runner

COMMANDS = hconfig.EXPERIMENTS + ("suite",)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(runner.EXIT_USAGE)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rwre", description="Random walk in random environment experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=_seed, help="override master_seed")
        s.add_argument("--out", help="override output_dir")
        s.add_argument("-q", "--quiet", action="store_true")
    r = sub.add_parser("report", help="summarize finished runs")
    r.add_argument("dirs", nargs="*", help="run directories or manifest files")
    r.add_argument("--format", choices=("text", "csv"), default="text")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    err = sys.stderr
    if args.command == "report":
        try:
            rows = hreport.summarize(args.dirs)
        except RWREError as exc:
            print(f"rwre report: {exc}", file=err)
            return runner.EXIT_USAGE
        sys.stdout.write(hreport.render(rows, args.format))
        return runner.EXIT_PASS
    try:
        cfg = hconfig.load_config(args.config, experiment=args.command, seed=args.seed, output_dir=args.out)
        log = None if args.quiet else (lambda msg: print(msg, file=err))
        manifest = runner.run(cfg, log)
    except ConfigError as exc:
        print(f"rwre: config error: {exc}", file=err)
        return runner.EXIT_USAGE
    except RWREError as exc:
        print(f"rwre: {exc}", file=err)
        return runner.EXIT_CHECK_FAIL
    if not args.quiet:
        sys.stdout.write(hreport.render(hreport.summarize([cfg.output_dir])))
    return manifest["exit_code"]


if __name__ == "__main__":
    raise SystemExit(main())
