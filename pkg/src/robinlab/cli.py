"""Command line entry point ``lab``."""
import argparse
import sys

from . import checks
from .scenario import ConfigError, run_scenario, run_suite, load_scenario


def _parser():
    p = argparse.ArgumentParser(prog="lab", description="Run parabolic Robin verification scenarios.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="directory for CSV output")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for suites")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one scenario config")
    r.add_argument("config")
    s = sub.add_parser("suite", parents=[common], help="run every *.toml in a directory")
    s.add_argument("directory")
    sub.add_parser("list-checks", help="list the available checks")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "list-checks":
        for name, desc in checks.describe():
            print(f"{name:26s} {desc}")
        return 0
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    if args.command == "run":
        try:
            scenario = load_scenario(args.config)
            report = run_scenario(scenario, args.out, args.seed, log=print)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(f"{'PASS' if report.passed else 'FAIL'} {report.name} ({report.elapsed:.1f} s, seed {report.seed})")
        return 0 if report.passed else 1
    reports = run_suite(args.directory, args.out, args.seed, args.threads, log=print)
    failed = [r.name for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} scenarios passed")
    return 0 if not failed else 1


if __name__ == "__main__":
    sys.exit(main())
