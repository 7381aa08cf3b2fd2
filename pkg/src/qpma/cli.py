"""Command-line front end: ``qpma {run,sum,verify,example}``.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from importlib import resources
from pathlib import Path

from .analysis import format_table, run_verification_grid
from .errors import ScenarioParseError, ValidationError
from .protocol import run_qpma, run_summation
from .report import format_report, format_summation
from .scenario import parse_bool, parse_scenario, parse_summation

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_VERIFY = 4


def example_path() -> Path:
    return Path(str(resources.files("qpma") / "data" / "example.scenario"))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _apply_overrides(scenario, args):
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "leader_encodes", None) is not None:
        changes["leader_encodes"] = args.leader_encodes
    if getattr(args, "q", None) is not None:
        changes["q"] = args.q
    return dataclasses.replace(scenario, **changes) if changes else scenario


def cmd_run(args) -> int:
    scenario = _apply_overrides(parse_scenario(args.scenario), args)
    _emit(format_report(run_qpma(scenario)), args.out)
    return EXIT_OK


def cmd_example(args) -> int:
    scenario = _apply_overrides(parse_scenario(example_path()), args)
    _emit(format_report(run_qpma(scenario)), args.out)
    return EXIT_OK


def cmd_sum(args) -> int:
    config = parse_summation(args.scenario)
    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    _emit(format_summation(run_summation(config)), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    rows = run_verification_grid(
        max_n=args.max_n,
        max_k=args.max_k,
        max_p=args.max_p,
        trials=args.trials,
        seed=args.seed or 0,
    )
    _emit(format_table(rows), args.out)
    failed = [r for r in rows if not r.passed]
    for r in failed:
        print(f"verification failed: {r.quantity} ({r.case})", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpma", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario: bool):
        if scenario:
            p.add_argument("--scenario", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, default=None, help="override the file's master seed")
        p.add_argument("--out", metavar="PATH", default=None, help="write the report here instead of stdout")

    run = sub.add_parser("run", help="run membership aggregation on a scenario file")
    common(run, True)
    run.add_argument("--leader-encodes", type=parse_bool, default=None, metavar="BOOL")
    run.add_argument("--q", type=float, default=None, help="membership probability for generated sets")
    run.set_defaults(func=cmd_run)

    summ = sub.add_parser("sum", help="run private summation mod P on a summation file")
    common(summ, True)
    summ.set_defaults(func=cmd_sum)

    ver = sub.add_parser("verify", help="run the numerical verification grid")
    common(ver, False)
    ver.add_argument("--max-n", type=int, default=3)
    ver.add_argument("--max-k", type=int, default=2)
    ver.add_argument("--max-p", type=int, default=5)
    ver.add_argument("--trials", type=int, default=2000)
    ver.set_defaults(func=cmd_verify)

    ex = sub.add_parser("example", help="replay the bundled three-party example")
    common(ex, False)
    ex.add_argument("--leader-encodes", type=parse_bool, default=None, metavar="BOOL")
    ex.set_defaults(func=cmd_example)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioParseError, OSError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc.invariant}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
