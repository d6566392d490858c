"""Command line entry point: ``multiscale-pi {run,bounds,check,presets}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import check_assumptions
from .errors import ExperimentError, MultiscaleError, SpecError
from .experiments import PRESETS, ExperimentSpec, _points, parse_spec, run_experiment, write_csv

EXIT_OK = 0
EXIT_SPEC = 1
EXIT_DIVERGED = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which is reserved here for divergence
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multiscale-pi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("run", "run an experiment and write CSV"),
        ("bounds", "write bound values next to the measurements as CSV"),
        ("check", "print the assumption report for every sweep point"),
    ):
        p = sub.add_parser(name, help=help_text)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("spec_file", nargs="?", type=Path, help="key = value experiment file")
        src.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
        if name != "check":
            p.add_argument("-o", "--output", type=Path, help="CSV destination (default stdout)")
    sub.add_parser("presets", help="list built-in experiments")
    return parser


def _load_specs(args) -> tuple[ExperimentSpec, ...]:
    if args.preset:
        return PRESETS[args.preset]
    try:
        text = args.spec_file.read_text()
    except OSError as err:
        raise SpecError(f"cannot read {args.spec_file}: {err}") from None
    return (parse_spec(text),)


def _cmd_presets(out) -> None:
    for name, specs in PRESETS.items():
        kinds = ", ".join(sorted({s.kind.value for s in specs}))
        series = "; ".join(s.name for s in specs)
        out.write(f"{name}\t{kinds}\t{len(specs)} series: {series}\n")


def _cmd_check(specs, out) -> None:
    for spec in specs:
        out.write(f"# {spec.name or spec.kind.value} (ledger preset {spec.ledger_preset})\n")
        for p in _points(spec):
            report = check_assumptions(spec.ledger, p.cfg, p.eps)
            out.write(f"{spec.swept_field}={p.value:.17g} {report.summary()}\n")
            for key, text in report.details.items():
                out.write(f"    {key}: {text}\n")


def _cmd_table(specs, args, table: str) -> None:
    results = [run_experiment(spec) for spec in specs]
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_csv(results, fh, table=table)
    else:
        write_csv(results, sys.stdout, table=table)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "presets":
            _cmd_presets(sys.stdout)
            return EXIT_OK
        specs = _load_specs(args)
        if args.command == "check":
            _cmd_check(specs, sys.stdout)
        else:
            _cmd_table(specs, args, "bounds" if args.command == "bounds" else "run")
    except _UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_SPEC
    except ExperimentError as err:
        print(f"multiscale-pi: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SpecError, MultiscaleError) as err:
        print(f"{parser.format_usage()}multiscale-pi: error: {err}", file=sys.stderr)
        return EXIT_SPEC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
