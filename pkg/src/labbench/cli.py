"""Command line: ``run``, ``gen`` and ``validate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import EmptySamples, ParseError, ValidationError
from .scenario import EXIT_INVALID, EXIT_OK, ScenarioSpec, run_scenario
from .stats import write_atomic
from .topology import build_network, compute_routes, parse_topology
from .traffic import ArrivalModel, SizeDistribution, emit_workload, fit_empirical, generate_workload, read_sizes


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; flag errors are validation errors here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labbench", description="Discrete-event network and cloud test bench.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a scenario and write stats.csv, events.log, summary.txt")
    run.add_argument("--topology", required=True, type=Path)
    run.add_argument("--workload", required=True, type=Path, help="workload file, or a .gen recipe")
    run.add_argument("--control", type=Path)
    run.add_argument("--until", required=True, type=float, help="horizon in seconds")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--interval", type=float, default=1.0, help="sampling interval in seconds")
    run.add_argument("--out", required=True, type=Path)

    gen = sub.add_parser("gen", help="generate a workload file")
    size = gen.add_mutually_exclusive_group(required=True)
    size.add_argument("--fixed", type=int, metavar="BYTES")
    size.add_argument("--empirical", type=Path, metavar="SIZES_FILE", help="one observed size per line")
    size.add_argument("--lognormal", metavar="MU,SIGMA")
    timing = gen.add_mutually_exclusive_group(required=True)
    timing.add_argument("--interval", type=float, metavar="SECONDS")
    timing.add_argument("--poisson", type=float, metavar="RATE")
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--src", default="PC1")
    gen.add_argument("--dst", default="VM1_file:files")
    gen.add_argument("--kind", choices=("file", "query"), default="file")
    gen.add_argument("--prio", type=int, default=0)
    gen.add_argument("--req", type=int, help="fixed request size; the drawn size becomes the response")
    gen.add_argument("--resp", type=int, help="fixed response size (default: the drawn size)")
    gen.add_argument("--out", type=Path, help="output file (default: stdout)")

    val = sub.add_parser("validate", help="check a topology and print routing tables")
    val.add_argument("topology", type=Path)
    return parser


def cmd_run(args) -> int:
    spec = ScenarioSpec(
        topology_path=args.topology,
        workload_path=args.workload,
        control_path=args.control,
        until=args.until,
        seed=args.seed,
        sample_interval=args.interval,
        out_dir=args.out,
    )
    result = run_scenario(spec)
    diagnostics = result.messages if result.conservation is None else result.messages[:-1]
    for line in diagnostics:
        print(line, file=sys.stderr)
    if result.conservation is not None:
        print(result.conservation_line)
    return result.status


def cmd_gen(args) -> int:
    try:
        if args.count < 0:
            raise ValueError("--count must be >= 0")
        if args.fixed is not None:
            dist = SizeDistribution.fixed(args.fixed)
        elif args.empirical is not None:
            dist = fit_empirical(read_sizes(args.empirical))
        else:
            mu, sigma = (float(x) for x in args.lognormal.split(","))
            dist = SizeDistribution.lognormal(mu, sigma)
        arrivals = ArrivalModel.fixed_interval(args.interval) if args.interval is not None \
            else ArrivalModel.poisson(args.poisson)
        for flag in ("req", "resp"):
            if getattr(args, flag) is not None and getattr(args, flag) <= 0:
                raise ValueError(f"--{flag} must be positive")
        if not 0 <= args.prio <= 7:
            raise ValueError("--prio must be 0-7")
        workload = generate_workload(
            dist, arrivals, args.count, args.src, args.dst, args.kind, args.prio, args.seed,
            response_size=args.resp, request_size=args.req,
        )
    except (ValueError, OSError) as exc:
        print(f"labbench gen: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = emit_workload(workload)
    if args.out is None:
        sys.stdout.write(text)
    else:
        write_atomic(args.out, text)
    return EXIT_OK


def cmd_validate(args) -> int:
    path: Path = args.topology
    try:
        doc = parse_topology(path.read_text(encoding="utf-8"), str(path))
        model = build_network(doc)
    except OSError as exc:
        print(f"{path}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID
    except ParseError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        for issue in exc.issues:
            print(f"{path}: error: {issue}", file=sys.stderr)
        return EXIT_INVALID
    if not model.devices:
        print(f"{path}: warning: empty model")
    for warning in model.warnings:
        print(f"{path}: warning: {warning}")
    for table in compute_routes(model).values():
        print(table.format())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "gen": cmd_gen, "validate": cmd_validate}[args.command]
    return handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
