"""``hbnfactor`` command line.

Exit codes: 0 success, 1 usage error, 2 input error (unreadable, malformed or
invalid model, bad evidence), 3 zero-mass evidence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from . import io
from .discretize import (DDConfig, InconsistentEvidence, compile, dynamic_discretize,
                         initial_partitions)
from .factorize import (RewriteReport, UnfactorizedCaseError, binary_factorize,
                        partition_stats, sf_bf, stacking_factorize)
from .fixtures import FIXTURES, gen_fixture
from .inference import infer, marginal, metrics
from .model import (HybridBn, continuous_parent_count, max_continuous_parents,
                    max_cpd_size, validate)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INCONSISTENT = 0, 1, 2, 3


class InputError(Exception):
    """Anything wrong with the user's files or arguments past parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(path) -> tuple:
    try:
        bn, parts = io.read_model(path)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    except io.ModelFormatError as e:
        raise InputError(f"{path}: {e}") from e
    problems = validate(bn)
    if problems:
        lines = [f"node {v.node!r}: {v.kind}: {v.message}" for v in problems]
        raise InputError(f"{path}: invalid model\n  " + "\n  ".join(lines))
    return bn, parts


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


# ----------------------------------------------------------------------------
# transform


def cmd_transform(args) -> int:
    bn, parts = _load(args.input)
    try:
        if args.bf and args.sf:
            out, report = sf_bf(bn, args.sf_mode)
        elif args.bf:
            out, report = binary_factorize(bn)
        elif args.sf:
            out, report = stacking_factorize(bn, args.sf_mode)
        else:
            size, cont = max_cpd_size(bn), max_continuous_parents(bn)
            out, report = bn, RewriteReport(max_cpd_size=(size, size),
                                            max_continuous_parents=(cont, cont),
                                            partitions=partition_stats(bn))
    except UnfactorizedCaseError as e:
        raise InputError(f"{e} (run with --bf as well)") from e
    io.write_model(args.output, out, parts if report.is_empty else None)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


# ----------------------------------------------------------------------------
# infer


def _parse_evidence(bn: HybridBn, items) -> dict:
    evidence = dict(bn.evidence)
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InputError(f"evidence must look like id=value, got {item!r}")
        if key not in bn:
            raise InputError(f"evidence on unknown node {key!r}")
        if bn.is_discrete(key):
            if value not in bn[key].states:
                raise InputError(f"{value!r} is not a state of {key!r}")
            evidence[key] = value
        else:
            try:
                evidence[key] = float(value)
            except ValueError:
                raise InputError(f"evidence for {key!r} must be a number, got {value!r}") from None
    return evidence


def cmd_infer(args) -> int:
    bn, parts = _load(args.input)
    bn = bn.with_evidence(_parse_evidence(bn, args.evidence))
    problems = validate(bn)
    if problems:
        raise InputError("; ".join(f"{v.node}: {v.message}" for v in problems))
    if args.fixed_partitions:
        try:
            parts = io.read_partitions(json.loads(Path(args.fixed_partitions).read_text()))
        except (OSError, ValueError) as e:
            raise InputError(f"cannot use partitions from {args.fixed_partitions}: {e}") from e
    start = initial_partitions(bn, args.states or DDConfig.initial_m)
    if parts:
        unknown = sorted(set(parts) - set(bn.continuous_ids()))
        if unknown:
            raise InputError(f"partitions given for non-continuous or unknown nodes {unknown}")
        start.update(parts)

    if args.dd:
        config = DDConfig(ree_threshold=args.ree) if args.ree is not None else DDConfig()
        result = dynamic_discretize(bn, config, start)
        dbn, post = result.model, result.posterior
        extra = {"iterations": result.iterations, "converged": result.converged}
    else:
        dbn = compile(bn, start)
        post = infer(dbn)
        if not post.consistent:
            raise InconsistentEvidence("zero-mass evidence")
        extra = {}
    out = {k: marginal(post, k, dbn.states[k]).to_dict() for k in bn.ids()}
    if args.dd:
        out = {"marginals": out, **extra}
    _emit(json.dumps(out, indent=2), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------------
# report / gen / bench


def cmd_report(args) -> int:
    bn, _ = _load(args.input)
    m = metrics(bn)
    out = {
        "tree_width": m.tree_width,
        "max_potential_size": m.max_potential_size,
        "max_cpd_size": max_cpd_size(bn),
        "continuous_parents": {n.id: continuous_parent_count(bn, n.id) for n in bn},
        "clusters": [list(c) for c in m.clusters],
    }
    _emit(json.dumps(out, indent=2), args.output)
    return EXIT_OK


def cmd_gen(args) -> int:
    bn = gen_fixture(args.name)
    if args.output:
        io.write_model(args.output, bn)
    else:
        print(io.dumps(bn))
    return EXIT_OK


def _csv_list(text: str, what: str, parser) -> list:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        parser.error(f"{what} must not be empty")
    return items


def cmd_bench(args, parser) -> int:
    if args.suite != "fig7":
        parser.error(f"unknown or empty suite {args.suite!r}; the only suite is fig7")
    variants = _csv_list(args.variants, "--variants", parser)
    bad = [v for v in variants if v not in bench_mod.VARIANTS]
    if bad:
        parser.error(f"unknown variants {bad}; choose from {', '.join(bench_mod.VARIANTS)}")
    try:
        cases = [int(c) for c in _csv_list(args.cases, "--cases", parser)]
    except ValueError:
        parser.error("--cases takes comma-separated integers")
    if any(c not in range(1, 7) for c in cases):
        parser.error("cases must be in 1..6")
    rows = bench_mod.run_suite(cases, variants, args.budget_seconds, args.budget_states,
                               parallel=args.parallel)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            bench_mod.write_csv(rows, fh)
    else:
        bench_mod.write_csv(rows, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hbnfactor", description="Factorize, discretize and query hybrid Bayesian networks.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("transform", help="apply binary and/or stacking factorization")
    t.add_argument("-i", "--input", required=True)
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--bf", action="store_true", help="binary factorization")
    t.add_argument("--sf", action="store_true", help="stacking factorization")
    t.add_argument("--sf-mode", choices=("compact", "explicit"), default="compact")

    i = sub.add_parser("infer", help="posterior marginals")
    i.add_argument("-i", "--input", required=True)
    i.add_argument("-o", "--output")
    i.add_argument("--evidence", action="append", metavar="ID=VALUE")
    mode = i.add_mutually_exclusive_group()
    mode.add_argument("--states", type=int, metavar="N", help="static discretization with N intervals")
    mode.add_argument("--dd", action="store_true", help="dynamic discretization")
    i.add_argument("--ree", type=float, metavar="T", help="relative entropy error threshold (with --dd)")
    i.add_argument("--fixed-partitions", metavar="PATH")

    r = sub.add_parser("report", help="structure metrics")
    r.add_argument("-i", "--input", required=True)
    r.add_argument("-o", "--output")

    g = sub.add_parser("gen", help="write a reference network")
    g.add_argument("name", choices=sorted(FIXTURES))
    g.add_argument("-o", "--output")

    b = sub.add_parser("bench", help="run the benchmark suite and write CSV")
    b.add_argument("--suite", default="fig7")
    b.add_argument("--variants", default="bf,sfbf")
    b.add_argument("--cases", default="1,2,3,4,5,6")
    b.add_argument("--budget-seconds", type=float, default=bench_mod.DEFAULT_SECONDS)
    b.add_argument("--budget-states", type=float, default=bench_mod.DEFAULT_STATES)
    b.add_argument("--parallel", action="store_true")
    b.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.command == "infer":
        if args.states is not None and args.states < 1:
            parser.error("--states must be positive")
        if args.ree is not None and not args.dd:
            parser.error("--ree needs --dd")
    try:
        if args.command == "bench":
            return cmd_bench(args, parser)
        handler = {"transform": cmd_transform, "infer": cmd_infer,
                   "report": cmd_report, "gen": cmd_gen}[args.command]
        return handler(args)
    except InputError as e:
        print(f"hbnfactor: {e}", file=sys.stderr)
        return EXIT_INPUT
    except InconsistentEvidence:
        print("hbnfactor: zero-mass evidence: the observations have probability zero",
              file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
