"""Command-line driver: generate, degrade, route, analyze, sweep, bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, harness, router, topology
from .preprocess import check_validity, preprocess
from .topology import FabricError, PgftParams


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _pgft_spec(text: str) -> PgftParams:
    """Parse 'm1,m2,../w1,w2,../p1,p2,..' into PGFT parameters."""
    parts = text.split("/")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected m1,m2,../w1,w2,../p1,p2,.. got {text!r}"
        )
    m, w, p = (_int_list(part) for part in parts)
    return PgftParams(h=len(m), m=m, w=w, p=p)


def _read_topology(path: str) -> topology.Topology:
    return topology.load(Path(path).read_text())


def _cmd_generate(args) -> int:
    params = PgftParams(h=args.levels, m=args.m, w=args.w, p=args.p)
    mode = "shuffled" if args.shuffle_uuids is not None else "sequential"
    topo = topology.build_pgft(params, uuid_mode=mode, seed=args.shuffle_uuids)
    Path(args.output).write_text(topology.save(topo))
    print(
        f"wrote {args.output}: {params.notation()}, {topo.switch_count} switches, "
        f"{topo.node_count} nodes, {topo.link_count} links"
    )
    return 0


def _cmd_degrade(args) -> int:
    topo = _read_topology(args.input)
    out = topology.degrade(topo, args.kind, args.amount, args.seed)
    Path(args.output).write_text(topology.save(out))
    print(
        f"wrote {args.output}: removed {args.amount} {args.kind}, "
        f"{out.switch_count} switches and {out.link_count} links remain"
    )
    return 0


def _cmd_route(args) -> int:
    topo = _read_topology(args.input)
    state = preprocess(topo)
    validity = check_validity(state)
    if not validity.ok and not args.allow_invalid:
        pairs = validity.unreachable_pairs
        raise FabricError(
            f"topology is not routable: {len(pairs)} unreachable leaf pair(s), "
            f"e.g. {pairs[0][0]:x} -> {pairs[0][1]:x} (use --allow-invalid to "
            "emit a partial table)"
        )
    engine = {"dmodc": router.compute_dmodc, "updn": router.compute_updn_baseline}
    tables = engine[args.algo](state, threads=args.threads)
    Path(args.output).write_text(tables.dump())
    print(
        f"wrote {args.output}: {args.algo} tables for {len(state.switch_uuids)} "
        f"switches x {state.node_count} destinations"
        + ("" if validity.ok else " (partial: topology invalid)")
    )
    return 0


def _cmd_analyze(args) -> int:
    topo = _read_topology(args.input)
    state = preprocess(topo)
    tables = router.load_lft(Path(args.lft).read_text(), state)
    want_detail = args.detail is not None
    if args.pattern == "a2a":
        report = analysis.analyze_a2a(state, tables, detail=want_detail)
    elif args.pattern == "rp":
        report = analysis.analyze_rp(
            state, tables, samples=args.rp_samples, seed=args.seed, detail=want_detail
        )
    elif args.pattern == "sp":
        report = analysis.analyze_sp(
            state, tables, ordering=args.sp_order, detail=want_detail
        )
    else:  # argparse already restricts choices
        raise FabricError(f"unknown pattern {args.pattern!r}")
    Path(args.output).write_text(analysis.reports_csv([report]))
    if want_detail:
        Path(args.detail).write_text(analysis.detail_csv(state, report.detail))
    print(
        f"wrote {args.output}: {args.pattern} aggregate {report.aggregate} "
        f"({report.valid_flows} flows, {report.invalid_flows} failed)"
    )
    return 0


def _cmd_sweep(args) -> int:
    topo = _read_topology(args.input)
    spec = harness.ThrowSpec(
        max_exponent=args.max_exponent,
        throws=args.throws,
        kind=args.kind,
        seed=args.seed,
    )
    patterns = tuple(args.patterns.split(","))
    records = harness.run_sweep(
        topo,
        spec,
        algos=tuple(args.algos.split(",")),
        patterns=patterns,
        rp_samples=args.rp_samples,
        sp_order=args.sp_order,
        threads=args.threads,
        parallel_throws=args.parallel_throws,
    )
    Path(args.output).write_text(
        harness.sweep_csv(records, patterns=patterns, timings=args.timings)
    )
    n_valid = sum(1 for r in records if r.valid)
    print(f"wrote {args.output}: {len(records)} records, {n_valid} valid")
    return 0


def _cmd_bench(args) -> int:
    rows = harness.bench_route(
        params_list=args.sizes,
        threads_list=list(args.threads),
        repetitions=args.reps,
        algo=args.algo,
    )
    Path(args.output).write_text(harness.bench_csv(rows))
    print(f"wrote {args.output}: {len(rows)} measurements")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fatroute",
        description="Fault-resilient deterministic routing for PGFT fabrics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a PGFT topology file")
    g.add_argument("--levels", type=int, required=True)
    g.add_argument("--m", type=_int_list, required=True, help="down arities, e.g. 2,2,3")
    g.add_argument("--w", type=_int_list, required=True, help="up multiplicities")
    g.add_argument("--p", type=_int_list, required=True, help="parallel link counts")
    g.add_argument("--shuffle-uuids", type=int, default=None, metavar="SEED")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=_cmd_generate)

    d = sub.add_parser("degrade", help="remove random switches or links")
    d.add_argument("-i", "--input", required=True)
    d.add_argument("--kind", choices=("switches", "links"), required=True)
    d.add_argument("--amount", type=int, required=True)
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("-o", "--output", required=True)
    d.set_defaults(func=_cmd_degrade)

    r = sub.add_parser("route", help="compute forwarding tables")
    r.add_argument("-i", "--input", required=True)
    r.add_argument("--algo", choices=("dmodc", "updn"), default="dmodc")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--allow-invalid", action="store_true",
                   help="emit partial tables for unroutable topologies")
    r.add_argument("-o", "--output", required=True)
    r.set_defaults(func=_cmd_route)

    a = sub.add_parser("analyze", help="static congestion risk of a table dump")
    a.add_argument("-i", "--input", required=True)
    a.add_argument("--lft", required=True)
    a.add_argument("--pattern", choices=("a2a", "rp", "sp"), required=True)
    a.add_argument("--rp-samples", type=int, default=1000)
    a.add_argument("--sp-order", choices=("nid", "uuid"), default="nid")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--detail", default=None, metavar="CSV",
                   help="also write per-port loads of the aggregate-defining flow set")
    a.add_argument("-o", "--output", required=True)
    a.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("sweep", help="random degradation sweep")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("--max-exponent", type=int, required=True, metavar="M",
                   help="amounts drawn log-uniformly from [0, 2**M)")
    s.add_argument("--throws", type=int, required=True)
    s.add_argument("--kind", choices=("switches", "links"), required=True)
    s.add_argument("--algos", default="dmodc,updn")
    s.add_argument("--patterns", default="a2a,rp,sp")
    s.add_argument("--rp-samples", type=int, default=1000)
    s.add_argument("--sp-order", choices=("nid", "uuid"), default="nid")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--parallel-throws", type=int, default=1)
    s.add_argument("--timings", action="store_true",
                   help="include wall-times (breaks byte-reproducibility)")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=_cmd_sweep)

    b = sub.add_parser("bench", help="pipeline runtime over fabric sizes")
    b.add_argument("--sizes", type=_pgft_spec, nargs="+", required=True,
                   metavar="M/W/P", help="e.g. 16,8,8/1,4,4/1,1,1")
    b.add_argument("--threads", type=_int_list, default=(1,))
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--algo", choices=("dmodc", "updn"), default="dmodc")
    b.add_argument("-o", "--output", required=True)
    b.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FabricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
