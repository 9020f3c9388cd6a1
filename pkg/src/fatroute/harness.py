"""Experiment drivers: random-degradation sweeps and runtime benchmarks.

Degradation amounts follow a shifted log-uniform law so that a sweep
exercises faults uniformly across scales and includes intact fabrics:
amount = floor(2**(max_exponent * u) - 1) for u uniform in [0, 1].

Seed fan-out: throw i of a sweep with master seed S derives three
independent streams from numpy SeedSequence(S, spawn_key=(i, j)) with
j = 0 (amount draw), 1 (degradation sampling), 2 (random-permutation
analysis).  Throws are therefore independent, individually replayable,
and identical whether executed sequentially or in parallel.
"""

from __future__ import annotations

import hashlib
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis, router
from .preprocess import check_validity, preprocess
from .topology import FabricError, PgftParams, Topology, TopologyError, build_pgft, degrade

__all__ = [
    "ThrowSpec",
    "ExperimentRecord",
    "BenchRow",
    "sample_amount",
    "run_sweep",
    "sweep_csv",
    "bench_route",
    "bench_csv",
]

_ENGINES = {
    "dmodc": router.compute_dmodc,
    "updn": router.compute_updn_baseline,
}


def sample_amount(max_exponent: int, u: float) -> int:
    """Shifted log-uniform degradation amount: floor(2**(max_exponent*u) - 1),
    landing in [0, 2**max_exponent)."""
    if max_exponent < 0:
        raise FabricError(f"max_exponent must be >= 0, got {max_exponent}")
    if not 0.0 <= u <= 1.0:
        raise FabricError(f"u must be in [0, 1], got {u}")
    return int(math.floor(2.0 ** (max_exponent * u) - 1.0))


@dataclass(frozen=True)
class ThrowSpec:
    max_exponent: int
    throws: int
    kind: str  # "switches" | "links"
    seed: int


@dataclass
class ExperimentRecord:
    throw: int
    kind: str
    amount: int
    degrade_seed: int
    algorithm: str
    valid: bool
    aggregates: dict[str, int] = field(default_factory=dict)
    route_ms: float | None = None
    threads: int = 1
    error: str | None = None


def _throw_seeds(master: int, throw: int) -> tuple[float, int, int]:
    u = float(np.random.default_rng(np.random.SeedSequence(master, spawn_key=(throw, 0))).random())
    degrade_seed = int(np.random.SeedSequence(master, spawn_key=(throw, 1)).generate_state(1)[0])
    rp_seed = int(np.random.SeedSequence(master, spawn_key=(throw, 2)).generate_state(1)[0])
    return u, degrade_seed, rp_seed


def _run_throw(
    base: Topology,
    spec: ThrowSpec,
    throw: int,
    algos: tuple[str, ...],
    patterns: tuple[str, ...],
    rp_samples: int,
    sp_order: str,
    threads: int,
) -> list[ExperimentRecord]:
    u, degrade_seed, rp_seed = _throw_seeds(spec.seed, throw)
    amount = sample_amount(spec.max_exponent, u)

    def records(valid: bool, error: str | None = None) -> list[ExperimentRecord]:
        return [
            ExperimentRecord(
                throw=throw,
                kind=spec.kind,
                amount=amount,
                degrade_seed=degrade_seed,
                algorithm=algo,
                valid=valid,
                threads=threads,
                error=error,
            )
            for algo in algos
        ]

    try:
        degraded = degrade(base, spec.kind, amount, degrade_seed)
    except TopologyError as exc:
        return records(False, str(exc))

    state = preprocess(degraded)
    if not check_validity(state).ok:
        return records(False, "unroutable: unreachable leaf pair")

    out = []
    for algo in algos:
        t0 = time.perf_counter()
        tables = _ENGINES[algo](state, threads=threads)
        route_ms = (time.perf_counter() - t0) * 1e3
        aggregates: dict[str, int] = {}
        for pattern in patterns:
            if pattern == "a2a":
                aggregates["a2a"] = analysis.analyze_a2a(state, tables).aggregate
            elif pattern == "rp":
                aggregates["rp"] = analysis.analyze_rp(
                    state, tables, samples=rp_samples, seed=rp_seed
                ).aggregate
            elif pattern == "sp":
                aggregates["sp"] = analysis.analyze_sp(
                    state, tables, ordering=sp_order
                ).aggregate
            else:
                raise FabricError(f"unknown pattern {pattern!r}")
        out.append(
            ExperimentRecord(
                throw=throw,
                kind=spec.kind,
                amount=amount,
                degrade_seed=degrade_seed,
                algorithm=algo,
                valid=True,
                aggregates=aggregates,
                route_ms=route_ms,
                threads=threads,
            )
        )
    return out


_WORKER_CTX: dict = {}


def _init_worker(base, spec, algos, patterns, rp_samples, sp_order, threads) -> None:
    _WORKER_CTX.update(
        base=base,
        spec=spec,
        algos=algos,
        patterns=patterns,
        rp_samples=rp_samples,
        sp_order=sp_order,
        threads=threads,
    )


def _worker_throw(throw: int) -> list[ExperimentRecord]:
    c = _WORKER_CTX
    return _run_throw(
        c["base"], c["spec"], throw, c["algos"], c["patterns"],
        c["rp_samples"], c["sp_order"], c["threads"],
    )


def run_sweep(
    base: Topology,
    spec: ThrowSpec,
    algos: tuple[str, ...] = ("dmodc", "updn"),
    patterns: tuple[str, ...] = ("a2a", "rp", "sp"),
    rp_samples: int = 1000,
    sp_order: str = "nid",
    threads: int = 1,
    parallel_throws: int = 1,
) -> list[ExperimentRecord]:
    """Run `spec.throws` independent degradation throws against a fresh copy
    of `base` each, routing valid outcomes with every requested engine and
    analyzing every requested pattern.  Invalid throws (unroutable fabric,
    or a sampled amount exceeding the removable pool) are recorded without
    aggregates and the sweep continues.  Output is byte-reproducible from
    (base, spec) regardless of `parallel_throws`."""
    if spec.throws < 0:
        raise FabricError(f"throws must be >= 0, got {spec.throws}")
    for algo in algos:
        if algo not in _ENGINES:
            raise FabricError(f"unknown algorithm {algo!r}")
    args = (base, spec, tuple(algos), tuple(patterns), rp_samples, sp_order, threads)
    if parallel_throws <= 1:
        batches = [_run_throw(base, spec, i, *args[2:]) for i in range(spec.throws)]
    else:
        with ProcessPoolExecutor(
            max_workers=parallel_throws, initializer=_init_worker, initargs=args
        ) as pool:
            batches = list(pool.map(_worker_throw, range(spec.throws)))
    return [rec for batch in batches for rec in batch]


def sweep_csv(
    records: list[ExperimentRecord],
    patterns: tuple[str, ...] = ("a2a", "rp", "sp"),
    timings: bool = False,
) -> str:
    """CSV form of sweep records.  Wall-times are emitted only on request:
    with `timings` off the bytes are a pure function of the inputs."""
    cols = ["throw", "kind", "amount", "degrade_seed", "algorithm", "valid"]
    cols += list(patterns) + ["threads"]
    if timings:
        cols.append("route_ms")
    lines = [",".join(cols)]
    for r in records:
        row = [
            str(r.throw), r.kind, str(r.amount), str(r.degrade_seed),
            r.algorithm, "1" if r.valid else "0",
        ]
        row += ["" if r.aggregates.get(p) is None else str(r.aggregates[p]) for p in patterns]
        row.append(str(r.threads))
        if timings:
            row.append("" if r.route_ms is None else f"{r.route_ms:.3f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


@dataclass
class BenchRow:
    params: PgftParams
    nodes: int
    switches: int
    threads: int
    median_ms: float
    lft_sha256: str


def bench_route(
    params_list: list[PgftParams],
    threads_list: list[int],
    repetitions: int,
    algo: str = "dmodc",
) -> list[BenchRow]:
    """Median wall-time of the full pipeline (preprocess + route) per fabric
    size and thread count.  The forwarding-table hash is included so that
    callers can verify thread-count independence."""
    if repetitions < 1:
        raise FabricError(f"repetitions must be >= 1, got {repetitions}")
    rows = []
    for params in params_list:
        topo = build_pgft(params)
        for threads in threads_list:
            times = []
            digest = ""
            for _ in range(repetitions):
                t0 = time.perf_counter()
                state = preprocess(topo)
                tables = _ENGINES[algo](state, threads=threads)
                times.append((time.perf_counter() - t0) * 1e3)
                digest = hashlib.sha256(tables.ports.tobytes()).hexdigest()
            rows.append(
                BenchRow(
                    params=params,
                    nodes=topo.node_count,
                    switches=topo.switch_count,
                    threads=threads,
                    median_ms=statistics.median(times),
                    lft_sha256=digest,
                )
            )
    return rows


def bench_csv(rows: list[BenchRow]) -> str:
    lines = ["pgft,nodes,switches,threads,median_ms,lft_sha256"]
    for r in rows:
        lines.append(
            f"{r.params.notation()},{r.nodes},{r.switches},{r.threads},"
            f"{r.median_ms:.3f},{r.lft_sha256}"
        )
    return "\n".join(lines) + "\n"
