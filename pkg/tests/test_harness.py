import math

import numpy as np
import pytest

from conftest import FIG_PARAMS

from fatroute import (
    FabricError,
    PgftParams,
    ThrowSpec,
    analyze_sp,
    bench_csv,
    bench_route,
    build_pgft,
    compute_dmodc,
    preprocess,
    run_sweep,
    sample_amount,
    sweep_csv,
)
from fatroute.harness import _throw_seeds


def test_sample_amount_examples():
    assert sample_amount(8, 0.0) == 0
    assert sample_amount(8, 1.0) == 255
    assert sample_amount(8, 0.5) == 15
    assert sample_amount(0, 0.7) == 0


def test_sample_amount_rejects_bad_input():
    with pytest.raises(FabricError):
        sample_amount(-1, 0.5)
    with pytest.raises(FabricError):
        sample_amount(8, 1.5)


def test_sample_amount_log_uniform_quick():
    rng = np.random.default_rng(1)
    draws = [sample_amount(8, float(u)) for u in rng.random(2000)]
    assert 0 <= min(draws) and max(draws) <= 255
    # roughly half the mass below sqrt(2^8)
    below = sum(1 for a in draws if a < 15)
    assert 0.4 < below / len(draws) < 0.6


def test_throw_seed_fanout_is_stateless():
    a = _throw_seeds(42, 3)
    b = _throw_seeds(42, 3)
    assert a == b
    assert _throw_seeds(42, 4) != a
    assert _throw_seeds(43, 3) != a


@pytest.fixture(scope="module")
def sweep_topo():
    return build_pgft(PgftParams(2, (2, 4), (1, 2), (1, 1)))


def test_sweep_reproducible_bytes(sweep_topo):
    spec = ThrowSpec(max_exponent=3, throws=5, kind="links", seed=99)
    kw = dict(patterns=("a2a", "sp"), rp_samples=4)
    a = sweep_csv(run_sweep(sweep_topo, spec, **kw), patterns=("a2a", "sp"))
    b = sweep_csv(run_sweep(sweep_topo, spec, **kw), patterns=("a2a", "sp"))
    assert a == b
    # base topology never mutated
    assert sweep_topo.switch_count == 6
    assert not sweep_topo.removed


def test_sweep_parallel_equals_sequential(sweep_topo):
    spec = ThrowSpec(max_exponent=2, throws=4, kind="links", seed=5)
    kw = dict(patterns=("a2a",), rp_samples=2)
    seq = run_sweep(sweep_topo, spec, parallel_throws=1, **kw)
    par = run_sweep(sweep_topo, spec, parallel_throws=2, **kw)
    assert sweep_csv(seq, patterns=("a2a",)) == sweep_csv(par, patterns=("a2a",))


def test_sweep_records_shape(sweep_topo):
    spec = ThrowSpec(max_exponent=2, throws=3, kind="links", seed=8)
    records = run_sweep(
        sweep_topo, spec, algos=("dmodc",), patterns=("a2a",), rp_samples=2
    )
    assert len(records) == 3
    for r in records:
        assert r.kind == "links"
        assert 0 <= r.amount < 4
        if r.valid:
            assert set(r.aggregates) == {"a2a"}
            assert r.route_ms is not None
        else:
            assert not r.aggregates


def test_sweep_zero_amount_matches_direct_analysis(sweep_topo):
    spec = ThrowSpec(max_exponent=0, throws=1, kind="switches", seed=4)
    records = run_sweep(sweep_topo, spec, algos=("dmodc",), patterns=("sp",))
    state = preprocess(sweep_topo)
    direct = analyze_sp(state, compute_dmodc(state)).aggregate
    assert records[0].amount == 0
    assert records[0].aggregates["sp"] == direct


def test_sweep_oversized_amounts_recorded_invalid(sweep_topo):
    # 2x4 fabric has 4 switch links; exponent 6 draws amounts up to 63
    spec = ThrowSpec(max_exponent=6, throws=12, kind="links", seed=13)
    records = run_sweep(sweep_topo, spec, algos=("dmodc",), patterns=("a2a",))
    rejected = [r for r in records if not r.valid and r.error and "removable" in r.error]
    assert rejected
    assert len(records) == 12


def test_sweep_csv_timings_column(sweep_topo):
    spec = ThrowSpec(max_exponent=0, throws=1, kind="links", seed=1)
    records = run_sweep(sweep_topo, spec, algos=("dmodc",), patterns=("a2a",))
    plain = sweep_csv(records, patterns=("a2a",))
    timed = sweep_csv(records, patterns=("a2a",), timings=True)
    assert plain.splitlines()[0] == "throw,kind,amount,degrade_seed,algorithm,valid,a2a,threads"
    assert timed.splitlines()[0].endswith(",route_ms")


def test_bench_route_hashes_and_csv():
    rows = bench_route([PgftParams(2, (4, 4), (1, 2), (1, 1))], [1, 2], repetitions=2)
    assert len(rows) == 2
    assert rows[0].lft_sha256 == rows[1].lft_sha256
    assert rows[0].nodes == 16
    text = bench_csv(rows)
    assert text.splitlines()[0] == "pgft,nodes,switches,threads,median_ms,lft_sha256"
    assert "PGFT(2;4.4;1.2;1.1)" in text


def test_bench_empty_params():
    assert bench_csv(bench_route([], [1], 1)) == (
        "pgft,nodes,switches,threads,median_ms,lft_sha256\n"
    )
