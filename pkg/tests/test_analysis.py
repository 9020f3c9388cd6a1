import random

import numpy as np
import pytest

from conftest import FIG_PARAMS, random_params
from oracles import naive_a2a, naive_port_loads, naive_rp, naive_sp

from fatroute import (
    FabricError,
    PgftParams,
    analyze_a2a,
    analyze_rp,
    analyze_sp,
    build_pgft,
    compute_dmodc,
    compute_updn_baseline,
    degrade,
    detail_csv,
    preprocess,
    reports_csv,
    route_flows,
)


@pytest.fixture(scope="module")
def fig_tables(fig_state):
    return compute_dmodc(fig_state)


def _loads_as_dict(state, loads):
    out = {}
    tsp = state.total_switch_ports
    touched = np.flatnonzero((loads.srcs > 0) | (loads.dsts > 0))
    for gid in touched:
        if gid < tsp:
            s = int(np.searchsorted(state.port_base, gid, side="right")) - 1
            key = (int(state.switch_uuids[s]), int(gid - state.port_base[s]))
        else:
            key = (int(state.node_uuids[state.nid_node[gid - tsp]]), 0)
        out[key] = (int(loads.srcs[gid]), int(loads.dsts[gid]))
    return out


def test_single_flow_risk_one(fig_state, fig_tables):
    loads = route_flows(fig_state, fig_tables, np.array([0]), np.array([4]))
    assert loads.valid_flows == 1
    assert loads.max_risk == 1
    assert loads.risk.sum() == len(np.flatnonzero(loads.srcs))


def test_two_flows_sharing_uplink(fig_state, fig_tables):
    # NIDs 4 and 8 both map to group 0, port 0 of leaf 0 (local port 2)
    assert fig_tables.port_for(0, 4) == fig_tables.port_for(0, 8) == 2
    loads = route_flows(fig_state, fig_tables, np.array([0, 1]), np.array([4, 8]))
    shared = _loads_as_dict(fig_state, loads)[(0, 2)]
    assert shared == (2, 2)
    assert loads.max_risk == 2


def test_flows_match_naive_recount(fig_topo, fig_state, fig_tables):
    rng = np.random.default_rng(5)
    src = rng.integers(0, 12, size=40)
    dst = rng.integers(0, 12, size=40)
    loads = route_flows(fig_state, fig_tables, src, dst)
    flows = [(int(a), int(b)) for a, b in zip(src, dst)]
    naive, valid, _ = naive_port_loads(fig_topo, fig_state, fig_tables, flows)
    assert _loads_as_dict(fig_state, loads) == naive
    assert loads.valid_flows == valid


def test_monotonicity_adding_flows(fig_state, fig_tables):
    flows = [(0, 4), (1, 8), (2, 6), (3, 4), (5, 0)]
    prev = np.zeros(fig_state.total_switch_ports + 12, dtype=np.int64)
    for k in range(1, len(flows) + 1):
        src = np.array([f[0] for f in flows[:k]])
        dst = np.array([f[1] for f in flows[:k]])
        risk = route_flows(fig_state, fig_tables, src, dst).risk
        assert (risk >= prev).all()
        prev = risk


def test_a2a_star():
    topo = build_pgft(PgftParams(1, (4,), (1,), (1,)))
    state = preprocess(topo)
    report = analyze_a2a(state, compute_dmodc(state))
    assert report.aggregate == 1
    assert report.valid_flows == 12
    assert report.invalid_flows == 0


def test_a2a_matches_naive(fig_topo, fig_state, fig_tables):
    report = analyze_a2a(fig_state, fig_tables)
    assert report.aggregate == naive_a2a(fig_topo, fig_state, fig_tables)
    assert report.valid_flows == 132


def test_a2a_balanced_on_nonblocking():
    topo = build_pgft(PgftParams(2, (2, 2), (1, 2), (1, 1)))
    state = preprocess(topo)
    report = analyze_a2a(state, compute_dmodc(state), detail=True)
    up = report.detail.risk[: state.total_switch_ports]
    # every fabric port carries the same risk: perfectly balanced up-links
    leaf_up = [
        report.detail.risk[state.port_base[s] + p]
        for u, s in state.switch_idx.items()
        for p in range(2, 4)
        if state.rank[s] == 1
    ]
    assert len(set(leaf_up)) == 1


def test_rp_empty_and_single_sample(fig_state, fig_tables):
    # zero flows -> zero risk
    loads = route_flows(fig_state, fig_tables, np.array([], int), np.array([], int))
    assert loads.max_risk == 0
    one = analyze_rp(fig_state, fig_tables, samples=1, seed=9)
    assert one.aggregate == one.per_sample[0]


def test_rp_matches_naive(fig_topo, fig_state, fig_tables):
    got = analyze_rp(fig_state, fig_tables, samples=10, seed=123)
    want = naive_rp(fig_topo, fig_state, fig_tables, samples=10, seed=123)
    assert got.aggregate == want


def test_rp_reproducible(fig_state, fig_tables):
    a = analyze_rp(fig_state, fig_tables, samples=8, seed=77)
    b = analyze_rp(fig_state, fig_tables, samples=8, seed=77)
    assert a.per_sample == b.per_sample
    assert analyze_rp(fig_state, fig_tables, samples=8, seed=78).per_sample != (
        a.per_sample
    ) or True  # different seed may coincide; only determinism is contractual


def test_rp_median_is_lower_middle(fig_state, fig_tables):
    report = analyze_rp(fig_state, fig_tables, samples=4, seed=3)
    assert report.aggregate == sorted(report.per_sample)[1]


def test_rp_detail_is_median_sample(fig_state, fig_tables):
    report = analyze_rp(fig_state, fig_tables, samples=5, seed=21, detail=True)
    assert report.detail is not None
    assert report.detail.max_risk == report.aggregate


def test_sp_two_nodes():
    topo = build_pgft(PgftParams(1, (2,), (1,), (1,)))
    state = preprocess(topo)
    report = analyze_sp(state, compute_dmodc(state))
    assert report.samples == 1
    assert report.aggregate == 1


def test_sp_nonblocking_every_shift_clean():
    topo = build_pgft(PgftParams(2, (2, 2), (1, 2), (1, 1)))
    state = preprocess(topo)
    report = analyze_sp(state, compute_dmodc(state))
    assert set(report.per_sample) == {1}


def test_sp_matches_naive(fig_topo, fig_state, fig_tables):
    got = analyze_sp(fig_state, fig_tables)
    assert got.aggregate == naive_sp(fig_topo, fig_state, fig_tables)
    assert got.samples == 11


def test_sp_uuid_ordering():
    topo = build_pgft(FIG_PARAMS, uuid_mode="shuffled", seed=31)
    state = preprocess(topo)
    tables = compute_dmodc(state)
    nid_report = analyze_sp(state, tables, ordering="nid")
    uuid_report = analyze_sp(state, tables, ordering="uuid")
    assert uuid_report.aggregate == naive_sp(topo, state, tables, ordering="uuid")
    assert nid_report.samples == uuid_report.samples
    with pytest.raises(FabricError):
        analyze_sp(state, tables, ordering="rand")


def test_invalid_entries_reported_not_fatal(fig_topo):
    from fatroute.topology import _remove_switch

    broken = fig_topo.copy()
    for u in (12, 13, 14, 15):
        _remove_switch(broken, u)
    state = preprocess(broken)
    tables = compute_dmodc(state)
    report = analyze_a2a(state, tables)
    # intra-pair flows still analyzed, cross-pair ones reported as failed
    assert report.valid_flows == 36
    assert report.invalid_flows == 96
    assert report.aggregate >= 1


def test_reports_and_detail_csv(fig_state, fig_tables):
    a2a = analyze_a2a(fig_state, fig_tables, detail=True)
    rp = analyze_rp(fig_state, fig_tables, samples=2, seed=1)
    text = reports_csv([a2a, rp])
    lines = text.splitlines()
    assert lines[0] == "pattern,seed,samples,aggregate,valid_flows,invalid_flows"
    assert lines[1].startswith("a2a,,1,")
    assert lines[2].startswith("rp,1,2,")
    detail = detail_csv(fig_state, a2a.detail)
    assert detail.splitlines()[0] == "switch_uuid,port,srcs,dsts,risk"
    # node uplink rows appear with the node uuid, port 0
    assert any(row.startswith("10,0,") for row in detail.splitlines()[1:])
