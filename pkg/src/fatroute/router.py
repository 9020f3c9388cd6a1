"""Forwarding-table computation and route tracing.

Two engines produce per-switch linear forwarding tables (destination NID
-> output port):

* dmodc: closed-form selection.  For a destination d behind leaf l, the
  candidate set C is the switch's port groups leading strictly closer to
  l, ordered by remote UUID; the group is C[(t // divider) mod #C] and the
  port within it g[(t // (divider * #C)) mod #g], where t is the
  destination NID.  Stateless: the table is a pure function of the
  topology, so degrading and restoring equipment reproduces the original
  tables bit for bit.

* updn: a greedy baseline over the same candidate sets.  Destinations are
  processed in NID order; each picks the least-loaded group (ties by
  remote UUID), then the least-loaded port inside it (ties by port index),
  with per-table counters starting at zero.

A down group enters a candidate set only while its remote switch still
has a pure-descent path to the destination leaf (cost == rank - 1).
After removals, a below-neighbour can be strictly closer through a path
that re-ascends; following it would break the ascend-then-descend
discipline that makes the routing deadlock-free, so such groups are
skipped.  On intact fabrics this never differs from the plain
strictly-closer rule.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .preprocess import INF, RoutingState
from .topology import FabricError, ParseError

__all__ = [
    "RoutingError",
    "ForwardingTables",
    "RouteTrace",
    "compute_dmodc",
    "compute_updn_baseline",
    "trace",
    "load_lft",
]


class RoutingError(FabricError):
    """Internal consistency failure while computing tables."""


def _closer_sets(state: RoutingState, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Candidate groups of switch s toward every leaf.

    Returns (nC, sel): nC[l] counts candidate groups toward leaf column l,
    sel[l, k] is the k-th candidate's group index in remote-UUID order.
    """
    g = state.groups[s]
    crow = state.cost[s]  # (L,)
    gcost = state.cost[g.remote]  # (G, L)
    closer = gcost < crow[None, :]
    if not g.is_up.all():
        pure = gcost == (state.rank[g.remote].astype(np.int32) - 1)[:, None]
        closer &= g.is_up[:, None] | pure
    nC = closer.sum(axis=0, dtype=np.int64)
    max_c = int(nC.max(initial=0))
    sel = np.zeros((crow.shape[0], max(max_c, 1)), dtype=np.int64)
    if max_c:
        order = np.cumsum(closer, axis=0)
        gi, li = np.nonzero(closer)
        sel[li, order[gi, li] - 1] = gi
    return nC, sel


def _fill_direct(state: RoutingState, s: int, out: np.ndarray) -> None:
    # Destinations attached to s itself: emit the port to the node.
    block = state.leaf_block.get(s)
    if block is not None:
        t0, t1 = block
        out[t0:t1] = state.nid_leaf_port[t0:t1]


def _dmodc_ports(state: RoutingState, s: int) -> np.ndarray:
    n = state.node_count
    out = np.full(n, -1, dtype=np.int32)
    g = state.groups[s]
    if len(g.remote):
        nC, sel = _closer_sets(state, s)
        lam = state.nid_leaf_col  # (N,) leaf column per destination NID
        cdest = state.cost[s][lam].astype(np.int64)
        n_cand = nC[lam]
        ok = (cdest < INF) & (n_cand > 0)
        bad = (cdest < INF) & (cdest > 0) & (n_cand == 0)
        if bad.any():
            t = int(np.flatnonzero(bad)[0])
            raise RoutingError(
                f"switch {int(state.switch_uuids[s]):x} has finite cost to the "
                f"leaf of destination NID {t} but no group leading closer"
            )
        t = np.arange(n, dtype=np.int64)
        pi = int(state.divider[s])
        denom = np.where(n_cand > 0, n_cand, 1)
        group = sel[lam, (t // pi) % denom]
        within = (t // (pi * denom)) % g.sizes[group]
        ports = g.ports[g.offsets[group] + within]
        out[ok] = ports[ok].astype(np.int32)
    _fill_direct(state, s, out)
    return out


def _pick_sequence(loads: np.ndarray, count: int) -> np.ndarray:
    """Simulate `count` rounds of "bump the least-loaded counter, ties to
    the lowest position"; returns the position chosen at each round.
    Equivalent to taking the `count` smallest (load + j, position) pairs
    in lexicographic order."""
    k = len(loads)
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if k == 1:
        return np.zeros(count, dtype=np.int64)
    if (loads == loads[0]).all():
        return np.arange(count, dtype=np.int64) % k
    vals = (loads[:, None] + np.arange(count, dtype=np.int64)[None, :]).ravel()
    pos = np.repeat(np.arange(k, dtype=np.int64), count)
    order = np.lexsort((pos, vals))[:count]
    return pos[order]


def _updn_ports(state: RoutingState, s: int) -> np.ndarray:
    n = state.node_count
    out = np.full(n, -1, dtype=np.int32)
    g = state.groups[s]
    n_groups = len(g.remote)
    if n_groups:
        nC, sel = _closer_sets(state, s)
        crow = state.cost[s]
        group_load = np.zeros(n_groups, dtype=np.int64)
        port_load = np.zeros(int(state.port_count[s]), dtype=np.int64)
        for t0, t1, leaf in state.nid_blocks:
            if leaf == s:
                continue
            col = state.leaf_col[leaf]
            if crow[col] >= INF or nC[col] == 0:
                continue
            cands = sel[col, : nC[col]]
            picks = _pick_sequence(group_load[cands], t1 - t0)
            block = np.empty(t1 - t0, dtype=np.int32)
            for rank_i in range(len(cands)):
                idx = np.flatnonzero(picks == rank_i)
                if idx.size == 0:
                    continue
                gid = int(cands[rank_i])
                ports = g.ports[g.offsets[gid] : g.offsets[gid] + g.sizes[gid]]
                chosen = ports[_pick_sequence(port_load[ports], idx.size)]
                block[idx] = chosen.astype(np.int32)
                port_load += np.bincount(chosen, minlength=len(port_load))
            out[t0:t1] = block
            group_load += np.bincount(
                cands[picks], minlength=n_groups
            )
    _fill_direct(state, s, out)
    return out


@dataclass
class ForwardingTables:
    """Per-switch destination-NID-indexed output ports (-1 = unreachable)."""

    state: RoutingState
    ports: np.ndarray  # (S, N) int32
    algo: str

    def port_for(self, switch_uuid: int, dst_nid: int) -> int:
        return int(self.ports[self.state.switch_idx[switch_uuid], dst_nid])

    def alternative_ports(self, switch_uuid: int, dst_nid: int) -> tuple[int, ...]:
        """All ports of all candidate groups for this destination; empty for
        unreachable or directly attached destinations."""
        st = self.state
        s = st.switch_idx[switch_uuid]
        leaf = int(st.nid_leaf[dst_nid])
        if leaf == s:
            return ()
        col = st.leaf_col[leaf]
        own = int(st.cost[s, col])
        if own >= INF:
            return ()
        g = st.groups[s]
        ports: list[int] = []
        for i in range(len(g.remote)):
            r = int(g.remote[i])
            rc = int(st.cost[r, col])
            if rc >= own:
                continue
            if not g.is_up[i] and rc != int(st.rank[r]) - 1:
                continue
            ports.extend(
                int(p) for p in g.ports[g.offsets[i] : g.offsets[i] + g.sizes[i]]
            )
        return tuple(ports)

    def dump(self) -> str:
        """Text form, the contract with the analysis side: `lft v1` header,
        then per switch (UUID order) a `switch <uuid>` line followed by one
        `<nid> <port>` line per destination, NID ascending, -1 = invalid."""
        st = self.state
        n = st.node_count
        prefix = [f"{t} " for t in range(n)]
        max_port = int(self.ports.max(initial=0))
        pstr = [str(v) for v in range(-1, max_port + 1)]
        parts = ["lft v1"]
        for s in range(len(st.switch_uuids)):
            parts.append(f"switch {int(st.switch_uuids[s]):x}")
            row = self.ports[s].tolist()
            if n:
                parts.append("\n".join(prefix[t] + pstr[row[t] + 1] for t in range(n)))
        return "\n".join(parts) + "\n"


def _compute(state: RoutingState, fn, algo: str, threads: int) -> ForwardingTables:
    n_sw = len(state.switch_uuids)
    ports = np.full((n_sw, state.node_count), -1, dtype=np.int32)
    if threads <= 1:
        for s in range(n_sw):
            ports[s] = fn(state, s)
    else:
        # Tables are independent per switch and written to disjoint rows:
        # the result cannot depend on scheduling.
        def work(s: int) -> None:
            ports[s] = fn(state, s)

        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, range(n_sw), chunksize=max(1, n_sw // (threads * 8))))
    return ForwardingTables(state=state, ports=ports, algo=algo)


def compute_dmodc(state: RoutingState, threads: int = 1) -> ForwardingTables:
    """Closed-form deterministic tables; parallelizes over switches."""
    return _compute(state, _dmodc_ports, "dmodc", threads)


def compute_updn_baseline(state: RoutingState, threads: int = 1) -> ForwardingTables:
    """Greedy least-loaded up*/down* baseline; parallelizes over switches."""
    return _compute(state, _updn_ports, "updn", threads)


@dataclass
class RouteTrace:
    """Hops from the source leaf switch to the destination node, as
    (switch uuid, output port) pairs.  `ok` is False on a dead end, a
    misdelivery, or a loop; `hops` then holds the partial trace."""

    hops: list[tuple[int, int]]
    ok: bool
    reason: str | None = None


def trace(
    tables: ForwardingTables, src_node_uuid: int, dst_node_uuid: int
) -> RouteTrace:
    """Follow the deterministic ports from the source's leaf to the
    destination node."""
    st = tables.state
    dst = int(st.nid[st.node_idx[dst_node_uuid]])
    cur = int(st.nid_leaf[st.nid[st.node_idx[src_node_uuid]]])
    hops: list[tuple[int, int]] = []
    limit = 2 * st.max_rank + 2
    while True:
        port = int(tables.ports[cur, dst])
        uuid = int(st.switch_uuids[cur])
        if port < 0:
            return RouteTrace(hops, False, f"invalid table entry at switch {uuid:x}")
        hops.append((uuid, port))
        nid_behind = int(st.peer_node_nid[cur, port])
        if nid_behind >= 0:
            if nid_behind == dst:
                return RouteTrace(hops, True)
            return RouteTrace(
                hops, False, f"misdelivered to node NID {nid_behind} (wanted {dst})"
            )
        nxt = int(st.peer_switch[cur, port])
        if nxt < 0:
            return RouteTrace(hops, False, f"dead end at switch {uuid:x} port {port}")
        cur = nxt
        if len(hops) >= limit:
            return RouteTrace(hops, False, f"loop suspected after {len(hops)} hops")


def load_lft(text: str, state: RoutingState) -> ForwardingTables:
    """Parse a dump produced by ForwardingTables.dump against `state`."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "lft v1":
        raise ParseError(1, "expected header 'lft v1'")
    n_sw = len(state.switch_uuids)
    ports = np.full((n_sw, state.node_count), -1, dtype=np.int32)
    cur = -1
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("switch "):
            try:
                uuid = int(line.split()[1], 16)
            except (IndexError, ValueError):
                raise ParseError(line_no, f"bad switch line {line!r}") from None
            if uuid not in state.switch_idx:
                raise ParseError(line_no, f"unknown switch uuid {uuid:x}")
            cur = state.switch_idx[uuid]
            continue
        try:
            nid_s, port_s = line.split()
            nid, port = int(nid_s), int(port_s)
        except ValueError:
            raise ParseError(line_no, f"bad entry line {line!r}") from None
        if cur < 0:
            raise ParseError(line_no, "entry before any switch line")
        if not 0 <= nid < state.node_count:
            raise ParseError(line_no, f"destination NID {nid} out of range")
        ports[cur, nid] = port
    return ForwardingTables(state=state, ports=ports, algo="loaded")
