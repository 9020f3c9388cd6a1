"""Routing preprocessing: ranks, port groups, up--down costs, dividers, NIDs.

Everything here is derived deterministically from a (possibly degraded)
topology.  The outputs feed the forwarding-table engines:

* rank: 1 + minimum switch-hop distance to the leaf set (leaves = switches
  with attached nodes).  Links are classified up/down by rank difference.
* port groups: a switch's switch-to-switch ports bucketed by remote switch,
  groups ordered by remote UUID, ports within a group by local index.
* cost c[s][l]: minimum hops from switch s to leaf switch l over paths that
  ascend zero or more links and then only descend.  Computed by one upward
  and one downward sweep over rank levels; both reductions (min for cost,
  max for divider) are order-free within a level.
* divider: per-switch product of up-to-date distinct-upswitch counts along
  the upward sweep, max-reduced so that losing one of several parallel
  uplinks leaves the value unchanged.
* topological NID: nodes renumbered so that nodes under mutually-close
  leaves are numerically contiguous; the modulo arithmetic in the routing
  engines relies on this.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from .topology import FabricError, Topology

__all__ = [
    "INF",
    "PortGroup",
    "SwitchGroups",
    "Validity",
    "RoutingState",
    "assign_ranks",
    "build_port_groups",
    "compute_costs_dividers",
    "compute_topological_nids",
    "check_validity",
    "preprocess",
    "costs_csv",
    "nids_csv",
]

logger = logging.getLogger(__name__)

# Sentinel for unreachable costs; fits int32 even after +1 relaxations.
INF = 2**30


@dataclass(frozen=True)
class PortGroup:
    """Friendly per-group view: all ports of `owner` leading to `remote`."""

    owner: int
    remote: int
    direction: str  # "up" | "down"
    ports: tuple[int, ...]


@dataclass
class SwitchGroups:
    """Array form of one switch's port groups, ordered by remote UUID."""

    remote: np.ndarray  # (G,) switch index of the group's remote switch
    is_up: np.ndarray  # (G,) bool
    sizes: np.ndarray  # (G,) ports per group
    offsets: np.ndarray  # (G,) start of each group in `ports`
    ports: np.ndarray  # flat local port indices, group-major


@dataclass
class Validity:
    ok: bool
    unreachable_pairs: list[tuple[int, int]]  # leaf uuid pairs with infinite cost


class FabricIndex:
    """Dense integer indexing of a topology (internal).

    Switches and nodes are indexed in ascending UUID order, so index
    comparisons equal UUID comparisons everywhere downstream.
    """

    def __init__(self, topo: Topology):
        self.topo = topo
        self.switch_uuids = np.array(sorted(topo.switches), dtype=np.int64)
        self.switch_idx = {int(u): i for i, u in enumerate(self.switch_uuids)}
        self.node_uuids = np.array(sorted(topo.nodes), dtype=np.int64)
        self.node_idx = {int(u): i for i, u in enumerate(self.node_uuids)}
        n_sw = len(self.switch_uuids)
        self.port_count = np.zeros(n_sw, dtype=np.int32)
        for u, sw in topo.switches.items():
            self.port_count[self.switch_idx[u]] = len(sw.ports)
        max_ports = int(self.port_count.max(initial=0))
        # peer_switch[s, p]: switch index behind port p, else -1
        # peer_node[s, p]: node index behind port p, else -1
        self.peer_switch = np.full((n_sw, max_ports), -1, dtype=np.int32)
        self.peer_node = np.full((n_sw, max_ports), -1, dtype=np.int32)
        for u, sw in topo.switches.items():
            s = self.switch_idx[u]
            for i, peer in enumerate(sw.ports):
                if peer is None:
                    continue
                v = peer[0]
                if v in self.switch_idx:
                    self.peer_switch[s, i] = self.switch_idx[v]
                else:
                    self.peer_node[s, i] = self.node_idx[v]
        self.port_base = np.zeros(n_sw + 1, dtype=np.int64)
        np.cumsum(self.port_count, out=self.port_base[1:])


def assign_ranks(fi: FabricIndex) -> np.ndarray:
    """Rank switches by BFS distance to the leaf set; unreachable switches
    get rank 0 and are excluded from routing (logged)."""
    n = len(fi.switch_uuids)
    rank = np.zeros(n, dtype=np.int32)
    queue: deque[int] = deque()
    for s in range(n):
        if (fi.peer_node[s] >= 0).any():
            rank[s] = 1
            queue.append(s)
    while queue:
        s = queue.popleft()
        for t in fi.peer_switch[s]:
            if t >= 0 and rank[t] == 0:
                rank[t] = rank[s] + 1
                queue.append(t)
    unranked = np.flatnonzero(rank == 0)
    for s in unranked:
        logger.warning(
            "switch %x unreachable from the leaf set; excluded from routing",
            fi.switch_uuids[s],
        )
    return rank


def build_port_groups(fi: FabricIndex, rank: np.ndarray) -> list[SwitchGroups]:
    """Group each switch's ports by remote switch.  Links to unranked
    switches or between equal-rank switches are excluded (logged): they
    cannot carry up--down traffic."""
    n = len(fi.switch_uuids)
    out: list[SwitchGroups] = []
    flat_warned: set[tuple[int, int]] = set()
    for s in range(n):
        buckets: dict[int, list[int]] = {}
        if rank[s] > 0:
            for i in range(fi.port_count[s]):
                t = fi.peer_switch[s, i]
                if t < 0:
                    continue
                if rank[t] == 0:
                    continue  # unreachable remote, already logged
                if rank[t] == rank[s]:
                    key = (min(s, int(t)), max(s, int(t)))
                    if key not in flat_warned:
                        flat_warned.add(key)
                        logger.warning(
                            "link between equal-rank switches %x and %x "
                            "excluded from routing",
                            fi.switch_uuids[key[0]],
                            fi.switch_uuids[key[1]],
                        )
                    continue
                buckets.setdefault(int(t), []).append(i)
        remotes = sorted(buckets)  # index order == UUID order
        sizes = [len(buckets[r]) for r in remotes]
        offsets = np.zeros(len(remotes), dtype=np.int64)
        if remotes:
            np.cumsum(sizes[:-1], out=offsets[1:])
        out.append(
            SwitchGroups(
                remote=np.array(remotes, dtype=np.int64),
                is_up=np.array([rank[r] > rank[s] for r in remotes], dtype=bool),
                sizes=np.array(sizes, dtype=np.int64),
                offsets=offsets,
                ports=np.array(
                    [p for r in remotes for p in buckets[r]], dtype=np.int64
                ),
            )
        )
    return out


def compute_costs_dividers(
    fi: FabricIndex,
    rank: np.ndarray,
    groups: list[SwitchGroups],
    shuffle: "np.random.Generator | None" = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Up--down costs and dividers in two rank sweeps.

    Upward sweep, by increasing rank: each switch s relaxes every upswitch
    s' to cost[s]+1 and max-reduces pi = divider[s] * (#distinct upswitches
    of s) into divider[s'].  Downward sweep, by decreasing rank: each switch
    relaxes its downswitches, extending costs to ascend-then-descend paths.
    Both reductions are associative-commutative, so intra-level processing
    order cannot change the result; `shuffle` exists to let tests prove it.
    """
    leaves = np.flatnonzero(
        (rank == 1) & (fi.peer_node >= 0).any(axis=1)
    ).astype(np.int64)
    n = len(fi.switch_uuids)
    n_leaves = len(leaves)
    cost = np.full((n, n_leaves), INF, dtype=np.int32)
    cost[leaves, np.arange(n_leaves)] = 0
    divider = np.ones(n, dtype=np.int64)

    max_rank = int(rank.max(initial=0))
    by_rank: list[list[int]] = [[] for _ in range(max_rank + 1)]
    for s in range(n):
        if rank[s] > 0:
            by_rank[rank[s]].append(s)
    if shuffle is not None:
        for level in by_rank:
            shuffle.shuffle(level)

    for r in range(1, max_rank + 1):
        for s in by_rank[r]:
            g = groups[s]
            ups = g.remote[g.is_up]
            if ups.size == 0:
                continue
            pi = divider[s] * len(ups)
            relaxed = cost[s] + 1
            for t in ups:
                np.minimum(cost[t], relaxed, out=cost[t])
                if pi > divider[t]:
                    divider[t] = pi

    for r in range(max_rank, 1, -1):
        for s in by_rank[r]:
            g = groups[s]
            downs = g.remote[~g.is_up]
            if downs.size == 0:
                continue
            relaxed = cost[s] + 1
            for t in downs:
                np.minimum(cost[t], relaxed, out=cost[t])

    np.minimum(cost, INF, out=cost)
    return cost, divider


def compute_topological_nids(
    fi: FabricIndex, rank: np.ndarray, cost: np.ndarray
) -> np.ndarray:
    """Assign topological NIDs: nid[node_index] -> int in [0, #nodes).

    Leaves are processed in UUID order; the head leaf l pulls in every
    still-unnumbered leaf within mu = min cost from l to any other pending
    leaf, and their nodes are numbered consecutively, each leaf's nodes in
    local port order.  mu over an empty set is infinite, so a last lone
    leaf (or a set of mutually-unreachable leaves, which only occurs in
    fabrics that fail validation anyway) is swept up in one block.
    """
    leaves = np.flatnonzero(
        (rank == 1) & (fi.peer_node >= 0).any(axis=1)
    ).astype(np.int64)
    leaf_col = {int(s): c for c, s in enumerate(leaves)}

    nodes_under: dict[int, list[int]] = {}
    for s in leaves:
        ports = fi.peer_node[s]
        nodes_under[int(s)] = [int(x) for x in ports[ports >= 0]]

    nid = np.full(len(fi.node_uuids), -1, dtype=np.int64)
    pending = [int(s) for s in leaves]  # ascending index == ascending UUID
    t = 0
    while pending:
        head = pending[0]
        row = cost[head]
        others = [leaf_col[l] for l in pending[1:]]
        mu = int(row[others].min()) if others else INF
        taken = [l for l in pending if row[leaf_col[l]] <= mu]
        for l in taken:
            for node in nodes_under[l]:
                nid[node] = t
                t += 1
        taken_set = set(taken)
        pending = [l for l in pending if l not in taken_set]
    return nid


def check_validity(state: "RoutingState") -> Validity:
    """Routable iff every leaf-pair cost is finite: every node pair then has
    an ascend-then-descend path."""
    sub = state.cost[state.leaves]  # (L, L)
    bad = np.argwhere(sub >= INF)
    pairs = [
        (int(state.switch_uuids[state.leaves[i]]), int(state.switch_uuids[state.leaves[j]]))
        for i, j in bad
        if i != j
    ]
    return Validity(ok=not pairs, unreachable_pairs=pairs)


@dataclass
class RoutingState:
    """Preprocessing products shared by the routing engines and analysis."""

    topo: Topology
    switch_uuids: np.ndarray
    switch_idx: dict[int, int]
    node_uuids: np.ndarray
    node_idx: dict[int, int]
    rank: np.ndarray
    groups: list[SwitchGroups]
    cost: np.ndarray  # (S, L) int32, INF = unreachable
    divider: np.ndarray  # (S,) int64
    leaves: np.ndarray  # (L,) switch indices, ascending UUID
    leaf_col: np.ndarray  # (S,) leaf column or -1
    nid: np.ndarray  # (#nodes,) node index -> NID
    nid_node: np.ndarray  # (N,) NID -> node index
    nid_leaf: np.ndarray  # (N,) NID -> leaf switch index
    nid_leaf_port: np.ndarray  # (N,) NID -> leaf's local port to the node
    nid_leaf_col: np.ndarray  # (N,) NID -> leaf column
    nid_blocks: list[tuple[int, int, int]]  # (start, stop, leaf switch index)
    leaf_block: dict[int, tuple[int, int]]  # leaf switch index -> NID range
    peer_switch: np.ndarray
    peer_node_nid: np.ndarray  # (S, P) NID behind port, else -1
    port_count: np.ndarray
    port_base: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.nid_node)

    @property
    def max_rank(self) -> int:
        return int(self.rank.max(initial=0))

    @property
    def total_switch_ports(self) -> int:
        return int(self.port_base[-1])

    # Lookup helpers, mostly for tests and debug dumps.
    def rank_of(self, switch_uuid: int) -> int:
        return int(self.rank[self.switch_idx[switch_uuid]])

    def divider_of(self, switch_uuid: int) -> int:
        return int(self.divider[self.switch_idx[switch_uuid]])

    def cost_between(self, switch_uuid: int, leaf_uuid: int) -> float:
        col = self.leaf_col[self.switch_idx[leaf_uuid]]
        if col < 0:
            raise FabricError(f"{leaf_uuid:x} is not a leaf switch")
        c = int(self.cost[self.switch_idx[switch_uuid], col])
        return float("inf") if c >= INF else c

    def nid_of(self, node_uuid: int) -> int:
        return int(self.nid[self.node_idx[node_uuid]])

    def node_of_nid(self, nid: int) -> int:
        return int(self.node_uuids[self.nid_node[nid]])

    def port_groups_of(self, switch_uuid: int) -> list[PortGroup]:
        s = self.switch_idx[switch_uuid]
        g = self.groups[s]
        out = []
        for i in range(len(g.remote)):
            ports = g.ports[g.offsets[i] : g.offsets[i] + g.sizes[i]]
            out.append(
                PortGroup(
                    owner=switch_uuid,
                    remote=int(self.switch_uuids[g.remote[i]]),
                    direction="up" if g.is_up[i] else "down",
                    ports=tuple(int(p) for p in ports),
                )
            )
        return out


def preprocess(topo: Topology) -> RoutingState:
    """Run the full preprocessing pipeline on a frozen topology."""
    fi = FabricIndex(topo)
    rank = assign_ranks(fi)
    groups = build_port_groups(fi, rank)
    cost, divider = compute_costs_dividers(fi, rank, groups)
    nid = compute_topological_nids(fi, rank, cost)

    leaves = np.flatnonzero(
        (rank == 1) & (fi.peer_node >= 0).any(axis=1)
    ).astype(np.int64)
    leaf_col = np.full(len(fi.switch_uuids), -1, dtype=np.int64)
    leaf_col[leaves] = np.arange(len(leaves))

    n_nodes = len(fi.node_uuids)
    nid_node = np.zeros(n_nodes, dtype=np.int64)
    nid_node[nid] = np.arange(n_nodes)
    nid_leaf = np.zeros(n_nodes, dtype=np.int64)
    nid_leaf_port = np.zeros(n_nodes, dtype=np.int64)
    peer_node_nid = np.full_like(fi.peer_node, -1)
    mask = fi.peer_node >= 0
    peer_node_nid[mask] = nid[fi.peer_node[mask]]
    for s in leaves:
        ports = np.flatnonzero(fi.peer_node[s] >= 0)
        these = nid[fi.peer_node[s, ports]]
        nid_leaf[these] = s
        nid_leaf_port[these] = ports

    blocks: list[tuple[int, int, int]] = []
    start = 0
    for i in range(1, n_nodes + 1):
        if i == n_nodes or nid_leaf[i] != nid_leaf[start]:
            blocks.append((start, i, int(nid_leaf[start])))
            start = i
    leaf_block = {leaf: (t0, t1) for t0, t1, leaf in blocks}

    return RoutingState(
        topo=topo,
        switch_uuids=fi.switch_uuids,
        switch_idx=fi.switch_idx,
        node_uuids=fi.node_uuids,
        node_idx=fi.node_idx,
        rank=rank,
        groups=groups,
        cost=cost,
        divider=divider,
        leaves=leaves,
        leaf_col=leaf_col,
        nid=nid,
        nid_node=nid_node,
        nid_leaf=nid_leaf,
        nid_leaf_port=nid_leaf_port,
        nid_leaf_col=leaf_col[nid_leaf],
        nid_blocks=blocks,
        leaf_block=leaf_block,
        peer_switch=fi.peer_switch,
        peer_node_nid=peer_node_nid,
        port_count=fi.port_count,
        port_base=fi.port_base,
    )


def costs_csv(state: RoutingState) -> str:
    """Debug dump: switch_uuid,leaf_uuid,cost ('inf' when unreachable)."""
    lines = ["switch_uuid,leaf_uuid,cost"]
    for s in range(len(state.switch_uuids)):
        if state.rank[s] == 0:
            continue
        for c, l in enumerate(state.leaves):
            v = int(state.cost[s, c])
            lines.append(
                f"{int(state.switch_uuids[s]):x},{int(state.switch_uuids[l]):x},"
                f"{'inf' if v >= INF else v}"
            )
    return "\n".join(lines) + "\n"


def nids_csv(state: RoutingState) -> str:
    """Debug dump: node_uuid,nid sorted by NID."""
    lines = ["node_uuid,nid"]
    for t in range(state.node_count):
        lines.append(f"{state.node_of_nid(t):x},{t}")
    return "\n".join(lines) + "\n"
