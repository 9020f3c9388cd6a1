"""Static congestion-risk evaluation of forwarding tables.

Flows are traced hop by hop through the deterministic ports.  Every
directed port crossed (identified by its transmitting element: a switch
output port, or a node's uplink) accumulates the flow's source and
destination into distinct sets; the port's congestion risk is
min(#distinct sources, #distinct destinations).  This is a static proxy
for contention, not a throughput estimate.

Patterns:
* a2a: all ordered node pairs; the aggregate is the maximum risk over all
  ports.
* rp: random permutations (fixed points generate no flow); per sample the
  maximum port risk is recorded and the aggregate is the median over
  samples (lower-middle element for even counts).  Reproducible from the
  seed.
* sp: all #N-1 shift permutations i -> (i+k) mod #N in NID or UUID node
  order; the aggregate is the maximum over shifts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .preprocess import RoutingState
from .router import ForwardingTables
from .topology import FabricError

__all__ = [
    "PortLoads",
    "CongestionReport",
    "route_flows",
    "analyze_a2a",
    "analyze_rp",
    "analyze_sp",
    "reports_csv",
    "detail_csv",
]

logger = logging.getLogger(__name__)

_CHUNK = 1 << 18


@dataclass
class PortLoads:
    """Distinct-source and distinct-destination counts per directed port.

    Port ids: switch output ports first (port_base[s] + local index), then
    one uplink per node (total_switch_ports + source NID).
    """

    srcs: np.ndarray
    dsts: np.ndarray
    valid_flows: int
    invalid_flows: int
    failures: list[tuple[int, int, str]]  # (src nid, dst nid, reason), capped

    @property
    def risk(self) -> np.ndarray:
        return np.minimum(self.srcs, self.dsts)

    @property
    def max_risk(self) -> int:
        return int(self.risk.max(initial=0))


class _Tracer:
    """Accumulates (port, endpoint) distinct pairs over flow chunks."""

    def __init__(self, state: RoutingState, tables: ForwardingTables):
        self.state = state
        self.tables = tables
        self.n = state.node_count
        self.n_ports = state.total_switch_ports + self.n
        self.src_pairs: list[np.ndarray] = []
        self.dst_pairs: list[np.ndarray] = []
        self.valid = 0
        self.invalid = 0
        self.failures: list[tuple[int, int, str]] = []

    def _fail(self, src: np.ndarray, dst: np.ndarray, reason: str) -> None:
        self.invalid += len(src)
        for a, b in zip(src[:10], dst[:10]):
            if len(self.failures) < 100:
                self.failures.append((int(a), int(b), reason))

    def add(self, src: np.ndarray, dst: np.ndarray) -> None:
        keep = src != dst
        src = src[keep].astype(np.int64)
        dst = dst[keep].astype(np.int64)
        for lo in range(0, len(src), _CHUNK):
            self._trace_chunk(src[lo : lo + _CHUNK], dst[lo : lo + _CHUNK])

    def _trace_chunk(self, src: np.ndarray, dst: np.ndarray) -> None:
        st = self.state
        n = self.n
        src_keys = [((st.total_switch_ports + src) * n + src)]
        dst_keys = [((st.total_switch_ports + src) * n + dst)]
        cur = st.nid_leaf[src]
        s, d = src, dst
        limit = 2 * st.max_rank + 2
        for _ in range(limit):
            if len(s) == 0:
                break
            port = self.tables.ports[cur, d].astype(np.int64)
            bad = port < 0
            if bad.any():
                self._fail(s[bad], d[bad], "invalid table entry")
                good = ~bad
                cur, s, d, port = cur[good], s[good], d[good], port[good]
                if len(s) == 0:
                    break
            gid = st.port_base[cur] + port
            src_keys.append(gid * n + s)
            dst_keys.append(gid * n + d)
            nid_behind = st.peer_node_nid[cur, port]
            arrived = nid_behind == d
            self.valid += int(arrived.sum())
            wrong = (nid_behind >= 0) & ~arrived
            if wrong.any():
                self._fail(s[wrong], d[wrong], "misdelivered")
            cont = nid_behind < 0
            nxt = st.peer_switch[cur, port]
            dead = cont & (nxt < 0)
            if dead.any():
                self._fail(s[dead], d[dead], "dead end")
                cont &= ~dead
            cur, s, d = nxt[cont], s[cont], d[cont]
        if len(s):
            self._fail(s, d, "loop suspected")
        self.src_pairs.append(np.unique(np.concatenate(src_keys)))
        self.dst_pairs.append(np.unique(np.concatenate(dst_keys)))

    def loads(self) -> PortLoads:
        def per_port(chunks: list[np.ndarray]) -> np.ndarray:
            if not chunks:
                return np.zeros(self.n_ports, dtype=np.int64)
            keys = np.unique(np.concatenate(chunks))
            return np.bincount(keys // max(self.n, 1), minlength=self.n_ports)

        return PortLoads(
            srcs=per_port(self.src_pairs),
            dsts=per_port(self.dst_pairs),
            valid_flows=self.valid,
            invalid_flows=self.invalid,
            failures=self.failures,
        )


def route_flows(
    state: RoutingState,
    tables: ForwardingTables,
    src: np.ndarray,
    dst: np.ndarray,
) -> PortLoads:
    """Trace the given flows and accumulate per-port distinct src/dst
    counts.  Flows hitting an invalid table entry are reported in the
    result and the rest of the analysis continues."""
    tracer = _Tracer(state, tables)
    tracer.add(np.asarray(src), np.asarray(dst))
    loads = tracer.loads()
    for a, b, reason in loads.failures[:3]:
        logger.warning("flow %d -> %d failed: %s", a, b, reason)
    return loads


@dataclass
class CongestionReport:
    pattern: str
    aggregate: int
    samples: int
    seed: int | None
    valid_flows: int
    invalid_flows: int
    per_sample: tuple[int, ...] | None = None  # per RP sample / per SP shift
    detail: PortLoads | None = None


def analyze_a2a(
    state: RoutingState, tables: ForwardingTables, detail: bool = False
) -> CongestionReport:
    """All ordered pairs; aggregate = max risk over all directed ports."""
    n = state.node_count
    tracer = _Tracer(state, tables)
    block = max(1, _CHUNK // max(n, 1))
    all_dst = np.arange(n, dtype=np.int64)
    for lo in range(0, n, block):
        srcs = np.arange(lo, min(lo + block, n), dtype=np.int64)
        tracer.add(np.repeat(srcs, n), np.tile(all_dst, len(srcs)))
    loads = tracer.loads()
    return CongestionReport(
        pattern="a2a",
        aggregate=loads.max_risk,
        samples=1,
        seed=None,
        valid_flows=loads.valid_flows,
        invalid_flows=loads.invalid_flows,
        detail=loads if detail else None,
    )


def _rp_sample(state, tables, perm) -> PortLoads:
    src = np.arange(len(perm), dtype=np.int64)
    return route_flows(state, tables, src, perm)


def analyze_rp(
    state: RoutingState,
    tables: ForwardingTables,
    samples: int,
    seed: int,
    detail: bool = False,
) -> CongestionReport:
    """Random permutations; aggregate = lower-middle median of per-sample
    maxima.  Permutations are uniform, fixed points allowed (they produce
    no flow).  The optional detail is the median-achieving sample."""
    if samples < 1:
        raise FabricError(f"samples must be >= 1, got {samples}")
    n = state.node_count
    rng = np.random.default_rng(seed)
    maxima: list[int] = []
    valid = invalid = 0
    for _ in range(samples):
        loads = _rp_sample(state, tables, rng.permutation(n))
        maxima.append(loads.max_risk)
        valid += loads.valid_flows
        invalid += loads.invalid_flows
    median_pos = np.argsort(maxima, kind="stable")[(samples - 1) // 2]
    report = CongestionReport(
        pattern="rp",
        aggregate=maxima[median_pos],
        samples=samples,
        seed=seed,
        valid_flows=valid,
        invalid_flows=invalid,
        per_sample=tuple(maxima),
    )
    if detail:
        rng = np.random.default_rng(seed)
        for _ in range(median_pos + 1):
            perm = rng.permutation(n)
        report.detail = _rp_sample(state, tables, perm)
    return report


def analyze_sp(
    state: RoutingState,
    tables: ForwardingTables,
    ordering: str = "nid",
    detail: bool = False,
) -> CongestionReport:
    """All #N-1 shift permutations; aggregate = max over shifts.  `ordering`
    is "nid" (topological order, the layout the modulo engine balances) or
    "uuid" (node UUID order, for aligning with an external manager's
    numbering)."""
    n = state.node_count
    if n < 2:
        raise FabricError("shift analysis needs at least 2 nodes")
    if ordering == "nid":
        order = np.arange(n, dtype=np.int64)
    elif ordering == "uuid":
        order = state.nid.astype(np.int64)  # node index order == UUID order
    else:
        raise FabricError(f"unknown shift ordering {ordering!r}")
    maxima: list[int] = []
    valid = invalid = 0
    for k in range(1, n):
        loads = route_flows(state, tables, order, np.roll(order, -k))
        maxima.append(loads.max_risk)
        valid += loads.valid_flows
        invalid += loads.invalid_flows
    best = int(np.argmax(maxima))
    report = CongestionReport(
        pattern="sp",
        aggregate=maxima[best],
        samples=n - 1,
        seed=None,
        valid_flows=valid,
        invalid_flows=invalid,
        per_sample=tuple(maxima),
    )
    if detail:
        report.detail = route_flows(state, tables, order, np.roll(order, -(best + 1)))
    return report


def reports_csv(reports: list[CongestionReport]) -> str:
    lines = ["pattern,seed,samples,aggregate,valid_flows,invalid_flows"]
    for r in reports:
        seed = "" if r.seed is None else str(r.seed)
        lines.append(
            f"{r.pattern},{seed},{r.samples},{r.aggregate},"
            f"{r.valid_flows},{r.invalid_flows}"
        )
    return "\n".join(lines) + "\n"


def detail_csv(state: RoutingState, loads: PortLoads) -> str:
    """Per-port rows for every directed port that carried traffic; the
    owner of a node uplink is the node itself."""
    lines = ["switch_uuid,port,srcs,dsts,risk"]
    touched = np.flatnonzero((loads.srcs > 0) | (loads.dsts > 0))
    tsp = state.total_switch_ports
    for gid in touched:
        if gid < tsp:
            s = int(np.searchsorted(state.port_base, gid, side="right")) - 1
            owner = int(state.switch_uuids[s])
            port = int(gid - state.port_base[s])
        else:
            owner = int(state.node_uuids[state.nid_node[gid - tsp]])
            port = 0
        lines.append(
            f"{owner:x},{port},{int(loads.srcs[gid])},{int(loads.dsts[gid])},"
            f"{int(min(loads.srcs[gid], loads.dsts[gid]))}"
        )
    return "\n".join(lines) + "\n"
