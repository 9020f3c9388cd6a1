"""PGFT fabric graphs: construction, random degradation, text persistence.

A fabric is a port-symmetric multigraph of switches and compute nodes.
Every element carries a fabric-wide unique identifier (UUID); identifier
order drives every tie-break downstream, so construction keeps UUID
assignment fully reproducible.

A parallel generalized fat-tree PGFT(h; m1..mh; w1..wh; p1..ph) has h
switch levels.  A level-l switch is labeled by a digit tuple
(a_h,...,a_{l+1}, b_l,...,b_1) with a_i in [0, m_i) and b_i in [0, w_i);
a level-l and a level-(l+1) switch are linked iff their tuples agree on
all shared digit positions, with p_{l+1} parallel links.  Nodes hang off
level-1 (leaf) switches, one per a_1 digit.  The construction guarantees
the defining fat-tree property: from any switch there is at most one
strictly-downward switch path to any node.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

__all__ = [
    "FabricError",
    "TopologyError",
    "ParseError",
    "PgftParams",
    "Switch",
    "Node",
    "RemovedSwitch",
    "RemovedLink",
    "Topology",
    "build_pgft",
    "degrade",
    "restore",
    "save",
    "load",
    "MAX_ELEMENTS",
]

# Switches + nodes + physical links; build_pgft rejects anything larger.
MAX_ELEMENTS = 2_000_000


class FabricError(Exception):
    """Base class for all fabric handling errors."""


class TopologyError(FabricError):
    """Invalid parameters or an impossible topology operation."""


class ParseError(FabricError):
    """Malformed topology or forwarding-table text."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class PgftParams:
    """PGFT shape parameters, all 1-indexed per level, lowest level first.

    m[l] is the downward arity of level l+1 (children per switch),
    w[l] the upward multiplicity (distinct parents per level-l+1 switch),
    p[l] the number of parallel links per child/parent pair.
    w[0] and p[0] must be 1: a node attaches to exactly one leaf switch
    by exactly one link.
    """

    h: int
    m: tuple[int, ...]
    w: tuple[int, ...]
    p: tuple[int, ...]

    def validate(self) -> None:
        if self.h < 1:
            raise TopologyError(f"levels must be >= 1, got {self.h}")
        for name, seq in (("m", self.m), ("w", self.w), ("p", self.p)):
            if len(seq) != self.h:
                raise TopologyError(
                    f"{name} must have {self.h} entries, got {len(seq)}"
                )
            if any(x < 1 for x in seq):
                raise TopologyError(f"{name} entries must be >= 1, got {seq}")
        if self.w[0] != 1 or self.p[0] != 1:
            raise TopologyError(
                "w[1] and p[1] must be 1: each node attaches to exactly one "
                "leaf switch by exactly one link"
            )

    @property
    def node_count(self) -> int:
        return math.prod(self.m)

    def switches_at_level(self, level: int) -> int:
        """Number of switches at `level` (1 = leaves)."""
        return math.prod(self.w[:level]) * math.prod(self.m[level:])

    @property
    def switch_count(self) -> int:
        return sum(self.switches_at_level(l) for l in range(1, self.h + 1))

    @property
    def link_count(self) -> int:
        """Physical links, node-attachment links included."""
        total = self.node_count
        for l in range(1, self.h):
            total += self.switches_at_level(l) * self.w[l] * self.p[l]
        return total

    def notation(self) -> str:
        dot = lambda seq: ".".join(str(x) for x in seq)
        return f"PGFT({self.h};{dot(self.m)};{dot(self.w)};{dot(self.p)})"


# A port entry is (peer uuid, peer port index) or None when unconnected.
Endpoint = tuple[int, int]


@dataclass
class Switch:
    uuid: int
    ports: list[Endpoint | None]


@dataclass
class Node:
    """Compute node: one port (index 0) attached to one leaf switch."""

    uuid: int
    leaf: int
    leaf_port: int


@dataclass(frozen=True)
class RemovedSwitch:
    """Journal entry; `links` is None when loaded from text (detail lost)."""

    uuid: int
    links: tuple[tuple[int, int, int], ...] | None = None  # (port, peer, peer_port)


@dataclass(frozen=True)
class RemovedLink:
    uuid_a: int
    port_a: int
    uuid_b: int | None = None
    port_b: int | None = None


@dataclass
class Topology:
    switches: dict[int, Switch]
    nodes: dict[int, Node]
    provenance: PgftParams | None = None
    removed: list[RemovedSwitch | RemovedLink] = field(default_factory=list)

    @property
    def switch_count(self) -> int:
        return len(self.switches)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def is_leaf(self, uuid: int) -> bool:
        """Leaf switches are exactly the switches with attached nodes."""
        sw = self.switches[uuid]
        return any(peer is not None and peer[0] in self.nodes for peer in sw.ports)

    def leaf_uuids(self) -> list[int]:
        return sorted(u for u in self.switches if self.is_leaf(u))

    def links(self) -> list[tuple[int, int, int, int]]:
        """All physical links as (uuid_a, port_a, uuid_b, port_b), lower uuid
        first, node-attachment links included, each link once, sorted."""
        seen = []
        for u, sw in self.switches.items():
            for i, peer in enumerate(sw.ports):
                if peer is None:
                    continue
                v, j = peer
                if v in self.switches and u < v:
                    seen.append((u, i, v, j))
        for u, node in self.nodes.items():
            a, pa, b, pb = u, 0, node.leaf, node.leaf_port
            if a > b:
                a, pa, b, pb = b, pb, a, pa
            seen.append((a, pa, b, pb))
        seen.sort()
        return seen

    def switch_links(self) -> list[tuple[int, int, int, int]]:
        """Switch-to-switch physical links, canonical order."""
        out = []
        for u, sw in self.switches.items():
            for i, peer in enumerate(sw.ports):
                if peer is None:
                    continue
                v, j = peer
                if v in self.switches and u < v:
                    out.append((u, i, v, j))
        out.sort()
        return out

    @property
    def link_count(self) -> int:
        return len(self.links())

    def copy(self) -> "Topology":
        return Topology(
            switches={u: Switch(u, list(sw.ports)) for u, sw in self.switches.items()},
            nodes={u: replace(n) for u, n in self.nodes.items()},
            provenance=self.provenance,
            removed=list(self.removed),
        )

    def validate(self) -> None:
        """Full-scan structural check: uuid uniqueness, port symmetry,
        single node attachment.  Raises TopologyError on violation."""
        dup = set(self.switches) & set(self.nodes)
        if dup:
            raise TopologyError(f"uuid used by both switch and node: {sorted(dup)}")
        for u, sw in self.switches.items():
            for i, peer in enumerate(sw.ports):
                if peer is None:
                    continue
                v, j = peer
                if v in self.switches:
                    back = self.switches[v].ports
                    if j >= len(back) or back[j] != (u, i):
                        raise TopologyError(
                            f"asymmetric link {u:x}:{i} -> {v:x}:{j}"
                        )
                elif v in self.nodes:
                    node = self.nodes[v]
                    if j != 0 or node.leaf != u or node.leaf_port != i:
                        raise TopologyError(
                            f"node {v:x} attachment disagrees with switch {u:x}:{i}"
                        )
                else:
                    raise TopologyError(f"dangling link endpoint {v:x} at {u:x}:{i}")
        for u, node in self.nodes.items():
            sw = self.switches.get(node.leaf)
            if sw is None:
                raise TopologyError(f"node {u:x} attached to unknown switch")
            if node.leaf_port >= len(sw.ports) or sw.ports[node.leaf_port] != (u, 0):
                raise TopologyError(f"node {u:x} not mirrored on its leaf switch")


def build_pgft(
    params: PgftParams,
    uuid_mode: str = "sequential",
    seed: int | None = None,
    max_elements: int = MAX_ELEMENTS,
) -> Topology:
    """Build a complete PGFT.

    `uuid_mode` is "sequential" (elements numbered level by level, left to
    right, nodes last; bit-reproducible baseline) or "shuffled" (a seeded
    permutation of the sequential assignment, for exercising UUID-order
    sensitivity of tie-breaking).
    """
    params.validate()
    h, m, w, p = params.h, params.m, params.w, params.p

    total = params.switch_count + params.node_count + params.link_count
    if total > max_elements:
        raise TopologyError(
            f"topology too large: {total} elements exceeds limit {max_elements}"
        )
    if uuid_mode not in ("sequential", "shuffled"):
        raise TopologyError(f"unknown uuid_mode {uuid_mode!r}")

    # Per-level index spaces: a level-l switch is (A, B) where A packs the
    # a_{l+1}..a_h digits (a_{l+1} least significant) and B the b_1..b_l
    # digits (b_1 least significant).
    a_range = [math.prod(m[l:]) for l in range(h + 1)]  # a_range[l] for level l
    b_range = [math.prod(w[:l]) for l in range(h + 1)]
    level_base = [0] * (h + 2)
    for l in range(1, h + 1):
        level_base[l + 1] = level_base[l] + a_range[l] * b_range[l]
    n_switches = level_base[h + 1]
    node_base = n_switches

    seq_total = n_switches + params.node_count
    if uuid_mode == "shuffled":
        perm = list(range(seq_total))
        random.Random(seed).shuffle(perm)
        uid = perm.__getitem__
    else:
        uid = lambda i: i

    def switch_uuid(level: int, A: int, B: int) -> int:
        return uid(level_base[level] + A * b_range[level] + B)

    def node_uuid(idx: int) -> int:
        return uid(node_base + idx)

    # Port layout per level-l switch: down ports first (children in index
    # order, p_l ports each), then up ports (parents in b-digit order,
    # p_{l+1} each).  Leaves use one port per node.
    def down_ports(level: int) -> int:
        return m[level - 1] * p[level - 1]

    switches: dict[int, Switch] = {}
    for l in range(1, h + 1):
        n_ports = down_ports(l) + (w[l] * p[l] if l < h else 0)
        for A in range(a_range[l]):
            for B in range(b_range[l]):
                u = switch_uuid(l, A, B)
                switches[u] = Switch(u, [None] * n_ports)

    def connect(ua: int, pa: int, ub: int, pb: int) -> None:
        switches[ua].ports[pa] = (ub, pb)
        switches[ub].ports[pb] = (ua, pa)

    for l in range(1, h):
        up_off = down_ports(l)
        for A in range(a_range[l]):
            parent_A = A // m[l]
            child_digit = A % m[l]
            for B in range(b_range[l]):
                child = switch_uuid(l, A, B)
                for b in range(w[l]):
                    parent = switch_uuid(l + 1, parent_A, B + b_range[l] * b)
                    for r in range(p[l]):
                        connect(
                            child,
                            up_off + b * p[l] + r,
                            parent,
                            child_digit * p[l] + r,
                        )

    nodes: dict[int, Node] = {}
    for A in range(a_range[1]):
        leaf = switch_uuid(1, A, 0)
        for a in range(m[0]):
            u = node_uuid(a + m[0] * A)
            nodes[u] = Node(u, leaf, a)
            switches[leaf].ports[a] = (u, 0)

    return Topology(switches=switches, nodes=nodes, provenance=params)


def _removable_switches(topo: Topology) -> list[int]:
    # Leaf switches are kept: removing one would orphan its nodes, and
    # degradation targets fabric equipment only.
    return sorted(u for u in topo.switches if not topo.is_leaf(u))


def _remove_switch(topo: Topology, uuid: int) -> None:
    sw = topo.switches[uuid]
    links = []
    for i, peer in enumerate(sw.ports):
        if peer is None:
            continue
        v, j = peer
        links.append((i, v, j))
        topo.switches[v].ports[j] = None
    del topo.switches[uuid]
    topo.removed.append(RemovedSwitch(uuid, tuple(links)))


def _remove_link(topo: Topology, link: tuple[int, int, int, int]) -> None:
    ua, pa, ub, pb = link
    topo.switches[ua].ports[pa] = None
    topo.switches[ub].ports[pb] = None
    topo.removed.append(RemovedLink(ua, pa, ub, pb))


def degrade(topo: Topology, kind: str, amount: int, seed: int | None) -> Topology:
    """Return a copy of `topo` with `amount` elements removed uniformly at
    random.  `kind` is "switches" (non-leaf switches, with all their links)
    or "links" (individual switch-to-switch physical links; one member of a
    parallel bundle counts as one removable element).  Nodes and their
    attachment links are never touched.  Deterministic given
    (topo, kind, amount, seed); the input is not mutated.
    """
    if amount < 0:
        raise TopologyError(f"amount must be >= 0, got {amount}")
    if kind == "switches":
        candidates: list = _removable_switches(topo)
    elif kind == "links":
        candidates = topo.switch_links()
    else:
        raise TopologyError(f"unknown degradation kind {kind!r}")
    if amount > len(candidates):
        raise TopologyError(
            f"cannot remove {amount} {kind}: only {len(candidates)} removable"
        )
    picks = random.Random(seed).sample(candidates, amount)
    out = topo.copy()
    for pick in picks:
        if kind == "switches":
            _remove_switch(out, pick)
        else:
            _remove_link(out, pick)
    return out


def restore(topo: Topology) -> Topology:
    """Undo every journaled removal, newest first.  Requires in-memory
    journal entries (text round-trips do not carry removed-link detail)."""
    out = topo.copy()
    for rec in reversed(out.removed):
        if isinstance(rec, RemovedSwitch):
            if rec.links is None:
                raise TopologyError(
                    f"cannot restore switch {rec.uuid:x}: journal entry has no "
                    "link detail (loaded from text?)"
                )
            n_ports = max((i for i, _, _ in rec.links), default=-1) + 1
            sw = Switch(rec.uuid, [None] * n_ports)
            out.switches[rec.uuid] = sw
            for i, v, j in rec.links:
                sw.ports[i] = (v, j)
                if v in out.switches:
                    out.switches[v].ports[j] = (rec.uuid, i)
                # node-side attachment is implicit in the Node record
        else:
            if rec.uuid_b is None:
                raise TopologyError(
                    f"cannot restore link {rec.uuid_a:x}:{rec.port_a}: journal "
                    "entry has no peer detail (loaded from text?)"
                )
            out.switches[rec.uuid_a].ports[rec.port_a] = (rec.uuid_b, rec.port_b)
            out.switches[rec.uuid_b].ports[rec.port_b] = (rec.uuid_a, rec.port_a)
    out.removed = []
    return out


def save(topo: Topology) -> str:
    """Serialize to the line-based `topo v1` text format.

    Layout: header, `switch` lines (uuid order), `node` lines (uuid order),
    `link` lines (every physical link once, lower uuid first, sorted), then
    the degradation journal.  Byte-deterministic for a given topology.
    """
    lines = ["topo v1"]
    for u in sorted(topo.switches):
        lines.append(f"switch {u:x}")
    for u in sorted(topo.nodes):
        n = topo.nodes[u]
        lines.append(f"node {u:x} leaf={n.leaf:x} port={n.leaf_port}")
    for a, pa, b, pb in topo.links():
        lines.append(f"link {a:x}:{pa} {b:x}:{pb}")
    for rec in topo.removed:
        if isinstance(rec, RemovedSwitch):
            lines.append(f"removed switch {rec.uuid:x}")
        else:
            a, pa = rec.uuid_a, rec.port_a
            if rec.uuid_b is not None and rec.uuid_b < a:
                a, pa = rec.uuid_b, rec.port_b
            lines.append(f"removed link {a:x}:{pa}")
    return "\n".join(lines) + "\n"


def _parse_endpoint(text: str, line_no: int) -> tuple[int, int]:
    try:
        u, _, port = text.partition(":")
        return int(u, 16), int(port)
    except ValueError:
        raise ParseError(line_no, f"malformed endpoint {text!r}") from None


def load(text: str) -> Topology:
    """Parse the `topo v1` format.  Raises ParseError with a line number on
    malformed lines, duplicate uuids, dangling or asymmetric links."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "topo v1":
        raise ParseError(1, "expected header 'topo v1'")

    switch_uuids: set[int] = set()
    node_decl: dict[int, tuple[int, int, int]] = {}  # uuid -> (leaf, port, line)
    link_decl: list[tuple[int, int, int, int, int]] = []
    removed: list[RemovedSwitch | RemovedLink] = []

    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "switch" and len(fields) == 2:
            try:
                u = int(fields[1], 16)
            except ValueError:
                raise ParseError(line_no, f"bad uuid {fields[1]!r}") from None
            if u in switch_uuids or u in node_decl:
                raise ParseError(line_no, f"duplicate uuid {u:x}")
            switch_uuids.add(u)
        elif kind == "node" and len(fields) == 4:
            try:
                u = int(fields[1], 16)
                if not fields[2].startswith("leaf=") or not fields[3].startswith("port="):
                    raise ValueError
                leaf = int(fields[2][5:], 16)
                port = int(fields[3][5:])
            except ValueError:
                raise ParseError(line_no, f"malformed node line {line!r}") from None
            if u in switch_uuids or u in node_decl:
                raise ParseError(line_no, f"duplicate uuid {u:x}")
            node_decl[u] = (leaf, port, line_no)
        elif kind == "link" and len(fields) == 3:
            a, pa = _parse_endpoint(fields[1], line_no)
            b, pb = _parse_endpoint(fields[2], line_no)
            link_decl.append((a, pa, b, pb, line_no))
        elif kind == "removed" and len(fields) >= 3:
            if fields[1] == "switch" and len(fields) == 3:
                removed.append(RemovedSwitch(int(fields[2], 16), None))
            elif fields[1] == "link" and len(fields) == 3:
                a, pa = _parse_endpoint(fields[2], line_no)
                removed.append(RemovedLink(a, pa, None, None))
            else:
                raise ParseError(line_no, f"malformed journal line {line!r}")
        else:
            raise ParseError(line_no, f"unrecognized line {line!r}")

    switches = {u: Switch(u, []) for u in sorted(switch_uuids)}
    nodes: dict[int, Node] = {}
    for u, (leaf, port, line_no) in node_decl.items():
        if leaf not in switch_uuids:
            raise ParseError(line_no, f"node {u:x} references unknown uuid {leaf:x}")
        nodes[u] = Node(u, leaf, port)

    def grow(sw: Switch, idx: int) -> None:
        if idx >= len(sw.ports):
            sw.ports.extend([None] * (idx + 1 - len(sw.ports)))

    for a, pa, b, pb, line_no in link_decl:
        for u in (a, b):
            if u not in switch_uuids and u not in nodes:
                raise ParseError(line_no, f"link references unknown uuid {u:x}")
        node_ends = [(u, pu) for u, pu in ((a, pa), (b, pb)) if u in nodes]
        if len(node_ends) == 2:
            raise ParseError(line_no, "link joins two nodes")
        if len(node_ends) == 1:
            (nu, npp) = node_ends[0]
            (su, sp) = (b, pb) if nu == a else (a, pa)
            node = nodes[nu]
            if npp != 0 or node.leaf != su or node.leaf_port != sp:
                raise ParseError(
                    line_no, f"link contradicts node {nu:x} attachment"
                )
            sw = switches[su]
            grow(sw, sp)
            if sw.ports[sp] is not None:
                raise ParseError(line_no, f"port {su:x}:{sp} used twice")
            sw.ports[sp] = (nu, 0)
            continue
        for (u, pu), peer in (((a, pa), (b, pb)), ((b, pb), (a, pa))):
            sw = switches[u]
            grow(sw, pu)
            if sw.ports[pu] is not None:
                raise ParseError(line_no, f"port {u:x}:{pu} used twice")
            sw.ports[pu] = peer

    for u, node in nodes.items():
        sw = switches[node.leaf]
        if node.leaf_port >= len(sw.ports) or sw.ports[node.leaf_port] != (u, 0):
            raise ParseError(
                node_decl[u][2], f"node {u:x} has no matching link line"
            )

    topo = Topology(switches=switches, nodes=nodes, removed=removed)
    topo.validate()
    return topo
