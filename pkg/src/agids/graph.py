"""Host-based attack graphs: generation, path enumeration, reachability, risk."""

from __future__ import annotations

import json
import math
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from agids.errors import DataError, InvalidFraction, LimitExceeded, UnknownNode, UnknownVulnerability
from agids.threat import Alert, NetworkInventory

DEFAULT_L_MAX = 4
DEFAULT_MAX_PATHS = 1_000_000
SYNTHETIC_WEIGHT = 0.5


class EdgeProvenance(str, Enum):
    SCRAPED = "Scraped"
    ALERT_DERIVED = "AlertDerived"
    SYNTHETIC = "Synthetic"


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    vuln_id: str
    weight: float
    provenance: EdgeProvenance

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.src, self.dst, self.vuln_id)


@dataclass(frozen=True, eq=False)
class AttackGraph:
    """Immutable attack graph.

    Nodes are host IPs; each edge says an attacker on ``src`` can exploit
    ``vuln_id`` on ``dst``.  Edges are stored sorted by (src, dst, vuln_id)
    and (src, dst, vuln_id) triples are unique.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    variant_tag: str = ""

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes)))
        edges = tuple(sorted(self.edges, key=lambda e: e.key))
        node_set = set(nodes)
        for i, e in enumerate(edges):
            if e.src not in node_set or e.dst not in node_set:
                raise DataError(f"edge {e.key} has an endpoint outside the node set")
            if not 0.0 <= e.weight <= 1.0:
                raise DataError(f"edge {e.key} weight {e.weight} outside [0, 1]")
            if i and edges[i - 1].key == e.key:
                raise DataError(f"duplicate edge {e.key}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttackGraph):
            return NotImplemented
        return (self.nodes, self.edges, self.variant_tag) == (other.nodes, other.edges, other.variant_tag)

    __hash__ = None

    @cached_property
    def adjacency(self) -> dict[str, tuple[Edge, ...]]:
        adj: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.src].append(e)
        return {n: tuple(es) for n, es in adj.items()}

    @cached_property
    def _reach(self) -> dict[str, frozenset[str]]:
        succ = {n: sorted({e.dst for e in es}) for n, es in self.adjacency.items()}
        out = {}
        for start in self.nodes:
            seen: set[str] = set()
            queue = deque(succ[start])
            while queue:
                n = queue.popleft()
                if n in seen:
                    continue
                seen.add(n)
                queue.extend(succ[n])
            out[start] = frozenset(seen)
        return out

    def reachable_from(self, src: str) -> frozenset[str]:
        return self._reach.get(src, frozenset())

    def has_attack_path(self, src: str, dst: str) -> bool:
        """Directed reachability over one or more edges; unknown IPs give False."""
        return dst in self._reach.get(src, ())

    def count(self, provenance: EdgeProvenance) -> int:
        return sum(1 for e in self.edges if e.provenance == provenance)

    def to_dict(self) -> dict:
        return {
            "variant_tag": self.variant_tag,
            "nodes": list(self.nodes),
            "edges": [
                {"src": e.src, "dst": e.dst, "vuln_id": e.vuln_id, "weight": e.weight, "provenance": e.provenance.value}
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> AttackGraph:
        return cls(
            nodes=tuple(doc["nodes"]),
            edges=tuple(
                Edge(e["src"], e["dst"], e["vuln_id"], float(e["weight"]), EdgeProvenance(e["provenance"]))
                for e in doc["edges"]
            ),
            variant_tag=doc.get("variant_tag", ""),
        )

    def to_dot(self) -> str:
        lines = [f'digraph "{self.variant_tag or "ag"}" {{']
        for n in self.nodes:
            lines.append(f'  "{n}";')
        style = {EdgeProvenance.SCRAPED: "solid", EdgeProvenance.ALERT_DERIVED: "bold", EdgeProvenance.SYNTHETIC: "dashed"}
        for e in self.edges:
            lines.append(f'  "{e.src}" -> "{e.dst}" [label="{e.vuln_id} ({e.weight:.2f})", style={style[e.provenance]}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def save_graph(ag: AttackGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(ag.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_graph(path: str | Path) -> AttackGraph:
    return AttackGraph.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def generate_classical(inv: NetworkInventory) -> AttackGraph:
    """One edge for every reachable pair (s, d) and every vulnerability on d."""
    edges = []
    for s, d in sorted(inv.reachability):
        for vid in sorted(inv.hosts[d].vuln_ids):
            edges.append(Edge(s, d, vid, inv.vulnerabilities[vid].cvss_base / 10.0, EdgeProvenance.SCRAPED))
    return AttackGraph(tuple(inv.hosts), tuple(edges), "Scrape")


def generate_from_alerts(inv: NetworkInventory, alerts: Iterable[Alert]) -> AttackGraph:
    """Edges for alert-witnessed (src, dst, vuln) triples.

    A triple is kept only if (src, dst) is in the inventory reachability and
    the vulnerability is listed on dst, so the result is always a sub-graph
    of :func:`generate_classical`.
    """
    witnessed = {(a.src_ip, a.dst_ip, a.vuln_id) for a in alerts}
    edges = []
    for s, d, vid in sorted(witnessed):
        vuln = inv.vulnerabilities.get(vid)
        if vuln is None:
            raise UnknownVulnerability(vid)
        if (s, d) in inv.reachability and vid in inv.hosts[d].vuln_ids:
            edges.append(Edge(s, d, vid, vuln.cvss_base / 10.0, EdgeProvenance.ALERT_DERIVED))
    return AttackGraph(tuple(inv.hosts), tuple(edges), "ET")


@dataclass(frozen=True)
class AttackPath:
    edges: tuple[Edge, ...]
    risk: float

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.edges[0].src,) + tuple(e.dst for e in self.edges)

    def __len__(self) -> int:
        return len(self.edges)


def path_risk(edges: Sequence[Edge]) -> float:
    """Product of edge weights (probability that every step succeeds)."""
    if not edges:
        raise ValueError("a path needs at least one edge")
    return math.prod(e.weight for e in edges)


def enumerate_paths(
    ag: AttackGraph,
    sources: Iterable[str],
    targets: Iterable[str],
    l_max: int = DEFAULT_L_MAX,
    *,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> list[AttackPath]:
    """All simple paths from a source to a target with at most ``l_max`` edges.

    Parallel edges (different vulnerabilities between the same hosts) yield
    distinct paths.  Results are sorted by node sequence, then vulnerability
    sequence.  Raises :class:`LimitExceeded` instead of truncating.
    """
    if l_max < 1:
        raise ValueError("l_max must be >= 1")
    node_set = set(ag.nodes)
    srcs = sorted(set(sources))
    tgts = set(targets)
    for ip in [*srcs, *sorted(tgts)]:
        if ip not in node_set:
            raise UnknownNode(ip)
    adj = ag.adjacency
    out: list[AttackPath] = []

    for s in srcs:
        # stack of (node, edges so far, risk so far, visited nodes)
        stack = [(s, (), 1.0, frozenset((s,)))]
        while stack:
            node, path, risk, visited = stack.pop()
            if path and node in tgts:
                if len(out) >= max_paths:
                    raise LimitExceeded(max_paths)
                out.append(AttackPath(path, risk))
            if len(path) == l_max:
                continue
            for e in adj[node]:
                if e.dst not in visited:
                    stack.append((e.dst, path + (e,), risk * e.weight, visited | {e.dst}))
    out.sort(key=lambda p: (p.nodes, tuple(e.vuln_id for e in p.edges)))
    return out


def victim_risk(
    ag: AttackGraph,
    victim: str,
    sources: Iterable[str],
    l_max: int = DEFAULT_L_MAX,
    *,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> float:
    """Mean path risk over attack paths ending at ``victim``; 0.0 if none."""
    paths = enumerate_paths(ag, [s for s in sources if s != victim], [victim], l_max, max_paths=max_paths)
    if not paths:
        return 0.0
    return math.fsum(p.risk for p in paths) / len(paths)


def inject_noise(ag: AttackGraph, p: float, seed: int, *, weight: float = SYNTHETIC_WEIGHT) -> AttackGraph:
    """Add a synthetic edge to each non-adjacent ordered node pair with probability p."""
    if not 0.0 <= p <= 1.0:
        raise InvalidFraction(p, "[0, 1]")
    adjacent = {(e.src, e.dst) for e in ag.edges}
    candidates = [(s, d) for s in ag.nodes for d in ag.nodes if s != d and (s, d) not in adjacent]
    draws = np.random.default_rng(seed).random(len(candidates)) < p
    added = []
    for n, (s, d) in enumerate(c for c, hit in zip(candidates, draws) if hit):
        added.append(Edge(s, d, f"SYN-{n + 1}", weight, EdgeProvenance.SYNTHETIC))
    if not added:
        return ag
    return AttackGraph(ag.nodes, ag.edges + tuple(added), ag.variant_tag)


def combine(a: AttackGraph, b: AttackGraph, tag: str) -> AttackGraph:
    """Union of nodes and edges; on a shared triple the edge from ``a`` wins."""
    edges = {e.key: e for e in b.edges}
    edges.update({e.key: e for e in a.edges})
    return AttackGraph(a.nodes + b.nodes, tuple(edges.values()), tag)


def subset(ag: AttackGraph, fraction: float, seed: int, tag: str | None = None) -> AttackGraph:
    """Keep round(fraction * |edges|) edges picked by a seeded shuffle."""
    if not 0.0 < fraction <= 1.0:
        raise InvalidFraction(fraction, "(0, 1]")
    keep = int(math.floor(fraction * len(ag.edges) + 0.5))
    perm = np.random.default_rng(seed).permutation(len(ag.edges))
    chosen = tuple(ag.edges[i] for i in sorted(perm[:keep]))
    return AttackGraph(ag.nodes, chosen, tag if tag is not None else f"Sub({ag.variant_tag})")


@dataclass(frozen=True)
class AgStats:
    path_count: int
    generation_seconds: float
    avg_risk: float

    @classmethod
    def from_paths(cls, paths: Sequence[AttackPath], seconds: float) -> AgStats:
        avg = math.fsum(p.risk for p in paths) / len(paths) if paths else 0.0
        return cls(len(paths), seconds, avg)

    def to_dict(self) -> dict:
        return {
            "path_count": self.path_count,
            "generation_seconds": round(self.generation_seconds, 3),
            "avg_risk": self.avg_risk,
        }


def default_endpoints(inv: NetworkInventory) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Attack sources are the external hosts; everything else is a target."""
    return inv.external_hosts, inv.internal_hosts
