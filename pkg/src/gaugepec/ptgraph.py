"""Pattern transfer graph of a Clifford gate set.

Nodes are Pauli support patterns plus a distinguished root ("SM") standing
for state preparation and measurement.  Every edge carries exactly one noise
eigenvalue: gate edges run from pt(a) to pt(U(a)) for each layer and label a,
prep edges from the root to each pattern, measurement edges back.  Products
of eigenvalues along closed walks through the root are exactly the
experimentally accessible quantities, so the cycle-space rank of the graph
counts the learnable degrees of freedom and the remaining edge parameters
are gauge.
"""

from __future__ import annotations

from dataclasses import dataclass

from .models import pattern_label
from .paulis import (
    MAX_DENSE_QUBITS,
    CliffordLayer,
    Pauli,
    index_to_label,
)

ROOT = "SM"


@dataclass(frozen=True)
class Edge:
    channel: str  # 'prep' | 'meas' | layer id
    label: str    # Pauli label (gate edges) or pattern string (SPAM edges)
    tail: str
    head: str
    image: str = ""  # gate edges: label of U(a), identifies conjugate partners


@dataclass
class PatternTransferGraph:
    n: int
    nodes: tuple[str, ...]  # pattern strings, root excluded
    edges: tuple[Edge, ...]

    @property
    def node_count(self) -> int:
        return len(self.nodes) + 1  # plus root

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def gate_edges(self, layer_id: str | None = None):
        return [
            e for e in self.edges
            if e.channel not in ("prep", "meas")
            and (layer_id is None or e.channel == layer_id)
        ]

    def to_dot(self) -> str:
        lines = ["digraph pattern_transfer {", f'  "{ROOT}" [shape=box];']
        for node in self.nodes:
            lines.append(f'  "{node}";')
        for e in sorted(self.edges, key=lambda e: (e.channel, e.label)):
            style = ' style=dashed' if e.channel in ("prep", "meas") else ""
            lines.append(
                f'  "{e.tail}" -> "{e.head}" [label="{e.channel}:{e.label}"{style}];'
            )
        lines.append("}")
        return "\n".join(lines)


def build_graph(gateset: dict[str, CliffordLayer], n: int,
                labels=None, spam_per_label: bool = False) -> PatternTransferGraph:
    """Build the pattern transfer graph for a gate set.

    ``labels`` optionally restricts the label universe (e.g. Z-only labels);
    by default all 4^n - 1 non-identity labels are enumerated, which caps n.
    SPAM edges are one per pattern by default, matching the generalized
    depolarizing noise assumption; ``spam_per_label`` switches to one edge
    per Pauli label for unconstrained SPAM channels.
    """
    if labels is None:
        if n > MAX_DENSE_QUBITS:
            raise ValueError(
                f"full enumeration needs n <= {MAX_DENSE_QUBITS}; "
                "pass an explicit label restriction for larger systems"
            )
        paulis = [Pauli.from_index(n, a) for a in range(1, 4**n)]
    else:
        paulis = [
            Pauli.from_label(l) if isinstance(l, str) else l for l in labels
        ]
        if any(p.pattern == 0 for p in paulis):
            raise ValueError("identity label has no noise parameter")

    patterns = sorted({p.pattern for p in paulis})
    node_name = {pt: pattern_label(n, pt) for pt in patterns}
    edges = []
    for lid in sorted(gateset):
        layer = gateset[lid]
        for p in paulis:
            q = layer.conjugate(p)
            if q.pattern not in node_name:
                # restricted label set must be closed under the gate action
                raise ValueError(
                    f"label set not closed under layer {lid}: "
                    f"{p.label} -> {q.label}"
                )
            edges.append(
                Edge(lid, p.label, node_name[p.pattern], node_name[q.pattern], q.label)
            )
    if spam_per_label:
        for p in paulis:
            edges.append(Edge("prep", p.label, ROOT, node_name[p.pattern]))
            edges.append(Edge("meas", p.label, node_name[p.pattern], ROOT))
    else:
        for pt in patterns:
            edges.append(Edge("prep", node_name[pt], ROOT, node_name[pt]))
            edges.append(Edge("meas", node_name[pt], node_name[pt], ROOT))
    return PatternTransferGraph(n, tuple(node_name[pt] for pt in patterns), tuple(edges))


@dataclass
class DofClassification:
    learnable_count: int
    gauge_count: int
    degenerate_pairs: tuple[tuple[tuple[str, str], tuple[str, str]], ...]


def classify_dof(graph: PatternTransferGraph) -> DofClassification:
    """Split the graph's eigenvalue parameters into learnable and gauge.

    Learnable = cycle-space rank = E - V + C (spanning-forest construction,
    exact integer arithmetic).  Every remaining parameter is gauge; because
    SPAM edges attach every node to the root, C is 1 and the gauge count is
    simply the number of non-root nodes.
    """
    parent: dict[str, str] = {}

    def find(u: str) -> str:
        while parent.setdefault(u, u) != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    components = 0
    tree_edges = 0
    for name in (ROOT, *graph.nodes):
        parent[name] = name
    for e in graph.edges:
        ru, rv = find(e.tail), find(e.head)
        if ru != rv:
            parent[ru] = rv
            tree_edges += 1
    roots = {find(u) for u in (ROOT, *graph.nodes)}
    components = len(roots)
    learnable = graph.edge_count - graph.node_count + components

    pairs = []
    seen = set()
    by_key = {(e.channel, e.label): e for e in graph.gate_edges()}
    for e in graph.gate_edges():
        if e.tail == e.head:
            continue
        partner = by_key.get((e.channel, e.image))
        if partner is None or partner.head != e.tail:
            continue  # image outside the label universe, or not a 2-cycle
        key = tuple(sorted([(e.channel, e.label), (partner.channel, partner.label)]))
        if key not in seen:
            seen.add(key)
            pairs.append(key)
    return DofClassification(
        learnable_count=learnable,
        gauge_count=graph.edge_count - learnable,
        degenerate_pairs=tuple(sorted(pairs)),
    )
