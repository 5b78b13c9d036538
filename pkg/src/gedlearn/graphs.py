"""Node-labeled undirected graphs: parsing, validation, padding, synthesis.

Label id 0 is reserved for the dummy node used to pad a pair of graphs to a
common size; ingested graphs must use labels >= 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

EPSILON_LABEL = 0


class GraphFormatError(ValueError):
    """Raised for malformed or invalid graph records."""


@dataclass(frozen=True)
class Graph:
    """Immutable node-labeled undirected graph.

    node_labels[v] is the categorical label of node v. Edges are stored as a
    sorted tuple of (u, v) pairs with u < v. target is an optional scalar
    (regression value or binary class id).
    """

    id: str
    node_labels: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    target: float | int | None = None

    @property
    def n(self) -> int:
        return len(self.node_labels)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        """Number of edges incident to node v."""
        if not 0 <= v < self.n:
            raise IndexError(f"node {v} out of range for graph with {self.n} nodes")
        return sum(1 for u, w in self.edges if u == v or w == v)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, w in self.edges:
            deg[u] += 1
            deg[w] += 1
        return deg

    def adjacency_sets(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for u, w in self.edges:
            adj[u].add(w)
            adj[w].add(u)
        return adj

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for u, w in self.edges:
            a[u, w] = 1.0
            a[w, u] = 1.0
        return a


def make_graph(gid, node_labels, edges, target=None) -> Graph:
    """Build a validated Graph; normalizes edge order and checks invariants."""
    labels = tuple(int(x) for x in node_labels)
    n = len(labels)
    norm = []
    seen = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if u == v:
            raise GraphFormatError(f"graph {gid!r}: self-loop at node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"graph {gid!r}: edge ({u},{v}) endpoint out of range")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(f"graph {gid!r}: duplicate edge ({u},{v})")
        seen.add(key)
        norm.append(key)
    for v, lab in enumerate(labels):
        if lab == EPSILON_LABEL:
            raise GraphFormatError(f"graph {gid!r}: reserved label 0 used at node {v}")
        if lab < 0:
            raise GraphFormatError(f"graph {gid!r}: negative label at node {v}")
    return Graph(id=str(gid), node_labels=labels, edges=tuple(sorted(norm)), target=target)


def parse_graphs(path) -> list[Graph]:
    """Read a JSONL file of graph records, one object per line.

    Record shape: {"id": str, "nodes": [int...], "edges": [[int,int]...],
    "target": number|null}. Blank lines are skipped. Errors report the
    offending line number.
    """
    graphs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                gid = rec["id"]
                nodes = rec["nodes"]
                edges = rec.get("edges", [])
                target = rec.get("target", None)
                g = make_graph(gid, nodes, edges, target=target)
            except GraphFormatError as exc:
                raise GraphFormatError(f"{path}: line {lineno}: {exc}") from exc
            except (KeyError, TypeError, IndexError) as exc:
                raise GraphFormatError(f"{path}: line {lineno}: malformed record ({exc})") from exc
            graphs.append(g)
    return graphs


def serialize_graphs(graphs, path) -> None:
    """Write graphs as JSONL, the inverse of parse_graphs."""
    with open(path, "w", encoding="utf-8") as f:
        for g in graphs:
            rec = {
                "id": g.id,
                "nodes": list(g.node_labels),
                "edges": [list(e) for e in g.edges],
                "target": g.target,
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass(frozen=True)
class PaddedPair:
    """A pair of graphs padded with dummy nodes to a common frame size.

    left has the n real nodes of g at indices 0..n-1 followed by m dummies;
    right has the m real nodes of h at indices 0..m-1 followed by n dummies.
    slot_map marks, per frame index, whether the slot holds a real node
    (True) on each side.
    """

    left: Graph
    right: Graph
    n: int
    m: int
    frame_size: int
    left_real: tuple[bool, ...] = field(repr=False, default=())
    right_real: tuple[bool, ...] = field(repr=False, default=())


def pad_pair(g: Graph, h: Graph) -> PaddedPair:
    """Pad g with m dummy nodes and h with n dummies so both have n+m nodes.

    Dummy nodes are isolated and carry the reserved label 0. Real nodes keep
    their original indices.
    """
    n, m = g.n, h.n
    left = Graph(
        id=g.id,
        node_labels=g.node_labels + (EPSILON_LABEL,) * m,
        edges=g.edges,
        target=g.target,
    )
    right = Graph(
        id=h.id,
        node_labels=h.node_labels + (EPSILON_LABEL,) * n,
        edges=h.edges,
        target=h.target,
    )
    return PaddedPair(
        left=left,
        right=right,
        n=n,
        m=m,
        frame_size=n + m,
        left_real=tuple(i < n for i in range(n + m)),
        right_real=tuple(j < m for j in range(n + m)),
    )


def synth_random(n: int, p: float, labels: int, seed: int, gid: str | None = None) -> Graph:
    """Random G(n, p) graph with labels drawn uniformly from {1..labels}.

    Deterministic for a fixed seed.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("edge probability must be in [0, 1]")
    if labels < 1:
        raise ValueError("label alphabet must have at least one symbol")
    rng = np.random.default_rng(seed)
    node_labels = rng.integers(1, labels + 1, size=n).tolist()
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.append((u, v))
    return make_graph(gid if gid is not None else f"synth-{seed}", node_labels, edges)


def random_edit(g: Graph, rng: np.random.Generator, labels: int = 4) -> Graph:
    """Apply one random edit (edge toggle, node relabel, node add/remove).

    Used to build near-duplicate training pairs. The result is always a valid
    graph; the choice of edit adapts to what the graph allows.
    """
    ops = []
    if g.n >= 2:
        ops.append("toggle_edge")
    if g.n >= 1:
        ops.append("relabel")
        ops.append("add_node")
    if g.n >= 2:
        ops.append("remove_node")
    op = ops[rng.integers(0, len(ops))]

    labels_list = list(g.node_labels)
    edges = set(g.edges)

    if op == "toggle_edge":
        u = int(rng.integers(0, g.n))
        v = int(rng.integers(0, g.n - 1))
        if v >= u:
            v += 1
        key = (min(u, v), max(u, v))
        if key in edges:
            edges.remove(key)
        else:
            edges.add(key)
    elif op == "relabel":
        v = int(rng.integers(0, g.n))
        old = labels_list[v]
        new = int(rng.integers(1, labels + 1))
        if new == old:
            new = old % labels + 1
        labels_list[v] = new
    elif op == "add_node":
        labels_list.append(int(rng.integers(1, labels + 1)))
        if g.n >= 1 and rng.random() < 0.7:
            u = int(rng.integers(0, g.n))
            edges.add((u, len(labels_list) - 1))
    else:  # remove_node
        v = int(rng.integers(0, g.n))
        labels_list.pop(v)
        remap = lambda x: x if x < v else x - 1
        edges = {(min(remap(a), remap(b)), max(remap(a), remap(b)))
                 for a, b in edges if a != v and b != v}

    return make_graph(g.id + "~", labels_list, sorted(edges), target=g.target)
