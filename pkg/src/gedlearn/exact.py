"""Exact graph edit distance: brute force and branch-and-bound oracles.

Both solvers search over injective partial mappings of g's nodes onto h's
nodes; unmapped nodes are deleted (g side) or inserted (h side), and edge
costs follow from the node mapping. Edges are unlabeled, so a g edge whose
endpoints map onto an h edge is free, otherwise it is deleted; h edges not
hit this way are inserted.
"""

from __future__ import annotations

import csv
import itertools
import json
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .graphs import Graph

BRUTE_FORCE_MAX_NODES = 8
EXACT_MAX_NODES = 16


@dataclass(frozen=True)
class EditCostConfig:
    """Scalar prices of the edit operations.

    node_sub applies only when the two labels differ; substitution between
    equal labels is free.
    """

    node_del: float
    node_ins: float
    edge_del: float
    edge_ins: float
    node_sub: float = 1.0

    def __post_init__(self):
        if min(self.node_del, self.node_ins, self.edge_del, self.edge_ins) <= 0:
            raise ValueError("insertion/deletion costs must be positive")
        if self.node_sub < 0:
            raise ValueError("substitution cost must be non-negative")


# The five standard configurations. Order: node_del, node_ins, edge_del,
# edge_ins; substitution is 1 everywhere.
COST_CONFIGS: dict[int, EditCostConfig] = {
    1: EditCostConfig(node_del=1, node_ins=1, edge_del=1, edge_ins=1),
    2: EditCostConfig(node_del=2, node_ins=2, edge_del=1, edge_ins=1),
    3: EditCostConfig(node_del=1, node_ins=1, edge_del=2, edge_ins=2),
    4: EditCostConfig(node_del=1, node_ins=2, edge_del=1, edge_ins=2),
    5: EditCostConfig(node_del=2, node_ins=1, edge_del=2, edge_ins=1),
}


def cost_config(conf: int) -> EditCostConfig:
    if conf not in COST_CONFIGS:
        raise ValueError(f"unknown cost configuration {conf}; valid ids are 1..5")
    return COST_CONFIGS[conf]


def ged_lower_bound(g: Graph, h: Graph) -> int:
    """Cheap admissible bound: | |V_g|-|V_h| | + | |E_g|-|E_h| |."""
    return abs(g.n - h.n) + abs(g.n_edges - h.n_edges)


def _mapping_cost(g: Graph, h: Graph, subset, image, c: EditCostConfig) -> float:
    """Cost of the edit path induced by mapping subset[k] -> image[k].

    Straightforward non-incremental evaluation, used by the brute-force
    oracle only.
    """
    sigma = dict(zip(subset, image))
    cost = c.node_del * (g.n - len(subset)) + c.node_ins * (h.n - len(subset))
    for u in subset:
        if g.node_labels[u] != h.node_labels[sigma[u]]:
            cost += c.node_sub
    h_edges = set(h.edges)
    preserved = 0
    for u, v in g.edges:
        if u in sigma and v in sigma:
            a, b = sigma[u], sigma[v]
            if (min(a, b), max(a, b)) in h_edges:
                preserved += 1
    cost += c.edge_del * (g.n_edges - preserved)
    cost += c.edge_ins * (h.n_edges - preserved)
    return cost


def brute_force_ged(g: Graph, h: Graph, c: EditCostConfig) -> float:
    """Exact GED by enumerating every injective partial node mapping."""
    if max(g.n, h.n) > BRUTE_FORCE_MAX_NODES:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_NODES} nodes, got {g.n} vs {h.n}"
        )
    best = _mapping_cost(g, h, (), (), c)
    for k in range(1, min(g.n, h.n) + 1):
        for subset in itertools.combinations(range(g.n), k):
            for image in itertools.permutations(range(h.n), k):
                cost = _mapping_cost(g, h, subset, image, c)
                if cost < best:
                    best = cost
    return best


def exact_ged(g: Graph, h: Graph, c: EditCostConfig) -> float:
    """Exact GED by depth-first branch-and-bound over node assignments.

    Nodes of g are decided in index order; each is mapped to an unused node
    of h or deleted. Partial branches are pruned with an admissible bound
    that prices the unmatched node and edge remainders at their cheapest
    possible rates.
    """
    if max(g.n, h.n) > EXACT_MAX_NODES:
        raise ValueError(
            f"branch-and-bound limited to {EXACT_MAX_NODES} nodes, got {g.n} vs {h.n}"
        )
    n, m = g.n, h.n
    eg, eh = g.n_edges, h.n_edges

    adj_g = [0] * n
    for u, v in g.edges:
        adj_g[u] |= 1 << v
        adj_g[v] |= 1 << u
    adj_h = [0] * m
    for u, v in h.edges:
        adj_h[u] |= 1 << v
        adj_h[v] |= 1 << u

    glabels, hlabels = g.node_labels, h.node_labels
    popcount = int.bit_count

    best = _mapping_cost(g, h, (), (), c)  # map nothing: delete g, insert h

    # sigma[u] = image of decided g node u, or -1 for deleted
    sigma = [-1] * n

    def bound(remaining_g, used_h_count, rem_eg, rem_eh):
        rg, rh = remaining_g, m - used_h_count
        b = 0.0
        if rg > rh:
            b += (rg - rh) * c.node_del
        elif rh > rg:
            b += (rh - rg) * c.node_ins
        if rem_eg > rem_eh:
            b += (rem_eg - rem_eh) * c.edge_del
        elif rem_eh > rem_eg:
            b += (rem_eh - rem_eg) * c.edge_ins
        return b

    def dfs(i, cost, used_h, decided_mask, rem_eg, rem_eh):
        nonlocal best
        if i == n:
            # every g node decided: insert unused h nodes and leftover h edges
            total = cost + (m - popcount(used_h)) * c.node_ins + rem_eh * c.edge_ins
            if total < best:
                best = total
            return
        used_count = popcount(used_h)
        children = []

        # delete g node i: its edges to decided nodes die now
        del_edges = popcount(adj_g[i] & decided_mask)
        children.append((c.node_del + del_edges * c.edge_del, -1, del_edges, 0))

        for j in range(m):
            if used_h >> j & 1:
                continue
            step = 0.0 if glabels[i] == hlabels[j] else c.node_sub
            g_charged = 0  # g edges from i to decided nodes, resolved now
            preserved = 0
            gi = adj_g[i] & decided_mask
            u = gi
            while u:
                lsb = u & -u
                v = lsb.bit_length() - 1
                u ^= lsb
                tv = sigma[v]
                if tv >= 0 and adj_h[j] >> tv & 1:
                    preserved += 1
                else:
                    step += c.edge_del
                g_charged += 1
            # h edges from j into the used region that no g edge matched are
            # inserted now (no later g edge can touch two used h nodes)
            h_adj_used = popcount(adj_h[j] & used_h)
            inserted = h_adj_used - preserved
            step += inserted * c.edge_ins
            children.append((step, j, g_charged, preserved + inserted))

        children.sort(key=lambda t: (t[0], t[1]))
        for step, j, g_charged, h_charged in children:
            new_cost = cost + step
            n_rem_eg = rem_eg - g_charged
            n_rem_eh = rem_eh - h_charged
            if j < 0:
                new_used, new_count = used_h, used_count
            else:
                new_used, new_count = used_h | (1 << j), used_count + 1
            if new_cost + bound(n - i - 1, new_count, n_rem_eg, n_rem_eh) >= best:
                continue
            sigma[i] = j
            dfs(i + 1, new_cost, new_used, decided_mask | (1 << i), n_rem_eg, n_rem_eh)
            sigma[i] = -1

    dfs(0, 0.0, 0, 0, eg, eh)
    return best


def _label_worker(args):
    i, j, g, h, conf = args
    return i, j, exact_ged(g, h, cost_config(conf))


def gen_pair_labels(graphs, conf: int, max_nodes: int = EXACT_MAX_NODES, workers: int = 1):
    """GED for all unordered pairs (including i == j) of a graph list.

    Returns (rows, stats): rows is a list of (i, j, ged) with i <= j, and
    stats holds mean/median/std/variance/min/max of the ged column.
    """
    for idx, g in enumerate(graphs):
        if g.n > max_nodes:
            raise ValueError(f"graph {idx} ({g.id!r}) has {g.n} nodes, over the guard {max_nodes}")
    tasks = [
        (i, j, graphs[i], graphs[j], conf)
        for i in range(len(graphs))
        for j in range(i, len(graphs))
    ]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            rows = pool.map(_label_worker, tasks, chunksize=64)
    else:
        rows = [_label_worker(t) for t in tasks]
    values = np.array([r[2] for r in rows], dtype=np.float64)
    stats = {
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "std": float(values.std()),
        "variance": float(values.var()),
        "min": float(values.min()),
        "max": float(values.max()),
    }
    return rows, stats


def write_labels_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "ged"])
        for i, j, val in rows:
            w.writerow([i, j, format(val, "g")])


def read_labels_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        r = csv.reader(f)
        header = next(r)
        if header != ["i", "j", "ged"]:
            raise ValueError(f"unexpected label header {header}")
        for rec in r:
            rows.append((int(rec[0]), int(rec[1]), float(rec[2])))
    return rows


def write_label_stats(stats: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(stats, f, sort_keys=True, indent=2)
        f.write("\n")
