"""Node-level cost attribution and importance export.

A pair is explained by decoding the soft matching to a hard permutation and
attributing each matched slot's scored cost to a node: substitution and
deletion slots to the g node, insertion slots to the inserted h node. Edge
prices ride along with the node that owns the slot. Attributed costs within
a set of interchangeable g nodes (identical scored rows, as automorphic
nodes produce) are averaged so that symmetry is reflected in the output
rather than broken by the solver's arbitrary tie choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import GSParams, hungarian
from .graphs import Graph, pad_pair
from .model import ModelParams, forward_learned


@dataclass
class PairCostMap:
    g_costs: np.ndarray  # per real node of g
    h_insert_costs: np.ndarray  # per real node of h; zero unless inserted
    matching: list[tuple[int, int]]  # full frame assignment
    total: float  # sum of attributed costs == hard-matching score


def pair_cost_map(g: Graph, h: Graph, params: ModelParams, gs: GSParams,
                  group_tol: float = 1e-8) -> PairCostMap:
    """Hard matching plus per-node cost attribution for one pair."""
    pair = pad_pair(g, h)
    res = forward_learned(pair, params=params, gs=gs, train_mode=False)
    perm, _ = hungarian(-res.P.data)
    scored = res.scored.data
    n, m = pair.n, pair.m

    g_costs = np.zeros(n)
    h_ins = np.zeros(m)
    for i in range(pair.frame_size):
        c = float(scored[i, perm[i]])
        if i < n:
            g_costs[i] = c
        elif perm[i] < m:
            h_ins[perm[i]] = c
        # dummy-to-dummy slots carry zero by construction

    # average within groups of interchangeable g rows
    signature = np.round(scored[:n], int(-np.log10(group_tol)))
    groups: dict[bytes, list[int]] = {}
    for i in range(n):
        groups.setdefault(signature[i].tobytes(), []).append(i)
    for members in groups.values():
        if len(members) > 1:
            g_costs[members] = g_costs[members].mean()

    matching = [(i, int(perm[i])) for i in range(pair.frame_size)]
    total = float(g_costs.sum() + h_ins.sum())
    return PairCostMap(g_costs=g_costs, h_insert_costs=h_ins, matching=matching, total=total)


def hard_matching_score(g: Graph, h: Graph, params: ModelParams, gs: GSParams) -> float:
    """The scored sum under the decoded hard permutation (no soft weighting)."""
    pair = pad_pair(g, h)
    res = forward_learned(pair, params=params, gs=gs, train_mode=False)
    perm, _ = hungarian(-res.P.data)
    return float(res.scored.data[np.arange(pair.frame_size), perm].sum())


def node_importance(query: Graph, corpus, params: ModelParams, gs: GSParams,
                    normalize: bool = True) -> np.ndarray:
    """Average attributed cost of each query node over one-vs-all matchings.

    Raw per-pair costs are averaged first; a single normalization by the
    maximum then maps the result to [0, 1] for rendering.
    """
    if len(corpus) == 0:
        raise ValueError("corpus must be non-empty")
    acc = np.zeros(query.n)
    for other in corpus:
        acc += pair_cost_map(query, other, params, gs).g_costs
    acc /= len(corpus)
    if normalize:
        peak = acc.max()
        if peak > 0:
            acc = acc / peak
    return acc


# dark-to-light eight-step gradient; lighter tones mean higher cost
_PALETTE = ["#08306b", "#08519c", "#2171b5", "#4292c6",
            "#6baed6", "#9ecae1", "#c6dbef", "#f7fbff"]


def export_heatmap(graph: Graph, importance, path, fmt: str = "dot") -> None:
    """Write per-node importance as JSON scores or a DOT file with fill colors."""
    importance = np.asarray(importance, dtype=np.float64)
    if importance.shape != (graph.n,):
        raise ValueError("importance length must equal the node count")
    if fmt == "json":
        import json

        payload = {"id": graph.id, "scores": {str(v): float(importance[v]) for v in range(graph.n)}}
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, sort_keys=True, indent=2)
            f.write("\n")
        return
    if fmt == "dot":
        lines = [f'graph "{graph.id}" {{', "  node [style=filled];"]
        for v in range(graph.n):
            step = min(len(_PALETTE) - 1, int(importance[v] * len(_PALETTE)))
            lines.append(
                f'  v{v} [label="{graph.node_labels[v]}", fillcolor="{_PALETTE[step]}"];'
            )
        for u, w in graph.edges:
            lines.append(f"  v{u} -- v{w};")
        lines.append("}")
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        return
    raise ValueError(f"unknown format {fmt!r}")
