"""Metrics, dissimilarity embeddings, KNN heads, and the fixed-cost grid
search baseline."""

from __future__ import annotations

import itertools

import numpy as np
import scipy.stats

from .assignment import GSParams
from .exact import EditCostConfig
from .graphs import pad_pair
from .model import ModelParams, forward_learned, init_model_params


def rank_metrics(pred, truth) -> dict:
    """RMSE plus Kendall tau-b and Spearman rho (both tie-corrected)."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred and truth must be 1-D vectors of equal length")
    if pred.size < 2:
        raise ValueError("need at least two points")
    if np.all(truth == truth[0]):
        raise ValueError("constant truth vector: rank correlations are undefined")
    rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))
    tau = float(scipy.stats.kendalltau(pred, truth)[0])
    rho = float(scipy.stats.spearmanr(pred, truth)[0])
    return {"rmse": rmse, "tau": tau, "rho": rho}


def task_metrics(pred, truth, task: str) -> dict:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size < 2:
        raise ValueError("pred and truth must be 1-D vectors of equal length >= 2")
    if task == "regression":
        ss_tot = float(np.sum((truth - truth.mean()) ** 2))
        if ss_tot == 0.0:
            raise ValueError("constant truth vector: R^2 is undefined")
        ss_res = float(np.sum((truth - pred) ** 2))
        return {"r2": 1.0 - ss_res / ss_tot}
    if task == "classification":
        return {"roc_auc": roc_auc(pred, truth)}
    raise ValueError(f"unknown task {task!r}")


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-statistic formulation."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(scores.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes present")
    ranks = scipy.stats.rankdata(scores)  # average ranks on ties
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def select_prototypes(train_ids, count: int = 16, seed: int = 0) -> list:
    """Uniform sample of prototype ids without replacement."""
    ids = list(train_ids)
    if count > len(ids):
        raise ValueError(f"cannot pick {count} prototypes from {len(ids)} ids")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ids), size=count, replace=False)
    return [ids[i] for i in picked]


def embed(graphs, prototypes, params: ModelParams, gs: GSParams) -> np.ndarray:
    """Dissimilarity embedding: model scores against each prototype graph.

    Deterministic (inference mode, no noise). Row i, column j is the score
    of graphs[i] versus prototypes[j].
    """
    out = np.empty((len(graphs), len(prototypes)))
    for i, g in enumerate(graphs):
        for j, p in enumerate(prototypes):
            out[i, j] = forward_learned(pad_pair(g, p), params=params, gs=gs).score.item()
    return out


def knn_predict(train_x, train_y, test_x, k: int, task: str) -> np.ndarray:
    """Plain KNN in embedding space.

    Regression averages the k nearest targets; classification takes the
    majority vote with ties resolved toward the lower class id.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    test_x = np.asarray(test_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    if train_x.shape[0] == 0:
        raise ValueError("empty training set")
    if k > train_x.shape[0]:
        raise ValueError(f"k={k} exceeds the training size {train_x.shape[0]}")
    preds = np.empty(test_x.shape[0])
    for i, x in enumerate(test_x):
        dist = np.linalg.norm(train_x - x[None, :], axis=1)
        nearest = np.argsort(dist, kind="stable")[:k]
        if task == "regression":
            preds[i] = float(train_y[nearest].mean())
        else:
            votes = np.bincount(train_y[nearest].astype(np.int64))
            preds[i] = int(np.argmax(votes))  # argmax favors the lower class id on ties
    return preds


def cost_grid():
    """The sixteen {1,2}^4 insertion/deletion price combinations."""
    return [
        EditCostConfig(node_del=a, node_ins=b, edge_del=c, edge_ins=d)
        for a, b, c, d in itertools.product((1, 2), repeat=4)
    ]


def pipeline_metric(train_graphs, test_graphs, params: ModelParams, gs: GSParams,
                    task: str, k: int = 3, n_prototypes: int = 16, seed: int = 0) -> float:
    """Embed with prototypes, fit KNN, report R^2 or ROC-AUC on the test split.

    Prototype selection is repeated with three seeds and the mean metric is
    returned, mirroring the usual dissimilarity-embedding protocol.
    """
    vals = []
    train_y = np.array([g.target for g in train_graphs], dtype=np.float64)
    test_y = np.array([g.target for g in test_graphs], dtype=np.float64)
    for rep in range(3):
        protos = select_prototypes(range(len(train_graphs)),
                                   count=min(n_prototypes, len(train_graphs)),
                                   seed=seed + rep)
        proto_graphs = [train_graphs[i] for i in protos]
        train_emb = embed(train_graphs, proto_graphs, params, gs)
        test_emb = embed(test_graphs, proto_graphs, params, gs)
        pred = knn_predict(train_emb, train_y, test_emb, k=k, task=task)
        name = "r2" if task == "regression" else "roc_auc"
        vals.append(task_metrics(pred, test_y, task)[name])
    return float(np.mean(vals))


def grid_search_costs(train_graphs, test_graphs, alphabet: int, gs: GSParams,
                      task: str = "regression", d: int = 16, depth: int = 2,
                      epochs: int = 2, lr: float = 0.01, seed: int = 0,
                      k: int = 3, n_prototypes: int = 16):
    """Fixed-cost baseline: one short unsupervised run per price combination.

    Returns a dict with the per-config table, the best row, and the
    mean/std of the metric across all sixteen configs.
    """
    from .training import train_unsupervised

    rows = []
    for conf in cost_grid():
        params = init_model_params(alphabet, d=d, depth=depth, seed=seed, costs=conf, lam=1.0)
        train_unsupervised(train_graphs, params, gs, epochs=epochs, lr=lr, seed=seed)
        metric = pipeline_metric(train_graphs, test_graphs, params, gs, task,
                                 k=k, n_prototypes=n_prototypes, seed=seed)
        rows.append({
            "node_del": conf.node_del, "node_ins": conf.node_ins,
            "edge_del": conf.edge_del, "edge_ins": conf.edge_ins,
            "metric": metric,
        })
    metrics = np.array([r["metric"] for r in rows])
    best = rows[int(np.argmax(metrics))]
    return {"table": rows, "best": best,
            "mean": float(metrics.mean()), "std": float(metrics.std())}
