"""Training regimes: unsupervised self-organization, supervised GED
regression, and cost learning with a contrastive objective over key graphs.

Freeze contracts per regime (the matcher scalars are frozen in all three):

  * unsupervised: only the encoder learns (optionally the match temperature);
  * supervised GED regression: encoder and cost networks learn, lambda = 0;
  * cost learning: encoder, cost networks and the task head learn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from . import autodiff as ad
from .assignment import GSParams
from .autodiff import Tensor
from .graphs import pad_pair, random_edit
from .model import ModelParams, forward_learned, forward_unsupervised


class DivergenceError(RuntimeError):
    """Raised when a training loss turns NaN or infinite."""


def _check_finite(value: float, where: str):
    if not math.isfinite(value):
        raise DivergenceError(f"non-finite loss in {where}: {value!r}")


def set_mode_unsupervised(params: ModelParams, gs: GSParams, learn_temperature: bool = False):
    if not gs.frozen:
        raise RuntimeError("matcher parameters must be frozen during training")
    params.encoder.set_trainable(True)
    for t in params.cost_tensors():
        t.requires_grad = False
    params.tau_raw.requires_grad = learn_temperature
    params.lam = 1.0


def set_mode_supervised(params: ModelParams, gs: GSParams):
    if not gs.frozen:
        raise RuntimeError("matcher parameters must be frozen during training")
    params.encoder.set_trainable(True)
    for t in params.cost_tensors():
        t.requires_grad = True
    params.tau_raw.requires_grad = False
    params.lam = 0.0


def set_mode_cost_learning(params: ModelParams, gs: GSParams, lam: float = 0.5):
    if not gs.frozen:
        raise RuntimeError("matcher parameters must be frozen during training")
    params.encoder.set_trainable(True)
    for t in params.cost_tensors():
        t.requires_grad = True
    params.tau_raw.requires_grad = False
    params.lam = lam


def loss_unsupervised(pairs, params: ModelParams, gs: GSParams, train_mode: bool = True,
                      seed: int = 0) -> Tensor:
    """Mean fixed-price score over a batch of graph pairs.

    Only encoder gradients may flow; any unfrozen cost parameter or matcher
    is rejected outright, since letting those drift turns the zero-at-identity
    signal into a shortcut.
    """
    for t in params.cost_tensors():
        if t.requires_grad:
            raise RuntimeError("cost parameters are unfrozen in unsupervised mode")
    if not gs.frozen:
        raise RuntimeError("matcher parameters are unfrozen in unsupervised mode")
    total = None
    for k, (g, h) in enumerate(pairs):
        res = forward_unsupervised(pad_pair(g, h), params=params, gs=gs,
                                   train_mode=train_mode, seed=seed + k)
        total = res.score if total is None else total + res.score
    return total * (1.0 / len(pairs))


def _sample_training_pair(corpus, rng: np.random.Generator, labels: int):
    """Half the pairs are self or one-edit near-duplicates, half random."""
    g = corpus[rng.integers(0, len(corpus))]
    r = rng.random()
    if r < 0.25:
        return g, g
    if r < 0.5:
        return g, random_edit(g, rng, labels=labels)
    return g, corpus[rng.integers(0, len(corpus))]


def train_unsupervised(corpus, params: ModelParams, gs: GSParams, epochs: int = 25,
                       batch_size: int = 16, lr: float = 0.01, seed: int = 0,
                       eval_pairs=None, eval_truth=None, learn_temperature: bool = False,
                       edit_labels: int = 4, pairs_per_epoch: int | None = None):
    """Self-organizing training; returns per-epoch history rows.

    eval_pairs is an optional list of (g, h) tuples with eval_truth their
    exact GED values; metrics against them are recorded every epoch.
    """
    import scipy.stats

    set_mode_unsupervised(params, gs, learn_temperature=learn_temperature)
    trainable = [t for t in params.all_tensors() if t.requires_grad]
    opt = ad.Adam(trainable, lr=lr)
    rng = np.random.default_rng(seed)
    n_pairs = pairs_per_epoch if pairs_per_epoch is not None else len(corpus)
    history = []
    for epoch in range(1, epochs + 1):
        losses = []
        done = 0
        while done < n_pairs:
            batch = [_sample_training_pair(corpus, rng, edit_labels)
                     for _ in range(min(batch_size, n_pairs - done))]
            done += len(batch)
            loss = loss_unsupervised(batch, params, gs, train_mode=True,
                                     seed=int(rng.integers(2**31)))
            _check_finite(loss.item(), f"unsupervised epoch {epoch}")
            opt.zero_grad()
            ad.backward(loss)
            opt.step()
            losses.append(loss.item())
        row = {"epoch": epoch, "loss": float(np.mean(losses))}
        if eval_pairs is not None:
            preds = np.array([
                forward_unsupervised(pad_pair(g, h), params=params, gs=gs).score.item()
                for g, h in eval_pairs
            ])
            truth = np.asarray(eval_truth, dtype=np.float64)
            row["rmse"] = float(np.sqrt(np.mean((preds - truth) ** 2)))
            row["rho"] = float(scipy.stats.spearmanr(preds, truth)[0])
        history.append(row)
    return history


def train_supervised_ged(corpus, label_rows, params: ModelParams, gs: GSParams,
                         epochs: int = 10, batch_size: int = 16, lr: float = 0.01,
                         seed: int = 0, val_split: float = 0.1):
    """Smooth-L1 regression of the learned-cost score onto exact GED labels."""
    set_mode_supervised(params, gs)
    trainable = [t for t in params.all_tensors() if t.requires_grad]
    opt = ad.Adam(trainable, lr=lr)
    rng = np.random.default_rng(seed)
    rows = list(label_rows)
    order = rng.permutation(len(rows))
    n_val = max(1, int(len(rows) * val_split))
    val_rows = [rows[i] for i in order[:n_val]]
    train_rows = [rows[i] for i in order[n_val:]]
    history = []
    for epoch in range(1, epochs + 1):
        rng.shuffle(train_rows)
        losses = []
        for start in range(0, len(train_rows), batch_size):
            chunk = train_rows[start:start + batch_size]
            preds = []
            for i, j, _y in chunk:
                res = forward_learned(pad_pair(corpus[i], corpus[j]), params=params, gs=gs,
                                      train_mode=True, seed=int(rng.integers(2**31)))
                preds.append(res.score.reshape(1))
            pred_vec = ad.concat(preds, axis=0)
            target = Tensor(np.array([y for _i, _j, y in chunk]))
            loss = ad.smooth_l1(pred_vec, target)
            _check_finite(loss.item(), f"supervised epoch {epoch}")
            opt.zero_grad()
            ad.backward(loss)
            opt.step()
            losses.append(loss.item())
        val_pred = np.array([
            forward_learned(pad_pair(corpus[i], corpus[j]), params=params, gs=gs).score.item()
            for i, j, _y in val_rows
        ])
        val_truth = np.array([y for _i, _j, y in val_rows])
        history.append({
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "val_rmse": float(np.sqrt(np.mean((val_pred - val_truth) ** 2))),
        })
    return history


@dataclass
class KeyBatch:
    """A query plus H ordered keys; slot 0 and slot H-1 are the fixed anchors."""

    query_idx: int
    key_idxs: list[int]
    positive_slot: int
    task: str

    @property
    def h(self) -> int:
        return len(self.key_idxs)


def sample_keys(corpus, query_idx: int, h: int, task: str, seed: int,
                key_pool=None, ged_fn=None) -> KeyBatch:
    """Draw the key set for one query.

    Regression: the keys with the smallest and largest targets anchor the
    first and last slots, the middle slots are sampled and sorted by target;
    the positive is the key whose target is closest to the query's. Discrete
    targets tie often, so when ged_fn is given ties go to the key the model
    already scores nearest (any tied key is equally valid as a positive and
    this keeps the objective from fighting itself).

    Classification (binary): one fixed anchor per class plus (h-2)/2 sampled
    keys per class; the positive is the same-class key whose model GED to
    the query is nearest the same-class mean, which needs ged_fn.
    """
    if h < 3:
        raise ValueError("need at least 3 keys")
    rng = np.random.default_rng(seed)
    pool = [i for i in (key_pool if key_pool is not None else range(len(corpus)))
            if i != query_idx]
    targets = {i: corpus[i].target for i in pool}
    if any(t is None for t in targets.values()):
        raise ValueError("every key candidate needs a target")

    if task == "regression":
        if len(pool) < h:
            raise ValueError(f"need at least {h} key candidates, have {len(pool)}")
        lo = min(pool, key=lambda i: (targets[i], i))
        hi = max(pool, key=lambda i: (targets[i], -i))
        if lo == hi:
            raise ValueError("constant targets cannot anchor the key slots")
        middle_pool = [i for i in pool if i not in (lo, hi)]
        picked = rng.choice(len(middle_pool), size=h - 2, replace=False)
        middle = sorted((middle_pool[p] for p in picked), key=lambda i: (targets[i], i))
        keys = [lo] + middle + [hi]
        qt = corpus[query_idx].target
        gaps = [abs(targets[k] - qt) for k in keys]
        tied = [slot for slot, gap in enumerate(gaps) if gap == min(gaps)]
        if len(tied) > 1 and ged_fn is not None:
            positive_slot = min(tied, key=lambda slot: ged_fn(query_idx, keys[slot]))
        else:
            positive_slot = tied[0]
        return KeyBatch(query_idx, keys, positive_slot, task)

    if task == "classification":
        if h < 4 or (h - 2) % 2 != 0:
            raise ValueError("classification needs an even key count of at least 4")
        per_class = (h - 2) // 2
        class0 = [i for i in pool if int(targets[i]) == 0]
        class1 = [i for i in pool if int(targets[i]) == 1]
        if not class0 or not class1:
            raise ValueError("classification keys need both classes present")
        if len(class0) < per_class + 1 or len(class1) < per_class + 1:
            raise ValueError("too few candidates in one class for the slot scheme")
        fix0, fix1 = min(class0), min(class1)
        pool0 = [i for i in class0 if i != fix0]
        pool1 = [i for i in class1 if i != fix1]
        mid0 = sorted(pool0[p] for p in rng.choice(len(pool0), size=per_class, replace=False))
        mid1 = sorted(pool1[p] for p in rng.choice(len(pool1), size=per_class, replace=False))
        keys = [fix0] + mid0 + mid1 + [fix1]
        if ged_fn is None:
            raise ValueError("classification positives need ged_fn")
        q_class = int(corpus[query_idx].target)
        same = [(slot, k) for slot, k in enumerate(keys) if int(targets[k]) == q_class]
        geds = np.array([ged_fn(query_idx, k) for _slot, k in same])
        positive_slot = same[int(np.argmin(np.abs(geds - geds.mean())))][0]
        return KeyBatch(query_idx, keys, positive_slot, task)

    raise ValueError(f"unknown task {task!r}")


def loss_contrastive(score_tensors, positive_slot: int, t_c: float = 1.0) -> Tensor:
    """Softmax cross-entropy over negated scaled GED scores.

    Zero when the positive's GED is far below every negative's; log(H) when
    all scores are equal.
    """
    if t_c <= 0:
        raise ValueError("contrastive temperature must be positive")
    vec = ad.concat([s.reshape(1) for s in score_tensors], axis=0)
    logits = vec * (-1.0 / t_c)
    lse = ad.logsumexp(logits, axis=0)
    pos = ad.take_rows(logits, [positive_slot]).reshape(())
    return lse - pos


@dataclass
class HeadParams:
    """Small MLP over the H key scores predicting the query target."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def tensors(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def to_arrays(self):
        return {f"head.{n}": t.data.copy() for n, t in zip(("w1", "b1", "w2", "b2"), self.tensors())}

    def load_arrays(self, arrays):
        for n, t in zip(("w1", "b1", "w2", "b2"), self.tensors()):
            t.data = np.asarray(arrays[f"head.{n}"], dtype=np.float64)


def init_head_params(h: int = 8, hidden: int = 8, seed: int = 0) -> HeadParams:
    rng = np.random.default_rng(seed)
    return HeadParams(
        w1=Tensor(rng.standard_normal((h, hidden)) * np.sqrt(2.0 / (h + hidden)),
                  requires_grad=True),
        b1=Tensor(np.zeros(hidden), requires_grad=True),
        w2=Tensor(rng.standard_normal((hidden, 1)) * np.sqrt(2.0 / (hidden + 1)),
                  requires_grad=True),
        b2=Tensor(np.zeros(1), requires_grad=True),
    )


def head_forward(score_tensors, head: HeadParams) -> Tensor:
    vec = ad.concat([s.reshape(1) for s in score_tensors], axis=0)
    x = vec.reshape(1, -1)
    z = ad.relu(x @ head.w1 + head.b1)
    return (z @ head.w2 + head.b2).reshape(())


def loss_task(raw_out: Tensor, target: float, task: str) -> Tensor:
    """Squared error for regression, binary cross-entropy for classification."""
    if task == "regression":
        e = raw_out - float(target)
        return e * e
    if task == "classification":
        y = float(target)
        return ad.softplus(raw_out) - raw_out * y
    raise ValueError(f"unknown task {task!r}")


def predict_head(corpus, query_idx: int, head: HeadParams, params: ModelParams,
                 gs: GSParams, h: int, task: str, seed: int, key_pool=None) -> float:
    """Deterministic head prediction for one query (inference mode)."""
    kb = sample_keys(corpus, query_idx, h, task, seed=seed, key_pool=key_pool,
                     ged_fn=lambda a, b: forward_learned(
                         pad_pair(corpus[a], corpus[b]), params=params, gs=gs).score.item())
    scores = [forward_learned(pad_pair(corpus[query_idx], corpus[k]), params=params, gs=gs).score
              for k in kb.key_idxs]
    raw = head_forward(scores, head)
    if task == "classification":
        return float(scipy.special.expit(raw.item()))
    return raw.item()


def train_cost_learning(corpus, params: ModelParams, head: HeadParams, gs: GSParams,
                        epochs: int = 20, batch_size: int = 16, lr: float = 0.01,
                        seed: int = 0, task: str = "regression", h: int = 8,
                        t_c: float = 1.0, lam_task: float = 1.0, lam: float = 0.5,
                        val_split: float = 0.1):
    """Joint contrastive + task training; leaves params/head at the best
    validation epoch and returns (history, best_epoch)."""
    from .evalkit import task_metrics

    set_mode_cost_learning(params, gs, lam=lam)
    trainable = [t for t in params.all_tensors() if t.requires_grad] + head.tensors()
    opt = ad.Adam(trainable, lr=lr)
    rng = np.random.default_rng(seed)

    idxs = [i for i in range(len(corpus)) if corpus[i].target is not None]
    order = rng.permutation(len(idxs))
    n_val = max(1, int(len(idxs) * val_split))
    val_idx = [idxs[i] for i in order[:n_val]]
    train_idx = [idxs[i] for i in order[n_val:]]

    def model_ged(a, b):
        return forward_learned(pad_pair(corpus[a], corpus[b]), params=params, gs=gs).score.item()

    history = []
    best = None
    best_epoch = -1
    best_state = None
    for epoch in range(1, epochs + 1):
        rng.shuffle(train_idx)
        c_losses, t_losses = [], []
        for start in range(0, len(train_idx), batch_size):
            chunk = train_idx[start:start + batch_size]
            batch_loss = None
            for q in chunk:
                kb = sample_keys(corpus, q, h, task, seed=int(rng.integers(2**31)),
                                 key_pool=train_idx, ged_fn=model_ged)
                scores = [
                    forward_learned(pad_pair(corpus[q], corpus[k]), params=params, gs=gs,
                                    train_mode=True, seed=int(rng.integers(2**31))).score
                    for k in kb.key_idxs
                ]
                l_c = loss_contrastive(scores, kb.positive_slot, t_c=t_c)
                l_t = loss_task(head_forward(scores, head), corpus[q].target, task)
                item = l_c + l_t * lam_task
                batch_loss = item if batch_loss is None else batch_loss + item
                c_losses.append(l_c.item())
                t_losses.append(l_t.item())
            batch_loss = batch_loss * (1.0 / len(chunk))
            _check_finite(batch_loss.item(), f"cost learning epoch {epoch}")
            opt.zero_grad()
            ad.backward(batch_loss)
            opt.step()
        val_pred = np.array([
            predict_head(corpus, q, head, params, gs, h, task, seed=seed + q,
                         key_pool=sorted(train_idx))
            for q in val_idx
        ])
        val_truth = np.array([corpus[q].target for q in val_idx], dtype=np.float64)
        metric_name = "r2" if task == "regression" else "roc_auc"
        val_loss = float(np.mean((val_pred - val_truth) ** 2))
        try:
            val_metric = task_metrics(val_pred, val_truth, task)[metric_name]
        except ValueError:
            # constant validation targets; R^2 / AUC undefined for the whole
            # run, so ranking epochs by prediction error instead is consistent
            val_metric = float("nan")
        row = {"epoch": epoch, "contrastive": float(np.mean(c_losses)),
               "task": float(np.mean(t_losses)), f"val_{metric_name}": val_metric,
               "val_loss": val_loss}
        history.append(row)
        selector = val_metric if math.isfinite(val_metric) else -val_loss
        if math.isfinite(selector) and (best is None or selector > best):
            best = selector
            best_epoch = epoch
            best_state = (params.to_arrays(), head.to_arrays())
    if best_state is not None:
        params.load_arrays(best_state[0])
        head.load_arrays(best_state[1])
    return history, best_epoch
