"""Multi-scale node embeddings via residual sum-aggregation layers.

Level 0 is the (unit-normalized) label embedding. Level k applies a
sum-over-neighborhood aggregation followed by a two-layer MLP, ReLU and
layer norm, adds the level k-1 representation back in, and projects the
result onto the unit sphere. Two nodes get identical level-k vectors
whenever their k-hop neighborhoods are isomorphic, so the per-level cosine
dissimilarities form a distance that is zero exactly on locally isomorphic
node pairs (up to the usual WL-refinement blind spot).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graphs import Graph


@dataclass
class EncoderLevel:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ln_gamma: Tensor
    ln_beta: Tensor

    def tensors(self):
        return [self.w1, self.b1, self.w2, self.b2, self.ln_gamma, self.ln_beta]


@dataclass
class EncoderParams:
    """Label embedding table (row 0 is the dummy label) plus per-level MLPs."""

    embedding: Tensor
    levels: list[EncoderLevel] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def width(self) -> int:
        return self.embedding.shape[1]

    @property
    def alphabet(self) -> int:
        return self.embedding.shape[0] - 1

    def tensors(self):
        out = [self.embedding]
        for lv in self.levels:
            out.extend(lv.tensors())
        return out

    def set_trainable(self, flag: bool):
        for t in self.tensors():
            t.requires_grad = flag


def init_encoder_params(alphabet: int, d: int, depth: int, seed: int) -> EncoderParams:
    """Random initialization: unit-norm embedding rows, Glorot-scaled MLPs."""
    if d < 2:
        raise ValueError("embedding width must be at least 2")
    rng = np.random.default_rng(seed)
    emb = rng.standard_normal((alphabet + 1, d))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    levels = []
    glorot = np.sqrt(2.0 / (d + d))
    for _ in range(depth):
        # biases start small but non-zero: with zero biases relu is positively
        # homogeneous, layer norm then cancels the aggregation scale, and
        # degree information never reaches the representation
        levels.append(
            EncoderLevel(
                w1=Tensor(rng.standard_normal((d, d)) * glorot, requires_grad=True),
                b1=Tensor(rng.standard_normal(d) * 0.1, requires_grad=True),
                w2=Tensor(rng.standard_normal((d, d)) * glorot, requires_grad=True),
                b2=Tensor(rng.standard_normal(d) * 0.1, requires_grad=True),
                ln_gamma=Tensor(np.ones(d), requires_grad=True),
                ln_beta=Tensor(np.zeros(d), requires_grad=True),
            )
        )
    return EncoderParams(embedding=Tensor(emb, requires_grad=True), levels=levels)


def encode(g: Graph, params: EncoderParams) -> list[Tensor]:
    """Per-level unit-norm representations of every node of g.

    Returns depth+1 tensors of shape (n, d). Isolated nodes (the padding
    dummies in particular) evolve through the self term alone.
    """
    labels = np.asarray(g.node_labels, dtype=np.int64)
    if labels.max(initial=0) > params.alphabet:
        raise ValueError(
            f"label {labels.max()} outside the embedding table (alphabet {params.alphabet})"
        )
    a_hat = Tensor(g.adjacency_matrix() + np.eye(g.n))
    h = ad.normalize_rows(ad.take_rows(params.embedding, labels))
    out = [h]
    for lv in params.levels:
        agg = a_hat @ h
        z = ad.relu(agg @ lv.w1 + lv.b1)
        z = ad.relu(z @ lv.w2 + lv.b2)
        z = ad.layer_norm(z, lv.ln_gamma, lv.ln_beta)
        h = ad.normalize_rows(z + h)
        out.append(h)
    return out


def level_distance(hv: np.ndarray, hw: np.ndarray) -> float:
    """Normalized cosine dissimilarity (1 - cos)/2 between two unit vectors."""
    nv, nw = np.linalg.norm(hv), np.linalg.norm(hw)
    if nv < 1e-12 or nw < 1e-12:
        raise ValueError("level_distance requires non-zero vectors")
    # rounding can push cos a hair past 1; a distance must not go negative
    return max(0.0, 0.5 * (1.0 - float(np.dot(hv, hw) / (nv * nw))))


def multiscale_distance(v: int, w: int, emb_g, emb_h, depth: int | None = None) -> float:
    """Sum of per-level distances between node v of g and node w of h.

    emb_g and emb_h are the lists returned by encode. The result lies in
    [0, depth+1].
    """
    if depth is None:
        depth = len(emb_g) - 1
    if depth >= len(emb_g) or depth >= len(emb_h):
        raise ValueError("embeddings were not computed to the requested depth")
    total = 0.0
    for k in range(depth + 1):
        total += level_distance(emb_g[k].data[v], emb_h[k].data[w])
    return total
