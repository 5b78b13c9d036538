"""Cost-frame assembly and the differentiable GED approximations.

For a padded pair with n and m real nodes, every matrix is (n+m) x (n+m)
with rows indexed by padded g and columns by padded h:

  * real-vs-real block (top-left): substitution candidates;
  * top-right block: g deletions, one allowed slot per row on its diagonal;
  * bottom-left block: h insertions, ditto per column;
  * bottom-right block: dummy-vs-dummy, free.

M_k holds per-level embedding distances, B the node insertion/deletion
prices, D the degree-implied edge prices, C_k the learned per-pair costs,
and Mask a large sentinel on the forbidden off-diagonal slots of the
deletion/insertion blocks.

The matcher always sees only the fixed-price part (M, B, D plus Mask); the
learned costs enter the scored sum, never the matching, so they cannot
corrupt the correspondence signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .assignment import SENTINEL, GSParams, gumbel_sinkhorn
from .autodiff import Tensor
from .encoder import EncoderParams, encode, init_encoder_params
from .exact import EditCostConfig
from .graphs import PaddedPair, pad_pair

SOFTPLUS_BETA = 5.0
_INV_SOFTPLUS_ONE = float(np.log(np.expm1(1.0)))  # softplus(x) == 1


@dataclass
class CostMlp:
    """Two-layer MLP mapping a concatenated node pair to a positive cost."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def tensors(self):
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class ModelParams:
    encoder: EncoderParams
    cost_mlps: list[CostMlp]
    beta_raw: Tensor  # softplus gives the per-level mixing scalars
    tau_raw: Tensor  # softplus gives the match temperature
    lam: float = 0.5
    lam_tau: float = 0.1
    costs: EditCostConfig = field(default_factory=lambda: EditCostConfig(1, 1, 1, 1))

    @property
    def depth(self) -> int:
        return self.encoder.depth

    def encoder_tensors(self):
        return self.encoder.tensors()

    def cost_tensors(self):
        out = []
        for mlp in self.cost_mlps:
            out.extend(mlp.tensors())
        out.append(self.beta_raw)
        return out

    def all_tensors(self):
        return self.encoder_tensors() + self.cost_tensors() + [self.tau_raw]

    def tau(self) -> Tensor:
        return ad.softplus(self.tau_raw)

    def to_arrays(self) -> dict:
        arrays = {"embedding": self.encoder.embedding.data.copy()}
        for k, lv in enumerate(self.encoder.levels, start=1):
            for name, t in zip(("w1", "b1", "w2", "b2", "ln_gamma", "ln_beta"), lv.tensors()):
                arrays[f"enc.{k}.{name}"] = t.data.copy()
        for k, mlp in enumerate(self.cost_mlps):
            for name, t in zip(("w1", "b1", "w2", "b2"), mlp.tensors()):
                arrays[f"cost.{k}.{name}"] = t.data.copy()
        arrays["beta_raw"] = self.beta_raw.data.copy()
        arrays["tau_raw"] = self.tau_raw.data.copy()
        return arrays

    def load_arrays(self, arrays: dict):
        self.encoder.embedding.data = np.asarray(arrays["embedding"], dtype=np.float64)
        for k, lv in enumerate(self.encoder.levels, start=1):
            for name, t in zip(("w1", "b1", "w2", "b2", "ln_gamma", "ln_beta"), lv.tensors()):
                t.data = np.asarray(arrays[f"enc.{k}.{name}"], dtype=np.float64)
        for k, mlp in enumerate(self.cost_mlps):
            for name, t in zip(("w1", "b1", "w2", "b2"), mlp.tensors()):
                t.data = np.asarray(arrays[f"cost.{k}.{name}"], dtype=np.float64)
        self.beta_raw.data = np.asarray(arrays["beta_raw"], dtype=np.float64)
        self.tau_raw.data = np.asarray(arrays["tau_raw"], dtype=np.float64)


def init_model_params(alphabet: int, d: int = 32, depth: int = 3, seed: int = 0,
                      costs: EditCostConfig | None = None, lam: float = 0.5,
                      lam_tau: float = 0.1) -> ModelParams:
    rng = np.random.default_rng(seed)
    encoder = init_encoder_params(alphabet, d, depth, seed=int(rng.integers(2**31)))
    glorot_in = np.sqrt(2.0 / (2 * d + d))
    glorot_out = np.sqrt(2.0 / (d + 1))
    cost_mlps = []
    for _ in range(depth + 1):
        cost_mlps.append(
            CostMlp(
                w1=Tensor(rng.standard_normal((2 * d, d)) * glorot_in, requires_grad=True),
                b1=Tensor(np.zeros(d), requires_grad=True),
                w2=Tensor(rng.standard_normal((d, 1)) * glorot_out, requires_grad=True),
                b2=Tensor(np.zeros(1), requires_grad=True),
            )
        )
    return ModelParams(
        encoder=encoder,
        cost_mlps=cost_mlps,
        beta_raw=Tensor(np.full(depth + 1, _INV_SOFTPLUS_ONE), requires_grad=True),
        tau_raw=Tensor(np.array(_INV_SOFTPLUS_ONE)),
        lam=lam,
        lam_tau=lam_tau,
        costs=costs if costs is not None else EditCostConfig(1, 1, 1, 1),
    )


def build_B_mask(n: int, m: int, costs: EditCostConfig, sentinel: float = SENTINEL):
    """Node insertion/deletion price matrix and the forbidden-slot mask."""
    f = n + m
    b = np.zeros((f, f))
    b[:n, m:] = costs.node_del
    b[n:, :m] = costs.node_ins
    mask = np.zeros((f, f))
    del_block = np.full((n, n), sentinel)
    np.fill_diagonal(del_block, 0.0)
    mask[:n, m:] = del_block
    ins_block = np.full((m, m), sentinel)
    np.fill_diagonal(ins_block, 0.0)
    mask[n:, :m] = ins_block
    return b, mask


def build_D(pair: PaddedPair, costs: EditCostConfig) -> np.ndarray:
    """Degree-difference edge prices: deleting the surplus, inserting the deficit."""
    f = pair.frame_size
    dg = np.zeros(f)
    dg[: pair.n] = pair.left.degrees()[: pair.n]
    dh = np.zeros(f)
    dh[: pair.m] = pair.right.degrees()[: pair.m]
    diff = dg[:, None] - dh[None, :]
    return np.maximum(diff, 0.0) * costs.edge_del + np.maximum(-diff, 0.0) * costs.edge_ins


def build_M(pair: PaddedPair, emb_g, emb_h) -> list[Tensor]:
    """Per-level (1 - cos)/2 distance matrices over the padded frame.

    The dummy-vs-dummy block is forced to exact zero (all dummies share one
    embedding, so the block is zero up to rounding anyway).
    """
    f = pair.frame_size
    keep = np.ones((f, f))
    keep[pair.n:, pair.m:] = 0.0
    keep_t = Tensor(keep)
    out = []
    for hg, hh in zip(emb_g, emb_h):
        cos = hg @ hh.t()
        m = (1.0 - cos) * 0.5
        out.append(m * keep_t)
    return out


def build_C(pair: PaddedPair, emb_g, emb_h, cost_mlps) -> list[Tensor]:
    """Learned strictly-positive cost per (node of g, node of h) and level."""
    f = pair.frame_size
    left_sel = np.repeat(np.eye(f), f, axis=0)   # (f*f, f): row p*f+q selects p
    right_sel = np.tile(np.eye(f), (f, 1))       # (f*f, f): row p*f+q selects q
    ls, rs = Tensor(left_sel), Tensor(right_sel)
    out = []
    for hg, hh, mlp in zip(emb_g, emb_h, cost_mlps):
        pairs = ad.concat([ls @ hg, rs @ hh], axis=1)
        z = ad.relu(pairs @ mlp.w1 + mlp.b1)
        z = z @ mlp.w2 + mlp.b2
        c = ad.softplus(z, beta=SOFTPLUS_BETA)
        out.append(c.reshape(f, f))
    return out


@dataclass
class ForwardResult:
    score: Tensor
    P: Tensor
    scored: Tensor  # the matrix whose P-weighted sum is the score
    topo: Tensor  # fixed-price part: sum_k M_k / tau + B + D
    M: list
    B: np.ndarray
    D: np.ndarray
    Mask: np.ndarray
    C: list | None
    pair: PaddedPair
    emb_g: list
    emb_h: list


def _frame_parts(pair: PaddedPair, params: ModelParams):
    emb_g = encode(pair.left, params.encoder)
    emb_h = encode(pair.right, params.encoder)
    m_list = build_M(pair, emb_g, emb_h)
    b_mat, mask = build_B_mask(pair.n, pair.m, params.costs)
    d_mat = build_D(pair, params.costs)
    m_sum = m_list[0]
    for mk in m_list[1:]:
        m_sum = m_sum + mk
    inv_tau = 1.0 / params.tau() if params.tau_raw.requires_grad else 1.0 / params.tau().item()
    topo = m_sum * inv_tau + Tensor(b_mat + d_mat)
    return emb_g, emb_h, m_list, b_mat, d_mat, mask, topo


def _tau_penalty(params: ModelParams) -> Tensor:
    return ad.log(params.tau()) * params.lam_tau


def forward_unsupervised(g_or_pair, h=None, params: ModelParams = None, gs: GSParams = None,
                         train_mode: bool = False, seed: int = 0,
                         sinkhorn_iters: int | None = None) -> ForwardResult:
    """Fixed-price GED approximation: match, then sum the matched prices.

    Learned costs are not consulted at all; this is the lambda = 1 score.
    """
    pair = g_or_pair if isinstance(g_or_pair, PaddedPair) else pad_pair(g_or_pair, h)
    if pair.frame_size > gs.frame_size:
        raise ValueError(
            f"frame size {pair.frame_size} exceeds the matcher capacity {gs.frame_size}"
        )
    emb_g, emb_h, m_list, b_mat, d_mat, mask, topo = _frame_parts(pair, params)
    p = gumbel_sinkhorn(topo + Tensor(mask), gs, train_mode=train_mode, seed=seed,
                        fixed_iters=sinkhorn_iters)
    score = ad.tsum(p * topo) + _tau_penalty(params)
    return ForwardResult(score=score, P=p, scored=topo, topo=topo, M=m_list, B=b_mat,
                         D=d_mat, Mask=mask, C=None, pair=pair, emb_g=emb_g, emb_h=emb_h)


def forward_learned(g_or_pair, h=None, params: ModelParams = None, gs: GSParams = None,
                    train_mode: bool = False, seed: int = 0,
                    sinkhorn_iters: int | None = None) -> ForwardResult:
    """GED approximation with learned edit costs blended in.

    The matcher still sees only the fixed-price frame. The scored matrix is
    lam * fixed + (1 - lam) * sum_k(M_k * C_k * beta_k) / sum_k beta_k, so a
    perfectly matched pair (all M_k zero on the matched slots) scores zero
    regardless of what the cost nets output, and lam = 1 reproduces
    forward_unsupervised exactly.
    """
    pair = g_or_pair if isinstance(g_or_pair, PaddedPair) else pad_pair(g_or_pair, h)
    if pair.frame_size > gs.frame_size:
        raise ValueError(
            f"frame size {pair.frame_size} exceeds the matcher capacity {gs.frame_size}"
        )
    emb_g, emb_h, m_list, b_mat, d_mat, mask, topo = _frame_parts(pair, params)
    c_list = build_C(pair, emb_g, emb_h, params.cost_mlps)
    beta = ad.softplus(params.beta_raw)
    beta_total = ad.tsum(beta)
    learned = None
    for k, (mk, ck) in enumerate(zip(m_list, c_list)):
        term = mk * ck * ad.take_rows(beta.reshape(-1, 1), [k]).reshape(())
        learned = term if learned is None else learned + term
    learned = learned / beta_total
    scored = topo * params.lam + learned * (1.0 - params.lam)
    p = gumbel_sinkhorn(topo + Tensor(mask), gs, train_mode=train_mode, seed=seed,
                        fixed_iters=sinkhorn_iters)
    score = ad.tsum(p * scored) + _tau_penalty(params)
    return ForwardResult(score=score, P=p, scored=scored, topo=topo, M=m_list, B=b_mat,
                         D=d_mat, Mask=mask, C=c_list, pair=pair, emb_g=emb_g, emb_h=emb_h)
