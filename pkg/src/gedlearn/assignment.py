"""Assignment solvers: exact Hungarian and the differentiable soft matcher.

The soft matcher negates the cost matrix (it maximizes agreement, GED wants
minimum cost), applies a small learned affine transform, optionally adds
truncated Gumbel noise, and runs log-space Sinkhorn normalization with an
early stop. Its three scalars (scale, bias, log-temperature) are fitted once
on random matrices against Hungarian assignments and frozen afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import autodiff as ad
from .autodiff import Tensor

SENTINEL = 1e4
GS_FRAME_SIZES = (16, 32, 64)


def hungarian(cost: np.ndarray):
    """Minimum-cost perfect assignment of a square matrix.

    Returns (perm, total) where perm[i] is the column assigned to row i.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"hungarian requires a square matrix, got {cost.shape}")
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    total = float(cost[rows, cols].sum())
    return perm, total


def sinkhorn(logits, temperature=1.0, max_iter: int = 50, tol: float = 1e-4):
    """Alternating row/column normalization of exp(logits/temperature).

    Runs entirely in log space. Stops once the soft matrix changes by less
    than tol (max-abs) between sweeps, or after max_iter sweeps. Returns
    (P, sweeps_used); P is doubly stochastic up to the stopping tolerance.
    """
    x = ad.as_tensor(logits)
    if not np.all(np.isfinite(x.data)):
        raise ValueError("sinkhorn input contains NaN or Inf")
    if isinstance(temperature, Tensor):
        x = x / temperature
    else:
        x = x * (1.0 / float(temperature))
    prev = None
    p = None
    used = max_iter
    for it in range(1, max_iter + 1):
        x = x - ad.logsumexp(x, axis=1, keepdims=True)
        x = x - ad.logsumexp(x, axis=0, keepdims=True)
        p = ad.exp(x)
        if prev is not None and np.max(np.abs(p.data - prev)) < tol:
            used = it
            break
        prev = p.data
    return p, used


def truncated_gumbel_noise(shape, scale: float, seed: int, clip: float = 3.0) -> np.ndarray:
    """Gumbel(0,1) samples clipped to [-clip, clip], scaled.

    scale 0 returns zeros; the same seed always returns the same noise.
    """
    if scale < 0:
        raise ValueError("noise scale must be non-negative")
    if scale == 0.0:
        return np.zeros(shape, dtype=np.float64)
    rng = np.random.default_rng(seed)
    g = rng.gumbel(loc=0.0, scale=1.0, size=shape)
    return np.clip(g, -clip, clip) * scale


@dataclass
class GSParams:
    """Learned parameters and fixed knobs of the soft matcher."""

    scale: Tensor
    bias: Tensor
    log_temp: Tensor
    frame_size: int = 16
    max_iter: int = 50
    tol: float = 1e-4
    noise_scale: float = 1.0
    frozen: bool = True

    def tensors(self):
        return [self.scale, self.bias, self.log_temp]

    def temperature(self) -> float:
        return float(np.exp(self.log_temp.data))

    def set_trainable(self, flag: bool):
        for t in self.tensors():
            t.requires_grad = flag
        self.frozen = not flag

    def to_arrays(self) -> dict:
        return {
            "gs.scale": self.scale.data.copy(),
            "gs.bias": self.bias.data.copy(),
            "gs.log_temp": self.log_temp.data.copy(),
        }

    def load_arrays(self, arrays: dict):
        self.scale.data = np.asarray(arrays["gs.scale"], dtype=np.float64)
        self.bias.data = np.asarray(arrays["gs.bias"], dtype=np.float64)
        self.log_temp.data = np.asarray(arrays["gs.log_temp"], dtype=np.float64)


def init_gs_params(frame_size: int = 16, max_iter: int = 50, tol: float = 1e-4,
                   noise_scale: float = 1.0) -> GSParams:
    if frame_size not in GS_FRAME_SIZES:
        raise ValueError(f"frame size must be one of {GS_FRAME_SIZES}")
    if max_iter < 1 or tol <= 0:
        raise ValueError("max_iter must be >= 1 and tol > 0")
    return GSParams(
        scale=Tensor(np.array(1.0)),
        bias=Tensor(np.array(0.0)),
        log_temp=Tensor(np.array(0.0)),
        frame_size=frame_size,
        max_iter=max_iter,
        tol=tol,
        noise_scale=noise_scale,
    )


def gumbel_sinkhorn(cost, params: GSParams, train_mode: bool = False, seed: int = 0,
                    fixed_iters: int | None = None) -> Tensor:
    """Soft permutation favoring low-cost assignments.

    cost may be a Tensor (gradients flow through the unrolled normalization)
    or a plain array. Noise is injected only in train mode; inference is
    deterministic. fixed_iters pins the sweep count, bypassing the early
    stop, which keeps the output a smooth function of the inputs.
    """
    cost_t = ad.as_tensor(cost)
    n = cost_t.shape[0]
    if n > params.frame_size:
        raise ValueError(f"matrix size {n} exceeds the declared frame size {params.frame_size}")
    logits = params.scale * (-cost_t) + params.bias
    if train_mode and params.noise_scale > 0:
        noise = truncated_gumbel_noise(cost_t.shape, params.noise_scale, seed)
        logits = logits + Tensor(noise)
    temp = ad.exp(params.log_temp) if params.log_temp.requires_grad else params.temperature()
    if fixed_iters is not None:
        p, _ = sinkhorn(logits, temperature=temp, max_iter=fixed_iters, tol=0.0)
    else:
        p, _ = sinkhorn(logits, temperature=temp, max_iter=params.max_iter, tol=params.tol)
    return p


def _pretrain_matrix(rng: np.random.Generator, size: int, zero_diag: bool) -> np.ndarray:
    m = rng.uniform(0.0, 10.0, size=(size, size))
    if zero_diag:
        np.fill_diagonal(m, 0.0)
    return m


def heldout_matrices(size: int, count: int, seed: int) -> list[np.ndarray]:
    """Evaluation matrices whose optimal assignment totals span a wide range.

    Each matrix gets its own uniform scale so totals run from near zero to
    well above the unscaled regime.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s = rng.uniform(0.05, 2.0)
        out.append(rng.uniform(0.0, 10.0, size=(size, size)) * s)
    return out


def soft_assignment_total(cost: np.ndarray, params: GSParams) -> float:
    """Sum of P * cost under the soft matcher at inference."""
    p = gumbel_sinkhorn(cost, params, train_mode=False)
    return float((p.data * cost).sum())


def pretrain_gs(frame_size: int = 16, n_samples: int = 400, epochs: int = 8, seed: int = 0,
                lr: float = 0.001, noise_scale: float = 1.0):
    """Fit the matcher scalars on random matrices against Hungarian targets.

    The Huber penalty compares the soft permutation entry-wise to the binary
    optimal-assignment matrix. For the first quarter of the epochs half of
    the training matrices have a zero diagonal, an easy curriculum where the
    identity assignment is optimal. The returned params are frozen.
    """
    params = init_gs_params(frame_size=frame_size, noise_scale=noise_scale)
    params.set_trainable(True)
    rng = np.random.default_rng(seed)
    opt = ad.Adam(params.tensors(), lr=lr)
    history = []
    curriculum_epochs = max(1, epochs // 4)
    for epoch in range(1, epochs + 1):
        losses = []
        for i in range(n_samples):
            zero_diag = epoch <= curriculum_epochs and i % 2 == 0
            cost = _pretrain_matrix(rng, frame_size, zero_diag)
            perm, _ = hungarian(cost)
            target = np.zeros_like(cost)
            target[np.arange(frame_size), perm] = 1.0
            p = gumbel_sinkhorn(Tensor(cost), params, train_mode=True,
                                seed=int(rng.integers(2**31)))
            loss = ad.tmean(ad.huber(p - Tensor(target), delta=1.0))
            opt.zero_grad()
            ad.backward(loss)
            opt.step()
            losses.append(loss.item())
        history.append({"epoch": epoch, "loss": float(np.mean(losses))})
    params.set_trainable(False)
    return params, history


def eval_gs(params: GSParams, size: int, count: int = 1000, seed: int = 9):
    """Kendall tau / RMSE / R^2 of soft totals against exact LSA totals."""
    import scipy.stats

    soft = np.empty(count)
    exact = np.empty(count)
    for idx, cost in enumerate(heldout_matrices(size, count, seed)):
        soft[idx] = soft_assignment_total(cost, params)
        _, exact[idx] = hungarian(cost)
    tau = float(scipy.stats.kendalltau(soft, exact)[0])
    rmse = float(np.sqrt(np.mean((soft - exact) ** 2)))
    ss_res = float(np.sum((exact - soft) ** 2))
    ss_tot = float(np.sum((exact - exact.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot
    return {"tau": tau, "rmse": rmse, "r2": r2,
            "lsa_mean": float(exact.mean()), "lsa_min": float(exact.min()),
            "lsa_max": float(exact.max())}
