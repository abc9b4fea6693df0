"""Two-layer scoring network with a hand-written backward pass and Adam.

Architecture: FC1 -> ReLU -> Dropout -> FC2 -> Sigmoid. The post-ReLU,
pre-dropout activations of FC1 are the "hidden representations" handed to
clustering; ``backward`` accepts a gradient on them in addition to the
gradient on the scores.

All math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .errors import DataError, NumericError

PARAM_NAMES = ("W1", "b1", "W2", "b2")

_LO = np.finfo(np.float64).tiny
_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class ModelParams:
    W1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H,)  single output unit
    b2: float
    dropout_rate: float = 0.6

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, np.array([self.b2]))


@dataclass(frozen=True)
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, np.array([self.b2]))


@dataclass(frozen=True)
class ForwardCache:
    x: np.ndarray  # (m, D)
    pre1: np.ndarray  # (m, H)
    hidden: np.ndarray  # (m, H) post-ReLU, before dropout
    mask: np.ndarray | None  # (m, H) inverted-dropout multipliers; None in eval mode
    logits: np.ndarray  # (m,)
    scores: np.ndarray  # (m,)

    @property
    def train(self) -> bool:
        return self.mask is not None


@dataclass(frozen=True)
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    t: int = 0
    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_params(D: int, H: int, dropout_rate: float = 0.6, seed: int = 0) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    if D < 1 or H < 1:
        raise DataError(f"D and H must be positive, got D={D}, H={H}")
    if not 0.0 <= dropout_rate < 1.0:
        raise DataError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
    g = rng.stream(seed, rng.INIT_PARAMS)
    lim1 = 1.0 / np.sqrt(D)
    lim2 = 1.0 / np.sqrt(H)
    W1 = g.uniform(-lim1, lim1, size=(H, D))
    W2 = g.uniform(-lim2, lim2, size=H)
    return ModelParams(W1, np.zeros(H), W2, 0.0, float(dropout_rate))


def init_adam(params: ModelParams, lr: float = 5e-5) -> AdamState:
    zeros = tuple(np.zeros_like(a) for a in params.arrays())
    return AdamState(zeros, tuple(z.copy() for z in zeros), 0, float(lr))


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # keep scores strictly inside (0, 1) even when exp saturates
    return np.clip(out, _LO, _HI)


def forward(p: ModelParams, feats: np.ndarray, dropout_rng: np.random.Generator | None = None) -> ForwardCache:
    """Score a bag. Passing ``dropout_rng`` selects train mode."""
    x = np.asarray(feats, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.input_dim:
        raise DataError(f"features of shape {x.shape} do not match input dim {p.input_dim}")
    pre1 = x @ p.W1.T + p.b1
    hidden = np.maximum(pre1, 0.0)
    mask = None
    dropped = hidden
    if dropout_rng is not None:
        keep = 1.0 - p.dropout_rate
        mask = (dropout_rng.random(hidden.shape) < keep) / keep
        dropped = hidden * mask
    logits = dropped @ p.W2 + p.b2
    return ForwardCache(x, pre1, hidden, mask, logits, sigmoid(logits))


def backward(
    p: ModelParams,
    cache: ForwardCache,
    d_scores: np.ndarray,
    d_hidden: np.ndarray | None = None,
) -> Gradients:
    """Gradients of a scalar loss given its gradients on scores and hidden reps.

    ``d_hidden`` addresses the pre-dropout activations, so it bypasses the
    dropout mask; the score path goes through the cached mask.
    """
    m, H = cache.hidden.shape
    d_scores = np.asarray(d_scores, dtype=np.float64)
    if d_scores.shape != (m,):
        raise DataError(f"d_scores shape {d_scores.shape} != ({m},)")
    if d_hidden is not None and np.shape(d_hidden) != (m, H):
        raise DataError(f"d_hidden shape {np.shape(d_hidden)} != ({m}, {H})")
    if H != p.hidden_dim:
        raise DataError("cache does not match params")

    s = cache.scores
    d_logits = d_scores * s * (1.0 - s)
    dropped = cache.hidden if cache.mask is None else cache.hidden * cache.mask
    gW2 = dropped.T @ d_logits
    gb2 = float(d_logits.sum())

    d_act = np.outer(d_logits, p.W2)
    if cache.mask is not None:
        d_act = d_act * cache.mask
    if d_hidden is not None:
        d_act = d_act + d_hidden
    d_pre1 = d_act * (cache.pre1 > 0)
    gW1 = d_pre1.T @ cache.x
    gb1 = d_pre1.sum(axis=0)
    return Gradients(gW1, gb1, gW2, gb2)


def adam_step(p: ModelParams, g: Gradients, s: AdamState) -> tuple[ModelParams, AdamState]:
    grads = g.arrays()
    if not all(np.all(np.isfinite(a)) for a in grads):
        raise NumericError("non-finite gradient")
    t = s.t + 1
    new_m, new_v, new_p = [], [], []
    bc1 = 1.0 - s.beta1**t
    bc2 = 1.0 - s.beta2**t
    for param, grad, m, v in zip(p.arrays(), grads, s.m, s.v):
        m = s.beta1 * m + (1.0 - s.beta1) * grad
        v = s.beta2 * v + (1.0 - s.beta2) * grad * grad
        step = s.lr * (m / bc1) / (np.sqrt(v / bc2) + s.eps)
        new_m.append(m)
        new_v.append(v)
        new_p.append(param - step)
    W1, b1, W2, b2 = new_p
    params = replace(p, W1=W1, b1=b1, W2=W2, b2=float(b2[0]))
    return params, replace(s, m=tuple(new_m), v=tuple(new_v), t=t)
