"""Per-video training loss: score MSE plus a weighted cluster-distance term.

The distance term pulls a normal video's two cluster centers together (up to
a cap ``alpha``) and pushes an anomalous video's centers apart through
``1/d``. Cluster assignments are treated as constants, so gradients reach the
hidden representations only through the two center means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import ClusterResult
from .errors import DataError


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.05
    alpha: float = 1.0
    epsilon_d: float = 1e-6

    def __post_init__(self):
        if not self.lam >= 0:
            raise DataError(f"lambda must be >= 0, got {self.lam}")
        if not self.alpha > 0:
            raise DataError(f"alpha must be positive, got {self.alpha}")
        if not self.epsilon_d > 0:
            raise DataError(f"epsilon_d must be positive, got {self.epsilon_d}")


@dataclass(frozen=True)
class LossBreakdown:
    L: float
    Lr: float
    Lc: float
    d_scores: np.ndarray
    d_hidden: np.ndarray | None


def regression_loss(y, scores) -> tuple[float, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1 or len(y) == 0:
        raise DataError(f"label/score shape mismatch: {y.shape} vs {s.shape}")
    r = s - y
    m = len(r)
    return float(r @ r / m), 2.0 * r / m


def cluster_distance_loss(cluster: ClusterResult, weak_label: int, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Loss value and its gradient on each hidden row, assignments held fixed."""
    labels = np.asarray(cluster.assignments)
    m, H = len(labels), len(cluster.center0)
    d = max(cluster.d, cfg.epsilon_d)
    if weak_label == 0:
        Lc = min(cfg.alpha, d)
        dLc_dd = 1.0 if d < cfg.alpha else 0.0
    elif weak_label == 1:
        Lc = 1.0 / d
        dLc_dd = -1.0 / (d * d)
    else:
        raise DataError(f"invalid weak label {weak_label!r}")

    grad = np.zeros((m, H))
    if cluster.d <= cfg.epsilon_d or dLc_dd == 0.0:
        return Lc, grad
    n1 = int(labels.sum())
    n0 = m - n1
    unit = (cluster.center0 - cluster.center1) / cluster.d
    grad[labels == 0] = dLc_dd * unit / n0
    grad[labels == 1] = -dLc_dd * unit / n1
    return Lc, grad


def total_loss(Lr: float, Lc: float, cfg: LossConfig) -> float:
    return Lr + cfg.lam * Lc


def video_loss(y, scores, cluster: ClusterResult | None, weak_label: int, cfg: LossConfig) -> LossBreakdown:
    """Combine both terms; without a cluster the distance term is zero."""
    Lr, d_scores = regression_loss(y, scores)
    if cluster is None:
        return LossBreakdown(Lr, Lr, 0.0, d_scores, None)
    Lc, d_hidden_c = cluster_distance_loss(cluster, weak_label, cfg)
    return LossBreakdown(total_loss(Lr, Lc, cfg), Lr, Lc, d_scores, cfg.lam * d_hidden_c)
