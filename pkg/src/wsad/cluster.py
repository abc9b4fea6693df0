"""Deterministic per-video 2-means over hidden representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

SAMPLE_LIMIT = 256


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray  # (m,) int8 in {0, 1}
    center0: np.ndarray
    center1: np.ndarray
    d: float
    sse: float

    @property
    def sizes(self) -> tuple[int, int]:
        n1 = int(self.assignments.sum())
        return len(self.assignments) - n1, n1

    @property
    def collapsed(self) -> bool:
        """True when every point coincides, so the split carries no information."""
        return self.d == 0.0 and self.sse == 0.0


def _check_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"points must be a 2-D matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise DataError(f"insufficient segments for 2-means: m={x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite point in clustering input")
    return x


def _farthest_pair(x: np.ndarray) -> tuple[int, int]:
    m = x.shape[0]
    idx = np.arange(m) if m <= SAMPLE_LIMIT else (np.arange(SAMPLE_LIMIT) * m) // SAMPLE_LIMIT
    sample = x[idx]
    best, bi, bj = -1.0, 0, 1
    for i in range(len(sample) - 1):
        d2 = ((sample[i + 1 :] - sample[i]) ** 2).sum(axis=1)
        j = int(np.argmax(d2))
        if d2[j] > best:
            best, bi, bj = float(d2[j]), i, i + 1 + j
    return int(idx[bi]), int(idx[bj])


def init_centers(points) -> tuple[np.ndarray, np.ndarray]:
    """Farthest pair of points, lowest index pair on ties.

    Above ``SAMPLE_LIMIT`` points the search runs over an evenly strided
    subset of that size.
    """
    x = _check_points(points)
    i, j = _farthest_pair(x)
    return x[i].copy(), x[j].copy()


def _centers(x: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return x[labels == 0].mean(axis=0), x[labels == 1].mean(axis=0)


def _sse(x: np.ndarray, labels: np.ndarray, c0: np.ndarray, c1: np.ndarray) -> float:
    centers = np.where(labels[:, None] == 1, c1, c0)
    return float(((x - centers) ** 2).sum())


def cluster_from_assignments(points, assignments) -> ClusterResult:
    """Centers, distance and SSE for a fixed partition (labels kept as given)."""
    x = np.asarray(points, dtype=np.float64)
    labels = np.asarray(assignments, dtype=np.int8)
    if labels.shape != (x.shape[0],):
        raise DataError("assignments do not match points")
    if labels.min() == labels.max():
        raise DataError("assignments must use both clusters")
    c0, c1 = _centers(x, labels)
    return ClusterResult(labels, c0, c1, float(np.linalg.norm(c0 - c1)), _sse(x, labels, c0, c1))


class _Gram:
    """Distances to cluster means from inner products only.

    With P_k = G @ 1_k and Q_k = 1_k . P_k, the squared distance of point i
    to the mean of cluster k is G_ii - 2 P_k[i] / n_k + Q_k / n_k^2.
    """

    def __init__(self, z: np.ndarray):
        self.G = z @ z.T
        self.sq = np.diag(self.G).copy()

    def distances(self, labels: np.ndarray):
        one = labels.astype(np.float64)
        n1 = float(one.sum())
        n0 = len(one) - n1
        P1 = self.G @ one
        P0 = self.G.sum(axis=1) - P1
        Q1 = float(one @ P1)
        Q0 = float((1.0 - one) @ P0)
        d0 = self.sq - 2 * P0 / n0 + Q0 / n0**2
        d1 = self.sq - 2 * P1 / n1 + Q1 / n1**2
        sse = float(self.sq.sum() - Q0 / n0 - Q1 / n1)
        return d0, d1, sse


def _repair(labels: np.ndarray, d0: np.ndarray, d1: np.ndarray) -> np.ndarray:
    """Give an empty cluster the point farthest from the other center."""
    n1 = int(labels.sum())
    if 0 < n1 < len(labels):
        return labels
    labels = labels.copy()
    if n1:
        labels[int(np.argmax(d1))] = 0
    else:
        labels[int(np.argmax(d0))] = 1
    return labels


def _lloyd(gram: _Gram, labels: np.ndarray, max_iters: int, tol: float) -> np.ndarray:
    d0, d1, prev_sse = gram.distances(labels)
    for _ in range(max_iters):
        new = _repair((d1 < d0).astype(np.int8), d0, d1)
        d0, d1, sse = gram.distances(new)
        assert sse <= prev_sse + 1e-9 * max(1.0, abs(prev_sse)), "SSE increased during Lloyd iteration"
        converged = np.array_equal(new, labels)
        improved = prev_sse - sse
        labels, prev_sse = new, sse
        if converged or improved < tol:
            break
    return labels


def _hartigan(gram: _Gram, labels: np.ndarray, max_moves: int = 100_000) -> np.ndarray:
    """Move single points between clusters while that lowers the SSE.

    Moving x from A (size a) to B (size b) changes the SSE by
    b/(b+1)|x-c_B|^2 - a/(a-1)|x-c_A|^2. Each round applies the best move.
    """
    labels = labels.copy()
    G = gram.G
    one = labels.astype(np.float64)
    n = [float(len(one) - one.sum()), float(one.sum())]
    P = [G.sum(axis=1) - G @ one, G @ one]
    Q = [float((1.0 - one) @ P[0]), float(one @ P[1])]
    for _ in range(max_moves):
        d0 = gram.sq - 2 * P[0] / n[0] + Q[0] / n[0] ** 2
        d1 = gram.sq - 2 * P[1] / n[1] + Q[1] / n[1] ** 2
        # a singleton cluster may not be emptied
        from0 = n[1] / (n[1] + 1) * d1 - n[0] / (n[0] - 1) * d0 if n[0] > 1 else np.full(len(one), np.inf)
        from1 = n[0] / (n[0] + 1) * d0 - n[1] / (n[1] - 1) * d1 if n[1] > 1 else np.full(len(one), np.inf)
        delta = np.where(labels == 0, from0, from1)
        i = int(np.argmin(delta))
        if not delta[i] < -1e-12 * max(1.0, float(d0[i] + d1[i])):
            break
        src = int(labels[i])
        dst = 1 - src
        # |S - x|^2 = |S|^2 - 2 x.S + |x|^2, with x.S = P[i]
        Q[src] += -2 * P[src][i] + G[i, i]
        Q[dst] += 2 * P[dst][i] + G[i, i]
        P[src] = P[src] - G[:, i]
        P[dst] = P[dst] + G[:, i]
        n[src] -= 1
        n[dst] += 1
        labels[i] = dst
    return labels


def _axis_split(x: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Best threshold split of the points projected on ``axis``."""
    m = len(x)
    order = np.argsort(x @ axis, kind="stable")
    csum = np.cumsum(x[order], axis=0)[:-1]
    total = x.sum(axis=0)
    k = np.arange(1, m)[:, None]
    # SSE = sum|x|^2 - |S_left|^2/k - |S_right|^2/(m-k); maximise the subtracted part
    gain = (csum**2).sum(axis=1) / k[:, 0] + ((total - csum) ** 2).sum(axis=1) / (m - k[:, 0])
    j = int(np.argmax(gain))
    labels = np.zeros(m, dtype=np.int8)
    labels[order[j + 1 :]] = 1
    return labels


def two_means(points, max_iters: int = 100, tol: float = 1e-9, n_axes: int = 8) -> ClusterResult:
    """2-means by Lloyd's algorithm from several deterministic starts.

    Starts: the farthest pair of points, then the best threshold split along
    each of the first ``n_axes`` principal axes. Every start is run through
    Lloyd (until assignments settle, the SSE gain drops below ``tol``, or
    ``max_iters``) and then single-point moves; the lowest SSE wins, earlier
    starts winning ties. Cluster 0 is the one whose center is
    lexicographically smaller.
    """
    x = _check_points(points)
    i, j = _farthest_pair(x)
    # Work in principal coordinates: same pairwise geometry, at most m columns.
    centered = x - x.mean(axis=0)
    u, sv, vt = np.linalg.svd(centered, full_matrices=False)
    z = u * sv
    gram = _Gram(z)
    first = ((z - z[j]) ** 2).sum(axis=1) < ((z - z[i]) ** 2).sum(axis=1)
    first = first.astype(np.int8)
    first[i], first[j] = 0, 1
    starts = [first]
    if len(x) > 2:
        for k in range(min(n_axes, int((sv > 0).sum()))):
            starts.append(_axis_split(z, np.eye(z.shape[1])[k]))

    best_labels, best_sse = None, np.inf
    seen = set()
    for start in starts:
        labels = _lloyd(gram, start, max_iters, tol)
        if labels.tobytes() in seen:
            continue
        seen.add(labels.tobytes())
        labels = _hartigan(gram, labels)
        sse = gram.distances(labels)[2]
        if best_labels is None or sse < best_sse - 1e-12 * max(1.0, best_sse):
            best_labels, best_sse = labels, sse

    c0, c1 = _centers(x, best_labels)
    if tuple(c1) < tuple(c0):
        best_labels = (1 - best_labels).astype(np.int8)
        c0, c1 = c1, c0
    return ClusterResult(best_labels, c0, c1, float(np.linalg.norm(c0 - c1)), _sse(x, best_labels, c0, c1))
