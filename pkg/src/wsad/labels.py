"""Segment-level labels from video-level labels via cluster/score alignment.

For an anomalous video the two clusters are compared against the current
score vector by cosine similarity; the cluster that lines up better with the
scores is taken as the anomalous one. Normal videos are all zeros.
"""

from __future__ import annotations

import csv
import logging
from typing import NamedTuple

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)


class AlignmentScores(NamedTuple):
    s1: float
    s2: float


def _binary(y, name: str) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or not np.all((y == 0) | (y == 1)):
        raise DataError(f"{name} must be a binary vector")
    return y.astype(np.int8)


def cosine_alignment(scores, cluster_labels) -> AlignmentScores:
    """Cosine similarity of the scores with each cluster's indicator vector.

    ``s1`` uses the indicator of cluster 1, ``s2`` that of cluster 0.
    """
    s = np.asarray(scores, dtype=np.float64)
    yc = _binary(cluster_labels, "cluster labels")
    if s.shape != yc.shape:
        raise DataError(f"scores length {s.shape} != cluster labels length {yc.shape}")
    n1 = int(yc.sum())
    if n1 == 0 or n1 == len(yc):
        raise DataError("degenerate clustering: all segments in one cluster")
    norm = np.linalg.norm(s)
    if not norm > 0:
        raise DataError("score vector has zero norm")
    ones = yc.astype(np.float64)
    s1 = float(s @ ones / (norm * np.sqrt(n1)))
    s2 = float(s @ (1.0 - ones) / (norm * np.sqrt(len(yc) - n1)))
    return AlignmentScores(s1, s2)


def pseudo_labels(scores, cluster_labels) -> np.ndarray:
    """Keep the cluster labels if cluster 1 aligns at least as well, else flip them."""
    yc = _binary(cluster_labels, "cluster labels")
    s1, s2 = cosine_alignment(scores, yc)
    return yc.copy() if s1 >= s2 else (1 - yc).astype(np.int8)


def training_labels(weak_label: int, pseudo=None, num_segments: int | None = None) -> np.ndarray:
    """Per-segment targets for one video.

    Normal videos get zeros. Anomalous videos get ``pseudo``; when it is
    absent (single-segment bag, collapsed clusters, or pseudo-labeling turned
    off) every segment is labelled 1.
    """
    if weak_label not in (0, 1):
        raise DataError(f"invalid weak label {weak_label!r}")
    if pseudo is not None:
        pseudo = _binary(pseudo, "pseudo labels")
        m = len(pseudo)
        if num_segments is not None and num_segments != m:
            raise DataError("pseudo label length does not match num_segments")
    elif num_segments is None:
        raise DataError("num_segments required when no pseudo labels are given")
    else:
        m = num_segments
    if weak_label == 0:
        return np.zeros(m, dtype=np.int8)
    if pseudo is None:
        return np.ones(m, dtype=np.int8)
    return pseudo.copy()


def degenerate_fallback(num_segments: int, video_id: str = "") -> np.ndarray:
    log.warning("degenerate bag %s (m=%d): labelling every segment anomalous", video_id, num_segments)
    return training_labels(1, None, num_segments)


def dump_labels(path, scores, cluster_labels, pseudo, train=None) -> None:
    """Write ``segment_index,score,cluster,pseudo[,train]`` rows for inspection.

    ``cluster``/``pseudo`` may be None (written as empty cells).
    """
    header = ["segment_index", "score", "cluster", "pseudo"]
    if train is not None:
        header.append("train")
    cols = [cluster_labels, pseudo] + ([train] if train is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j, score in enumerate(scores):
            w.writerow([j, repr(float(score))] + ["" if c is None else int(c[j]) for c in cols])
