"""Frame-level scoring and pooled ROC-AUC."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .feature_store import load_bags, read_frame_truth, truth_path
from .mlp import forward


@dataclass
class FrameScoreSeries:
    video_id: str
    scores: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.truth = np.asarray(self.truth, dtype=np.int8)
        if self.scores.shape != self.truth.shape or self.scores.ndim != 1:
            raise DataError(f"{self.video_id}: score/truth length mismatch")
        if not np.all(np.isfinite(self.scores)):
            raise DataError(f"{self.video_id}: non-finite frame score")


def expand_scores(segment_scores, f: int, num_frames: int) -> np.ndarray:
    """Replicate each segment score over its ``f`` frames.

    Up to ``f - 1`` trailing frames (dropped when the video was segmented)
    take the last segment's score; a video may also end up to ``f - 1``
    frames short of the last full segment.
    """
    s = np.asarray(segment_scores, dtype=np.float64)
    m = len(s)
    if m == 0 or f < 1:
        raise DataError("need at least one segment and f >= 1")
    covered = m * f
    if covered - num_frames >= f or num_frames - covered >= f:
        raise DataError(f"{m} segments of {f} frames are inconsistent with {num_frames} frames")
    frames = np.repeat(s, f)
    if num_frames <= covered:
        return frames[:num_frames]
    return np.concatenate([frames, np.full(num_frames - covered, s[-1])])


def _average_ranks(x: np.ndarray) -> np.ndarray:
    # 1-based ranks; tied values share the mean of their positions
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    mean_rank = ends - (counts - 1) / 2.0
    return mean_rank[inverse]


def auc_score(scores, labels) -> float:
    """Mann-Whitney AUC with half credit for ties."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise DataError("scores and labels differ in length")
    pos = y == 1
    P = int(pos.sum())
    N = len(y) - P
    if P == 0 or N == 0:
        raise DataError("AUC undefined: pooled frames contain a single class")
    rank_sum = float(_average_ranks(s)[pos].sum())
    return (rank_sum - P * (P + 1) / 2.0) / (P * N)


def roc_auc(series: list[FrameScoreSeries]) -> float:
    """AUC over all frames of all videos pooled together."""
    if not series:
        raise DataError("AUC undefined: no series")
    scores = np.concatenate([s.scores for s in series])
    truth = np.concatenate([s.truth for s in series])
    return auc_score(scores, truth)


def export_timeline(series: FrameScoreSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "score", "truth"])
        for i, (s, t) in enumerate(zip(series.scores, series.truth)):
            w.writerow([i, repr(float(s)), int(t)])


def read_timeline(path, video_id: str | None = None) -> FrameScoreSeries:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    scores = [float(r["score"]) for r in rows]
    truth = [int(r["truth"]) for r in rows]
    return FrameScoreSeries(video_id or path.stem, np.array(scores), np.array(truth))


def write_metrics(path, frame_auc: float, num_frames: int) -> None:
    record = {"frame_auc": frame_auc, "num_frames": int(num_frames)}
    Path(path).write_text(json.dumps(record) + "\n", encoding="utf-8")


def score_bag(params, bag) -> np.ndarray:
    return forward(params, bag.features.astype(np.float64)).scores


def evaluate_model(params, index, truth_dir) -> tuple[float, list[FrameScoreSeries]]:
    """Score every test video, expand to frames and compute the pooled AUC.

    Every video must have a truth file; a missing one is an error, not a skip.
    """
    bags = load_bags(index)
    missing = [b.video_id for b in bags if not truth_path(truth_dir, b.video_id).is_file()]
    if missing:
        raise DataError(f"missing truth files for {len(missing)} videos, e.g. {missing[0]!r}")
    series = []
    for bag in bags:
        truth = read_frame_truth(truth_path(truth_dir, bag.video_id), bag.video_id)
        frames = expand_scores(score_bag(params, bag), bag.frames_per_segment, truth.num_frames)
        series.append(FrameScoreSeries(bag.video_id, frames, truth.frame_labels()))
    return roc_auc(series), series
