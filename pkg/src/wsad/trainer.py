"""Training loop: per-video clustering, label cleaning, loss, backward, Adam.

One optimizer step per video, with the whole bag as the batch. Every visit:

1. eval-mode forward -> scores and hidden representations
2. 2-means on the hidden representations (refreshed every ``recluster_every``
   epochs; in between the cached partition is reused with fresh centers)
3. targets: zeros for normal videos; pseudo-labels for anomalous videos, or
   all ones when pseudo-labeling is off, still warming up, or impossible
4. train-mode forward, score MSE + lambda * cluster distance loss
5. backward and Adam

Ground-truth frame annotations are never read here.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .cluster import ClusterResult, cluster_from_assignments, two_means
from .errors import DataError, NumericError
from .feature_store import DatasetIndex, VideoBag, load_bags
from .labels import degenerate_fallback, pseudo_labels, training_labels
from .loss import LossConfig, video_loss
from .mlp import backward, forward, init_adam, init_params, adam_step

log = logging.getLogger(__name__)

# Ablation variant names, keyed by (use_pseudo, use_lc).
VARIANTS = {
    (True, True): "FC + L_c + y^p",
    (True, False): "FC + y^p",
    (False, True): "FC + L_c",
}


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-5
    epochs: int = 50
    seed: int = 0
    recluster_every: int = 1
    use_pseudo: bool = True
    use_lc: bool = True
    # epochs at the start during which anomalous videos keep all-ones targets
    pseudo_warmup: int = 30
    loss: LossConfig = field(default_factory=LossConfig)
    hidden: int = 512
    dropout: float = 0.6

    def __post_init__(self):
        if not self.lr > 0:
            raise DataError("lr must be positive")
        if self.epochs < 1:
            raise DataError("epochs must be positive")
        if self.recluster_every < 1:
            raise DataError("recluster_every must be positive")
        if self.pseudo_warmup < 0:
            raise DataError("pseudo_warmup must be >= 0")
        if self.hidden < 1:
            raise DataError("hidden must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError("dropout must be in [0, 1)")
        if self.seed < 0:
            raise DataError("seed must be non-negative")

    @property
    def variant(self) -> str:
        return VARIANTS.get((self.use_pseudo, self.use_lc), "FC")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["loss"] = LossConfig(**d["loss"])
        return cls(**d)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_L: float
    mean_Lr: float
    mean_Lc: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainReport:
    epochs: list[EpochStats]
    checkpoint: Checkpoint
    checkpoint_path: Path | None = None
    wall_time: float = 0.0

    def write(self, path) -> None:
        Path(path).write_text("".join(e.to_json() + "\n" for e in self.epochs), encoding="utf-8")


LabelHook = Callable[[int, str, np.ndarray, "np.ndarray | None", "np.ndarray | None", np.ndarray], None]


def _check_bags(bags: list[VideoBag]) -> None:
    dims = {(b.dim, b.frames_per_segment) for b in bags}
    if len(dims) != 1:
        raise DataError(f"inconsistent (feature dim, frames per segment) across videos: {sorted(dims)}")


def _encode_cache(cache: dict[str, np.ndarray]) -> dict[str, str]:
    return {vid: "".join("1" if v else "0" for v in a) for vid, a in sorted(cache.items())}


def _decode_cache(raw: dict[str, str]) -> dict[str, np.ndarray]:
    return {vid: np.frombuffer(s.encode("ascii"), dtype=np.uint8).astype(np.int8) - ord("0") for vid, s in raw.items()}


def train(
    index: DatasetIndex | list[VideoBag],
    cfg: TrainConfig,
    checkpoint_path=None,
    resume_from=None,
    on_labels: LabelHook | None = None,
) -> TrainReport:
    """Train on a dataset and return per-epoch loss means plus the final checkpoint.

    ``resume_from`` (a path or ``Checkpoint``) continues a run up to
    ``cfg.epochs``; random streams are keyed by (seed, epoch, video), so a
    resumed run reproduces the uninterrupted one exactly.
    """
    t0 = time.perf_counter()
    bags = load_bags(index) if isinstance(index, DatasetIndex) else list(index)
    if not bags:
        raise DataError("no videos to train on")
    _check_bags(bags)
    feats = [b.features.astype(np.float64) for b in bags]

    history: list[EpochStats] = []
    cache: dict[str, np.ndarray] = {}
    if resume_from is not None:
        ckpt = resume_from if isinstance(resume_from, Checkpoint) else load_checkpoint(resume_from)
        params, adam = ckpt.params, ckpt.adam
        if params.input_dim != bags[0].dim:
            raise DataError("checkpoint input dimension does not match data")
        start = int(ckpt.extra.get("epochs_done", 0))
        cache = _decode_cache(ckpt.extra.get("cluster_cache", {}))
        history = [EpochStats(**e) for e in ckpt.extra.get("history", [])]
    else:
        params = init_params(bags[0].dim, cfg.hidden, cfg.dropout, cfg.seed)
        adam = init_adam(params, cfg.lr)
        start = 0

    loss_cfg = cfg.loss if cfg.use_lc else replace(cfg.loss, lam=0.0)
    warned: set[str] = set()

    for epoch in range(start, cfg.epochs):
        order = rng.stream(cfg.seed, rng.SHUFFLE, epoch).permutation(len(bags))
        sums = np.zeros(3)
        for vi in order:
            bag, x = bags[vi], feats[vi]
            m = bag.num_segments
            ev = forward(params, x)

            cluster: ClusterResult | None = None
            if m >= 2:
                if epoch % cfg.recluster_every == 0 or bag.video_id not in cache:
                    cluster = two_means(ev.hidden)
                    cache[bag.video_id] = cluster.assignments
                else:
                    cluster = cluster_from_assignments(ev.hidden, cache[bag.video_id])

            pseudo = None
            if bag.weak_label == 0:
                y = training_labels(0, None, m)
            elif cluster is None or cluster.collapsed:
                if bag.video_id not in warned:
                    warned.add(bag.video_id)
                    degenerate_fallback(m, bag.video_id)
                y = training_labels(1, None, m)
            else:
                pseudo = pseudo_labels(ev.scores, cluster.assignments)
                use = cfg.use_pseudo and epoch >= cfg.pseudo_warmup
                y = training_labels(1, pseudo if use else None, m)

            if on_labels is not None:
                on_labels(epoch, bag.video_id, ev.scores, None if cluster is None else cluster.assignments, pseudo, y)

            tc = forward(params, x, rng.stream(cfg.seed, rng.DROPOUT, epoch, int(vi)))
            br = video_loss(y, tc.scores, cluster, bag.weak_label, loss_cfg)
            if not np.isfinite(br.L):
                raise NumericError(f"non-finite loss on {bag.video_id} at epoch {epoch}")
            grads = backward(params, tc, br.d_scores, br.d_hidden)
            params, adam = adam_step(params, grads, adam)
            sums += (br.L, br.Lr, br.Lc)

        mean_L, mean_Lr, mean_Lc = (sums / len(bags)).tolist()
        history.append(EpochStats(epoch, mean_L, mean_Lr, mean_Lc))
        log.info("epoch %d: L=%.6f Lr=%.6f Lc=%.6f", epoch, mean_L, mean_Lr, mean_Lc)

    extra = {
        "config": cfg.to_dict(),
        "epochs_done": cfg.epochs,
        "cluster_cache": _encode_cache(cache),
        "history": [asdict(e) for e in history],
    }
    ckpt = Checkpoint(params, adam, extra)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, ckpt)
    return TrainReport(history, ckpt, Path(checkpoint_path) if checkpoint_path else None, time.perf_counter() - t0)
