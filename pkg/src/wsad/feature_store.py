"""On-disk dataset model: feature files, manifests, frame ground truth, synthetic corpora.

A dataset directory looks like::

    manifest.tsv          video_id<TAB>relative_path<TAB>label
    features/<id>.wsad    binary segment features (layout below)
    truth/<id>.txt        frame-level ground truth (never read by training)
    synth.json            generator config and class means (synthetic corpora only)

Feature file layout, all little-endian::

    "WSAD" | u32 version=1 | u8 weak_label | 3 zero bytes | u32 D | u32 m | u32 f
    | m*D float32, segment-major
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from . import rng
from .errors import (
    BadMagicError,
    DataError,
    EmptyBagError,
    FormatError,
    TruncatedError,
    VersionError,
)

FEATURE_MAGIC = b"WSAD"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIB3xIII")
HEADER_SIZE = _HEADER.size  # 24

MANIFEST_NAME = "manifest.tsv"
FEATURE_DIR = "features"
TRUTH_DIR = "truth"
SYNTH_META = "synth.json"


@dataclass(eq=False)
class VideoBag:
    """One video's segment features and its video-level label.

    ``features`` is stored as float32 (the file precision) so that a bag read
    back from disk compares equal to the one written.
    """

    video_id: str
    weak_label: int
    frames_per_segment: int
    features: np.ndarray

    def __post_init__(self):
        if self.weak_label not in (0, 1):
            raise DataError(f"{self.video_id}: weak_label must be 0 or 1, got {self.weak_label!r}")
        if self.frames_per_segment < 1:
            raise DataError(f"{self.video_id}: frames_per_segment must be positive")
        feats = np.asarray(self.features)
        if feats.ndim != 2:
            raise DataError(f"{self.video_id}: features must be a 2-D matrix, got shape {feats.shape}")
        if feats.shape[0] < 1:
            raise EmptyBagError(f"{self.video_id}: bag has no segments")
        if feats.shape[1] < 1:
            raise DataError(f"{self.video_id}: feature dimension must be >= 1")
        feats = np.ascontiguousarray(feats, dtype=np.float32)
        if not np.all(np.isfinite(feats)):
            raise DataError(f"{self.video_id}: non-finite feature value")
        self.weak_label = int(self.weak_label)
        self.frames_per_segment = int(self.frames_per_segment)
        self.features = feats

    @property
    def num_segments(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other):
        if not isinstance(other, VideoBag):
            return NotImplemented
        return (
            self.video_id == other.video_id
            and self.weak_label == other.weak_label
            and self.frames_per_segment == other.frames_per_segment
            and self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
        )


@dataclass(frozen=True)
class IndexEntry:
    video_id: str
    relative_path: str
    weak_label: int


@dataclass
class DatasetIndex:
    entries: list[IndexEntry]
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if not self.entries:
            raise DataError("dataset index is empty")
        seen = set()
        for e in self.entries:
            if e.video_id in seen:
                raise DataError(f"duplicate video_id {e.video_id!r}")
            seen.add(e.video_id)

    @property
    def n(self) -> int:
        return len(self.entries)

    def path_of(self, entry: IndexEntry) -> Path:
        return self.root / entry.relative_path

    def __iter__(self) -> Iterator[IndexEntry]:
        return iter(self.entries)


@dataclass
class FrameTruth:
    video_id: str
    num_frames: int
    anomalous_intervals: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.num_frames < 1:
            raise DataError(f"{self.video_id}: num_frames must be positive")
        prev_end = -1
        for start, end in self.anomalous_intervals:
            if not (0 <= start <= end < self.num_frames):
                raise DataError(f"{self.video_id}: interval ({start}, {end}) outside [0, {self.num_frames - 1}]")
            if start <= prev_end:
                raise DataError(f"{self.video_id}: intervals overlap or are unsorted")
            prev_end = end

    def frame_labels(self) -> np.ndarray:
        labels = np.zeros(self.num_frames, dtype=np.int8)
        for start, end in self.anomalous_intervals:
            labels[start : end + 1] = 1
        return labels


@dataclass
class SynthConfig:
    """Parameters of the synthetic corpus. Defaults give the standard training split."""

    num_normal_videos: int = 20
    num_anomalous_videos: int = 20
    feature_dim: int = 8
    segment_count_range: tuple[int, int] = (10, 60)
    anomaly_burst_range: tuple[int, int] = (3, 10)
    class_separation: float = 6.0
    noise_sigma: float = 1.0
    frames_per_segment: int = 16
    seed: int = 0

    def validate(self) -> None:
        if self.num_normal_videos < 1 or self.num_anomalous_videos < 1:
            raise DataError("video counts must be positive")
        if self.feature_dim < 1:
            raise DataError("feature_dim must be positive")
        if self.frames_per_segment < 1:
            raise DataError("frames_per_segment must be positive")
        seg_lo, seg_hi = self.segment_count_range
        burst_lo, burst_hi = self.anomaly_burst_range
        if not 1 <= seg_lo <= seg_hi:
            raise DataError(f"invalid segment_count_range {self.segment_count_range}")
        if not 1 <= burst_lo <= burst_hi:
            raise DataError(f"invalid anomaly_burst_range {self.anomaly_burst_range}")
        if burst_hi > seg_lo:
            raise DataError("anomaly_burst_range max must not exceed segment_count_range min")
        if not self.class_separation > 0 or not self.noise_sigma > 0:
            raise DataError("class_separation and noise_sigma must be positive")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be a 64-bit unsigned integer")


# -- feature files ----------------------------------------------------------


def encode_video_features(bag: VideoBag) -> bytes:
    header = _HEADER.pack(
        FEATURE_MAGIC, FEATURE_VERSION, bag.weak_label, bag.dim, bag.num_segments, bag.frames_per_segment
    )
    return header + bag.features.astype("<f4", copy=False).tobytes(order="C")


def decode_video_features(data: bytes, video_id: str) -> VideoBag:
    if data[:4] != FEATURE_MAGIC:
        raise BadMagicError(f"{video_id}: bad magic {data[:4]!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedError(f"{video_id}: truncated header ({len(data)} bytes)")
    _, version, label, dim, m, f = _HEADER.unpack_from(data)
    if version != FEATURE_VERSION:
        raise VersionError(f"{video_id}: unsupported version {version}")
    if m == 0:
        raise EmptyBagError(f"{video_id}: bag has no segments")
    if dim == 0:
        raise FormatError(f"{video_id}: feature dimension is zero")
    expected = HEADER_SIZE + 4 * m * dim
    if len(data) < expected:
        raise TruncatedError(f"{video_id}: truncated payload ({len(data)} of {expected} bytes)")
    if len(data) > expected:
        raise FormatError(f"{video_id}: {len(data) - expected} trailing bytes after payload")
    feats = np.frombuffer(data, dtype="<f4", count=m * dim, offset=HEADER_SIZE).reshape(m, dim)
    return VideoBag(video_id, label, f, feats.astype(np.float32))


def write_video_features(bag: VideoBag, path) -> None:
    Path(path).write_bytes(encode_video_features(bag))


def read_video_features(path, video_id: str | None = None) -> VideoBag:
    """Read a feature file. The video id defaults to the file stem."""
    path = Path(path)
    return decode_video_features(path.read_bytes(), video_id or path.stem)


# -- manifests --------------------------------------------------------------


def load_manifest(path) -> DatasetIndex:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    entries = []
    seen = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError(f"{path}:{lineno}: malformed line, expected 3 tab-separated fields, got {len(fields)}")
        vid, rel, label = fields
        if label not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: invalid label {label!r}")
        if vid in seen:
            raise DataError(f"{path}:{lineno}: duplicate video_id {vid!r}")
        seen.add(vid)
        entries.append(IndexEntry(vid, rel, int(label)))
    if not entries:
        raise DataError(f"{path}: manifest has no entries")
    return DatasetIndex(entries, root=path.parent)


def write_manifest(index: DatasetIndex, path) -> None:
    lines = [f"{e.video_id}\t{e.relative_path}\t{e.weak_label}\n" for e in index.entries]
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_bags(index: DatasetIndex) -> list[VideoBag]:
    """Read every bag in manifest order, checking label agreement and shared D and f."""
    bags = []
    for e in index:
        bag = read_video_features(index.path_of(e), e.video_id)
        if bag.weak_label != e.weak_label:
            raise DataError(f"{e.video_id}: manifest label {e.weak_label} != file label {bag.weak_label}")
        if bags and (bag.dim, bag.frames_per_segment) != (bags[0].dim, bags[0].frames_per_segment):
            raise DataError(
                f"{e.video_id}: (D, f) = {(bag.dim, bag.frames_per_segment)} differs from "
                f"{(bags[0].dim, bags[0].frames_per_segment)}"
            )
        bags.append(bag)
    return bags


# -- frame truth ------------------------------------------------------------


def write_frame_truth(truth: FrameTruth, path) -> None:
    lines = [f"{truth.num_frames}\n"] + [f"{s}\t{e}\n" for s, e in truth.anomalous_intervals]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_frame_truth(path, video_id: str | None = None) -> FrameTruth:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty truth file")
    try:
        num_frames = int(lines[0])
        intervals = []
        for ln in lines[1:]:
            start, end = ln.split("\t")
            intervals.append((int(start), int(end)))
    except ValueError as exc:
        raise DataError(f"{path}: malformed truth file ({exc})") from None
    return FrameTruth(video_id or path.stem, num_frames, intervals)


def truth_path(truth_dir, video_id: str) -> Path:
    return Path(truth_dir) / f"{video_id}.txt"


# -- synthetic corpora ------------------------------------------------------


def class_means(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Normal and anomalous feature means. Shared by all splits of a seed."""
    g = rng.stream(cfg.seed, rng.SYNTH_MEANS)
    mu_normal = g.standard_normal(cfg.feature_dim)
    direction = g.standard_normal(cfg.feature_dim)
    direction /= np.linalg.norm(direction)
    return mu_normal, mu_normal + cfg.class_separation * direction


def synth_video(cfg: SynthConfig, split: str, index: int, weak_label: int, mu_normal, mu_anomalous):
    """Generate one video's bag and truth from its own keyed stream."""
    g = rng.stream(cfg.seed, rng.SYNTH_VIDEO, rng.split_code(split), index)
    f = cfg.frames_per_segment
    m = int(g.integers(cfg.segment_count_range[0], cfg.segment_count_range[1] + 1))
    feats = mu_normal + cfg.noise_sigma * g.standard_normal((m, cfg.feature_dim))
    intervals = []
    if weak_label == 1:
        burst = int(g.integers(cfg.anomaly_burst_range[0], cfg.anomaly_burst_range[1] + 1))
        start = int(g.integers(0, m - burst + 1))
        feats[start : start + burst] = mu_anomalous + cfg.noise_sigma * g.standard_normal((burst, cfg.feature_dim))
        intervals.append((start * f, (start + burst) * f - 1))
    # trailing frames that did not fill a whole segment were dropped
    remainder = int(g.integers(0, f))
    kind = "a" if weak_label else "n"
    vid = f"{split}_{kind}{index:04d}"
    bag = VideoBag(vid, weak_label, f, feats)
    return bag, FrameTruth(vid, m * f + remainder, intervals)


def generate_synthetic(cfg: SynthConfig, out_dir, split: str = "train") -> DatasetIndex:
    """Write a synthetic corpus split to ``out_dir`` and return its index.

    Splits of the same seed share class means but draw videos from disjoint
    streams, so ``split="test"`` gives a held-out set for the same problem.
    """
    cfg.validate()
    out = Path(out_dir)
    (out / FEATURE_DIR).mkdir(parents=True, exist_ok=True)
    (out / TRUTH_DIR).mkdir(parents=True, exist_ok=True)
    mu_normal, mu_anomalous = class_means(cfg)

    labels = [0] * cfg.num_normal_videos + [1] * cfg.num_anomalous_videos
    entries = []
    for i, label in enumerate(labels):
        bag, truth = synth_video(cfg, split, i, label, mu_normal, mu_anomalous)
        rel = f"{FEATURE_DIR}/{bag.video_id}.wsad"
        write_video_features(bag, out / rel)
        write_frame_truth(truth, truth_path(out / TRUTH_DIR, bag.video_id))
        entries.append(IndexEntry(bag.video_id, rel, label))

    index = DatasetIndex(entries, root=out)
    write_manifest(index, out / MANIFEST_NAME)
    meta = {
        "config": asdict(cfg),
        "split": split,
        "mu_normal": mu_normal.tolist(),
        "mu_anomalous": mu_anomalous.tolist(),
    }
    (out / SYNTH_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index
