"""Continuous-time interaction streams: data model, CSV ingestion, binary
cache, time normalization, and chronological/inductive splitting."""

from __future__ import annotations

import gzip
import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from tgac.errors import ConfigError

CACHE_MAGIC = b"TGEV1"
_HEADER = struct.Struct("<5sHBQQIIId")  # magic, version, flags, nodes, events, F, warn, pad, scale


class StreamError(ValueError):
    """Malformed or degenerate stream input."""


@dataclass(frozen=True)
class Event:
    """One timestamped interaction."""

    src: int
    dst: int
    t: float
    feat: np.ndarray
    label: Optional[float] = None


@dataclass(frozen=True)
class EventStream:
    """Chronologically ordered interaction events over a dense node id space.

    Immutable after construction: all arrays are flagged read-only so any
    number of workers may read a stream concurrently.
    """

    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray
    feat: np.ndarray  # [E, F], F may be 0
    label: Optional[np.ndarray]
    num_nodes: int
    directed: bool = True
    raw_ids: Optional[np.ndarray] = None  # dense id -> original id
    time_scale: float = 1.0  # multiply t by this to recover pre-normalization units
    sort_warnings: int = 0  # out-of-order input rows fixed at ingest

    def __post_init__(self):
        src = np.ascontiguousarray(self.src, dtype=np.int64)
        dst = np.ascontiguousarray(self.dst, dtype=np.int64)
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        feat = np.ascontiguousarray(self.feat, dtype=np.float32)
        if feat.ndim != 2 or feat.shape[0] != len(src):
            raise StreamError("feature matrix must be [num_events, F]")
        if not (len(src) == len(dst) == len(t)):
            raise StreamError("src/dst/t length mismatch")
        if len(t) and t[0] < 0:
            raise StreamError("negative timestamps")
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise StreamError("events must be nondecreasing in t")
        if len(src) and (src.min() < 0 or max(src.max(), dst.max()) >= self.num_nodes):
            raise StreamError("node id outside [0, num_nodes)")
        label = self.label
        if label is not None:
            label = np.ascontiguousarray(label, dtype=np.float32)
            if len(label) != len(src):
                raise StreamError("label length mismatch")
        raw = self.raw_ids
        if raw is not None:
            raw = np.ascontiguousarray(raw, dtype=np.int64)
        for arr in (src, dst, t, feat, label, raw):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "feat", feat)
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "raw_ids", raw)

    def __len__(self) -> int:
        return len(self.src)

    @property
    def feat_dim(self) -> int:
        return self.feat.shape[1]

    def event(self, i: int) -> Event:
        lab = None if self.label is None else float(self.label[i])
        return Event(int(self.src[i]), int(self.dst[i]), float(self.t[i]), self.feat[i], lab)

    def __iter__(self) -> Iterator[Event]:
        return (self.event(i) for i in range(len(self)))

    def select(self, indices: np.ndarray) -> "EventStream":
        """Subset by ascending positional indices; node id space is kept."""
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            src=self.src[indices],
            dst=self.dst[indices],
            t=self.t[indices],
            feat=self.feat[indices],
            label=None if self.label is None else self.label[indices],
        )


@dataclass(frozen=True)
class Split:
    """Chronological train/val/test views plus withheld (inductive) nodes."""

    train: EventStream
    val: EventStream
    test: EventStream
    inductive_nodes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.train) == 0 or len(self.val) == 0 or len(self.test) == 0:
            raise StreamError("every split segment must be nonempty")
        if self.train.t[-1] > self.val.t[0] or self.val.t[-1] > self.test.t[0]:
            raise StreamError("split segments are not chronological")
        train_nodes = set(self.train.src.tolist()) | set(self.train.dst.tolist())
        if self.inductive_nodes & train_nodes:
            raise StreamError("inductive nodes leak into the train segment")

    @property
    def num_nodes(self) -> int:
        return self.train.num_nodes


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    return open(path, "r")


def ingest_csv(path, directed: bool = True) -> EventStream:
    """Load `src,dst,timestamp[,label][,f1..fF]` rows (comma or whitespace
    separated, optional header, optional .gz).

    Events are stably sorted by timestamp, timestamps shifted so min t = 0,
    and node ids densely re-indexed in order of first appearance; the map
    back to original ids is kept in ``raw_ids``.
    """
    path = Path(path)
    rows = []
    ncols = None
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",") if "," in line else line.split()
            try:
                values = [float(p) for p in parts]
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise StreamError(f"line {lineno}: malformed row {line!r}")
            if len(values) < 3:
                raise StreamError(f"line {lineno}: expected at least src,dst,timestamp")
            if ncols is None:
                ncols = len(values)
            elif len(values) != ncols:
                raise StreamError(f"line {lineno}: expected {ncols} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise StreamError(f"{path}: no events")

    data = np.asarray(rows, dtype=np.float64)
    raw_src = data[:, 0].astype(np.int64)
    raw_dst = data[:, 1].astype(np.int64)
    t = data[:, 2]
    label = data[:, 3].astype(np.float32) if data.shape[1] >= 4 else None
    feat = data[:, 4:].astype(np.float32) if data.shape[1] >= 4 else np.zeros((len(t), 0), np.float32)

    sort_warnings = int(np.sum(np.diff(t) < 0))
    if sort_warnings:
        order = np.argsort(t, kind="stable")
        raw_src, raw_dst, t = raw_src[order], raw_dst[order], t[order]
        feat = feat[order]
        if label is not None:
            label = label[order]
        warnings.warn(f"{path}: {sort_warnings} out-of-order rows re-sorted", stacklevel=2)
    t = t - t[0]

    # Dense re-index in order of first appearance within the sorted stream.
    ids = np.concatenate([raw_src[:, None], raw_dst[:, None]], axis=1).ravel()
    uniq, first_idx, inverse = np.unique(ids, return_index=True, return_inverse=True)
    appearance = np.argsort(first_idx, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[appearance] = np.arange(len(uniq))
    dense = rank[inverse].reshape(-1, 2)

    return EventStream(
        src=dense[:, 0],
        dst=dense[:, 1],
        t=t,
        feat=feat,
        label=label,
        num_nodes=len(uniq),
        directed=directed,
        raw_ids=uniq[appearance],
        sort_warnings=sort_warnings,
    )


def save_stream(stream: EventStream, path) -> None:
    """Write the versioned little-endian binary cache (magic ``TGEV1``)."""
    flags = (1 if stream.directed else 0) | (2 if stream.label is not None else 0) | (
        4 if stream.raw_ids is not None else 0
    )
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                CACHE_MAGIC,
                1,
                flags,
                stream.num_nodes,
                len(stream),
                stream.feat_dim,
                stream.sort_warnings,
                0,
                stream.time_scale,
            )
        )
        fh.write(stream.src.astype("<i8").tobytes())
        fh.write(stream.dst.astype("<i8").tobytes())
        fh.write(stream.t.astype("<f8").tobytes())
        fh.write(stream.feat.astype("<f4").tobytes())
        if stream.label is not None:
            fh.write(stream.label.astype("<f4").tobytes())
        if stream.raw_ids is not None:
            fh.write(stream.raw_ids.astype("<i8").tobytes())


def load_stream(path) -> EventStream:
    """Read a ``TGEV1`` cache written by :func:`save_stream`."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise StreamError(f"{path}: truncated cache header")
        magic, version, flags, num_nodes, n_events, feat_dim, warn, _, scale = _HEADER.unpack(header)
        if magic != CACHE_MAGIC:
            raise StreamError(f"{path}: bad magic {magic!r}")
        if version != 1:
            raise StreamError(f"{path}: unsupported cache version {version}")

        def read(dtype, count, shape=None):
            arr = np.frombuffer(fh.read(np.dtype(dtype).itemsize * count), dtype=dtype, count=count)
            return arr.reshape(shape) if shape else arr

        src = read("<i8", n_events)
        dst = read("<i8", n_events)
        t = read("<f8", n_events)
        feat = read("<f4", n_events * feat_dim, (n_events, feat_dim))
        label = read("<f4", n_events) if flags & 2 else None
        raw_ids = read("<i8", num_nodes) if flags & 4 else None
    return EventStream(
        src=src,
        dst=dst,
        t=t,
        feat=feat,
        label=label,
        num_nodes=num_nodes,
        directed=bool(flags & 1),
        raw_ids=raw_ids,
        time_scale=scale,
        sort_warnings=warn,
    )


def normalize_time(stream: EventStream, train_frac: float = 0.70) -> EventStream:
    """Rescale timestamps so the train segment spans [0, 1].

    The divisor is the maximum timestamp of the first ``train_frac`` of
    events; val/test timestamps may exceed 1. The factor is recorded in
    ``time_scale`` so :func:`denormalize_time` can round-trip.
    """
    if len(stream) == 0:
        raise StreamError("cannot normalize an empty stream")
    boundary = max(1, math.floor(train_frac * len(stream)))
    scale = float(stream.t[boundary - 1])
    if scale == 0.0:
        warnings.warn("max train timestamp is 0; all timestamps set to 0", stacklevel=2)
        return replace(stream, t=np.zeros(len(stream)), time_scale=stream.time_scale)
    return replace(stream, t=stream.t / scale, time_scale=stream.time_scale * scale)


def denormalize_time(stream: EventStream) -> EventStream:
    """Invert :func:`normalize_time`."""
    return replace(stream, t=stream.t * stream.time_scale, time_scale=1.0)


def chronological_split(
    stream: EventStream,
    ratios: Sequence[float] = (0.70, 0.15, 0.15),
    inductive_frac: float = 0.0,
    seed: int = 0,
) -> Split:
    """Positional 70/15/15 split plus optional withholding of nodes for
    inductive evaluation.

    The inductive set targets ``inductive_frac`` of the nodes seen in
    val+test: nodes that never appear in train are taken first, then (if
    needed) nodes are sampled from the remainder and their train events are
    discarded outright.
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ConfigError(f"ratios must be three values summing to 1, got {ratios}")
    if not 0.0 <= inductive_frac < 1.0:
        raise ConfigError(f"inductive_frac must be in [0, 1), got {inductive_frac}")
    n = len(stream)
    i1 = math.floor(ratios[0] * n)
    i2 = math.floor((ratios[0] + ratios[1]) * n)
    if i1 == 0 or i2 == i1 or i2 == n:
        raise StreamError(f"split of {n} events leaves an empty segment")
    idx = np.arange(n)
    train = stream.select(idx[:i1])
    val = stream.select(idx[i1:i2])
    test = stream.select(idx[i2:])

    inductive: frozenset = frozenset()
    if inductive_frac > 0.0:
        eval_nodes = np.unique(np.concatenate([val.src, val.dst, test.src, test.dst]))
        train_nodes = np.unique(np.concatenate([train.src, train.dst]))
        natural_new = np.setdiff1d(eval_nodes, train_nodes)
        target = math.ceil(inductive_frac * len(eval_nodes))
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
        if len(natural_new) >= target:
            chosen = rng.choice(natural_new, size=target, replace=False)
        else:
            seen = np.intersect1d(eval_nodes, train_nodes)
            extra = rng.choice(seen, size=min(target - len(natural_new), len(seen)), replace=False)
            chosen = np.concatenate([natural_new, extra])
            drop = np.isin(train.src, extra) | np.isin(train.dst, extra)
            train = train.select(np.flatnonzero(~drop))
            if len(train) == 0:
                raise StreamError("inductive withholding emptied the train segment")
        inductive = frozenset(int(v) for v in chosen)

    return Split(train=train, val=val, test=test, inductive_nodes=inductive)
