"""Shared stream builders for the test suite."""

from __future__ import annotations

import numpy as np

from tgac.temporal_graph import EventStream


def make_stream(
    seed=0,
    n_nodes=30,
    n_events=200,
    feat_dim=0,
    directed=True,
    labels=False,
    t_span=1.0,
):
    """Uniformly random event stream with sorted timestamps."""
    rng = np.random.default_rng(seed)
    return EventStream(
        src=rng.integers(0, n_nodes, n_events),
        dst=rng.integers(0, n_nodes, n_events),
        t=np.sort(rng.uniform(0.0, t_span, n_events)),
        feat=rng.normal(size=(n_events, feat_dim)).astype(np.float32),
        label=rng.integers(0, 2, n_events).astype(np.float32) if labels else None,
        num_nodes=n_nodes,
        directed=directed,
    )


def contact_stream(seed=0, n_nodes=200, n_events=6000, repeat_p=0.92, n_partners=2, directed=True):
    """Learnable stream: each node mostly re-contacts a fixed partner set."""
    rng = np.random.default_rng(seed)
    partners = {u: rng.choice(n_nodes, size=n_partners, replace=False) for u in range(n_nodes)}
    src = rng.integers(0, n_nodes, n_events)
    dst = np.array(
        [rng.choice(partners[u]) if rng.random() < repeat_p else rng.integers(0, n_nodes) for u in src]
    )
    return EventStream(
        src=src,
        dst=dst,
        t=np.sort(rng.uniform(0.0, 1000.0, n_events)),
        feat=np.zeros((n_events, 0), np.float32),
        label=None,
        num_nodes=n_nodes,
        directed=directed,
    )


def stream_from_pairs(pairs, t=None, n_nodes=None, directed=True, feat=None):
    """Tiny stream from explicit (src, dst) pairs."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n_events = len(pairs)
    if t is None:
        t = np.arange(n_events, dtype=np.float64)
    if n_nodes is None:
        n_nodes = int(pairs.max()) + 1 if n_events else 1
    if feat is None:
        feat = np.zeros((n_events, 0), np.float32)
    return EventStream(
        src=pairs[:, 0],
        dst=pairs[:, 1],
        t=np.asarray(t, dtype=np.float64),
        feat=feat,
        label=None,
        num_nodes=n_nodes,
        directed=directed,
    )
