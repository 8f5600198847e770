"""Top-k event retention by temporal edge centrality."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tgac.centrality import ScoredEdgeSet
from tgac.errors import ConfigError
from tgac.temporal_graph import EventStream


@dataclass(frozen=True)
class PruneConfig:
    c: float  # prune ratio in [0, 1)
    measure: str = "ev"
    alpha: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.c < 1.0:
            raise ConfigError(f"prune ratio c must be in [0, 1), got {self.c}")


def retained_count(n_events: int, c: float) -> int:
    """k = ceil(E * (1 - c)); ceiling so c in (0, 1) never empties the stream."""
    return max(1, math.ceil(n_events * (1.0 - c)))


def top_k_indices(stream: EventStream, scored: ScoredEdgeSet, k: int) -> np.ndarray:
    """Positions of the k highest-phi events, ascending (chronological).

    Ties at the boundary break toward later timestamp, then smaller src,
    then smaller dst.
    """
    if len(scored) != len(stream):
        raise ValueError("scores are not aligned with the stream")
    # lexsort: last key is primary.
    order = np.lexsort((stream.dst, stream.src, -stream.t, -scored.phi))
    return np.sort(order[:k])


def prune(stream: EventStream, scored: ScoredEdgeSet, cfg: PruneConfig) -> EventStream:
    """Keep the top-k events by phi, re-sorted chronologically."""
    k = retained_count(len(stream), cfg.c)
    return stream.select(top_k_indices(stream, scored, k))
