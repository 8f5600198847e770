"""Importance-weighted stochastic edge removal: two views per training step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tgac.errors import ConfigError
from tgac.temporal_graph import EventStream

P_R_CEILING = 0.7
_DEGENERATE_SPREAD = 1e-12


@dataclass(frozen=True)
class AugmentConfig:
    p_e1: float = 0.4
    p_e2: float = 0.4
    p_r: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_r <= P_R_CEILING:
            raise ConfigError(f"p_r must be in [0, {P_R_CEILING}], got {self.p_r}")
        for name, value in (("p_e1", self.p_e1), ("p_e2", self.p_e2)):
            if not 0.0 <= value <= self.p_r:
                raise ConfigError(f"{name} must be in [0, p_r={self.p_r}], got {value}")


def removal_probabilities(w: np.ndarray, p_e: float, p_r: float) -> np.ndarray:
    """Per-event drop probability min((w_max - w) / (w_max - mean_w) * p_e, p_r).

    The most important event (w = w_max) is never targeted. When all weights
    are equal there is no importance signal, so every probability is 0.
    """
    w = np.asarray(w, dtype=np.float64)
    if len(w) == 0:
        raise ValueError("empty weight vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    w_max = w.max()
    spread = w_max - w.mean()
    if spread < _DEGENERATE_SPREAD:
        return np.zeros(len(w))
    return np.minimum((w_max - w) / spread * p_e, p_r)


def _view_rng(seed: int, step: int, view: int) -> np.random.Generator:
    # Counter-based (Philox) so parallel sampling of both views stays
    # reproducible: the i-th draw belongs to the i-th event by construction.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(step, view))))


def view_keep_indices(
    n_events: int, probs: np.ndarray, seed: int, step: int = 0, view: int = 0
) -> np.ndarray:
    """Indices of events kept (each dropped independently with its probability)."""
    if len(probs) != n_events:
        raise ValueError("probabilities are not aligned with the events")
    draws = _view_rng(seed, step, view).uniform(size=n_events)
    return np.flatnonzero(draws >= probs)


def sample_view(
    stream: EventStream, probs: np.ndarray, seed: int, step: int = 0, view: int = 0
) -> EventStream:
    """Stochastic view: each event kept with probability 1 - p, deterministic
    given (seed, step, view). An all-dropped result is returned as an empty
    stream; callers skip such steps."""
    return stream.select(view_keep_indices(len(stream), probs, seed, step, view))
