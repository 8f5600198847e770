"""Node centrality measures on the static projection of an event stream,
and time-weighted per-event edge centrality."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from tgac.errors import ConfigError, ConvergenceError
from tgac.temporal_graph import EventStream

PHI_FLOOR = 1e-12  # keeps log10 defined when both endpoints score 0 at t=0

MEASURE_ALIASES = {
    "de": "degree",
    "ev": "eigenvector",
    "pr": "pagerank",
    "degree": "degree",
    "eigenvector": "eigenvector",
    "pagerank": "pagerank",
}


@dataclass(frozen=True)
class CentralityTable:
    """Per-node scalar scores for one measure."""

    measure: str
    scores: np.ndarray

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class ScoredEdgeSet:
    """Per-event temporal edge centrality ``phi`` and its log10 weight ``w``."""

    phi: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        phi = np.ascontiguousarray(self.phi, dtype=np.float64)
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if len(phi) != len(w):
            raise ValueError("phi/w length mismatch")
        phi.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return len(self.phi)

    def select(self, indices: np.ndarray) -> "ScoredEdgeSet":
        return ScoredEdgeSet(self.phi[indices], self.w[indices])


def _distinct_pairs(stream: EventStream, symmetrize: bool) -> np.ndarray:
    """Static projection: distinct (u, v) pairs, ignoring multiplicity."""
    pairs = np.stack([stream.src, stream.dst], axis=1)
    if symmetrize:
        pairs = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
    return np.unique(pairs, axis=0)


def _adjacency(stream: EventStream, symmetrize: bool) -> sp.csr_matrix:
    pairs = _distinct_pairs(stream, symmetrize)
    n = stream.num_nodes
    data = np.ones(len(pairs))
    return sp.csr_matrix((data, (pairs[:, 0], pairs[:, 1])), shape=(n, n))


def degree_centrality(stream: EventStream) -> CentralityTable:
    """Distinct-neighbor count (both directions) divided by num_nodes - 1."""
    if len(stream) == 0:
        raise ValueError("stream is empty")
    pairs = _distinct_pairs(stream, symmetrize=True)
    counts = np.bincount(pairs[:, 0], minlength=stream.num_nodes).astype(np.float64)
    denom = max(stream.num_nodes - 1, 1)
    return CentralityTable("degree", counts / denom)


def eigenvector_centrality(
    stream: EventStream, tol: float = 1e-8, max_iter: int = 1000
) -> CentralityTable:
    """Dominant eigenvector of the binary adjacency (symmetrized when the
    stream is undirected) by power iteration, unit L2 norm, nonnegative.

    Iterates on A + I so bipartite structures cannot oscillate; this shifts
    the spectrum without changing eigenvectors.
    """
    adj = _adjacency(stream, symmetrize=not stream.directed)
    if adj.nnz == 0:
        raise ValueError("static projection has no edges")
    n = stream.num_nodes
    x = np.full(n, 1.0 / np.sqrt(n))
    residual = np.inf
    for _ in range(max_iter):
        y = adj @ x + x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise ConvergenceError("power iteration collapsed to zero", residual)
        y /= norm
        residual = float(np.linalg.norm(y - x))
        x = y
        if residual < tol:
            if x.sum() < 0:
                x = -x
            return CentralityTable("eigenvector", x)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", residual)


def pagerank_centrality(
    stream: EventStream, damping: float = 0.85, tol: float = 1e-10
) -> CentralityTable:
    """Standard PageRank on the static projection; dangling mass spread
    uniformly; iterate until the L1 change drops below tol."""
    if len(stream) == 0:
        raise ValueError("stream is empty")
    if not 0.0 <= damping < 1.0:
        raise ConfigError(f"damping must be in [0, 1), got {damping}")
    adj = _adjacency(stream, symmetrize=not stream.directed)
    n = stream.num_nodes
    out_deg = np.asarray(adj.sum(axis=1)).ravel()
    dangling = out_deg == 0
    inv_deg = np.where(dangling, 0.0, 1.0 / np.maximum(out_deg, 1))
    transition = adj.T.multiply(inv_deg).tocsr()  # column-stochastic on non-dangling

    x = np.full(n, 1.0 / n)
    for _ in range(100_000):
        spread = transition @ x + x[dangling].sum() / n
        x_new = (1.0 - damping) / n + damping * spread
        if np.abs(x_new - x).sum() < tol:
            return CentralityTable("pagerank", x_new)
        x = x_new
    return CentralityTable("pagerank", x)  # damping < 1 contracts; unreachable in practice


def compute_centrality(stream: EventStream, measure: str, **kwargs) -> CentralityTable:
    """Dispatch by measure name or short alias (de/ev/pr)."""
    name = MEASURE_ALIASES.get(measure.lower())
    if name is None:
        raise ConfigError(f"unknown centrality measure {measure!r}")
    fn = {
        "degree": degree_centrality,
        "eigenvector": eigenvector_centrality,
        "pagerank": pagerank_centrality,
    }[name]
    return fn(stream, **kwargs)


def edge_centrality(
    stream: EventStream,
    table: CentralityTable,
    alpha: float,
    directed: bool | None = None,
) -> ScoredEdgeSet:
    """Per-event temporal edge centrality.

    Undirected: phi = (score(u) + score(v)) / 2 + alpha * t.
    Directed:   phi = score(v) + alpha * t.
    phi is floored at PHI_FLOOR before taking w = log10(phi).

    Timestamps are expected to be normalized to the train span so the two
    addends stay commensurate.
    """
    if directed is None:
        directed = stream.directed
    scores = table.scores
    if directed:
        phi = scores[stream.dst] + alpha * stream.t
    else:
        phi = (scores[stream.src] + scores[stream.dst]) / 2.0 + alpha * stream.t
    phi = np.maximum(phi, PHI_FLOOR)
    return ScoredEdgeSet(phi=phi, w=np.log10(phi))
