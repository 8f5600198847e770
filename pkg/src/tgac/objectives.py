"""Link-prediction task loss, inter/intra-view InfoNCE contrastive loss,
projection head, and the weighted total loss."""

from __future__ import annotations

from typing import Sequence

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from tgac.errors import ConfigError

_NEG_INF = float("-inf")


def link_bce_loss(pos_logits: Tensor, neg_logits: Tensor, reduction: str = "sum") -> Tensor:
    """Negative-sampling BCE on pair logits.

    pos_logits: [B]; neg_logits: [B, Q]. Per event: -log sigmoid(pos)
    - sum_q log sigmoid(-neg_q), summed (or averaged) over the batch.
    Computed with logsigmoid for numerical stability.
    """
    per_event = -F.logsigmoid(pos_logits) - F.logsigmoid(-neg_logits).sum(dim=1)
    return per_event.mean() if reduction == "mean" else per_event.sum()


def task_loss(z_u: Tensor, z_v: Tensor, negatives: Sequence[Tensor]) -> Tensor:
    """-log sigmoid(z_u . z_v) - sum_{v'} log sigmoid(-z_u . z_{v'})."""
    if len(negatives) < 1:
        raise ValueError("at least one negative is required")
    pos = (z_u * z_v).sum().unsqueeze(0)
    neg = torch.stack([(z_u * n).sum() for n in negatives]).unsqueeze(0)
    return link_bce_loss(pos, neg)


class ProjectionHead(nn.Module):
    """Two-layer MLP g(z) = W2 elu(W1 z + b1) + b2 mapping into the
    comparison space (same dimensionality as the embeddings)."""

    def __init__(self, dim: int):
        super().__init__()
        self.lin1 = nn.Linear(dim, dim)
        self.lin2 = nn.Linear(dim, dim)

    def forward(self, z: Tensor) -> Tensor:
        return self.lin2(F.elu(self.lin1(z)))


def _similarity(a: Tensor, b: Tensor, kind: str) -> Tensor:
    """Pairwise similarity matrix between rows of a and rows of b."""
    if kind == "cosine":
        return F.normalize(a, dim=1) @ F.normalize(b, dim=1).T
    if kind == "euclidean":
        # Negative distance; eps keeps the gradient finite at zero distance.
        sq = (a.unsqueeze(1) - b.unsqueeze(0)).pow(2).sum(-1)
        return -torch.sqrt(sq + 1e-12)
    raise ConfigError(f"unknown similarity {kind!r}")


def contrastive_loss(u: Tensor, v: Tensor, tau: float, similarity: str = "cosine") -> Tensor:
    """Symmetric InfoNCE over projected views u, v (rows are positive pairs).

    For anchor u_i the positive is v_i; negatives are all v_k (inter-view)
    and all u_k (intra-view) with k != i. Averaged over the 2n anchors of
    both directions. Requires n >= 2 so intra negatives exist.
    """
    n = u.shape[0]
    if n < 2 or v.shape[0] != n:
        raise ValueError(f"needs matched views with n >= 2 rows, got {u.shape[0]}/{v.shape[0]}")
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    s_uv = _similarity(u, v, similarity) / tau
    s_uu = _similarity(u, u, similarity) / tau
    s_vv = _similarity(v, v, similarity) / tau
    eye = torch.eye(n, dtype=torch.bool, device=u.device)
    pos = s_uv.diagonal()
    denom_u = torch.logsumexp(torch.cat([s_uv, s_uu.masked_fill(eye, _NEG_INF)], dim=1), dim=1)
    denom_v = torch.logsumexp(torch.cat([s_uv.T, s_vv.masked_fill(eye, _NEG_INF)], dim=1), dim=1)
    return ((denom_u - pos).sum() + (denom_v - pos).sum()) / (2 * n)


def total_loss(task: Tensor, cl: Tensor, lam: float) -> Tensor:
    """Weighted combination lam * task + cl."""
    if lam < 0:
        raise ConfigError(f"lambda must be nonnegative, got {lam}")
    return lam * task + cl
