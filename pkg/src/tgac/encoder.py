"""Memory-based temporal graph encoder: per-node memory with GRU updates fed
by event messages, functional time encoding, and single-head attention over
each node's most recent neighbors.

Processing order per batch (deliver -> embed -> enqueue) guarantees that an
embedding at time t never reads the outcome of the interaction it is asked
to predict.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from tgac.errors import ConfigError
from tgac.objectives import ProjectionHead

CHECKPOINT_MAGIC = "TGCK1"
_TIME_EPS = 1e-12


class OutOfOrderError(ValueError):
    """A batch or update arrived behind the bank's clock."""


@dataclass(frozen=True)
class EncoderConfig:
    feat_dim: int = 0
    memory_dim: int = 172
    embed_dim: int = 100
    time_dim: int = 100
    n_neighbors: int = 10
    dropout: float = 0.1
    aggregator: str = "last"  # or "mean"
    time_freq_scale: float = 1e4

    def __post_init__(self):
        if min(self.memory_dim, self.embed_dim, self.time_dim, self.n_neighbors) < 1:
            raise ConfigError("encoder dimensions must be positive")
        if self.feat_dim < 0:
            raise ConfigError("feat_dim must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.aggregator not in ("last", "mean"):
            raise ConfigError(f"aggregator must be 'last' or 'mean', got {self.aggregator!r}")


class TimeEncoder(nn.Module):
    """Phi(dt) = cos(omega * dt + phase), learnable frequencies and phases.

    Frequencies are initialized on a geometric grid spanning the scales of a
    unit-normalized time axis; phases start at zero so Phi(0) is all ones.
    """

    def __init__(self, dim: int, freq_scale: float = 1e4):
        super().__init__()
        self.lin = nn.Linear(1, dim)
        freqs = freq_scale * 10.0 ** (-np.linspace(0, 9, dim))
        with torch.no_grad():
            self.lin.weight.copy_(torch.from_numpy(freqs).view(dim, 1))
            self.lin.bias.zero_()

    def forward(self, dt: Tensor) -> Tensor:
        return torch.cos(self.lin(dt.unsqueeze(-1)))


class MemoryBank:
    """Mutable per-node state: memory vectors, last-update times, pending
    (undelivered) event messages, and a ring buffer of recent neighbors.

    Single-writer. Never-seen nodes hold zero memory.
    """

    def __init__(self, num_nodes: int, memory_dim: int, feat_dim: int, n_neighbors: int, dtype):
        self.num_nodes = num_nodes
        self.dtype = dtype
        self.memory = torch.zeros(num_nodes, memory_dim, dtype=dtype)
        self.last_update = torch.zeros(num_nodes, dtype=dtype)
        self.clock = 0.0
        self.pending: dict[int, list[tuple[int, float, np.ndarray]]] = {}
        k = n_neighbors
        self.nbr_id = np.full((num_nodes, k), -1, dtype=np.int64)
        self.nbr_t = np.zeros((num_nodes, k), dtype=np.float64)
        self.nbr_feat = np.zeros((num_nodes, k, feat_dim), dtype=np.float32)
        self.nbr_ptr = np.zeros(num_nodes, dtype=np.int64)

    def detach_(self) -> None:
        """Cut the autograd history; memory values are kept."""
        self.memory = self.memory.detach()
        self.last_update = self.last_update.detach()

    def copy(self) -> "MemoryBank":
        other = MemoryBank.__new__(MemoryBank)
        other.num_nodes = self.num_nodes
        other.dtype = self.dtype
        other.memory = self.memory.detach().clone()
        other.last_update = self.last_update.detach().clone()
        other.clock = self.clock
        other.pending = {u: list(entries) for u, entries in self.pending.items()}
        other.nbr_id = self.nbr_id.copy()
        other.nbr_t = self.nbr_t.copy()
        other.nbr_feat = self.nbr_feat.copy()
        other.nbr_ptr = self.nbr_ptr.copy()
        return other

    def neighbors(self, node: int) -> list[tuple[int, float, np.ndarray]]:
        """Cached (neighbor, time, feature) triples, most recent last."""
        k = self.nbr_id.shape[1]
        count = int(min(self.nbr_ptr[node], k))
        out = []
        for i in range(count):
            slot = (self.nbr_ptr[node] - count + i) % k
            out.append((int(self.nbr_id[node, slot]), float(self.nbr_t[node, slot]), self.nbr_feat[node, slot]))
        return out


class TemporalEncoder(nn.Module):
    """Parameters and operations of the temporal encoder; all per-node state
    lives in a MemoryBank so several views can share one parameter set."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        d, dt, f = cfg.memory_dim, cfg.time_dim, cfg.feat_dim
        self.time_enc = TimeEncoder(dt, cfg.time_freq_scale)
        self.message = nn.Linear(2 * d + dt + f, d)
        self.memory_cell = nn.GRUCell(d, d)
        value_dim = d + dt + f
        self.att_score = nn.Linear(d + value_dim, 1)
        self.embed_lin = nn.Linear(d + value_dim, cfg.embed_dim)
        self.dropout = nn.Dropout(cfg.dropout)

    @property
    def _dtype(self):
        return self.embed_lin.weight.dtype

    def new_bank(self, num_nodes: int) -> MemoryBank:
        return MemoryBank(num_nodes, self.cfg.memory_dim, self.cfg.feat_dim, self.cfg.n_neighbors, self._dtype)

    def _messages(self, bank: MemoryBank, selves: Tensor, others: Tensor, ts: Tensor, feats: Tensor) -> Tensor:
        mem_self = bank.memory[selves]
        mem_other = bank.memory[others]
        dt = ts - bank.last_update[selves]
        phi = self.time_enc(dt)
        return torch.tanh(self.message(torch.cat([mem_self, mem_other, phi, feats], dim=-1)))

    def compute_message(self, bank: MemoryBank, src: int, dst: int, t: float, feat: np.ndarray) -> tuple[Tensor, Tensor]:
        """Raw messages one event sends to each of its endpoints."""
        selves = torch.tensor([src, dst])
        others = torch.tensor([dst, src])
        ts = torch.full((2,), t, dtype=self._dtype)
        feats = torch.as_tensor(np.broadcast_to(feat, (2, self.cfg.feat_dim)).copy(), dtype=self._dtype)
        m = self._messages(bank, selves, others, ts, feats)
        return m[0], m[1]

    def update_memory(self, bank: MemoryBank, node: int, message: Tensor, t: float) -> None:
        """GRU-update one node's memory and stamp its last-update time."""
        if t < float(bank.last_update[node]) - _TIME_EPS:
            raise OutOfOrderError(f"time travel: node {node} updated at {t} before {float(bank.last_update[node])}")
        new = self.memory_cell(message.unsqueeze(0), bank.memory[node].unsqueeze(0))
        idx = torch.tensor([node])
        bank.memory = bank.memory.index_copy(0, idx, new)
        bank.last_update = bank.last_update.index_copy(0, idx, torch.tensor([t], dtype=self._dtype))

    def deliver(self, bank: MemoryBank) -> None:
        """Deliver pending messages: per node, aggregate (keep-last or mean),
        then GRU-update memory and last-update times."""
        if not bank.pending:
            return
        nodes = sorted(bank.pending)
        if self.cfg.aggregator == "last":
            entries = [bank.pending[u][-1] for u in nodes]
            others = torch.tensor([e[0] for e in entries])
            ts_np = np.array([e[1] for e in entries])
            feats = torch.as_tensor(np.stack([e[2] for e in entries]), dtype=self._dtype)
            selves = torch.tensor(nodes)
            ts = torch.as_tensor(ts_np, dtype=self._dtype)
            agg = self._messages(bank, selves, others, ts, feats)
            t_new = ts
        else:  # mean over all pending messages per node
            owner, other, ts_list, feat_list = [], [], [], []
            for i, u in enumerate(nodes):
                for o, t, f in bank.pending[u]:
                    owner.append(i)
                    other.append(o)
                    ts_list.append(t)
                    feat_list.append(f)
            selves = torch.tensor([nodes[i] for i in owner])
            msgs = self._messages(
                bank,
                selves,
                torch.tensor(other),
                torch.as_tensor(np.array(ts_list), dtype=self._dtype),
                torch.as_tensor(np.stack(feat_list), dtype=self._dtype),
            )
            owner_t = torch.tensor(owner)
            agg = torch.zeros(len(nodes), msgs.shape[1], dtype=self._dtype).index_add(0, owner_t, msgs)
            counts = torch.zeros(len(nodes), dtype=self._dtype).index_add(
                0, owner_t, torch.ones(len(owner), dtype=self._dtype)
            )
            agg = agg / counts.unsqueeze(1)
            t_new = torch.as_tensor(
                np.array([max(t for _, t, _ in bank.pending[u]) for u in nodes]), dtype=self._dtype
            )
            selves = torch.tensor(nodes)

        if bool((t_new < bank.last_update[selves] - _TIME_EPS).any()):
            raise OutOfOrderError("pending message older than its node's last update")
        new_mem = self.memory_cell(agg, bank.memory[selves])
        bank.memory = bank.memory.index_copy(0, selves, new_mem)
        bank.last_update = bank.last_update.index_copy(0, selves, t_new)
        bank.pending = {}

    def embed(self, bank: MemoryBank, nodes: np.ndarray, times: np.ndarray) -> Tensor:
        """Embeddings for (node, time) queries from memory plus an
        attention-weighted sum over cached recent neighbors."""
        nodes = np.asarray(nodes, dtype=np.int64)
        times = np.asarray(times, dtype=np.float64)
        b = len(nodes)
        if b == 0:
            return torch.zeros(0, self.cfg.embed_dim, dtype=self._dtype)
        k = self.cfg.n_neighbors
        mem_self = bank.memory[torch.from_numpy(nodes)]

        ids = bank.nbr_id[nodes]  # [B, K]
        mask_np = ids >= 0
        ids_safe = np.where(mask_np, ids, 0)
        nbr_mem = bank.memory[torch.from_numpy(ids_safe.ravel())].view(b, k, -1)
        dt = torch.as_tensor(times[:, None] - bank.nbr_t[nodes], dtype=self._dtype)
        phi = self.time_enc(dt)
        feats = torch.as_tensor(bank.nbr_feat[nodes], dtype=self._dtype)
        values = torch.cat([nbr_mem, phi, feats], dim=-1)

        query = mem_self.unsqueeze(1).expand(-1, k, -1)
        scores = self.att_score(torch.cat([query, values], dim=-1)).squeeze(-1)
        mask = torch.from_numpy(mask_np)
        any_valid = mask.any(dim=1, keepdim=True)
        scores = scores.masked_fill(~mask, float("-inf"))
        scores = torch.where(any_valid, scores, torch.zeros_like(scores))  # keep softmax finite
        att = torch.softmax(scores, dim=1) * mask.to(self._dtype)
        neighbor_sum = (att.unsqueeze(-1) * values).sum(dim=1)

        h = torch.cat([mem_self, neighbor_sum], dim=-1)
        return self.embed_lin(self.dropout(h))

    def enqueue(self, bank: MemoryBank, src: np.ndarray, dst: np.ndarray, t: np.ndarray, feat: np.ndarray) -> None:
        """Queue this batch's messages and append events to neighbor caches."""
        k = self.cfg.n_neighbors
        for i in range(len(src)):
            row = feat[i]
            for a, b_ in ((int(src[i]), int(dst[i])), (int(dst[i]), int(src[i]))):
                bank.pending.setdefault(a, []).append((b_, float(t[i]), row))
                slot = bank.nbr_ptr[a] % k
                bank.nbr_id[a, slot] = b_
                bank.nbr_t[a, slot] = t[i]
                bank.nbr_feat[a, slot] = row
                bank.nbr_ptr[a] += 1
        if len(t):
            bank.clock = max(bank.clock, float(t[-1]))

    def process_batch(
        self, bank: MemoryBank, src: np.ndarray, dst: np.ndarray, t: np.ndarray, feat: np.ndarray
    ) -> tuple[Tensor, Tensor]:
        """Advance the bank one batch; returns embeddings of the batch's
        endpoints computed before the batch's own events become visible."""
        t = np.asarray(t, dtype=np.float64)
        if len(t) and t[0] < bank.clock - _TIME_EPS:
            raise OutOfOrderError(f"batch starts at {t[0]} behind bank clock {bank.clock}")
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise OutOfOrderError("batch events are not chronological")
        self.deliver(bank)
        b = len(src)
        z = self.embed(bank, np.concatenate([src, dst]), np.concatenate([t, t]))
        self.enqueue(bank, src, dst, t, feat)
        return z[:b], z[b:]

    def flush(self, bank: MemoryBank) -> None:
        """Deliver any messages still pending (end-of-stream finalization)."""
        self.deliver(bank)


class LinkDecoder(nn.Module):
    """Pair scorer on concatenated endpoint embeddings."""

    def __init__(self, embed_dim: int):
        super().__init__()
        self.lin1 = nn.Linear(2 * embed_dim, embed_dim)
        self.lin2 = nn.Linear(embed_dim, 1)

    def forward(self, z_u: Tensor, z_v: Tensor) -> Tensor:
        return self.lin2(F.elu(self.lin1(torch.cat([z_u, z_v], dim=-1)))).squeeze(-1)


class NodeClassifier(nn.Module):
    """Three-layer MLP state-label decoder (hidden 80, elu, dropout 0.1)."""

    def __init__(self, embed_dim: int, hidden: int = 80, dropout: float = 0.1):
        super().__init__()
        self.lin1 = nn.Linear(embed_dim, hidden)
        self.lin2 = nn.Linear(hidden, hidden)
        self.lin3 = nn.Linear(hidden, 1)
        self.dropout = nn.Dropout(dropout)

    def forward(self, z: Tensor) -> Tensor:
        h = self.dropout(F.elu(self.lin1(z)))
        h = self.dropout(F.elu(self.lin2(h)))
        return self.lin3(h).squeeze(-1)


class TgacModel(nn.Module):
    """Encoder plus projection head and decoders: the full parameter store.
    Every parameter tensor carries a paired gradient buffer via autograd."""

    def __init__(self, enc_cfg: EncoderConfig, dtype=torch.float32):
        super().__init__()
        self.enc_cfg = enc_cfg
        self.encoder = TemporalEncoder(enc_cfg)
        self.project = ProjectionHead(enc_cfg.embed_dim)
        self.link_decoder = LinkDecoder(enc_cfg.embed_dim)
        self.node_classifier = NodeClassifier(enc_cfg.embed_dim, dropout=enc_cfg.dropout)
        self.to(dtype)

    def link_logits(self, z_u: Tensor, z_v: Tensor) -> Tensor:
        return self.link_decoder(z_u, z_v)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def parameter_hash(model: nn.Module) -> str:
    """Order-stable digest of all parameter tensors."""
    h = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def model_from_config(config: dict) -> TgacModel:
    enc = EncoderConfig(
        feat_dim=config["feat_dim"],
        memory_dim=config["memory_dim"],
        embed_dim=config["embed_dim"],
        time_dim=config["time_dim"],
        n_neighbors=config["n_neighbors"],
        dropout=config["dropout"],
        aggregator=config.get("aggregator", "last"),
    )
    return TgacModel(enc, dtype=getattr(torch, config.get("dtype", "float32")))


def save_checkpoint(model: TgacModel, config: dict, path) -> None:
    """Versioned checkpoint: parameter tensors plus the config and its hash."""
    torch.save(
        {
            "magic": CHECKPOINT_MAGIC,
            "version": 1,
            "config": config,
            "config_hash": config_hash(config),
            "state": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> tuple[TgacModel, dict]:
    payload = torch.load(path, weights_only=True)
    if payload.get("magic") != CHECKPOINT_MAGIC or payload.get("version") != 1:
        raise ValueError(f"{path}: not a version-1 {CHECKPOINT_MAGIC} checkpoint")
    config = payload["config"]
    if config_hash(config) != payload["config_hash"]:
        raise ValueError(f"{path}: config hash mismatch")
    model = model_from_config(config)
    model.load_state_dict(payload["state"])
    return model, config
