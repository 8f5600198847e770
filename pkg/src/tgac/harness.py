"""End-to-end training and evaluation: centrality-guided pruning, per-step
dual-view sampling, joint task + contrastive optimization with Adam, and
link-prediction / node-classification metrics."""

from __future__ import annotations

import copy
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Iterator, Optional

import numpy as np
import scipy.stats
import torch

from tgac.augmentation import AugmentConfig, removal_probabilities, view_keep_indices
from tgac.centrality import MEASURE_ALIASES, compute_centrality, edge_centrality
from tgac.encoder import EncoderConfig, MemoryBank, TgacModel, parameter_hash
from tgac.errors import ConfigError, EvaluationError, TrainingDiverged
from tgac.objectives import contrastive_loss, link_bce_loss
from tgac.pruning import PruneConfig, retained_count, top_k_indices
from tgac.temporal_graph import EventStream, Split, chronological_split, normalize_time

logger = logging.getLogger("tgac")

RATIOS = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the full pipeline; defaults follow the reference
    operating point (lr 1e-4, lambda 0.1, alpha 10, c 0.05, p_e 0.4)."""

    lr: float = 1e-4
    batch_size: int = 200
    epochs: int = 10
    seed: int = 0
    lam: float = 0.1
    alpha: float = 10.0
    c: float = 0.05
    p_e1: float = 0.4
    p_e2: float = 0.4
    p_r: float = 0.7
    tau: float = 0.5
    measure: str = "ev"
    memory_dim: int = 172
    embed_dim: int = 100
    time_dim: int = 100
    n_neighbors: int = 10
    dropout: float = 0.1
    q_negatives: int = 1
    similarity: str = "cosine"
    aggregator: str = "last"
    patience: int = 5
    inductive_frac: float = 0.1
    use_pruning: bool = True
    use_contrastive: bool = True
    eval_seed: int = 12345
    cls_epochs: int = 100
    cls_lr: float = 1e-3
    dtype: str = "float32"

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0 or self.patience < 1:
            raise ConfigError("lr must be > 0, batch_size >= 1, epochs >= 0, patience >= 1")
        if self.lam < 0 or self.tau <= 0 or self.q_negatives < 1:
            raise ConfigError("lambda must be >= 0, tau > 0, q_negatives >= 1")
        if self.measure not in MEASURE_ALIASES:
            raise ConfigError(f"unknown centrality measure {self.measure!r}")
        if self.similarity not in ("cosine", "euclidean"):
            raise ConfigError(f"unknown similarity {self.similarity!r}")
        if not 0.0 <= self.inductive_frac < 1.0:
            raise ConfigError(f"inductive_frac must be in [0, 1), got {self.inductive_frac}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        PruneConfig(c=self.c, measure=self.measure, alpha=self.alpha)
        AugmentConfig(p_e1=self.p_e1, p_e2=self.p_e2, p_r=self.p_r, seed=self.seed)

    def torch_dtype(self):
        return getattr(torch, self.dtype)

    def encoder_config(self, feat_dim: int) -> EncoderConfig:
        return EncoderConfig(
            feat_dim=feat_dim,
            memory_dim=self.memory_dim,
            embed_dim=self.embed_dim,
            time_dim=self.time_dim,
            n_neighbors=self.n_neighbors,
            dropout=self.dropout,
            aggregator=self.aggregator,
        )


@dataclass
class MetricsReport:
    """Evaluation outcome plus the exact configuration that produced it."""

    auc: float
    ap: float
    mode: str
    segment: str
    n_events: int
    seed: int
    config: dict
    per_epoch: list = field(default_factory=list)
    best_epoch: int = -1
    wall_clock_sec: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "auc": self.auc,
            "ap": self.ap,
            "mode": self.mode,
            "segment": self.segment,
            "n_events": self.n_events,
            "seed": self.seed,
            "config": self.config,
            "per_epoch": self.per_epoch,
            "best_epoch": self.best_epoch,
        }
        if include_timing:
            out["wall_clock_sec"] = self.wall_clock_sec
        return out

    def to_json(self, include_timing: bool = False) -> str:
        # Timing is excluded by default so identical (config, seed) runs
        # produce byte-identical reports.
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=2)


def auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Probability a positive outranks a negative; ties count one half."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both score sets must be nonempty")
    ranks = scipy.stats.rankdata(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def ap(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Average precision: precision-weighted recall increments over the
    descending-score ranking (tied scores collapse to one threshold)."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both score sets must be nonempty")
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    tp = np.cumsum(labels)
    fp = np.cumsum(1.0 - labels)
    threshold_ends = np.flatnonzero(np.append(np.diff(scores) != 0, True))
    tp_t, fp_t = tp[threshold_ends], fp[threshold_ends]
    precision = tp_t / (tp_t + fp_t)
    recall = tp_t / len(pos)
    return float(np.sum(np.diff(np.concatenate([[0.0], recall])) * precision))


def iter_batches(t: np.ndarray, batch_size: int) -> Iterator[tuple[int, int]]:
    """Chronological slices of ~batch_size events, extended so a boundary
    never splits a run of equal timestamps."""
    i, n = 0, len(t)
    while i < n:
        j = min(i + batch_size, n)
        while j < n and t[j] == t[j - 1]:
            j += 1
        yield i, j
        i = j


def make_split(stream: EventStream, cfg: TrainConfig) -> Split:
    """Normalize time to the train span, then split 70/15/15."""
    return chronological_split(
        normalize_time(stream, RATIOS[0]), RATIOS, inductive_frac=cfg.inductive_frac, seed=cfg.seed
    )


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _dst_support(stream: EventStream) -> np.ndarray:
    """Candidate negative destinations: distinct dst ids of the train graph."""
    return np.unique(stream.dst)


def prepare_training_stream(split: Split, cfg: TrainConfig):
    """Score the train events, optionally prune, and precompute per-event
    removal probabilities for both views."""
    table = compute_centrality(split.train, cfg.measure)
    scored = edge_centrality(split.train, table, cfg.alpha, split.train.directed)
    stream = split.train
    if cfg.use_pruning:
        k = retained_count(len(stream), cfg.c)
        idx = top_k_indices(stream, scored, k)
        stream = stream.select(idx)
        scored = scored.select(idx)
    probs1 = removal_probabilities(scored.w, cfg.p_e1, cfg.p_r)
    probs2 = removal_probabilities(scored.w, cfg.p_e2, cfg.p_r)
    return stream, scored, probs1, probs2


def _batch_anchors(src: np.ndarray, dst: np.ndarray, t: np.ndarray):
    """Unique endpoint ids of a batch, each with its latest event time."""
    ids = np.concatenate([src, dst])
    ts = np.concatenate([t, t])
    uniq, inverse = np.unique(ids, return_inverse=True)
    anchor_t = np.full(len(uniq), -np.inf)
    np.maximum.at(anchor_t, inverse, ts)
    return uniq, anchor_t


def _view_forward(model, bank, src, dst, t, feat, negs, anchors, anchor_t):
    """Advance one view's bank through a batch and compute the tensors the
    losses need: pair logits for kept events, embeddings for anchors."""
    enc = model.encoder
    enc.deliver(bank)
    b, q = len(src), negs.shape[1] if negs.ndim > 1 else 1
    negs = negs.reshape(b, q)
    nodes = np.concatenate([src, dst, negs.ravel(), anchors])
    times = np.concatenate([t, t, np.repeat(t, q), anchor_t])
    z = enc.embed(bank, nodes, times)
    z_src, z_dst = z[:b], z[b : 2 * b]
    z_neg = z[2 * b : 2 * b + b * q].view(b, q, -1)
    z_anchor = z[2 * b + b * q :]
    pos_logits = model.link_logits(z_src, z_dst)
    neg_logits = model.link_logits(
        z_src.unsqueeze(1).expand(-1, q, -1).reshape(b * q, -1), z_neg.reshape(b * q, -1)
    ).view(b, q)
    enc.enqueue(bank, src, dst, t, feat)
    return pos_logits, neg_logits, z_anchor


def _train_step(model, opt, banks, batch, probs_pair, cfg: TrainConfig, step: int, support: np.ndarray):
    """One optimization step. Returns loss stats, or None when a view lost
    all its events to augmentation (the step is skipped whole)."""
    src, dst, t, feat = batch
    n_views = len(banks)
    kept = []
    for view in range(1, n_views + 1):
        if cfg.use_contrastive:
            keep = view_keep_indices(len(src), probs_pair[view - 1], cfg.seed, step, view)
        else:
            keep = np.arange(len(src))
        if len(keep) == 0:
            return None
        kept.append(keep)

    anchors, anchor_t = _batch_anchors(src, dst, t)
    task_total = None
    n_pairs = 0
    anchor_z = []
    for view, (bank, keep) in enumerate(zip(banks, kept), start=1):
        ks, kd, kt, kf = src[keep], dst[keep], t[keep], feat[keep]
        negs = _rng(cfg.seed, 101, step, view).choice(support, size=(len(keep), cfg.q_negatives))
        pos_logits, neg_logits, z_anchor = _view_forward(model, bank, ks, kd, kt, kf, negs, anchors, anchor_t)
        # Summed over each view's events (the contrastive term is a per-anchor
        # mean, so lambda balances a sum against a mean).
        view_task = link_bce_loss(pos_logits, neg_logits, reduction="sum")
        task_total = view_task if task_total is None else task_total + view_task
        n_pairs += len(keep)
        anchor_z.append(z_anchor)

    cl = torch.zeros((), dtype=task_total.dtype)
    if cfg.use_contrastive and len(anchors) >= 2:
        cl = contrastive_loss(
            model.project(anchor_z[0]), model.project(anchor_z[1]), cfg.tau, cfg.similarity
        )
    loss = cfg.lam * task_total + cl if cfg.use_contrastive else task_total

    task_val, cl_val, total_val = (float(x.detach()) for x in (task_total, cl, loss))
    if not math.isfinite(total_val):
        raise TrainingDiverged(
            "loss is not finite",
            {
                "step": step,
                "batch_events": len(src),
                "task": task_val,
                "contrastive": cl_val,
                "anchors": len(anchors),
            },
        )
    opt.zero_grad()
    loss.backward()
    opt.step()
    for bank in banks:
        bank.detach_()
    # Per-event task value logged for readability; the optimized term is the sum.
    return {"task": task_val / max(n_pairs, 1), "cl": cl_val, "total": total_val}


def _replay(model, bank: MemoryBank, stream: EventStream, batch_size: int) -> None:
    """Warm a bank through a stream without computing embeddings."""
    for lo, hi in iter_batches(stream.t, batch_size):
        model.encoder.deliver(bank)
        model.encoder.enqueue(bank, stream.src[lo:hi], stream.dst[lo:hi], stream.t[lo:hi], stream.feat[lo:hi])


def evaluate_link_prediction(
    model: TgacModel, split: Split, mode: str = "transductive", segment: str = "test",
    cfg: Optional[TrainConfig] = None,
) -> MetricsReport:
    """Replay the true (unpruned) history to warm memory, then score each
    eval event against one uniformly sampled negative destination.

    Negatives come from a fixed evaluation seed so ablations share them.
    Inductive mode keeps only events touching a withheld node.
    """
    cfg = cfg or TrainConfig()
    if mode not in ("transductive", "inductive"):
        raise ConfigError(f"unknown mode {mode!r}")
    if segment not in ("val", "test"):
        raise ConfigError(f"unknown segment {segment!r}")
    if mode == "inductive" and not split.inductive_nodes:
        raise EvaluationError("inductive evaluation requires a nonempty inductive node set")

    was_training = model.training
    model.eval()
    stream = split.val if segment == "val" else split.test
    support = _dst_support(split.train)
    negs = _rng(cfg.eval_seed, 7, 0 if segment == "val" else 1).choice(support, size=len(stream))
    member = np.zeros(split.num_nodes, dtype=bool)
    if split.inductive_nodes:
        member[np.fromiter(split.inductive_nodes, dtype=np.int64)] = True

    pos_scores, neg_scores = [], []
    with torch.no_grad():
        bank = model.encoder.new_bank(split.num_nodes)
        _replay(model, bank, split.train, cfg.batch_size)
        if segment == "test":
            _replay(model, bank, split.val, cfg.batch_size)
        for lo, hi in iter_batches(stream.t, cfg.batch_size):
            src, dst, t = stream.src[lo:hi], stream.dst[lo:hi], stream.t[lo:hi]
            model.encoder.deliver(bank)
            b = hi - lo
            z = model.encoder.embed(
                bank, np.concatenate([src, dst, negs[lo:hi]]), np.concatenate([t, t, t])
            )
            pos = model.link_logits(z[:b], z[b : 2 * b])
            neg = model.link_logits(z[:b], z[2 * b :])
            qualify = member[src] | member[dst] if mode == "inductive" else np.ones(b, dtype=bool)
            pos_scores.append(pos.numpy()[qualify])
            neg_scores.append(neg.numpy()[qualify])
            model.encoder.enqueue(bank, src, dst, t, stream.feat[lo:hi])
    if was_training:
        model.train()

    pos_all = np.concatenate(pos_scores)
    neg_all = np.concatenate(neg_scores)
    if len(pos_all) == 0:
        raise EvaluationError(f"no qualifying {mode} events in the {segment} segment")
    return MetricsReport(
        auc=auc(pos_all, neg_all),
        ap=ap(pos_all, neg_all),
        mode=mode,
        segment=segment,
        n_events=int(len(pos_all)),
        seed=cfg.seed,
        config=asdict(cfg),
    )


def train(split: Split, cfg: TrainConfig) -> tuple[TgacModel, MetricsReport]:
    """Full training run: prune once, then per chronological batch sample two
    views, advance each view's own memory bank, and minimize
    lambda * (task view1 + task view2) + contrastive.

    Validation AUC drives early stopping (the best-epoch parameters are
    restored). The returned report carries test transductive metrics.
    """
    start = time.perf_counter()
    torch.manual_seed(cfg.seed)
    model = TgacModel(cfg.encoder_config(split.train.feat_dim), dtype=cfg.torch_dtype())
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8)

    stream, _, probs1, probs2 = prepare_training_stream(split, cfg)
    if len(stream) == 0:
        raise ConfigError("train segment is empty after pruning")
    support = _dst_support(split.train)
    batches = list(iter_batches(stream.t, cfg.batch_size))
    logger.info(
        "training on %d events (%d batches/epoch), %d nodes, pruned from %d",
        len(stream), len(batches), split.num_nodes, len(split.train),
    )

    n_views = 2 if cfg.use_contrastive else 1
    per_epoch = []
    best_auc, best_state, best_epoch, bad_epochs = -np.inf, None, -1, 0
    global_step = 0
    for epoch in range(cfg.epochs):
        model.train()
        banks = [model.encoder.new_bank(split.num_nodes) for _ in range(n_views)]
        sums = {"task": 0.0, "cl": 0.0, "total": 0.0}
        steps = skipped = 0
        for lo, hi in batches:
            batch = (stream.src[lo:hi], stream.dst[lo:hi], stream.t[lo:hi], stream.feat[lo:hi])
            stats = _train_step(
                model, opt, banks, batch, (probs1[lo:hi], probs2[lo:hi]), cfg, global_step, support
            )
            global_step += 1
            if stats is None:
                skipped += 1
                logger.warning("step %d skipped: a view dropped every event", global_step - 1)
                continue
            steps += 1
            for key in sums:
                sums[key] += stats[key]
        val = evaluate_link_prediction(model, split, "transductive", "val", cfg)
        denom = max(steps, 1)
        per_epoch.append(
            {
                "epoch": epoch,
                "task_loss": sums["task"] / denom,
                "cl_loss": sums["cl"] / denom,
                "total_loss": sums["total"] / denom,
                "val_auc": val.auc,
                "steps": steps,
                "skipped_steps": skipped,
            }
        )
        logger.info(
            "epoch %d: task %.4f cl %.4f val AUC %.4f", epoch, sums["task"] / denom,
            sums["cl"] / denom, val.auc,
        )
        if val.auc > best_auc:
            best_auc, best_epoch, bad_epochs = val.auc, epoch, 0
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                logger.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                break
    if best_state is not None:
        model.load_state_dict(best_state)

    report = evaluate_link_prediction(model, split, "transductive", "test", cfg)
    report.per_epoch = per_epoch
    report.best_epoch = best_epoch
    report.wall_clock_sec = time.perf_counter() - start
    return model, report


def evaluate_node_classification(model: TgacModel, split: Split, cfg: Optional[TrainConfig] = None) -> MetricsReport:
    """Freeze the encoder, fit the three-layer MLP state-label decoder on
    train-segment source embeddings, and report test AUC."""
    cfg = cfg or TrainConfig()
    if split.train.label is None:
        raise EvaluationError("stream has no labels")
    start = time.perf_counter()
    model.eval()

    zs, ys = {}, {}
    with torch.no_grad():
        bank = model.encoder.new_bank(split.num_nodes)
        for name in ("train", "val", "test"):
            stream: EventStream = getattr(split, name)
            seg_z = []
            for lo, hi in iter_batches(stream.t, cfg.batch_size):
                model.encoder.deliver(bank)
                seg_z.append(model.encoder.embed(bank, stream.src[lo:hi], stream.t[lo:hi]))
                model.encoder.enqueue(bank, stream.src[lo:hi], stream.dst[lo:hi], stream.t[lo:hi], stream.feat[lo:hi])
            zs[name] = torch.cat(seg_z) if seg_z else torch.zeros(0, cfg.embed_dim)
            ys[name] = torch.as_tensor(stream.label, dtype=zs[name].dtype)

    if float(ys["train"].min()) == float(ys["train"].max()):
        raise EvaluationError("degenerate classifier: all train labels identical")

    clf = model.node_classifier
    clf.train()
    opt = torch.optim.Adam(clf.parameters(), lr=cfg.cls_lr)
    bce = torch.nn.BCEWithLogitsLoss()
    order_rng = _rng(cfg.seed, 55)
    n = len(ys["train"])
    with torch.enable_grad():
        for _ in range(cfg.cls_epochs):
            order = order_rng.permutation(n)
            for lo in range(0, n, 256):
                idx = torch.from_numpy(order[lo : lo + 256])
                opt.zero_grad()
                loss = bce(clf(zs["train"][idx]), ys["train"][idx])
                loss.backward()
                opt.step()
    clf.eval()
    with torch.no_grad():
        scores = clf(zs["test"]).numpy()
    labels = ys["test"].numpy()
    if not ((labels == 1).any() and (labels == 0).any()):
        raise EvaluationError("test segment lacks one of the two classes")
    report = MetricsReport(
        auc=auc(scores[labels == 1], scores[labels == 0]),
        ap=ap(scores[labels == 1], scores[labels == 0]),
        mode="node_classification",
        segment="test",
        n_events=int(len(labels)),
        seed=cfg.seed,
        config=asdict(cfg),
    )
    report.wall_clock_sec = time.perf_counter() - start
    return report


SWEEPABLE = ("c", "lambda", "p_e")


def sweep(split: Split, param: str, values: list[float], base: TrainConfig) -> list[dict]:
    """Train one model per value (identical seeds) and tabulate test metrics."""
    if param not in SWEEPABLE:
        raise ConfigError(f"sweep param must be one of {SWEEPABLE}, got {param!r}")
    rows = []
    for value in values:
        if param == "c":
            cfg = replace(base, c=value)
        elif param == "lambda":
            cfg = replace(base, lam=value)
        else:
            cfg = replace(base, p_e1=value, p_e2=value)
        _, report = train(split, cfg)
        rows.append(
            {
                "param": param,
                "value": value,
                "auc": report.auc,
                "ap": report.ap,
                "best_epoch": report.best_epoch,
            }
        )
        logger.info("sweep %s=%s: AUC %.4f AP %.4f", param, value, report.auc, report.ap)
    return rows
