"""Command-line surface: ingest, centrality, prune, augment, train, eval,
classify, sweep. Config precedence: flags > config file > defaults; every
run logs the resolved configuration and derives all randomness from --seed."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from tgac.augmentation import removal_probabilities, sample_view
from tgac.centrality import compute_centrality, edge_centrality
from tgac.encoder import load_checkpoint, save_checkpoint
from tgac.errors import ConfigError
from tgac.harness import (
    MetricsReport,
    TrainConfig,
    evaluate_link_prediction,
    evaluate_node_classification,
    make_split,
    sweep,
    train,
)
from tgac.pruning import PruneConfig, prune
from tgac.temporal_graph import (
    CACHE_MAGIC,
    EventStream,
    ingest_csv,
    load_stream,
    normalize_time,
    save_stream,
)

logger = logging.getLogger("tgac.cli")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_CONFIG_FIELDS = {f.name: f.type for f in fields(TrainConfig)}
_FLOAT_FIELDS = (
    "lr", "lam", "alpha", "c", "p_e1", "p_e2", "p_r", "tau", "dropout", "inductive_frac", "cls_lr",
)
_INT_FIELDS = (
    "batch_size", "epochs", "seed", "memory_dim", "embed_dim", "time_dim", "n_neighbors",
    "q_negatives", "patience", "eval_seed", "cls_epochs",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 1, not argparse's 2
        raise ConfigError(message)


def _resolve_data(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get("TGAC_DATA_DIR")
    if root and (Path(root) / path).exists():
        return Path(root) / path
    raise FileNotFoundError(f"dataset not found: {path} (TGAC_DATA_DIR={root or 'unset'})")


def _load_any(path: str, directed: bool) -> EventStream:
    p = _resolve_data(path)
    with open(p, "rb") as fh:
        if fh.read(len(CACHE_MAGIC)) == CACHE_MAGIC:
            return load_stream(p)
    return ingest_csv(p, directed=directed)


def _write_stream(stream: EventStream, path: str) -> None:
    if path.endswith(".bin"):
        save_stream(stream, path)
        return
    raw = stream.raw_ids
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(len(stream)):
            u, v = int(stream.src[i]), int(stream.dst[i])
            if raw is not None:
                u, v = int(raw[u]), int(raw[v])
            row = [u, v, repr(float(stream.t[i]))]
            if stream.label is not None:
                row.append(repr(float(stream.label[i])))
            row.extend(repr(float(x)) for x in stream.feat[i])
            writer.writerow(row)


def _parse_config_file(path: str) -> dict:
    """Plain key=value lines; # starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value):
    if isinstance(value, str):
        if key in _FLOAT_FIELDS:
            return float(value)
        if key in _INT_FIELDS:
            return int(value)
        if key in ("use_pruning", "use_contrastive"):
            return value.lower() in ("1", "true", "yes")
    return value


def _build_config(args) -> TrainConfig:
    """defaults -> config file -> explicit flags."""
    merged = asdict(TrainConfig())
    if getattr(args, "config", None):
        for key, value in _parse_config_file(args.config).items():
            merged[key] = _coerce(key, value)
    for key in _CONFIG_FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = _coerce(key, flag)
    if getattr(args, "no_prune", False):
        merged["use_pruning"] = False
    if getattr(args, "no_cl", False):
        merged["use_contrastive"] = False
    try:
        cfg = TrainConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc))
    logger.info("resolved config: %s", json.dumps(asdict(cfg), sort_keys=True))
    return cfg


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--pe1", dest="p_e1", type=float)
    p.add_argument("--pe2", dest="p_e2", type=float)
    p.add_argument("--pr", dest="p_r", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--measure", choices=["de", "ev", "pr", "degree", "eigenvector", "pagerank"])
    p.add_argument("--memory-dim", dest="memory_dim", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--time-dim", dest="time_dim", type=int)
    p.add_argument("--n-neighbors", dest="n_neighbors", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--inductive-frac", dest="inductive_frac", type=float)
    p.add_argument("--q-negatives", dest="q_negatives", type=int)
    p.add_argument("--aggregator", choices=["last", "mean"])
    p.add_argument("--eval-seed", dest="eval_seed", type=int)
    p.add_argument("--no-prune", action="store_true", help="ablation: disable pruning")
    p.add_argument("--no-cl", action="store_true", help="ablation: disable augmentation + contrastive loss")


def _write_report(report: MetricsReport, out: str | None, fmt: str) -> None:
    if fmt == "json":
        text = report.to_json()
    else:
        d = report.to_dict()
        lines = ["metric,value"] + [f"{k},{d[k]}" for k in ("auc", "ap", "mode", "segment", "n_events", "seed")]
        text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
        logger.info("report written to %s", out)
    else:
        print(text)


def build_parser() -> _Parser:
    parser = _Parser(prog="tgac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common_data = {"help": "event CSV (optionally .gz) or TGEV1 cache"}

    p = sub.add_parser("ingest", help="parse a dataset and write the binary cache")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", required=True, help="output cache (.bin) or CSV path")

    p = sub.add_parser("centrality", help="export node centrality scores")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--measure", required=True, choices=["de", "ev", "pr", "degree", "eigenvector", "pagerank"])
    p.add_argument("--alpha", type=float, default=10.0, help="recency weight for per-event scores")
    p.add_argument("--out", help="node scores CSV (node_id,score)")
    p.add_argument("--edges-out", help="optional per-event phi/w CSV")

    p = sub.add_parser("prune", help="retain the top-k events by temporal edge centrality")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--measure", default="ev", choices=["de", "ev", "pr", "degree", "eigenvector", "pagerank"])
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="emit one sampled stochastic view for inspection")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--pe1", type=float, default=0.4)
    p.add_argument("--pe2", type=float, default=0.4)
    p.add_argument("--pr", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--measure", default="ev", choices=["de", "ev", "pr", "degree", "eigenvector", "pagerank"])
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--out", required=True, help="view-1 output")
    p.add_argument("--out2", help="optional view-2 output")

    p = sub.add_parser("train", help="train and report test metrics")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    _add_train_flags(p)
    p.add_argument("--out", help="metrics JSON path (stdout when omitted)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--checkpoint", help="checkpoint output path")

    p = sub.add_parser("eval", help="evaluate a checkpoint on link prediction")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=["transductive", "inductive"], default="transductive")
    p.add_argument("--segment", choices=["val", "test"], default="test")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("classify", help="dynamic node classification from a checkpoint")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("sweep", help="grid sweep over c, lambda, or p_e")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--param", required=True, choices=["c", "lambda", "pe"])
    p.add_argument("--values", required=True, help="comma-separated values")
    _add_train_flags(p)
    p.add_argument("--out", help="CSV output (stdout when omitted)")

    return parser


def _scored_stream(stream: EventStream, measure: str, alpha: float):
    table = compute_centrality(stream, measure)
    return table, edge_centrality(stream, table, alpha, stream.directed)


def _run(args) -> int:
    if args.command == "ingest":
        stream = _load_any(args.data, args.directed)
        _write_stream(stream, args.out)
        logger.info("ingested %d events, %d nodes -> %s", len(stream), stream.num_nodes, args.out)
        return EXIT_OK

    if args.command == "centrality":
        stream = normalize_time(_load_any(args.data, args.directed))
        table, scored = _scored_stream(stream, args.measure, args.alpha)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["node_id", "score"])
                raw = stream.raw_ids
                for node in range(stream.num_nodes):
                    nid = int(raw[node]) if raw is not None else node
                    writer.writerow([nid, repr(float(table.scores[node]))])
        if args.edges_out:
            with open(args.edges_out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["event", "phi", "w"])
                for i in range(len(scored)):
                    writer.writerow([i, repr(float(scored.phi[i])), repr(float(scored.w[i]))])
        logger.info("%s centrality over %d nodes done", table.measure, stream.num_nodes)
        return EXIT_OK

    if args.command == "prune":
        stream = normalize_time(_load_any(args.data, args.directed))
        cfg = PruneConfig(c=args.c, measure=args.measure, alpha=args.alpha)
        _, scored = _scored_stream(stream, cfg.measure, cfg.alpha)
        pruned = prune(stream, scored, cfg)
        _write_stream(pruned, args.out)
        logger.info("retained %d of %d events -> %s", len(pruned), len(stream), args.out)
        return EXIT_OK

    if args.command == "augment":
        stream = normalize_time(_load_any(args.data, args.directed))
        _, scored = _scored_stream(stream, args.measure, args.alpha)
        for view, (p_e, out) in enumerate([(args.pe1, args.out), (args.pe2, args.out2)], start=1):
            if not out:
                continue
            probs = removal_probabilities(scored.w, p_e, args.pr)
            view_stream = sample_view(stream, probs, args.seed, step=args.step, view=view)
            _write_stream(view_stream, out)
            logger.info("view %d kept %d of %d events -> %s", view, len(view_stream), len(stream), out)
        return EXIT_OK

    if args.command == "train":
        cfg = _build_config(args)
        stream = _load_any(args.data, args.directed)
        split = make_split(stream, cfg)
        model, report = train(split, cfg)
        _write_report(report, args.out, args.format)
        if args.checkpoint:
            ckpt_cfg = dict(asdict(cfg), feat_dim=split.train.feat_dim, num_nodes=split.num_nodes)
            save_checkpoint(model, ckpt_cfg, args.checkpoint)
            logger.info("checkpoint written to %s", args.checkpoint)
        return EXIT_OK

    if args.command == "eval":
        model, ckpt_cfg = load_checkpoint(args.checkpoint)
        cfg = TrainConfig(**{k: v for k, v in ckpt_cfg.items() if k in _CONFIG_FIELDS})
        stream = _load_any(args.data, args.directed)
        split = make_split(stream, cfg)
        report = evaluate_link_prediction(model, split, args.mode, args.segment, cfg)
        _write_report(report, args.out, args.format)
        return EXIT_OK

    if args.command == "classify":
        model, ckpt_cfg = load_checkpoint(args.checkpoint)
        cfg = TrainConfig(**{k: v for k, v in ckpt_cfg.items() if k in _CONFIG_FIELDS})
        stream = _load_any(args.data, args.directed)
        split = make_split(stream, cfg)
        report = evaluate_node_classification(model, split, cfg)
        _write_report(report, args.out, args.format)
        return EXIT_OK

    if args.command == "sweep":
        cfg = _build_config(args)
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--values: {exc}")
        if not values:
            raise ConfigError("--values is empty")
        stream = _load_any(args.data, args.directed)
        split = make_split(stream, cfg)
        param = {"pe": "p_e"}.get(args.param, args.param)
        rows = sweep(split, param, values, cfg)
        lines = ["param,value,auc,ap,best_epoch"]
        lines += [f"{r['param']},{r['value']},{r['auc']},{r['ap']},{r['best_epoch']}" for r in rows]
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            print(text, end="")
        return EXIT_OK

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
