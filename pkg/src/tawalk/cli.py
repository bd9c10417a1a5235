"""Command-line orchestration.

Subcommands: ingest, subgraph, synth, build-tasmg, walk, embed, stats,
evaluate, sweep-alpha, sweep-strategy. Every subcommand accepts
``--config FILE`` holding flat ``key = value`` lines that mirror the flag
names; explicit flags override the file, which overrides built-in defaults.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import embed as embed_mod
from . import ingest as ingest_mod
from . import linkpred, tasmg, walker

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


DEFAULTS: dict[str, object] = {
    "epsilon_days": 30.0,
    "self_conn_weight": 1.0,
    "undirected": False,
    "mode": "taw",
    "alpha": 0.5,
    "amount_strategy": "aus",
    "walks": 10,
    "length": 80,
    "p": 1.0,
    "q": 1.0,
    "dim": 128,
    "window": 5,
    "negatives": 5,
    "epochs": 5,
    "noise_exponent": 0.75,
    "lr_start": 0.025,
    "lr_end": 0.0001,
    "historical_lambda": 0.0,
    "method": "taw",
    "hide": 0.2,
    "seeds": 5,
    "seed": 0,
    "L": 100,
    "l2": 1e-4,
}

_BOOL_KEYS = {"undirected"}
_INT_KEYS = {"walks", "length", "dim", "window", "negatives", "epochs", "seeds", "seed", "L"}
_FLOAT_KEYS = {
    "epsilon_days",
    "self_conn_weight",
    "alpha",
    "p",
    "q",
    "noise_exponent",
    "lr_start",
    "lr_end",
    "historical_lambda",
    "hide",
    "l2",
}

_MODE_ALIASES = {
    "taw": walker.MODE_TAW,
    "static_uniform": walker.MODE_STATIC_UNIFORM,
    "static_node2vec": walker.MODE_STATIC_NODE2VEC,
    "deepwalk": walker.MODE_STATIC_UNIFORM,
    "node2vec": walker.MODE_STATIC_NODE2VEC,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); usage errors are 1 here
        raise UsageError(message)


def _read_config_file(path: str) -> dict[str, object]:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes and
    underscores in keys are interchangeable."""
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {path}")
    values: dict[str, object] = {}
    for ln, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{ln}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{ln}: unknown config key {key!r}")
        try:
            if key in _BOOL_KEYS:
                if val.lower() not in ("true", "false", "1", "0"):
                    raise ValueError("expected true/false")
                values[key] = val.lower() in ("true", "1")
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise UsageError(f"{path}:{ln}: bad value for {key}: {exc}") from None
    return values


def _resolve(ns: argparse.Namespace) -> dict[str, object]:
    """defaults < config file < explicit flags."""
    merged = dict(DEFAULTS)
    if getattr(ns, "config", None):
        merged.update(_read_config_file(ns.config))
    for key in DEFAULTS:
        flag_val = getattr(ns, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    return merged


@dataclass
class ExperimentConfig:
    """Resolved settings for a full pipeline run."""

    input: str
    outdir: str
    method: str
    epsilon: float
    self_conn_weight: float
    undirected: bool
    walk: walker.WalkConfig
    sgns: embed_mod.SgnsConfig
    hide: float
    n_seeds: int
    seed_base: int
    L: int
    l2: float

    def semantic_dict(self) -> dict:
        """Everything that determines results (output location excluded)."""
        return {
            "input": self.input,
            "method": self.method,
            "epsilon": self.epsilon,
            "self_conn_weight": self.self_conn_weight,
            "undirected": self.undirected,
            "walk": walker._config_to_dict(self.walk),
            "sgns": {
                "dim": self.sgns.dim,
                "window": self.sgns.window,
                "negatives": self.sgns.negatives,
                "epochs": self.sgns.epochs,
                "lr_start": self.sgns.lr_start,
                "lr_end": self.sgns.lr_end,
                "noise_exponent": self.sgns.noise_exponent,
                "historical_lambda": self.sgns.historical_lambda,
                "seed": self.sgns.seed,
            },
            "hide": self.hide,
            "seeds": self.n_seeds,
            "seed": self.seed_base,
            "L": self.L,
            "l2": self.l2,
        }

    def hash(self) -> str:
        payload = json.dumps(self.semantic_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _experiment_config(ns: argparse.Namespace) -> ExperimentConfig:
    v = _resolve(ns)
    method = str(v["method"]).lower()
    if method not in linkpred.METHODS:
        raise UsageError(f"method must be one of {linkpred.METHODS}")
    # the walk mode follows the evaluated method; --mode only drives the
    # standalone walk subcommand
    mode = linkpred.EMBEDDING_METHODS.get(method, walker.MODE_TAW)
    if int(v["seeds"]) < 1:
        raise UsageError("seeds must be >= 1")
    try:
        walk = walker.WalkConfig(
            walks_per_node=int(v["walks"]),
            walk_length=int(v["length"]),
            alpha=float(v["alpha"]),
            amount_strategy=str(v["amount_strategy"]).lower(),
            mode=mode,
            p=float(v["p"]),
            q=float(v["q"]),
            seed=int(v["seed"]),
        )
        sgns = embed_mod.SgnsConfig(
            dim=int(v["dim"]),
            window=int(v["window"]),
            negatives=int(v["negatives"]),
            epochs=int(v["epochs"]),
            lr_start=float(v["lr_start"]),
            lr_end=float(v["lr_end"]),
            noise_exponent=float(v["noise_exponent"]),
            historical_lambda=float(v["historical_lambda"]),
            seed=int(v["seed"]),
        )
        if float(v["epsilon_days"]) <= 0:
            raise ValueError("epsilon_days must be > 0")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return ExperimentConfig(
        input=ns.input,
        outdir=getattr(ns, "outdir", "."),
        method=method,
        epsilon=float(v["epsilon_days"]) * 86400.0,
        self_conn_weight=float(v["self_conn_weight"]),
        undirected=bool(v["undirected"]),
        walk=walk,
        sgns=sgns,
        hide=float(v["hide"]),
        n_seeds=int(v["seeds"]),
        seed_base=int(v["seed"]),
        L=int(v["L"]),
        l2=float(v["l2"]),
    )


def run_pipeline(cfg: ExperimentConfig) -> dict[str, str]:
    """Parse input, dump the graph, walk corpus and embeddings trained on the
    full data, then run the per-seed evaluation and write the report.

    Every artifact is stamped with the semantic config hash and base seed.
    Similarity and random methods have no corpus or embeddings; they emit
    only the graph dump and the report.
    """
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stamp = {"config_hash": cfg.hash(), "seed": cfg.seed_base, "config": cfg.semantic_dict()}
    written: dict[str, str] = {}

    stage = "ingest"
    try:
        txs = ingest_mod.parse_transactions(cfg.input)

        stage = "build-tasmg"
        g = tasmg.build_tasmg(
            txs,
            epsilon=cfg.epsilon,
            self_conn_weight=cfg.self_conn_weight,
            undirected=cfg.undirected,
        )
        graph_path = outdir / "graph.json"
        tasmg.save_tasmg(g, graph_path, meta=stamp)
        written["graph"] = str(graph_path)

        if cfg.method in linkpred.EMBEDDING_METHODS:
            stage = "walk"
            corpus = walker.generate_walks(g, cfg.walk)
            corpus_path = outdir / "corpus.txt"
            walker.save_corpus(corpus, corpus_path, meta=stamp)
            written["corpus"] = str(corpus_path)

            stage = "embed"
            es = embed_mod.train(corpus, cfg.sgns)
            emb_path = outdir / "embeddings.txt"
            embed_mod.save_embeddings(es, emb_path, meta=stamp)
            written["embeddings"] = str(emb_path)

        stage = "evaluate"
        report = linkpred.evaluate(
            cfg.method,
            txs,
            seeds=list(range(cfg.seed_base, cfg.seed_base + cfg.n_seeds)),
            hide_fraction=cfg.hide,
            L=cfg.L,
            walk_cfg=cfg.walk,
            sgns_cfg=cfg.sgns,
            epsilon=cfg.epsilon,
            self_conn_weight=cfg.self_conn_weight,
            undirected=cfg.undirected,
            l2_strength=cfg.l2,
        )
        report_dict = report.to_dict()
        report_dict["config"] = {**report_dict["config"], **cfg.semantic_dict()}
        report_dict["config_hash"] = cfg.hash()
        report_path = outdir / "report.json"
        report_path.write_text(
            json.dumps(report_dict, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        written["report"] = str(report_path)
    except (ingest_mod.TransactionFormatError, FileNotFoundError):
        raise
    except ValueError as exc:
        raise DataError(f"stage {stage}: {exc}") from exc
    return written


def _sweep(
    cfg: ExperimentConfig, variants: list[tuple[str | float, ExperimentConfig]]
) -> list[dict]:
    txs = ingest_mod.parse_transactions(cfg.input)
    rows = []
    for label, vcfg in variants:
        report = linkpred.evaluate(
            vcfg.method,
            txs,
            seeds=list(range(vcfg.seed_base, vcfg.seed_base + vcfg.n_seeds)),
            hide_fraction=vcfg.hide,
            L=vcfg.L,
            walk_cfg=vcfg.walk,
            sgns_cfg=vcfg.sgns,
            epsilon=vcfg.epsilon,
            self_conn_weight=vcfg.self_conn_weight,
            undirected=vcfg.undirected,
            l2_strength=vcfg.l2,
        )
        row = {
            "label": label,
            "auc_mean": report.mean["auc"],
            "auc_std": report.std["auc"],
            "ap_mean": report.mean["ap"],
            "ap_std": report.std["ap"],
            "precision_at_L_mean": report.mean["precision_at_L"],
            "precision_at_L_std": report.std["precision_at_L"],
            "split_hashes": [r["split_hash"] for r in report.per_seed],
        }
        rows.append(row)
    return rows


def _write_sweep(rows: list[dict], key: str, outdir: str, name: str, cfg: ExperimentConfig) -> str:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    table = {
        "config_hash": cfg.hash(),
        "config": cfg.semantic_dict(),
        "rows": [{key: r.pop("label"), **r} for r in rows],
    }
    json_path = out / f"{name}.json"
    json_path.write_text(json.dumps(table, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    csv_path = out / f"{name}.csv"
    cols = [key, "auc_mean", "auc_std", "ap_mean", "ap_std", "precision_at_L_mean", "precision_at_L_std"]
    lines = [",".join(cols)]
    for r in table["rows"]:
        lines.append(",".join(str(r[c]) for c in cols))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(json_path)


# ----------------------------------------------------------------- commands


def cmd_ingest(ns) -> int:
    txs = ingest_mod.parse_transactions(ns.input)
    if ns.out:
        ingest_mod.write_transactions(txs, ns.out)
    accounts = {a for t in txs for a in (t.src, t.dst)}
    print(
        json.dumps(
            {
                "rows": len(txs),
                "accounts": len(accounts),
                "t_min": min((t.timestamp for t in txs), default=0),
                "t_max": max((t.timestamp for t in txs), default=0),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_subgraph(ns) -> int:
    txs = ingest_mod.parse_transactions(ns.input)
    sub = ingest_mod.k_order_subgraph(txs, ns.center, ns.k_in, ns.k_out)
    ingest_mod.write_transactions(sub, ns.out)
    print(json.dumps({"rows": len(sub), "out": ns.out}, sort_keys=True))
    return EXIT_OK


def cmd_synth(ns) -> int:
    txs = ingest_mod.synth_temporal_graph(
        n_accounts=ns.accounts,
        n_communities=ns.communities,
        n_snapshots=ns.snapshots,
        txs_per_snapshot=ns.txs_per_snapshot,
        intra_prob=ns.intra_prob,
        seed=ns.seed if ns.seed is not None else int(DEFAULTS["seed"]),
    )
    ingest_mod.write_transactions(txs, ns.out)
    print(json.dumps({"rows": len(txs), "out": ns.out}, sort_keys=True))
    return EXIT_OK


def cmd_stats(ns) -> int:
    txs = ingest_mod.parse_transactions(ns.input)
    stats = ingest_mod.graph_stats(txs).to_dict()
    text = json.dumps(stats, sort_keys=True)
    if ns.out:
        Path(ns.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_build_tasmg(ns) -> int:
    v = _resolve(ns)
    if float(v["epsilon_days"]) <= 0:
        raise UsageError("epsilon_days must be > 0")
    txs = ingest_mod.parse_transactions(ns.input)
    g = tasmg.build_tasmg(
        txs,
        epsilon=float(v["epsilon_days"]) * 86400.0,
        self_conn_weight=float(v["self_conn_weight"]),
        undirected=bool(v["undirected"]),
    )
    tasmg.save_tasmg(g, ns.out)
    print(
        json.dumps(
            {"nodes": len(g.nodes), "edges": len(g.edges), "snapshots": g.n_snapshots, "out": ns.out},
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_walk(ns) -> int:
    v = _resolve(ns)
    mode = _MODE_ALIASES.get(str(v["mode"]))
    if mode is None:
        raise UsageError(f"unknown walk mode {v['mode']!r}")
    try:
        cfg = walker.WalkConfig(
            walks_per_node=int(v["walks"]),
            walk_length=int(v["length"]),
            alpha=float(v["alpha"]),
            amount_strategy=str(v["amount_strategy"]).lower(),
            mode=mode,
            p=float(v["p"]),
            q=float(v["q"]),
            seed=int(v["seed"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    g = tasmg.load_tasmg(ns.graph)
    corpus = walker.generate_walks(g, cfg)
    walker.save_corpus(corpus, ns.out)
    print(json.dumps({"walks": len(corpus.walks), "out": ns.out}, sort_keys=True))
    return EXIT_OK


def cmd_embed(ns) -> int:
    v = _resolve(ns)
    try:
        cfg = embed_mod.SgnsConfig(
            dim=int(v["dim"]),
            window=int(v["window"]),
            negatives=int(v["negatives"]),
            epochs=int(v["epochs"]),
            lr_start=float(v["lr_start"]),
            lr_end=float(v["lr_end"]),
            noise_exponent=float(v["noise_exponent"]),
            historical_lambda=float(v["historical_lambda"]),
            seed=int(v["seed"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    corpus = walker.load_corpus(ns.corpus)
    es = embed_mod.train(corpus, cfg)
    embed_mod.save_embeddings(es, ns.out)
    print(
        json.dumps(
            {"accounts": len(es.vocab), "dim": es.dim, "out": ns.out}, sort_keys=True
        )
    )
    return EXIT_OK


def cmd_evaluate(ns) -> int:
    cfg = _experiment_config(ns)
    written = run_pipeline(cfg)
    print(json.dumps({"artifacts": written, "config_hash": cfg.hash()}, sort_keys=True))
    return EXIT_OK


def cmd_sweep_alpha(ns) -> int:
    cfg = _experiment_config(ns)
    try:
        alphas = [float(x) for x in ns.alphas.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --alphas: {exc}") from None
    if not alphas:
        raise UsageError("--alphas must list at least one value")
    if any(not 0.1 <= a <= 0.9 for a in alphas):
        raise UsageError("every alpha must be in [0.1, 0.9]")
    if cfg.method not in linkpred.EMBEDDING_METHODS:
        raise UsageError("sweep-alpha requires an embedding method")
    variants = [(a, replace(cfg, walk=replace(cfg.walk, alpha=a))) for a in alphas]
    rows = _sweep(cfg, variants)
    path = _write_sweep(rows, "alpha", cfg.outdir, "alpha_sweep", cfg)
    print(json.dumps({"rows": len(rows), "out": path}, sort_keys=True))
    return EXIT_OK


def cmd_sweep_strategy(ns) -> int:
    cfg = _experiment_config(ns)
    if cfg.method not in linkpred.EMBEDDING_METHODS:
        raise UsageError("sweep-strategy requires an embedding method")
    variants = [
        (s, replace(cfg, walk=replace(cfg.walk, amount_strategy=s)))
        for s in walker.STRATEGIES
    ]
    rows = _sweep(cfg, variants)
    path = _write_sweep(rows, "strategy", cfg.outdir, "strategy_sweep", cfg)
    print(json.dumps({"rows": len(rows), "out": path}, sort_keys=True))
    return EXIT_OK


# -------------------------------------------------------------------- parser


def _add_common(parser: _Parser, *groups: str) -> None:
    parser.add_argument("--config", default=None, help="flat key=value config file")
    if "graph" in groups:
        parser.add_argument("--epsilon-days", dest="epsilon_days", type=float, default=None)
        parser.add_argument(
            "--self-conn-weight", dest="self_conn_weight", type=float, default=None
        )
        parser.add_argument(
            "--undirected", dest="undirected", action="store_true", default=None
        )
    if "walk" in groups:
        parser.add_argument("--mode", default=None, help="taw | deepwalk | node2vec")
        parser.add_argument("--alpha", type=float, default=None)
        parser.add_argument(
            "--amount-strategy", dest="amount_strategy", default=None, help="aus | abs | als"
        )
        parser.add_argument("--walks", type=int, default=None)
        parser.add_argument("--length", type=int, default=None)
        parser.add_argument("--p", type=float, default=None)
        parser.add_argument("--q", type=float, default=None)
    if "sgns" in groups:
        parser.add_argument("--dim", type=int, default=None)
        parser.add_argument("--window", type=int, default=None)
        parser.add_argument("--negatives", type=int, default=None)
        parser.add_argument("--epochs", type=int, default=None)
        parser.add_argument("--noise-exponent", dest="noise_exponent", type=float, default=None)
        parser.add_argument("--lr-start", dest="lr_start", type=float, default=None)
        parser.add_argument("--lr-end", dest="lr_end", type=float, default=None)
        parser.add_argument(
            "--historical-lambda", dest="historical_lambda", type=float, default=None
        )
    if "eval" in groups:
        parser.add_argument("--method", default=None, help="|".join(linkpred.METHODS))
        parser.add_argument("--hide", type=float, default=None)
        parser.add_argument("--seeds", type=int, default=None)
        parser.add_argument("--L", type=int, default=None)
        parser.add_argument("--l2", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="tawalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate a transaction CSV")
    p.add_argument("input")
    p.add_argument("--out", default=None, help="write a normalized copy")
    p.set_defaults(func=cmd_ingest, config=None)

    p = sub.add_parser("subgraph", help="extract the neighborhood of a center account")
    p.add_argument("input")
    p.add_argument("--center", required=True)
    p.add_argument("--k-in", dest="k_in", type=int, default=1)
    p.add_argument("--k-out", dest="k_out", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_subgraph, config=None)

    p = sub.add_parser("synth", help="generate a synthetic temporal network")
    p.add_argument("--accounts", type=int, default=500)
    p.add_argument("--communities", type=int, default=5)
    p.add_argument("--snapshots", type=int, default=6)
    p.add_argument("--txs-per-snapshot", dest="txs_per_snapshot", type=int, default=2000)
    p.add_argument("--intra-prob", dest="intra_prob", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth, config=None)

    p = sub.add_parser("stats", help="topological statistics of a transaction CSV")
    p.add_argument("input")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stats, config=None)

    p = sub.add_parser("build-tasmg", help="build and dump the snapshot multigraph")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    _add_common(p, "graph")
    p.set_defaults(func=cmd_build_tasmg)

    p = sub.add_parser("walk", help="generate a walk corpus from a graph dump")
    p.add_argument("graph")
    p.add_argument("--out", required=True)
    _add_common(p, "walk")
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("embed", help="train embeddings from a walk corpus")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    _add_common(p, "sgns")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("evaluate", help="full pipeline: split, walk, embed, score")
    p.add_argument("input")
    p.add_argument("--outdir", default="tawalk_out")
    _add_common(p, "graph", "walk", "sgns", "eval")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-alpha", help="evaluate across temporal bias values")
    p.add_argument("input")
    p.add_argument("--alphas", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--outdir", default="tawalk_out")
    _add_common(p, "graph", "walk", "sgns", "eval")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("sweep-strategy", help="evaluate the three amount strategies")
    p.add_argument("input")
    p.add_argument("--outdir", default="tawalk_out")
    _add_common(p, "graph", "walk", "sgns", "eval")
    p.set_defaults(func=cmd_sweep_strategy)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        ns = build_parser().parse_args(argv)
        return ns.func(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ingest_mod.TransactionFormatError, DataError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
