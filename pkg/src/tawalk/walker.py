"""Biased walk generation over the snapshot multigraph.

Per-edge transition law at a node c with accessible edges L(c):

* temporal factor: weight ``alpha`` on edges that cross into the next
  snapshot, ``1 - alpha`` on edges that stay, normalized over L(c);
* amount factor: ``aus`` uniform, ``abs`` proportional to edge weight,
  ``als`` proportional to the ascending rank of the weight (ties get the
  mid-rank), normalized over L(c);
* joint law: the elementwise product of the two factors, renormalized.

Each node's joint law is frozen into an alias table, so every walk step
samples in O(1). The engine also provides two static baseline modes that
ignore time and amounts, operating on the merged undirected simple
projection: ``static_uniform`` (unbiased walks) and ``static_node2vec``
(second-order p/q-biased walks).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .tasmg import KIND_TRANSACTION, Tasmg, TasmgEdge, TasmgNode

MODE_TAW = "taw"
MODE_STATIC_UNIFORM = "static_uniform"
MODE_STATIC_NODE2VEC = "static_node2vec"
MODES = (MODE_TAW, MODE_STATIC_UNIFORM, MODE_STATIC_NODE2VEC)

STRATEGY_AUS = "aus"
STRATEGY_ABS = "abs"
STRATEGY_ALS = "als"
STRATEGIES = (STRATEGY_AUS, STRATEGY_ABS, STRATEGY_ALS)


@dataclass(frozen=True, slots=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80  # counted in edge traversals
    alpha: float = 0.5
    amount_strategy: str = STRATEGY_AUS
    mode: str = MODE_TAW
    p: float = 1.0  # return bias, static_node2vec only
    q: float = 1.0  # in-out bias, static_node2vec only
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be >= 1")
        if self.walk_length < 1:
            raise ValueError("walk_length must be >= 1")
        if not 0.1 <= self.alpha <= 0.9:
            raise ValueError(f"alpha must be in [0.1, 0.9], got {self.alpha}")
        if self.amount_strategy not in STRATEGIES:
            raise ValueError(f"amount_strategy must be one of {STRATEGIES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be > 0")


@dataclass
class WalkCorpus:
    """Account-token walk sequences. When produced by the temporal mode,
    ``snapshots`` holds the walker's snapshot at each emitted token
    (parallel to ``walks``); static modes leave it None."""

    walks: list[list[str]]
    config: WalkConfig | None = None
    snapshots: list[list[int]] | None = None


class AliasTable:
    """Walker's O(1) categorical sampler (Vose construction)."""

    __slots__ = ("probs", "_accept", "_alias")

    def __init__(self, weights: Sequence[float] | np.ndarray):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d sequence")
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative with positive sum")
        p = w / w.sum()
        n = p.size
        self.probs = p
        scaled = p * n
        accept = np.ones(n, dtype=np.float64)
        alias = np.arange(n, dtype=np.int64)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            accept[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        self._accept = accept
        self._alias = alias

    def sample(self, u_col: float, u_coin: float) -> int:
        """Draw one index from two uniforms in [0, 1)."""
        i = int(u_col * self.probs.size)
        return i if u_coin < self._accept[i] else int(self._alias[i])

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cols = rng.integers(0, self.probs.size, size=n)
        coins = rng.random(n)
        return np.where(coins < self._accept[cols], cols, self._alias[cols])


def temporal_prob(edges: Sequence[TasmgEdge], alpha: float) -> np.ndarray:
    """Normalized temporal factor: alpha mass per snapshot-crossing edge,
    (1 - alpha) per within-snapshot edge."""
    if len(edges) == 0:
        raise ValueError("empty accessible-edge set")
    psi = np.where(np.array([e.accessibility for e in edges]) > 0, alpha, 1.0 - alpha)
    return psi / psi.sum()


def _ascending_ranks(weights: np.ndarray) -> np.ndarray:
    """1-based ascending ranks; tied values share the mean of their positions."""
    order = np.argsort(weights, kind="stable")
    ranks = np.empty(weights.size, dtype=np.float64)
    sorted_w = weights[order]
    i = 0
    while i < weights.size:
        j = i
        while j < weights.size and sorted_w[j] == sorted_w[i]:
            j += 1
        ranks[order[i:j]] = (i + 1 + j) / 2.0
        i = j
    return ranks


def amount_prob(edges: Sequence[TasmgEdge], strategy: str) -> np.ndarray:
    """Normalized amount factor under the given sampling strategy."""
    if len(edges) == 0:
        raise ValueError("empty accessible-edge set")
    n = len(edges)
    if strategy == STRATEGY_AUS:
        return np.full(n, 1.0 / n)
    w = np.array([e.weight for e in edges], dtype=np.float64)
    if strategy == STRATEGY_ABS:
        return w / w.sum()
    if strategy == STRATEGY_ALS:
        r = _ascending_ranks(w)
        return r / r.sum()
    raise ValueError(f"unknown amount strategy {strategy!r}")


def joint_prob(edges: Sequence[TasmgEdge], alpha: float, strategy: str) -> np.ndarray:
    """Renormalized product of the temporal and amount factors."""
    prod = temporal_prob(edges, alpha) * amount_prob(edges, strategy)
    return prod / prod.sum()


def static_neighbors(g: Tasmg) -> dict[str, tuple[str, ...]]:
    """Merged undirected simple projection over accounts: all snapshots
    collapsed, parallel edges and direction dropped."""
    adj: dict[str, set[str]] = {}
    for e in g.edges:
        if e.kind != KIND_TRANSACTION:
            continue
        a, b = e.src.account, e.dst.account
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return {a: tuple(sorted(nbrs)) for a, nbrs in sorted(adj.items())}


@dataclass
class TransitionTable:
    """Precomputed per-state samplers. For the temporal mode the table maps
    each multigraph node with a nonempty accessible-edge set to its edge
    tuple, exact joint distribution, and alias sampler. Static modes store
    the merged projection's adjacency, plus per-(prev, cur) second-order
    samplers for node2vec walks."""

    mode: str
    node_entries: dict[TasmgNode, tuple[tuple[TasmgEdge, ...], np.ndarray, AliasTable]] = field(
        default_factory=dict
    )
    neighbors: dict[str, tuple[str, ...]] = field(default_factory=dict)
    pair_alias: dict[tuple[str, str], AliasTable] = field(default_factory=dict)

    def distribution(self, node: TasmgNode) -> tuple[tuple[TasmgEdge, ...], np.ndarray]:
        edges, probs, _ = self.node_entries[node]
        return edges, probs


def build_transition_table(g: Tasmg, cfg: WalkConfig) -> TransitionTable:
    """Freeze the walk's transition law into alias tables, one per state."""
    if cfg.mode == MODE_TAW:
        entries = {}
        for v in sorted(g.accessible_index):
            edges = g.accessible_index[v]
            if not edges:
                continue
            probs = joint_prob(edges, cfg.alpha, cfg.amount_strategy)
            entries[v] = (edges, probs, AliasTable(probs))
        return TransitionTable(mode=cfg.mode, node_entries=entries)

    nbrs = static_neighbors(g)
    if cfg.mode == MODE_STATIC_UNIFORM:
        return TransitionTable(mode=cfg.mode, neighbors=nbrs)

    adj_sets = {a: set(n) for a, n in nbrs.items()}
    pair_alias: dict[tuple[str, str], AliasTable] = {}
    for prev, prev_nbrs in nbrs.items():
        prev_adj = adj_sets[prev]
        for cur in prev_nbrs:
            weights = [
                1.0 / cfg.p if x == prev else (1.0 if x in prev_adj else 1.0 / cfg.q)
                for x in nbrs[cur]
            ]
            pair_alias[(prev, cur)] = AliasTable(weights)
    return TransitionTable(mode=cfg.mode, neighbors=nbrs, pair_alias=pair_alias)


def _taw_walk(
    table: TransitionTable,
    active: tuple[int, ...],
    account: str,
    length: int,
    rng: np.random.Generator,
) -> tuple[list[str], list[int]]:
    start = active[int(rng.integers(len(active)))]
    node = TasmgNode(account, start)
    tokens = [account]
    snaps = [start]
    u = rng.random((length, 2))
    for i in range(length):
        entry = table.node_entries.get(node)
        if entry is None:
            break
        edges, _, alias = entry
        edge = edges[alias.sample(u[i, 0], u[i, 1])]
        node = edge.dst
        if edge.kind == KIND_TRANSACTION:
            tokens.append(node.account)
            snaps.append(node.snapshot)
        # self-connection hops advance time without emitting a token
    return tokens, snaps


def _static_uniform_walk(
    neighbors: dict[str, tuple[str, ...]], account: str, length: int, rng: np.random.Generator
) -> list[str]:
    tokens = [account]
    cur = account
    u = rng.random(length)
    for i in range(length):
        nbrs = neighbors.get(cur)
        if not nbrs:
            break
        cur = nbrs[int(u[i] * len(nbrs))]
        tokens.append(cur)
    return tokens


def _node2vec_walk(
    table: TransitionTable, account: str, length: int, rng: np.random.Generator
) -> list[str]:
    tokens = [account]
    prev: str | None = None
    cur = account
    u = rng.random((length, 2))
    for i in range(length):
        nbrs = table.neighbors.get(cur)
        if not nbrs:
            break
        if prev is None:
            nxt = nbrs[int(u[i, 0] * len(nbrs))]
        else:
            nxt = nbrs[table.pair_alias[(prev, cur)].sample(u[i, 0], u[i, 1])]
        prev, cur = cur, nxt
        tokens.append(cur)
    return tokens


def generate_walks(g: Tasmg, cfg: WalkConfig) -> WalkCorpus:
    """Emit ``walks_per_node`` walks per account.

    Temporal walks start at a uniformly chosen active snapshot of the
    account and end early at states with no accessible edges; walks with
    fewer than 2 tokens are discarded. Every walk draws from its own RNG
    stream keyed by (seed, account index, walk index), so results do not
    depend on scheduling and the output order is canonical (sorted by
    account, then walk index).
    """
    table = build_transition_table(g, cfg)
    accounts = sorted(g.account_universe)
    walks: list[list[str]] = []
    snapshots: list[list[int]] = []
    for ai, account in enumerate(accounts):
        for wi in range(cfg.walks_per_node):
            rng = np.random.default_rng((cfg.seed, ai, wi))
            if cfg.mode == MODE_TAW:
                tokens, snaps = _taw_walk(
                    table, g.active_snapshots[account], account, cfg.walk_length, rng
                )
                if len(tokens) >= 2:
                    walks.append(tokens)
                    snapshots.append(snaps)
            elif cfg.mode == MODE_STATIC_UNIFORM:
                tokens = _static_uniform_walk(table.neighbors, account, cfg.walk_length, rng)
                if len(tokens) >= 2:
                    walks.append(tokens)
            else:
                tokens = _node2vec_walk(table, account, cfg.walk_length, rng)
                if len(tokens) >= 2:
                    walks.append(tokens)
    return WalkCorpus(
        walks=walks,
        config=cfg,
        snapshots=snapshots if cfg.mode == MODE_TAW else None,
    )


def save_corpus(corpus: WalkCorpus, path: str | Path, meta: dict | None = None) -> None:
    """One walk per line, space-separated account tokens. Leading ``#`` lines
    carry metadata (config echo plus any caller-provided stamp). Snapshot
    annotations, when present, go to a ``<path>.snapshots`` sidecar so the
    main file stays plain."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if corpus.config is not None:
            fh.write(f"# config={json.dumps(_config_to_dict(corpus.config), sort_keys=True)}\n")
        if meta:
            fh.write(f"# meta={json.dumps(meta, sort_keys=True)}\n")
        for walk in corpus.walks:
            fh.write(" ".join(walk) + "\n")
    if corpus.snapshots is not None:
        side = path.with_name(path.name + ".snapshots")
        with side.open("w", encoding="utf-8") as fh:
            for snaps in corpus.snapshots:
                fh.write(" ".join(str(s) for s in snaps) + "\n")


def load_corpus(path: str | Path) -> WalkCorpus:
    path = Path(path)
    walks: list[list[str]] = []
    config: WalkConfig | None = None
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# config="):
                    config = _config_from_dict(json.loads(line[len("# config=") :]))
                continue
            walks.append(line.split(" "))
    snapshots = None
    side = path.with_name(path.name + ".snapshots")
    if side.exists():
        snapshots = []
        with side.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    snapshots.append([int(x) for x in line.split(" ")])
        if len(snapshots) != len(walks):
            raise ValueError(f"{side}: snapshot sidecar does not match corpus length")
    return WalkCorpus(walks=walks, config=config, snapshots=snapshots)


def _config_to_dict(cfg: WalkConfig) -> dict:
    return {
        "walks_per_node": cfg.walks_per_node,
        "walk_length": cfg.walk_length,
        "alpha": cfg.alpha,
        "amount_strategy": cfg.amount_strategy,
        "mode": cfg.mode,
        "p": cfg.p,
        "q": cfg.q,
        "seed": cfg.seed,
    }


def _config_from_dict(d: dict) -> WalkConfig:
    return WalkConfig(**d)
