"""Snapshot-partitioned transaction multigraph.

Transactions are bucketed into fixed-width snapshots anchored at the
dataset's minimum timestamp. Each account gets one node copy per snapshot
in which it is active; accounts active in two successive snapshots are
linked by a forward self-connection edge, which is what lets a walk travel
forward in time. Every edge carries a time-accessibility value: 0 for
within-snapshot transaction edges, +1 for self-connections. Backward edges
(accessibility -1) are never materialized; they are untraversable by
definition, so storing them would be waste.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .ingest import Transaction

logger = logging.getLogger(__name__)

KIND_TRANSACTION = "transaction"
KIND_SELF_CONNECTION = "self_connection"

#: Default snapshot width: 30 days, in seconds.
DEFAULT_EPSILON = 30 * 86400


class TasmgNode(NamedTuple):
    """One account's copy inside one snapshot."""

    account: str
    snapshot: int


@dataclass(frozen=True, slots=True)
class TasmgEdge:
    src: TasmgNode
    dst: TasmgNode
    weight: float
    accessibility: int  # dst.snapshot - src.snapshot; 0 or +1 for stored edges
    kind: str

    def key(self) -> tuple:
        return (*self.src, *self.dst, self.weight, self.accessibility, self.kind)


@dataclass(frozen=True)
class Tasmg:
    """Immutable snapshot multigraph with a precomputed accessible-edge index.

    ``accessible_index[v]`` holds exactly the edges leaving ``v`` with
    non-negative time accessibility: the outgoing transaction edges inside
    ``v``'s snapshot plus its forward self-connection when present, sorted by
    (destination account, destination snapshot, weight).
    """

    epsilon: float
    self_conn_weight: float
    undirected: bool
    min_timestamp: int
    n_snapshots: int
    account_universe: frozenset[str]
    nodes: frozenset[TasmgNode]
    edges: tuple[TasmgEdge, ...]
    accessible_index: dict[TasmgNode, tuple[TasmgEdge, ...]]
    active_snapshots: dict[str, tuple[int, ...]]


def _index_edges(
    nodes: frozenset[TasmgNode], edges: tuple[TasmgEdge, ...]
) -> dict[TasmgNode, tuple[TasmgEdge, ...]]:
    grouped: dict[TasmgNode, list[TasmgEdge]] = {v: [] for v in nodes}
    for e in edges:
        grouped[e.src].append(e)
    return {
        v: tuple(sorted(out, key=lambda e: (e.dst.account, e.dst.snapshot, e.weight)))
        for v, out in grouped.items()
    }


def build_tasmg(
    txs: list[Transaction],
    epsilon: float = DEFAULT_EPSILON,
    self_conn_weight: float = 1.0,
    undirected: bool = False,
) -> Tasmg:
    """Build the snapshot multigraph from transaction records.

    A transaction with timestamp ``ts`` lands in snapshot
    ``floor((ts - min_ts) / epsilon)``. Self-loop and zero-amount
    transactions are dropped with a counted warning: the former connect
    nothing, the latter would produce zero-weight edges that the
    amount-biased transition laws cannot normalize. With ``undirected`` a
    reversed copy of every transaction edge is added so walks are not
    starved on strictly-directed data.
    """
    if not txs:
        raise ValueError("empty transaction list")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if self_conn_weight <= 0:
        raise ValueError("self_conn_weight must be > 0")

    kept: list[Transaction] = []
    n_self_loops = 0
    n_zero_amount = 0
    for t in txs:
        if t.src == t.dst:
            n_self_loops += 1
        elif t.amount <= 0.0:
            n_zero_amount += 1
        else:
            kept.append(t)
    if n_self_loops:
        logger.warning("dropped %d self-loop transaction(s) at graph build", n_self_loops)
    if n_zero_amount:
        logger.warning("dropped %d zero-amount transaction(s) at graph build", n_zero_amount)
    if not kept:
        raise ValueError("no usable transactions after dropping self-loops and zero amounts")

    min_ts = min(t.timestamp for t in kept)
    snap_of = lambda ts: int((ts - min_ts) // epsilon)
    n_snapshots = max(snap_of(t.timestamp) for t in kept) + 1

    nodes: set[TasmgNode] = set()
    edges: list[TasmgEdge] = []
    for t in kept:
        s = snap_of(t.timestamp)
        u, v = TasmgNode(t.src, s), TasmgNode(t.dst, s)
        nodes.add(u)
        nodes.add(v)
        edges.append(TasmgEdge(u, v, t.amount, 0, KIND_TRANSACTION))
        if undirected:
            edges.append(TasmgEdge(v, u, t.amount, 0, KIND_TRANSACTION))

    active: dict[str, list[int]] = {}
    for acct, snap in nodes:
        active.setdefault(acct, []).append(snap)
    active_snapshots = {acct: tuple(sorted(set(s))) for acct, s in sorted(active.items())}

    for acct in sorted(active_snapshots):
        snaps = set(active_snapshots[acct])
        for s in active_snapshots[acct]:
            if s + 1 in snaps:
                edges.append(
                    TasmgEdge(
                        TasmgNode(acct, s),
                        TasmgNode(acct, s + 1),
                        self_conn_weight,
                        1,
                        KIND_SELF_CONNECTION,
                    )
                )

    frozen_nodes = frozenset(nodes)
    edge_tuple = tuple(edges)
    return Tasmg(
        epsilon=epsilon,
        self_conn_weight=self_conn_weight,
        undirected=undirected,
        min_timestamp=min_ts,
        n_snapshots=n_snapshots,
        account_universe=frozenset(active_snapshots),
        nodes=frozen_nodes,
        edges=edge_tuple,
        accessible_index=_index_edges(frozen_nodes, edge_tuple),
        active_snapshots=active_snapshots,
    )


def accessible_edges(g: Tasmg, v: TasmgNode | tuple[str, int]) -> list[TasmgEdge]:
    """Edges traversable from ``v``: same-snapshot outgoing transactions plus
    the forward self-connection, in the index's deterministic order."""
    v = TasmgNode(*v)
    if v not in g.nodes:
        raise ValueError(f"unknown node {v!r}")
    return list(g.accessible_index[v])


def tasmg_to_dict(g: Tasmg, meta: dict | None = None) -> dict:
    """JSON-serializable dump. Nodes and edges are explicit; the accessible
    index is rebuilt on load."""
    d = {
        "format": "tasmg-v1",
        "epsilon": g.epsilon,
        "self_conn_weight": g.self_conn_weight,
        "undirected": g.undirected,
        "min_timestamp": g.min_timestamp,
        "n_snapshots": g.n_snapshots,
        "accounts": sorted(g.account_universe),
        "nodes": sorted([a, s] for a, s in g.nodes),
        "edges": [
            [e.src.account, e.src.snapshot, e.dst.account, e.dst.snapshot, e.weight, e.kind]
            for e in g.edges
        ],
    }
    if meta is not None:
        d["meta"] = meta
    return d


def tasmg_from_dict(d: dict) -> Tasmg:
    if d.get("format") != "tasmg-v1":
        raise ValueError(f"unrecognized graph dump format {d.get('format')!r}")
    nodes = frozenset(TasmgNode(a, int(s)) for a, s in d["nodes"])
    edges = tuple(
        TasmgEdge(
            TasmgNode(sa, int(ss)),
            TasmgNode(da, int(ds)),
            float(w),
            int(ds) - int(ss),
            kind,
        )
        for sa, ss, da, ds, w, kind in d["edges"]
    )
    active: dict[str, list[int]] = {}
    for acct, snap in nodes:
        active.setdefault(acct, []).append(snap)
    return Tasmg(
        epsilon=float(d["epsilon"]),
        self_conn_weight=float(d["self_conn_weight"]),
        undirected=bool(d["undirected"]),
        min_timestamp=int(d["min_timestamp"]),
        n_snapshots=int(d["n_snapshots"]),
        account_universe=frozenset(d["accounts"]),
        nodes=nodes,
        edges=edges,
        accessible_index=_index_edges(nodes, edges),
        active_snapshots={a: tuple(sorted(set(s))) for a, s in sorted(active.items())},
    )


def save_tasmg(g: Tasmg, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_text(
        json.dumps(tasmg_to_dict(g, meta), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_tasmg(path: str | Path) -> Tasmg:
    return tasmg_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
