"""Transaction ingestion: CSV parsing, neighborhood subgraph sampling,
synthetic network generation, and topological statistics.

The on-disk format is a UTF-8 CSV with header ``src,dst,amount,timestamp``.
Account identifiers are opaque strings without whitespace (they double as
tokens in walk corpora and embedding files), amounts are non-negative
decimals, timestamps are integer seconds.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

CSV_HEADER = ("src", "dst", "amount", "timestamp")

#: Seconds covered by one snapshot window of the synthetic generator.
SYNTH_SNAPSHOT_SECONDS = 30 * 86400


class TransactionFormatError(ValueError):
    """A transaction file or row violates the expected schema."""


@dataclass(frozen=True, slots=True)
class Transaction:
    """One directed, amount-weighted, timestamped transfer between accounts."""

    src: str
    dst: str
    amount: float
    timestamp: int

    def __post_init__(self):
        if not self.src or not self.dst:
            raise ValueError("account identifiers must be nonempty")
        if any(c.isspace() for c in self.src) or any(c.isspace() for c in self.dst):
            raise ValueError("account identifiers must not contain whitespace")
        if not math.isfinite(self.amount) or self.amount < 0:
            raise ValueError(f"amount must be a finite non-negative number, got {self.amount}")
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp}")


@dataclass(frozen=True, slots=True)
class GraphStats:
    """Topology summary of the undirected simple projection."""

    node_count: int
    edge_count: int
    avg_degree: float
    avg_clustering: float

    def to_dict(self) -> dict:
        return {
            "nodes": self.node_count,
            "edges": self.edge_count,
            "avg_degree": self.avg_degree,
            "avg_clustering": self.avg_clustering,
        }


def _parse_amount(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite amount {text!r}")
    if value < 0:
        raise ValueError(f"negative amount {text!r}")
    return value


def _parse_timestamp(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"timestamp must be an integer, got {text!r}") from None
    if value < 0:
        raise ValueError(f"timestamp must be >= 0, got {text!r}")
    return value


def parse_transactions(path: str | Path, fmt: str = "csv") -> list[Transaction]:
    """Read transaction records from ``path`` in file order.

    Malformed rows raise :class:`TransactionFormatError` with the offending
    line number; nothing is skipped silently. Blank lines are ignored.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported format {fmt!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"transaction file not found: {path}")

    txs: list[Transaction] = []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise TransactionFormatError(
                f"{path}: expected header {','.join(CSV_HEADER)!r}, got {header!r}"
            )
        for row in reader:
            if not row or all(f == "" for f in row):
                continue
            line = reader.line_num
            if len(row) != 4:
                raise TransactionFormatError(f"{path}:{line}: expected 4 fields, got {len(row)}")
            try:
                txs.append(
                    Transaction(
                        src=row[0].strip(),
                        dst=row[1].strip(),
                        amount=_parse_amount(row[2].strip()),
                        timestamp=_parse_timestamp(row[3].strip()),
                    )
                )
            except ValueError as exc:
                raise TransactionFormatError(f"{path}:{line}: {exc}") from None
    return txs


def write_transactions(txs: list[Transaction], path: str | Path) -> None:
    """Write records to CSV with the canonical header, preserving order."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t in txs:
            writer.writerow([t.src, t.dst, repr(t.amount), t.timestamp])


def _bounded_reach(adj: dict[str, set[str]], start: str, depth: int) -> set[str]:
    """Accounts reachable from ``start`` in at most ``depth`` hops over ``adj``."""
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        node, dist = frontier.popleft()
        if dist == depth:
            continue
        for nxt in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, dist + 1))
    return seen


def k_order_subgraph(
    txs: list[Transaction], center: str, k_in: int, k_out: int
) -> list[Transaction]:
    """Extract the neighborhood of ``center``: accounts reachable within
    ``k_out`` hops following edge direction plus accounts reaching it within
    ``k_in`` hops against direction, and every transaction between retained
    accounts.

    Self-loop transactions are ignored, consistent with their treatment in
    graph construction.
    """
    if k_in < 0 or k_out < 0:
        raise ValueError("k_in and k_out must be >= 0")
    out_adj: dict[str, set[str]] = {}
    in_adj: dict[str, set[str]] = {}
    present = False
    for t in txs:
        if t.src == t.dst:
            continue
        out_adj.setdefault(t.src, set()).add(t.dst)
        in_adj.setdefault(t.dst, set()).add(t.src)
        present = present or t.src == center or t.dst == center
    if not present:
        raise ValueError(f"center account {center!r} has no transactions")
    retained = _bounded_reach(out_adj, center, k_out) | _bounded_reach(in_adj, center, k_in)
    return [t for t in txs if t.src != t.dst and t.src in retained and t.dst in retained]


def synth_temporal_graph(
    n_accounts: int,
    n_communities: int,
    n_snapshots: int,
    txs_per_snapshot: int,
    intra_prob: float,
    seed: int,
    snapshot_seconds: int = SYNTH_SNAPSHOT_SECONDS,
) -> list[Transaction]:
    """Generate a community-structured temporal transaction network.

    Accounts are assigned to communities round-robin. Each transaction picks
    its source uniformly; the destination comes from the source's community
    with probability ``intra_prob``, otherwise uniformly from the rest.
    Amounts are log-normal (median 1.0, sigma 1.0); timestamps are uniform
    integers within the snapshot's window. Output is deterministic per seed.
    """
    if n_accounts < 1:
        raise ValueError("n_accounts must be >= 1")
    if not 1 <= n_communities <= n_accounts:
        raise ValueError("need n_accounts >= n_communities >= 1")
    if n_snapshots < 1 or txs_per_snapshot < 1:
        raise ValueError("n_snapshots and txs_per_snapshot must be >= 1")
    if not 0.0 <= intra_prob <= 1.0:
        raise ValueError("intra_prob must be in [0, 1]")

    width = max(4, len(str(n_accounts - 1)))
    names = [f"a{i:0{width}d}" for i in range(n_accounts)]
    members = [np.arange(c, n_accounts, n_communities) for c in range(n_communities)]
    outsiders = [
        np.array([i for i in range(n_accounts) if i % n_communities != c], dtype=np.int64)
        for c in range(n_communities)
    ]

    rng = np.random.default_rng(seed)
    txs: list[Transaction] = []
    for s in range(n_snapshots):
        lo, hi = s * snapshot_seconds, (s + 1) * snapshot_seconds
        for _ in range(txs_per_snapshot):
            src = int(rng.integers(n_accounts))
            c = src % n_communities
            go_intra = rng.random() < intra_prob or len(outsiders[c]) == 0
            if go_intra:
                group = members[c]
                if len(group) == 1:
                    dst = src  # degenerate single-member community
                else:
                    pos = (src - c) // n_communities
                    j = int(rng.integers(len(group) - 1))
                    if j >= pos:
                        j += 1
                    dst = int(group[j])
            else:
                dst = int(outsiders[c][int(rng.integers(len(outsiders[c])))])
            amount = float(rng.lognormal(mean=0.0, sigma=1.0))
            ts = int(rng.integers(lo, hi))
            txs.append(Transaction(names[src], names[dst], amount, ts))
    return txs


def _simple_projection(txs: list[Transaction]) -> tuple[set[str], dict[str, set[str]]]:
    """Undirected simple projection: direction and parallel edges collapsed,
    self-loops dropped (their endpoints still count as nodes)."""
    nodes: set[str] = set()
    adj: dict[str, set[str]] = {}
    for t in txs:
        nodes.add(t.src)
        nodes.add(t.dst)
        if t.src == t.dst:
            continue
        adj.setdefault(t.src, set()).add(t.dst)
        adj.setdefault(t.dst, set()).add(t.src)
    return nodes, adj


def graph_stats(txs: list[Transaction]) -> GraphStats:
    """Node/edge counts, average degree, and average clustering coefficient
    of the undirected simple projection. Empty input yields all zeros."""
    nodes, adj = _simple_projection(txs)
    n = len(nodes)
    m = sum(len(s) for s in adj.values()) // 2
    if n == 0:
        return GraphStats(0, 0, 0.0, 0.0)

    clustering_total = 0.0
    for v in sorted(nodes):  # fixed order keeps the float sum reproducible
        nbrs = adj.get(v, ())
        deg = len(nbrs)
        if deg < 2:
            continue
        nbr_list = sorted(nbrs)
        links = 0
        for i, u in enumerate(nbr_list):
            u_adj = adj[u]
            for w in nbr_list[i + 1 :]:
                if w in u_adj:
                    links += 1
        clustering_total += 2.0 * links / (deg * (deg - 1))

    return GraphStats(
        node_count=n,
        edge_count=m,
        avg_degree=2.0 * m / n,
        avg_clustering=clustering_total / n,
    )
