"""Shared fixtures and independent test oracles."""

from __future__ import annotations

import numpy as np
import pytest

from tawalk.ingest import Transaction
from tawalk.tasmg import KIND_TRANSACTION, Tasmg

DAY = 86400
MONTH = 30 * DAY


@pytest.fixture
def month_pair_txs() -> list[Transaction]:
    """Four transfers among three accounts across two 30-day windows:
    window 0 holds A->B (5) and B->C (2); window 1 holds A->B (1) and
    C->A (4). All three accounts are active in both windows."""
    return [
        Transaction("A", "B", 5.0, 0 * DAY),
        Transaction("B", "C", 2.0, 10 * DAY),
        Transaction("A", "B", 1.0, 33 * DAY),
        Transaction("C", "A", 4.0, 45 * DAY),
    ]


def random_txs(
    rng: np.random.Generator,
    n_accounts: int,
    n_txs: int,
    n_windows: int = 3,
    window: int = MONTH,
) -> list[Transaction]:
    """Random transaction list; may contain parallel edges and self-loops."""
    txs = []
    for _ in range(n_txs):
        u = int(rng.integers(n_accounts))
        v = int(rng.integers(n_accounts))
        w = float(rng.uniform(0.1, 50.0))
        ts = int(rng.integers(0, n_windows * window))
        txs.append(Transaction(f"n{u:03d}", f"n{v:03d}", w, ts))
    return txs


def walk_is_temporally_valid(g: Tasmg, tokens: list[str]) -> bool:
    """Replay oracle: a token sequence is valid iff there is a start snapshot
    and a forward-only edge path realizing it, where each hop between
    consecutive tokens is one within-snapshot transaction edge optionally
    preceded by self-connection hops (each advancing one snapshot). Tracks
    the set of feasible snapshots step by step."""
    has_tx: set[tuple[str, int, str]] = set()
    has_self: set[tuple[str, int]] = set()
    for e in g.edges:
        if e.kind == KIND_TRANSACTION:
            has_tx.add((e.src.account, e.src.snapshot, e.dst.account))
        else:
            has_self.add((e.src.account, e.src.snapshot))

    states = set(g.active_snapshots.get(tokens[0], ()))
    for a, b in zip(tokens, tokens[1:]):
        nxt: set[int] = set()
        for s in states:
            t = s
            while True:
                if (a, t, b) in has_tx:
                    nxt.add(t)
                if (a, t) in has_self:
                    t += 1
                else:
                    break
        states = nxt
        if not states:
            return False
    return True


def reachable_within(adj_matrix: np.ndarray, start: int, depth: int) -> set[int]:
    """Bounded reachability oracle via boolean matrix powers."""
    n = adj_matrix.shape[0]
    reach = np.zeros(n, dtype=bool)
    reach[start] = True
    frontier = reach.copy()
    for _ in range(depth):
        frontier = (frontier @ adj_matrix) & ~reach
        if not frontier.any():
            break
        reach |= frontier
    return {int(i) for i in np.nonzero(reach)[0]}
