"""Skip-gram account embeddings with negative sampling.

Training maximizes, per (center, context) pair,

    log sigmoid(out[ctx] . in[c]) + sum_j log sigmoid(-out[neg_j] . in[c])

by stochastic gradient ascent with a linearly decaying learning rate.
Negatives are drawn proportional to count**noise_exponent. The published
embedding is the input matrix.

With ``historical_lambda > 0`` the trainer additionally keeps one vector per
(account, snapshot) observed in the corpus, trains it on the walk segments
that stay inside that snapshot, and couples it to the account's global
vector through a quadratic penalty: each coupling step moves both vectors
toward each other by ``2 * lambda * lr * (difference)``.

The inner loops are compiled with numba; ``sgns_step`` is the plain-numpy
reference for the same per-pair update and is what the tests check gradients
against.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange

from .walker import AliasTable, WalkCorpus

logger = logging.getLogger(__name__)

_CHUNK = 1_000_000  # pairs per kernel call; bounds negative-sample memory


@dataclass(frozen=True, slots=True)
class SgnsConfig:
    dim: int = 128
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    noise_exponent: float = 0.75
    historical_lambda: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ValueError("dim, window, negatives and epochs must be >= 1")
        if not self.lr_start >= self.lr_end > 0:
            raise ValueError("need lr_start >= lr_end > 0")
        if self.historical_lambda < 0:
            raise ValueError("historical_lambda must be >= 0")


@dataclass
class Vocab:
    tokens: list[str]
    counts: np.ndarray
    index: dict[str, int]


@dataclass
class EmbeddingSet:
    """Learned vectors. ``input_vectors`` is the published embedding;
    ``output_vectors`` are the context vectors (None after loading from
    file). ``historical_vectors`` maps (account, snapshot) to its vector and
    is present only when trained with a positive historical weight."""

    vocab: list[str]
    input_vectors: np.ndarray
    output_vectors: np.ndarray | None = None
    historical_vectors: dict[tuple[str, int], np.ndarray] | None = None
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        self._index = {tok: i for i, tok in enumerate(self.vocab)}
        if len(self._index) != len(self.vocab):
            raise ValueError("vocab contains duplicates")

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    def __contains__(self, account: str) -> bool:
        return account in self._index

    def row(self, account: str) -> int:
        return self._index[account]

    def vector(self, account: str) -> np.ndarray:
        """Published vector; accounts outside the vocabulary (never walked,
        e.g. isolated after edge hiding) get the zero vector."""
        i = self._index.get(account)
        if i is None:
            return np.zeros(self.dim)
        return self.input_vectors[i]


def _walks_of(corpus) -> list[list[str]]:
    return corpus.walks if isinstance(corpus, WalkCorpus) else list(corpus)


def build_vocab(corpus: WalkCorpus | list[list[str]]) -> Vocab:
    """Distinct tokens with occurrence counts, ordered by descending count
    then token string."""
    counts = Counter()
    for walk in _walks_of(corpus):
        counts.update(walk)
    if not counts:
        raise ValueError("empty corpus")
    tokens = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(
        tokens=tokens,
        counts=np.array([counts[t] for t in tokens], dtype=np.int64),
        index={t: i for i, t in enumerate(tokens)},
    )


def positive_pairs(walk: list[str], window: int) -> list[tuple[str, str]]:
    """All (center, context) pairs within the window; pairs whose tokens are
    equal are skipped."""
    if window < 1:
        raise ValueError("window must be >= 1")
    pairs = []
    for i, center in enumerate(walk):
        for j in range(max(0, i - window), min(len(walk), i + window + 1)):
            if j != i and walk[j] != center:
                pairs.append((center, walk[j]))
    return pairs


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def sgns_pair_loss(center: np.ndarray, context: np.ndarray, negatives: np.ndarray) -> float:
    """Log-likelihood of one pair with its negative samples (higher is
    better)."""
    total = _log_sigmoid(float(context @ center))
    for neg in negatives:
        total += _log_sigmoid(-float(neg @ center))
    return total


def sgns_pair_grads(
    center: np.ndarray, context: np.ndarray, negatives: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ascent gradients of :func:`sgns_pair_loss` with respect to the center,
    context, and each negative vector (all evaluated at the given point)."""
    g_center = (1.0 - _sigmoid(float(context @ center))) * context
    g_context = (1.0 - _sigmoid(float(context @ center))) * center
    g_negs = np.empty_like(negatives)
    for j, neg in enumerate(negatives):
        s = _sigmoid(float(neg @ center))
        g_center = g_center - s * neg
        g_negs[j] = -s * center
    return g_center, g_context, g_negs


def sgns_step(
    pair: tuple[str, str], negatives: list[str], state: EmbeddingSet, lr: float
) -> EmbeddingSet:
    """One in-place gradient-ascent step for a (center, context) pair.

    Output rows are updated sequentially against the unchanged center
    vector, then the accumulated center gradient is applied, mirroring the
    compiled training kernel exactly.
    """
    c = state.row(pair[0])
    inp, out = state.input_vectors, state.output_vectors
    vc = inp[c]
    g_center = np.zeros_like(vc)

    o = state.row(pair[1])
    coef = lr * (1.0 - _sigmoid(float(out[o] @ vc)))
    g_center += coef * out[o]
    out[o] += coef * vc
    for tok in negatives:
        n = state.row(tok)
        coef = -lr * _sigmoid(float(out[n] @ vc))
        g_center += coef * out[n]
        out[n] += coef * vc
    inp[c] += g_center
    return state


def historical_step(
    account: str, snapshot: int, state: EmbeddingSet, lam: float, lr: float
) -> EmbeddingSet:
    """One coupling step between a per-snapshot vector and the account's
    global vector: both move toward each other by ``2 * lam * lr *
    (difference)``. A zero ``lam`` is a no-op."""
    if lam == 0.0:
        return state
    if state.historical_vectors is None or (account, snapshot) not in state.historical_vectors:
        raise ValueError(f"no historical vector for {(account, snapshot)!r}")
    ft = state.historical_vectors[(account, snapshot)]
    f = state.input_vectors[state.row(account)]
    delta = 2.0 * lam * lr * (ft - f)
    ft -= delta
    f += delta
    return state


@njit(cache=True)
def _nb_sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


@njit(cache=True)
def _nb_log_sigmoid(x):
    if x >= 0.0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(cache=True)
def _sgns_kernel(inp, out, centers, contexts, negs, lrs):
    """Sequential per-pair updates; negatives marked -1 are skipped.
    Returns the summed negative log-likelihood of the processed pairs."""
    d = inp.shape[1]
    g = np.empty(d)
    total = 0.0
    for i in range(centers.shape[0]):
        c = centers[i]
        lr = lrs[i]
        for k in range(d):
            g[k] = 0.0
        o = contexts[i]
        dot = 0.0
        for k in range(d):
            dot += out[o, k] * inp[c, k]
        total -= _nb_log_sigmoid(dot)
        coef = lr * (1.0 - _nb_sigmoid(dot))
        for k in range(d):
            g[k] += coef * out[o, k]
            out[o, k] += coef * inp[c, k]
        for j in range(negs.shape[1]):
            n = negs[i, j]
            if n < 0:
                continue
            dot = 0.0
            for k in range(d):
                dot += out[n, k] * inp[c, k]
            total -= _nb_log_sigmoid(-dot)
            coef = -lr * _nb_sigmoid(dot)
            for k in range(d):
                g[k] += coef * out[n, k]
                out[n, k] += coef * inp[c, k]
        for k in range(d):
            inp[c, k] += g[k]
    return total


@njit(cache=True, parallel=True)
def _sgns_kernel_parallel(inp, out, centers, contexts, negs, lrs):
    """Lock-free variant of :func:`_sgns_kernel`: threads process disjoint
    pair shards and update the shared matrices without synchronization, so
    results vary run to run."""
    d = inp.shape[1]
    total = 0.0
    for i in prange(centers.shape[0]):
        g = np.zeros(d)
        c = centers[i]
        lr = lrs[i]
        o = contexts[i]
        dot = 0.0
        for k in range(d):
            dot += out[o, k] * inp[c, k]
        total -= _nb_log_sigmoid(dot)
        coef = lr * (1.0 - _nb_sigmoid(dot))
        for k in range(d):
            g[k] += coef * out[o, k]
            out[o, k] += coef * inp[c, k]
        for j in range(negs.shape[1]):
            n = negs[i, j]
            if n < 0:
                continue
            dot = 0.0
            for k in range(d):
                dot += out[n, k] * inp[c, k]
            total -= _nb_log_sigmoid(-dot)
            coef = -lr * _nb_sigmoid(dot)
            for k in range(d):
                g[k] += coef * out[n, k]
                out[n, k] += coef * inp[c, k]
        for k in range(d):
            inp[c, k] += g[k]
    return total


@njit(cache=True)
def _sgns_hist_kernel(hist, inp, out, rows, row_vocab, contexts, negs, lrs, lam):
    """Per-snapshot variant: the center vector lives in ``hist[rows[i]]`` and
    after its update is coupled toward the global vector
    ``inp[row_vocab[i]]`` with strength ``2 * lam * lr``."""
    d = hist.shape[1]
    g = np.empty(d)
    total = 0.0
    for i in range(rows.shape[0]):
        r = rows[i]
        cv = row_vocab[i]
        lr = lrs[i]
        for k in range(d):
            g[k] = 0.0
        o = contexts[i]
        dot = 0.0
        for k in range(d):
            dot += out[o, k] * hist[r, k]
        total -= _nb_log_sigmoid(dot)
        coef = lr * (1.0 - _nb_sigmoid(dot))
        for k in range(d):
            g[k] += coef * out[o, k]
            out[o, k] += coef * hist[r, k]
        for j in range(negs.shape[1]):
            n = negs[i, j]
            if n < 0:
                continue
            dot = 0.0
            for k in range(d):
                dot += out[n, k] * hist[r, k]
            total -= _nb_log_sigmoid(-dot)
            coef = -lr * _nb_sigmoid(dot)
            for k in range(d):
                g[k] += coef * out[n, k]
                out[n, k] += coef * hist[r, k]
        for k in range(d):
            hist[r, k] += g[k]
        for k in range(d):
            delta = 2.0 * lam * lr * (hist[r, k] - inp[cv, k])
            hist[r, k] -= delta
            inp[cv, k] += delta
    return total


def _pair_arrays(
    walks: list[list[str]], vocab: Vocab, window: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized builder of the (center, context) index arrays; same
    multiset of pairs as :func:`positive_pairs` over all walks."""
    centers: list[np.ndarray] = []
    contexts: list[np.ndarray] = []
    for walk in walks:
        idx = np.array([vocab.index[t] for t in walk], dtype=np.int64)
        for delta in range(1, min(window, len(walk) - 1) + 1):
            a, b = idx[:-delta], idx[delta:]
            mask = a != b
            centers.append(a[mask])
            contexts.append(b[mask])
            centers.append(b[mask])
            contexts.append(a[mask])
    if not centers:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def _snapshot_segments(corpus: WalkCorpus) -> list[tuple[int, list[str]]]:
    """Maximal runs of each walk that stay inside one snapshot; only runs
    with at least two tokens can contribute training pairs."""
    segments: list[tuple[int, list[str]]] = []
    for walk, snaps in zip(corpus.walks, corpus.snapshots):
        i = 0
        while i < len(walk):
            j = i
            while j < len(walk) and snaps[j] == snaps[i]:
                j += 1
            if j - i >= 2:
                segments.append((snaps[i], walk[i:j]))
            i = j
    return segments


def _draw_negatives(
    noise: AliasTable, rng: np.random.Generator, contexts: np.ndarray, n_neg: int
) -> np.ndarray:
    negs = noise.sample_many(rng, contexts.size * n_neg).reshape(contexts.size, n_neg)
    negs[negs == contexts[:, None]] = -1  # never contrast a pair against itself
    return negs


def _lr_schedule(t0: int, n: int, total: int, lr_start: float, lr_end: float) -> np.ndarray:
    t = np.arange(t0, t0 + n, dtype=np.float64)
    return lr_start + (lr_end - lr_start) * t / max(total - 1, 1)


def train(corpus: WalkCorpus, cfg: SgnsConfig, parallel: bool = False) -> EmbeddingSet:
    """Train embeddings over ``cfg.epochs`` shuffled passes of all positive
    pairs. The default single-threaded mode is deterministic for a fixed
    seed. ``parallel`` switches the main loop to lock-free multithreaded
    updates over disjoint pair shards, which is faster but not reproducible;
    per-snapshot historical training always runs single-threaded."""
    walks = _walks_of(corpus)
    if not walks:
        raise ValueError("empty corpus")
    vocab = build_vocab(corpus)
    n_vocab = len(vocab.tokens)

    rng = np.random.default_rng(cfg.seed)
    inp = (rng.random((n_vocab, cfg.dim)) - 0.5) / cfg.dim
    out = np.zeros((n_vocab, cfg.dim))

    centers, contexts = _pair_arrays(walks, vocab, cfg.window)
    if centers.size == 0:
        raise ValueError("corpus yields no training pairs")
    noise = AliasTable(vocab.counts.astype(np.float64) ** cfg.noise_exponent)

    hist = None
    hist_keys: list[tuple[str, int]] = []
    if cfg.historical_lambda > 0.0:
        if corpus.snapshots is None:
            raise ValueError(
                "historical_lambda > 0 requires a corpus with snapshot annotations"
            )
        segments = _snapshot_segments(corpus)
        key_row: dict[tuple[str, int], int] = {}
        h_rows: list[int] = []
        h_vocab: list[int] = []
        h_ctx: list[int] = []
        for snap, seg in segments:
            for a, b in positive_pairs(seg, cfg.window):
                key = (a, snap)
                if key not in key_row:
                    key_row[key] = len(key_row)
                h_rows.append(key_row[key])
                h_vocab.append(vocab.index[a])
                h_ctx.append(vocab.index[b])
        hist_keys = list(key_row)
        h_rows_arr = np.array(h_rows, dtype=np.int64)
        h_vocab_arr = np.array(h_vocab, dtype=np.int64)
        h_ctx_arr = np.array(h_ctx, dtype=np.int64)
        hist = inp[[vocab.index[a] for a, _ in hist_keys]].copy() if hist_keys else None

    n_pairs = centers.size
    total_steps = cfg.epochs * n_pairs
    kernel = _sgns_kernel_parallel if parallel else _sgns_kernel
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n_pairs)
        c_e, o_e = centers[perm], contexts[perm]
        epoch_loss = 0.0
        for lo in range(0, n_pairs, _CHUNK):
            hi = min(lo + _CHUNK, n_pairs)
            negs = _draw_negatives(noise, rng, o_e[lo:hi], cfg.negatives)
            lrs = _lr_schedule(
                epoch * n_pairs + lo, hi - lo, total_steps, cfg.lr_start, cfg.lr_end
            )
            epoch_loss += kernel(inp, out, c_e[lo:hi], o_e[lo:hi], negs, lrs)
        losses.append(epoch_loss / n_pairs)

        if hist is not None and h_rows_arr.size:
            h_total = cfg.epochs * h_rows_arr.size
            hperm = rng.permutation(h_rows_arr.size)
            hnegs = _draw_negatives(noise, rng, h_ctx_arr[hperm], cfg.negatives)
            hlrs = _lr_schedule(
                epoch * h_rows_arr.size, h_rows_arr.size, h_total, cfg.lr_start, cfg.lr_end
            )
            _sgns_hist_kernel(
                hist,
                inp,
                out,
                h_rows_arr[hperm],
                h_vocab_arr[hperm],
                h_ctx_arr[hperm],
                hnegs,
                hlrs,
                cfg.historical_lambda,
            )
        logger.debug("epoch %d mean loss %.6f", epoch, losses[-1])

    if not (np.isfinite(inp).all() and np.isfinite(out).all()):
        raise ArithmeticError("training produced non-finite vectors")

    historical = None
    if cfg.historical_lambda > 0.0:
        historical = {key: hist[i] for i, key in enumerate(hist_keys)} if hist is not None else {}
    return EmbeddingSet(
        vocab=list(vocab.tokens),
        input_vectors=inp,
        output_vectors=out,
        historical_vectors=historical,
        epoch_losses=losses,
    )


def save_embeddings(es: EmbeddingSet, path: str | Path, meta: dict | None = None) -> None:
    """Text format: optional leading ``#`` metadata lines, then ``N d``, then
    one ``account v1 ... vd`` line per account at 6 significant digits."""
    path = Path(path)
    n, d = es.input_vectors.shape
    with path.open("w", encoding="utf-8") as fh:
        if meta:
            fh.write(f"# meta={json.dumps(meta, sort_keys=True)}\n")
        fh.write(f"{n} {d}\n")
        for tok, vec in zip(es.vocab, es.input_vectors):
            fh.write(tok + " " + " ".join(f"{v:.6g}" for v in vec) + "\n")


def load_embeddings(path: str | Path) -> EmbeddingSet:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty embedding file")
    n, d = (int(x) for x in lines[0].split())
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: expected {n} rows, found {len(lines) - 1}")
    vocab = []
    mat = np.empty((n, d))
    for i, line in enumerate(lines[1:]):
        parts = line.split(" ")
        if len(parts) != d + 1:
            raise ValueError(f"{path}: row {i} has {len(parts) - 1} values, expected {d}")
        vocab.append(parts[0])
        mat[i] = [float(x) for x in parts[1:]]
    return EmbeddingSet(vocab=vocab, input_vectors=mat, output_vectors=None)
