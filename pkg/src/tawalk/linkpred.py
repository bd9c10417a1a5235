"""Transaction tracking as link prediction.

A split hides a fraction of the linked account pairs (all their
transactions) as test positives, pairs them with an equal number of
never-linked negatives, and keeps the rest for training. Embedding methods
score a candidate pair through a logistic-regression classifier over the
Hadamard (elementwise) product of the two account vectors; similarity
baselines score pairs directly on the training graph's undirected simple
projection. Metrics: ranking AUC (wins plus half-ties over comparisons),
step-interpolated average precision, and precision at a cutoff L.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .embed import SgnsConfig, train
from .ingest import Transaction
from .tasmg import DEFAULT_EPSILON, build_tasmg
from .walker import (
    MODE_STATIC_NODE2VEC,
    MODE_STATIC_UNIFORM,
    MODE_TAW,
    WalkConfig,
    generate_walks,
)

SIMILARITY_INDICES = ("cn", "aa", "ra", "jaccard")
EMBEDDING_METHODS = {"taw": MODE_TAW, "deepwalk": MODE_STATIC_UNIFORM, "node2vec": MODE_STATIC_NODE2VEC}
METHODS = tuple(EMBEDDING_METHODS) + SIMILARITY_INDICES + ("random",)

Pair = tuple[str, str]


@dataclass(frozen=True)
class SplitSpec:
    hide_fraction: float
    seed: int
    train_txs: tuple[Transaction, ...]
    test_pos: tuple[Pair, ...]
    test_neg: tuple[Pair, ...]
    train_neg: tuple[Pair, ...]
    train_pos: tuple[Pair, ...]  # distinct linked pairs remaining in train_txs


def _norm_pair(u: str, v: str) -> Pair:
    return (u, v) if u < v else (v, u)


def _linked_pairs(txs: list[Transaction] | tuple[Transaction, ...]) -> set[Pair]:
    return {_norm_pair(t.src, t.dst) for t in txs if t.src != t.dst}


def _accounts_of(txs) -> list[str]:
    seen = set()
    for t in txs:
        seen.add(t.src)
        seen.add(t.dst)
    return sorted(seen)


def make_split(
    txs: list[Transaction], hide_fraction: float = 0.2, seed: int = 0
) -> SplitSpec:
    """Hide a fraction of the distinct linked account pairs.

    All transactions between a hidden pair are removed from the training
    set. Negative pairs are sampled uniformly over unordered account pairs
    with no transaction anywhere in the full dataset; test and train
    negatives are disjoint and internally distinct. The hidden-pair count is
    ``hide_fraction`` times the linked-pair count, rounded to nearest with a
    minimum of 1. Deterministic per seed.
    """
    if not 0.0 < hide_fraction < 1.0:
        raise ValueError("hide_fraction must be in (0, 1)")
    linked = sorted(_linked_pairs(txs))
    n_pairs = len(linked)
    if n_pairs < 2:
        raise ValueError("need at least 2 distinct linked pairs to split")
    n_hide = max(1, int(hide_fraction * n_pairs + 0.5))
    if n_hide >= n_pairs:
        raise ValueError("hide_fraction would remove every linked pair")

    rng = np.random.default_rng(seed)
    hidden_idx = rng.choice(n_pairs, size=n_hide, replace=False)
    hidden = {linked[i] for i in hidden_idx}
    test_pos = tuple(sorted(hidden))
    train_txs = tuple(
        t for t in txs if t.src == t.dst or _norm_pair(t.src, t.dst) not in hidden
    )
    train_pos = tuple(p for p in linked if p not in hidden)

    accounts = _accounts_of(txs)
    n = len(accounts)
    needed = n_hide + len(train_pos)
    linked_set = set(linked)
    possible = n * (n - 1) // 2 - n_pairs
    if needed > possible:
        raise ValueError(
            f"graph too small: need {needed} unlinked pairs, only {possible} exist"
        )

    if n * (n - 1) // 2 <= 2_000_000:
        unlinked = [
            p for p in itertools.combinations(accounts, 2) if p not in linked_set
        ]
        chosen_idx = rng.choice(len(unlinked), size=needed, replace=False)
        negatives = [unlinked[i] for i in chosen_idx]
    else:
        negatives = []
        chosen: set[Pair] = set()
        while len(negatives) < needed:
            batch = rng.integers(0, n, size=(4 * (needed - len(negatives)), 2))
            for a, b in batch:
                if a == b:
                    continue
                p = _norm_pair(accounts[a], accounts[b])
                if p in linked_set or p in chosen:
                    continue
                chosen.add(p)
                negatives.append(p)
                if len(negatives) == needed:
                    break

    return SplitSpec(
        hide_fraction=hide_fraction,
        seed=seed,
        train_txs=train_txs,
        test_pos=test_pos,
        test_neg=tuple(negatives[:n_hide]),
        train_neg=tuple(negatives[n_hide:]),
        train_pos=train_pos,
    )


def split_hash(split: SplitSpec) -> str:
    """Stable digest of a split's content, for controlled comparisons."""
    payload = json.dumps(
        {
            "test_pos": sorted(split.test_pos),
            "test_neg": sorted(split.test_neg),
            "train_neg": sorted(split.train_neg),
            "n_train_txs": len(split.train_txs),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def hadamard_feature(f_u: np.ndarray, f_v: np.ndarray) -> np.ndarray:
    """Elementwise product of two account vectors; symmetric in u and v."""
    f_u = np.asarray(f_u, dtype=np.float64)
    f_v = np.asarray(f_v, dtype=np.float64)
    if f_u.shape != f_v.shape:
        raise ValueError(f"dimension mismatch: {f_u.shape} vs {f_v.shape}")
    return f_u * f_v


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    loss_history: list[float]

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z = self.decision(X)
        outp = np.empty_like(z)
        pos = z >= 0
        outp[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        outp[~pos] = ez / (1.0 + ez)
        return outp


def train_classifier(
    features: np.ndarray,
    labels: np.ndarray,
    l2_strength: float = 1e-4,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> LogisticModel:
    """Binary logistic regression by full-batch gradient descent on the mean
    log-loss plus an L2 penalty on the weights (bias unregularized).

    The step size is one over the exact Lipschitz bound of the gradient, so
    the loss is non-increasing at every iteration. Stops at gradient norm
    ``tol`` or after ``max_iter`` iterations. The fit is deterministic (zero
    initialization); ``seed`` is accepted for interface symmetry.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("features must be 2-d with one row per label")
    if len(np.unique(y)) < 2:
        raise ValueError("training set must contain both classes")
    del seed

    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    lam = np.full(d + 1, l2_strength)
    lam[-1] = 0.0
    gram = Xb.T @ Xb / (4.0 * n)
    step = 1.0 / (float(np.linalg.eigvalsh(gram)[-1]) + l2_strength)

    w = np.zeros(d + 1)
    history: list[float] = []
    for _ in range(max_iter):
        z = Xb @ w
        # stable mean log-loss: log(1 + exp(-y~ z)) with y~ in {-1, +1}
        margins = np.where(y > 0.5, z, -z)
        loss = float(np.mean(np.logaddexp(0.0, -margins))) + 0.5 * l2_strength * float(
            w[:-1] @ w[:-1]
        )
        history.append(loss)
        p = np.empty(n)
        pos = z >= 0
        p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        p[~pos] = ez / (1.0 + ez)
        grad = Xb.T @ (p - y) / n + lam * w
        if float(np.linalg.norm(grad)) <= tol:
            break
        w = w - step * grad
    return LogisticModel(weights=w[:-1], bias=float(w[-1]), loss_history=history)


def _adjacency(txs) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for t in txs:
        if t.src == t.dst:
            continue
        adj.setdefault(t.src, set()).add(t.dst)
        adj.setdefault(t.dst, set()).add(t.src)
    return adj


def similarity_scores(
    train_txs, pairs: list[Pair] | tuple[Pair, ...], index: str
) -> np.ndarray:
    """Classical neighborhood similarity on the undirected simple projection
    of the training transactions. Accounts absent from the projection have
    empty neighborhoods and score 0."""
    index = index.lower()
    if index not in SIMILARITY_INDICES:
        raise ValueError(f"index must be one of {SIMILARITY_INDICES}")
    adj = _adjacency(train_txs)
    empty: set[str] = set()
    scores = np.zeros(len(pairs))
    for i, (u, v) in enumerate(pairs):
        gu = adj.get(u, empty)
        gv = adj.get(v, empty)
        common = sorted(gu & gv)  # fixed order keeps the float sums reproducible
        if index == "cn":
            scores[i] = len(common)
        elif index == "aa":
            scores[i] = sum(1.0 / math.log(len(adj[z])) for z in common if len(adj[z]) > 1)
        elif index == "ra":
            scores[i] = sum(1.0 / len(adj[z]) for z in common)
        else:
            union = len(gu | gv)
            scores[i] = len(common) / union if union else 0.0
    return scores


def auc(
    scores_pos,
    scores_neg,
    n_comparisons: int | None = None,
    seed: int = 0,
) -> float:
    """Probability that a positive outscores a negative, ties counting half.

    Exhaustive mode (default) compares every positive against every
    negative; sampled mode draws ``n_comparisons`` uniform pairs with the
    given seed.
    """
    pos = np.asarray(scores_pos, dtype=np.float64)
    neg = np.asarray(scores_neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score lists must be nonempty")
    if n_comparisons is None:
        wins = 0.0
        ties = 0.0
        # chunk the broadcast so huge score lists stay in memory bounds
        chunk = max(1, 10_000_000 // max(neg.size, 1))
        for lo in range(0, pos.size, chunk):
            block = pos[lo : lo + chunk, None]
            wins += float((block > neg[None, :]).sum())
            ties += float((block == neg[None, :]).sum())
        return (wins + 0.5 * ties) / (pos.size * neg.size)
    if n_comparisons < 1:
        raise ValueError("n_comparisons must be >= 1")
    rng = np.random.default_rng(seed)
    ps = pos[rng.integers(0, pos.size, size=n_comparisons)]
    ns = neg[rng.integers(0, neg.size, size=n_comparisons)]
    return float((ps > ns).sum() + 0.5 * (ps == ns).sum()) / n_comparisons


def precision_at_L(
    ranked_pairs: list[tuple[Pair, float]], truth: set[Pair], L: int
) -> float:
    """Fraction of true pairs among the top L by score. Ties at the cutoff
    are broken by ascending pair order, so the result is deterministic."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > len(ranked_pairs):
        raise ValueError(f"L={L} exceeds the {len(ranked_pairs)} scored pairs")
    top = sorted(ranked_pairs, key=lambda ps: (-ps[1], ps[0]))[:L]
    return sum(1 for pair, _ in top if pair in truth) / L


def average_precision(scores, labels) -> float:
    """Step-interpolated average precision: the mean, over positives, of the
    precision at each positive's rank (descending score, ties broken by
    original position)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise ValueError("need at least one positive label")
    order = np.argsort(-s, kind="stable")
    hits = 0
    total = 0.0
    for rank, i in enumerate(order, start=1):
        if y[i] == 1:
            hits += 1
            total += hits / rank
    return total / n_pos


@dataclass
class EvalReport:
    method: str
    config: dict
    seeds: list[int]
    per_seed: list[dict]
    mean: dict
    std: dict

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "config": self.config,
            "seeds": self.seeds,
            "per_seed": self.per_seed,
            "mean": self.mean,
            "std": self.std,
        }


def _embedding_scores(
    split: SplitSpec,
    mode: str,
    walk_cfg: WalkConfig,
    sgns_cfg: SgnsConfig,
    epsilon: float,
    self_conn_weight: float,
    undirected: bool,
    l2_strength: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    g = build_tasmg(
        list(split.train_txs),
        epsilon=epsilon,
        self_conn_weight=self_conn_weight,
        undirected=undirected,
    )
    corpus = generate_walks(g, replace(walk_cfg, mode=mode, seed=seed))
    emb = train(corpus, replace(sgns_cfg, seed=seed))

    def features(pairs) -> np.ndarray:
        return np.array([hadamard_feature(emb.vector(u), emb.vector(v)) for u, v in pairs])

    X = np.vstack([features(split.train_pos), features(split.train_neg)])
    y = np.concatenate([np.ones(len(split.train_pos)), np.zeros(len(split.train_neg))])
    model = train_classifier(X, y, l2_strength=l2_strength, seed=seed)
    return (
        model.predict_proba(features(split.test_pos)),
        model.predict_proba(features(split.test_neg)),
    )


def evaluate(
    method: str,
    txs: list[Transaction],
    seeds: list[int],
    hide_fraction: float = 0.2,
    L: int = 100,
    walk_cfg: WalkConfig | None = None,
    sgns_cfg: SgnsConfig | None = None,
    epsilon: float | None = None,
    self_conn_weight: float = 1.0,
    undirected: bool = False,
    l2_strength: float = 1e-4,
) -> EvalReport:
    """Run the full per-seed pipeline for one method and aggregate metrics.

    Each seed drives its own split, walk generation, training, and scoring.
    ``L`` is clamped to the candidate count of a seed's test set. Reports
    mean and population standard deviation over seeds.
    """
    method = method.lower()
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if not seeds:
        raise ValueError("need at least one seed")
    walk_cfg = walk_cfg or WalkConfig()
    sgns_cfg = sgns_cfg or SgnsConfig()
    epsilon = DEFAULT_EPSILON if epsilon is None else epsilon

    per_seed: list[dict] = []
    for seed in seeds:
        split = make_split(txs, hide_fraction=hide_fraction, seed=seed)
        leaked = set(split.test_pos) & _linked_pairs(split.train_txs)
        if leaked:
            raise AssertionError(f"split leaked {len(leaked)} test pairs into training")

        if method in EMBEDDING_METHODS:
            scores_pos, scores_neg = _embedding_scores(
                split,
                EMBEDDING_METHODS[method],
                walk_cfg,
                sgns_cfg,
                epsilon,
                self_conn_weight,
                undirected,
                l2_strength,
                seed,
            )
        elif method == "random":
            rng = np.random.default_rng(seed)
            scores_pos = rng.random(len(split.test_pos))
            scores_neg = rng.random(len(split.test_neg))
        else:
            scores_pos = similarity_scores(split.train_txs, split.test_pos, method)
            scores_neg = similarity_scores(split.train_txs, split.test_neg, method)

        candidates = list(zip(split.test_pos, scores_pos)) + list(
            zip(split.test_neg, scores_neg)
        )
        L_used = min(L, len(candidates))
        labels = np.concatenate([np.ones(len(scores_pos)), np.zeros(len(scores_neg))])
        per_seed.append(
            {
                "seed": seed,
                "auc": auc(scores_pos, scores_neg),
                "ap": average_precision(
                    np.concatenate([scores_pos, scores_neg]), labels
                ),
                "precision_at_L": precision_at_L(candidates, set(split.test_pos), L_used),
                "L": L_used,
                "split_hash": split_hash(split),
                "n_test_pos": len(split.test_pos),
            }
        )

    metrics = ("auc", "ap", "precision_at_L")
    mean = {m: float(np.mean([r[m] for r in per_seed])) for m in metrics}
    std = {m: float(np.std([r[m] for r in per_seed])) for m in metrics}
    config = {
        "hide_fraction": hide_fraction,
        "L": L,
        "epsilon": epsilon,
        "self_conn_weight": self_conn_weight,
        "undirected": undirected,
        "l2_strength": l2_strength,
        "walk": {
            "walks_per_node": walk_cfg.walks_per_node,
            "walk_length": walk_cfg.walk_length,
            "alpha": walk_cfg.alpha,
            "amount_strategy": walk_cfg.amount_strategy,
            "p": walk_cfg.p,
            "q": walk_cfg.q,
        },
        "sgns": {
            "dim": sgns_cfg.dim,
            "window": sgns_cfg.window,
            "negatives": sgns_cfg.negatives,
            "epochs": sgns_cfg.epochs,
            "lr_start": sgns_cfg.lr_start,
            "lr_end": sgns_cfg.lr_end,
            "noise_exponent": sgns_cfg.noise_exponent,
            "historical_lambda": sgns_cfg.historical_lambda,
        },
    }
    return EvalReport(
        method=method,
        config=config,
        seeds=list(seeds),
        per_seed=per_seed,
        mean=mean,
        std=std,
    )
