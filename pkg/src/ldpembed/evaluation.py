"""Downstream tasks on (perturbed) embeddings.

Node classification with a linear softmax head, link prediction with
Hadamard edge features and a pairwise ranking objective, the split
protocols for both, a rank-statistic AUC, and synthetic graph generators
(stochastic block model, Erdos-Renyi) for self-contained experiments.

The classification head is deliberately linear: no hidden layers, no
hyperparameter search, gradients simple enough to check against finite
differences. Mechanism orderings measured here do not depend on the head.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sstats

from .errors import ConfigError, InputError
from .graph import Graph

_LOSS_SLACK = 1e-12


@dataclass(frozen=True)
class TrainParams:
    """Fixed-default training hyperparameters (full-batch gradient descent)."""

    step: float = 0.1
    iters: int = 500
    l2: float = 1e-4


@dataclass(frozen=True)
class Split:
    """Disjoint train/val/test index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int | None = None


@dataclass(frozen=True)
class EdgeSplit:
    """Edge partition with per-group uniform non-edge negatives.

    train_graph contains only the training edges, so propagation for link
    prediction cannot see held-out links.
    """

    train_pos: np.ndarray
    val_pos: np.ndarray
    test_pos: np.ndarray
    train_neg: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray
    train_graph: Graph
    seed: int | None = None


@dataclass
class LinearModel:
    """Softmax head: class scores are standardize(Z) @ weights + bias."""

    weights: np.ndarray
    bias: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    def decision_function(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        Zs = (Z - self.feature_mean) / self.feature_scale
        return Zs @ self.weights + self.bias

    def predict(self, Z) -> np.ndarray:
        return np.argmax(self.decision_function(Z), axis=1)


def largest_remainder_sizes(n: int, ratios) -> list[int]:
    """Integer partition of n proportional to ratios, largest remainder rule."""
    ratios = np.asarray(ratios, dtype=np.float64)
    if abs(ratios.sum() - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios.tolist()}")
    if (ratios < 0).any():
        raise ConfigError("split ratios must be non-negative")
    exact = n * ratios
    sizes = np.floor(exact).astype(int)
    remainder = exact - sizes
    short = n - sizes.sum()
    for i in np.argsort(-remainder, kind="stable")[:short]:
        sizes[i] += 1
    return sizes.tolist()


def split_nodes(n: int, ratios, rng: np.random.Generator,
                seed: int | None = None) -> Split:
    """Uniformly random disjoint (train, val, test) partition of range(n)."""
    sizes = largest_remainder_sizes(n, ratios)
    perm = rng.permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return Split(train=perm[:a], val=perm[a:b], test=perm[b:], seed=seed)


# ---------------------------------------------------------------------------
# softmax classification
# ---------------------------------------------------------------------------

def softmax_loss_and_grad(W, b, Z, y, l2: float):
    """Cross-entropy with L2 on the weights (not the bias).

    Returns (loss, dW, db). Pure function of raw inputs; standardization is
    the trainer's business.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y)
    n = Z.shape[0]
    logits = Z @ W + b
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-300))
    loss += 0.5 * l2 * float((W * W).sum())
    grad_logits = probs.copy()
    grad_logits[np.arange(n), y] -= 1.0
    grad_logits /= n
    dW = Z.T @ grad_logits + l2 * W
    db = grad_logits.sum(axis=0)
    return loss, dW, db


def _standardizer(Z):
    mean = Z.mean(axis=0)
    scale = Z.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def fit_softmax(Z, y, hyper: TrainParams = TrainParams(),
                n_classes: int | None = None) -> LinearModel:
    """Full-batch gradient descent on the softmax cross-entropy.

    Features are standardized against their own statistics so the fixed
    default step works across wildly different input scales. The step is
    halved whenever a proposal would increase the loss, which keeps the
    recorded loss history non-increasing.
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise InputError("features and labels disagree on the number of rows")
    if n_classes is None:
        n_classes = int(y.max()) + 1 if y.size else 1
    mean, scale = _standardizer(Z)
    Zs = (Z - mean) / scale

    W = np.zeros((Z.shape[1], n_classes))
    b = np.zeros(n_classes)
    loss, dW, db = softmax_loss_and_grad(W, b, Zs, y, hyper.l2)
    history = [loss]
    lr = hyper.step
    for _ in range(hyper.iters):
        while True:
            W2 = W - lr * dW
            b2 = b - lr * db
            loss2, dW2, db2 = softmax_loss_and_grad(W2, b2, Zs, y, hyper.l2)
            if loss2 <= loss + _LOSS_SLACK or lr <= 1e-15:
                break
            lr *= 0.5
        W, b, loss, dW, db = W2, b2, loss2, dW2, db2
        history.append(loss)
    return LinearModel(weights=W, bias=b, feature_mean=mean,
                       feature_scale=scale, loss_history=history)


def train_softmax(Z, labels, split: Split,
                  hyper: TrainParams = TrainParams()):
    """Train on the split's train nodes, return (model, test accuracy)."""
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise InputError("labels must be non-negative class ids")
    n_classes = int(labels.max()) + 1
    train_classes = np.unique(labels[split.train])
    if train_classes.size < n_classes:
        missing = sorted(set(range(n_classes)) - set(train_classes.tolist()))
        warnings.warn(f"classes {missing} have no training samples; they are "
                      f"still scored", stacklevel=2)
    model = fit_softmax(Z[split.train], labels[split.train], hyper, n_classes)
    pred = model.predict(Z[split.test])
    accuracy = float(np.mean(pred == labels[split.test]))
    return model, accuracy


# ---------------------------------------------------------------------------
# link prediction
# ---------------------------------------------------------------------------

def auc_score(scores, labels) -> float:
    """AUC via the Mann-Whitney rank statistic, ties handled by mid-ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("AUC is undefined without both positive and negative samples")
    ranks = _sstats.rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def split_edges(g: Graph, ratios, rng: np.random.Generator,
                seed: int | None = None) -> EdgeSplit:
    """Partition edges per ratios (train, val, test) and draw an equal number
    of uniform non-edge negatives for each group."""
    edges = g.edges()
    m = edges.shape[0]
    if m < 10:
        raise ConfigError(f"need at least 10 edges to split, got {m}")
    sizes = largest_remainder_sizes(m, ratios)
    perm = rng.permutation(m)
    a, b = sizes[0], sizes[0] + sizes[1]
    train_pos = edges[perm[:a]]
    val_pos = edges[perm[a:b]]
    test_pos = edges[perm[b:]]

    negatives = _sample_non_edges(g, m, rng)
    neg_train = negatives[:a]
    neg_val = negatives[a:b]
    neg_test = negatives[b:]

    train_graph = Graph.from_edges(g.n, train_pos)
    return EdgeSplit(train_pos=train_pos, val_pos=val_pos, test_pos=test_pos,
                     train_neg=neg_train, val_neg=neg_val, test_neg=neg_test,
                     train_graph=train_graph, seed=seed)


def _sample_non_edges(g: Graph, count: int, rng: np.random.Generator) -> np.ndarray:
    """count distinct uniform non-edges (u < v), never colliding with any
    true edge."""
    n = g.n
    total_pairs = n * (n - 1) // 2
    available = total_pairs - g.num_edges
    if count > available:
        raise ConfigError(f"graph too dense: need {count} negative pairs but only "
                          f"{available} non-edges exist")
    edge_codes = set()
    for u, v in g.edges():
        edge_codes.add(int(u) * n + int(v))

    if available < 3 * count:
        # dense regime: enumerate instead of rejection-sampling
        uu, vv = np.triu_indices(n, k=1)
        codes = uu.astype(np.int64) * n + vv
        keep = np.array([c not in edge_codes for c in codes])
        pool = np.flatnonzero(keep)
        chosen = rng.choice(pool, size=count, replace=False)
        return np.column_stack([uu[chosen], vv[chosen]])

    seen = set()
    out = np.empty((count, 2), dtype=np.int64)
    filled = 0
    while filled < count:
        batch = max(64, 2 * (count - filled))
        cand = rng.integers(0, n, size=(batch, 2))
        lo = cand.min(axis=1)
        hi = cand.max(axis=1)
        ok = lo != hi
        for u, v in zip(lo[ok], hi[ok]):
            code = int(u) * n + int(v)
            if code in edge_codes or code in seen:
                continue
            seen.add(code)
            out[filled] = (u, v)
            filled += 1
            if filled == count:
                break
    return out


def hadamard_features(Z, pairs) -> np.ndarray:
    """Edge feature: elementwise product of the endpoint embeddings."""
    Z = np.asarray(Z, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64)
    return Z[pairs[:, 0]] * Z[pairs[:, 1]]


def pairwise_loss_and_grad(w, diff, l2: float):
    """Pairwise logistic ranking loss on score differences pos - neg.

    diff holds one row per (positive, negative) pair: feature(pos) -
    feature(neg). Returns (loss, gradient).
    """
    margins = diff @ w
    # log(1 + exp(-m)) evaluated stably
    loss = float(np.mean(np.logaddexp(0.0, -margins))) + 0.5 * l2 * float(w @ w)
    sig = 1.0 / (1.0 + np.exp(margins))
    grad = -(diff.T @ sig) / diff.shape[0] + l2 * w
    return loss, grad


def link_predict(Z, es: EdgeSplit, hyper: TrainParams = TrainParams()) -> float:
    """Train a pairwise logistic ranker on Hadamard edge features; report the
    rank-statistic AUC on the test positives vs. test negatives."""
    f_train_pos = hadamard_features(Z, es.train_pos)
    f_train_neg = hadamard_features(Z, es.train_neg)
    mean, scale = _standardizer(np.vstack([f_train_pos, f_train_neg]))
    diff = (f_train_pos - mean) / scale - (f_train_neg - mean) / scale

    w = np.zeros(diff.shape[1])
    loss, grad = pairwise_loss_and_grad(w, diff, hyper.l2)
    lr = hyper.step
    for _ in range(hyper.iters):
        while True:
            w2 = w - lr * grad
            loss2, grad2 = pairwise_loss_and_grad(w2, diff, hyper.l2)
            if loss2 <= loss + _LOSS_SLACK or lr <= 1e-15:
                break
            lr *= 0.5
        w, loss, grad = w2, loss2, grad2

    if es.test_pos.shape[0] == 0 or es.test_neg.shape[0] == 0:
        raise ConfigError("test split has no positive or no negative pairs")
    f_test_pos = (hadamard_features(Z, es.test_pos) - mean) / scale
    f_test_neg = (hadamard_features(Z, es.test_neg) - mean) / scale
    scores = np.concatenate([f_test_pos @ w, f_test_neg @ w])
    labels = np.concatenate([np.ones(len(f_test_pos)), np.zeros(len(f_test_neg))])
    return auc_score(scores, labels)


# ---------------------------------------------------------------------------
# synthetic datasets
# ---------------------------------------------------------------------------

def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    """G(n, p) random graph."""
    if not 0.0 <= p <= 1.0:
        raise InputError(f"edge probability must lie in [0, 1], got {p}")
    uu, vv = np.triu_indices(n, k=1)
    keep = rng.random(uu.size) < p
    return Graph.from_edges(n, np.column_stack([uu[keep], vv[keep]]))


def sbm_generate(n: int, n_classes: int, p_in: float, p_out: float, d: int,
                 feature_shift: float, rng: np.random.Generator,
                 noise: float = 0.5):
    """Stochastic block model with class-indicating features.

    Nodes get (almost) equal-sized class labels; edges appear with
    probability p_in within a class and p_out across classes. Feature
    dimensions are split into one block per class; class c has mean
    +feature_shift on its own block and -feature_shift elsewhere, plus
    uniform noise, clipped to [-1, 1].

    Returns (graph, features, labels).
    """
    if not p_in > p_out:
        raise ConfigError(f"need p_in > p_out, got {p_in} <= {p_out}")
    if not (0.0 <= p_out and p_in <= 1.0):
        raise ConfigError("edge probabilities must lie in [0, 1]")
    if not 0.0 < feature_shift <= 1.0:
        raise ConfigError(f"feature_shift must lie in (0, 1], got {feature_shift}")
    if noise < 0.0:
        raise ConfigError(f"noise must be non-negative, got {noise}")
    if n_classes < 1 or d < n_classes:
        raise ConfigError("need at least one feature dimension per class")

    sizes = largest_remainder_sizes(n, [1.0 / n_classes] * n_classes)
    labels = rng.permutation(np.repeat(np.arange(n_classes), sizes))

    uu, vv = np.triu_indices(n, k=1)
    prob = np.where(labels[uu] == labels[vv], p_in, p_out)
    keep = rng.random(uu.size) < prob
    graph = Graph.from_edges(n, np.column_stack([uu[keep], vv[keep]]))

    blocks = np.array_split(np.arange(d), n_classes)
    means = np.full((n_classes, d), -feature_shift)
    for c, dims in enumerate(blocks):
        means[c, dims] = feature_shift
    X = means[labels] + rng.uniform(-noise, noise, size=(n, d))
    X = np.clip(X, -1.0, 1.0)
    return graph, X, labels


def top_class_filter(labels, n_top: int):
    """Keep only the n_top most frequent classes; remap them to 0..n_top-1.

    Returns (node mask, remapped labels for the kept nodes).
    """
    labels = np.asarray(labels, dtype=np.int64)
    classes, counts = np.unique(labels, return_counts=True)
    order = np.lexsort((classes, -counts))
    kept = classes[order[:n_top]]
    mapping = {int(c): i for i, c in enumerate(kept)}
    mask = np.isin(labels, kept)
    remapped = np.array([mapping[int(c)] for c in labels[mask]], dtype=np.int64)
    return mask, remapped
