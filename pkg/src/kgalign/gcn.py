"""Structural embeddings from a two-layer graph convolution.

Both graphs pass through the same pair of layer weights, so the seed
alignment pulls matching entities toward one shared space. Training
minimizes a margin hinge over L1 distances between seed pairs and corrupted
pairs, by full-batch gradient descent with hand-written backprop. The
hidden layer is rectified-linear; the output layer is linear so embeddings
can take negative values. Subgradients at the L1 and relu kinks are 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import SamplingError, TrainingError
from .kg import AdjacencyMatrix, KnowledgeGraph, adjacency

Pair = tuple[int, int]


@dataclass
class TrainConfig:
    dim: int = 300
    margin: float = 3.0
    epochs: int = 300
    negatives: int = 5
    learning_rate: float = 1.0
    rng_seed: int = 0
    resample_negatives: bool = True  # fresh corruption every epoch

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.margin <= 0:
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.negatives < 1:
            raise ValueError(f"negatives must be >= 1, got {self.negatives}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass
class GcnParameters:
    """Layer weights shared by both graphs' forward passes."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("layer weights must be matrices")
        if not (np.all(np.isfinite(self.w1)) and np.all(np.isfinite(self.w2))):
            raise ValueError("layer weights must be finite")


def truncated_normal(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Normal(0, sigma) samples redrawn until every |x| <= 2 sigma."""
    out = rng.normal(0.0, sigma, size=shape)
    bad = np.abs(out) > 2 * sigma
    while np.any(bad):
        out[bad] = rng.normal(0.0, sigma, size=int(bad.sum()))
        bad = np.abs(out) > 2 * sigma
    return out


def init_features(n: int, dim: int, rng_seed: int) -> np.ndarray:
    """Truncated-normal rows (sigma = 1/sqrt(dim)), L2-normalized to unit norm."""
    if n < 1 or dim < 1:
        raise ValueError(f"need n >= 1 and dim >= 1, got n={n}, dim={dim}")
    rng = np.random.default_rng(rng_seed)
    raw = truncated_normal(rng, (n, dim), sigma=1.0 / np.sqrt(dim))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def gcn_forward(adj: AdjacencyMatrix, x: np.ndarray, params: GcnParameters) -> np.ndarray:
    """Z = A_hat relu(A_hat X W1) W2."""
    if adj.n != x.shape[0]:
        raise ValueError(f"adjacency is {adj.n} nodes but X has {x.shape[0]} rows")
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(
            f"X has {x.shape[1]} columns but W1 expects {params.w1.shape[0]}"
        )
    hidden = np.maximum(adj.matmul(x) @ params.w1, 0.0)
    return adj.matmul(hidden) @ params.w2


def _grouped_negatives(
    positives: Sequence[Pair], negatives: Sequence[Sequence[Pair]]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(negatives) != len(positives):
        raise ValueError("need one negative group per positive")
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    counts = [len(group) for group in negatives]
    flat = [pair for group in negatives for pair in group]
    neg = np.asarray(flat, dtype=np.int64).reshape(-1, 2)
    owner = np.repeat(np.arange(len(positives)), counts)
    return pos, neg, owner


def margin_loss(
    z1: np.ndarray,
    z2: np.ndarray,
    positives: Sequence[Pair],
    negatives: Sequence[Sequence[Pair]],
    margin: float,
) -> float:
    """Sum over pairs of max(0, d1(pos) - d1(neg) + margin) with L1 distances."""
    pos, neg, owner = _grouped_negatives(positives, negatives)
    d_pos = np.abs(z1[pos[:, 0]] - z2[pos[:, 1]]).sum(axis=1)
    d_neg = np.abs(z1[neg[:, 0]] - z2[neg[:, 1]]).sum(axis=1)
    terms = d_pos[owner] - d_neg + margin
    return float(np.maximum(terms, 0.0).sum())


def sample_negatives(
    positives: Sequence[Pair],
    k: int,
    rng: np.random.Generator,
    n_source: int,
    n_target: int,
) -> list[list[Pair]]:
    """k corrupted pairs per positive, each replacing exactly one side.

    The replacement entity is drawn uniformly from the owning KG; a candidate
    colliding with any positive pair is redrawn.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pos_set = set((int(s), int(t)) for s, t in positives)
    groups: list[list[Pair]] = []
    max_attempts = 100
    for s, t in positives:
        group: list[Pair] = []
        for _ in range(k):
            for _ in range(max_attempts):
                if rng.integers(2) == 0:
                    cand = (int(rng.integers(n_source)), int(t))
                else:
                    cand = (int(s), int(rng.integers(n_target)))
                if cand not in pos_set:
                    group.append(cand)
                    break
            else:
                raise SamplingError(
                    f"could not corrupt pair ({s}, {t}) without colliding with "
                    f"a positive; entity pools too small"
                )
        groups.append(group)
    return groups


def loss_and_gradients(
    adj1: AdjacencyMatrix,
    x1: np.ndarray,
    adj2: AdjacencyMatrix,
    x2: np.ndarray,
    params: GcnParameters,
    positives: Sequence[Pair],
    negatives: Sequence[Sequence[Pair]],
    margin: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Margin loss and its analytic gradients with respect to W1 and W2."""
    ax1 = adj1.matmul(x1)
    ax2 = adj2.matmul(x2)
    p1 = ax1 @ params.w1
    p2 = ax2 @ params.w1
    h1 = np.maximum(p1, 0.0)
    h2 = np.maximum(p2, 0.0)
    ah1 = adj1.matmul(h1)
    ah2 = adj2.matmul(h2)
    z1 = ah1 @ params.w2
    z2 = ah2 @ params.w2

    pos, neg, owner = _grouped_negatives(positives, negatives)
    diff_pos = z1[pos[:, 0]] - z2[pos[:, 1]]
    diff_neg = z1[neg[:, 0]] - z2[neg[:, 1]]
    d_pos = np.abs(diff_pos).sum(axis=1)
    d_neg = np.abs(diff_neg).sum(axis=1)
    terms = d_pos[owner] - d_neg + margin
    active = terms > 0
    loss = float(terms[active].sum())

    g1 = np.zeros_like(z1)
    g2 = np.zeros_like(z2)
    # Each active term adds +sign at its positive pair and -sign at its negative.
    pos_mult = np.bincount(owner[active], minlength=len(pos)).astype(np.float64)
    sgn_pos = np.sign(diff_pos) * pos_mult[:, None]
    np.add.at(g1, pos[:, 0], sgn_pos)
    np.add.at(g2, pos[:, 1], -sgn_pos)
    sgn_neg = np.sign(diff_neg[active])
    np.add.at(g1, neg[active, 0], -sgn_neg)
    np.add.at(g2, neg[active, 1], sgn_neg)

    g_w2 = ah1.T @ g1 + ah2.T @ g2
    dh1 = adj1.matmul(g1 @ params.w2.T) * (p1 > 0)
    dh2 = adj2.matmul(g2 @ params.w2.T) * (p2 > 0)
    g_w1 = ax1.T @ dh1 + ax2.T @ dh2
    return loss, g_w1, g_w2


def init_parameters(rng: np.random.Generator, dim: int) -> GcnParameters:
    limit = np.sqrt(3.0 / dim)
    return GcnParameters(
        w1=rng.uniform(-limit, limit, (dim, dim)),
        w2=rng.uniform(-limit, limit, (dim, dim)),
    )


def train(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    seeds: Sequence[Pair],
    cfg: TrainConfig,
    on_epoch: Callable[[int, float], None] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Train structural embeddings for both KGs and return (Z1, Z2).

    Runs ``cfg.epochs`` full-batch gradient steps; negatives are redrawn
    every epoch unless ``cfg.resample_negatives`` is off. ``on_epoch`` is
    called with (epoch, loss) before each update, where the loss is that of
    the current parameters.
    """
    if not seeds:
        raise ValueError("need at least one seed pair")
    adj1 = adjacency(kg1)
    adj2 = adjacency(kg2)
    rng = np.random.default_rng(cfg.rng_seed)
    x1 = init_features(kg1.n_entities, cfg.dim, int(rng.integers(2**31 - 1)))
    x2 = init_features(kg2.n_entities, cfg.dim, int(rng.integers(2**31 - 1)))
    params = init_parameters(rng, cfg.dim)

    negatives: list[list[Pair]] | None = None
    for epoch in range(cfg.epochs):
        if negatives is None or cfg.resample_negatives:
            negatives = sample_negatives(
                seeds, cfg.negatives, rng, kg1.n_entities, kg2.n_entities
            )
        loss, g_w1, g_w2 = loss_and_gradients(
            adj1, x1, adj2, x2, params, seeds, negatives, cfg.margin
        )
        if not np.isfinite(loss):
            raise TrainingError(f"loss became non-finite at epoch {epoch}")
        params.w1 -= cfg.learning_rate * g_w1
        params.w2 -= cfg.learning_rate * g_w2
        if not (np.all(np.isfinite(params.w1)) and np.all(np.isfinite(params.w2))):
            raise TrainingError(f"parameters became non-finite at epoch {epoch}")
        if on_epoch is not None:
            on_epoch(epoch, loss)
    return gcn_forward(adj1, x1, params), gcn_forward(adj2, x2, params)
