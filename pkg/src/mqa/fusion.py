"""Weighted multi-vector distance, fused-vector construction, and weight learning.

The load-bearing identity of the whole engine lives here: concatenating
per-modality vectors scaled by ``sqrt(w_m)`` makes squared Euclidean distance
in the fused space equal the weighted sum of per-modality squared distances.
That is what lets a single navigation graph answer multi-modal queries
without any per-modality merging step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import DimensionMismatch, EmptyTrainingSet

SIMPLEX_ATOL = 1e-6


@dataclass(frozen=True)
class FusionLayout:
    """Segment layout of the fused space: modality names, dims, offsets."""

    modalities: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.modalities) != len(self.dims):
            raise ValueError("modalities and dims must have equal length")
        if any(d <= 0 for d in self.dims):
            raise ValueError("all modality dimensions must be positive")

    @classmethod
    def from_schema(cls, schema) -> "FusionLayout":
        names = tuple(name for name, _ in schema)
        dims = tuple(int(dim) for _, dim in schema)
        return cls(names, dims)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Segment boundaries: ``offsets[m] .. offsets[m+1]`` is modality m."""
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return tuple(out)

    def split(self, fused: np.ndarray) -> list[np.ndarray]:
        """Views of a fused vector's per-modality segments, in schema order."""
        off = self.offsets
        return [fused[off[m]:off[m + 1]] for m in range(len(self.dims))]


def uniform_weights(n_modalities: int) -> np.ndarray:
    return np.full(n_modalities, 1.0 / n_modalities)


def check_weights(weights, n_modalities: int) -> np.ndarray:
    """Validate a weight vector against the simplex invariant."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n_modalities,):
        raise DimensionMismatch(
            f"expected {n_modalities} modality weights, got shape {w.shape}"
        )
    if np.any(w < 0):
        raise ValueError("modality weights must be non-negative")
    if abs(float(w.sum()) - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"modality weights must sum to 1 (got {w.sum():.8f})")
    return w


def _as_segments(vectors) -> list[np.ndarray]:
    return [np.asarray(v, dtype=np.float64) for v in vectors]


def weighted_distance(q_segments, o_segments, weights) -> float:
    """Sum over modalities of ``w_m * ||q_m - o_m||^2``."""
    q = _as_segments(q_segments)
    o = _as_segments(o_segments)
    if len(q) != len(o):
        raise DimensionMismatch("query and object have different modality counts")
    w = check_weights(weights, len(q))
    total = 0.0
    for m, (qm, om) in enumerate(zip(q, o)):
        if qm.shape != om.shape:
            raise DimensionMismatch(
                f"modality {m}: query dim {qm.shape} != object dim {om.shape}"
            )
        diff = qm - om
        total += w[m] * float(diff @ diff)
    return total


def fuse(segments, weights) -> np.ndarray:
    """Concatenate per-modality vectors scaled by ``sqrt(w_m)``, schema order."""
    segs = _as_segments(segments)
    w = check_weights(weights, len(segs))
    scaled = [np.sqrt(w[m]) * segs[m] for m in range(len(segs))]
    return np.concatenate(scaled) if scaled else np.zeros(0)


def fuse_matrix(matrices, weights) -> np.ndarray:
    """Row-wise :func:`fuse` over per-modality matrices of shape (N, d_m)."""
    w = check_weights(weights, len(matrices))
    parts = [np.sqrt(w[m]) * np.asarray(x, dtype=np.float64) for m, x in enumerate(matrices)]
    return np.ascontiguousarray(np.hstack(parts))


@dataclass(frozen=True)
class TrainingTriplet:
    """One contrastive example: per-modality query, positive, and negative vectors."""

    query: tuple[np.ndarray, ...]
    positive: tuple[np.ndarray, ...]
    negative: tuple[np.ndarray, ...]

    @classmethod
    def from_arrays(cls, query, positive, negative) -> "TrainingTriplet":
        q = tuple(_as_segments(query))
        p = tuple(_as_segments(positive))
        n = tuple(_as_segments(negative))
        if not (len(q) == len(p) == len(n)):
            raise DimensionMismatch("triplet parts have different modality counts")
        for m, (qm, pm, nm) in enumerate(zip(q, p, n)):
            if not (qm.shape == pm.shape == nm.shape):
                raise DimensionMismatch(f"triplet modality {m} dims disagree")
        return cls(q, p, n)


def softmax(theta: np.ndarray) -> np.ndarray:
    z = np.asarray(theta, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _gap_matrix(triplets) -> np.ndarray:
    """Per-triplet, per-modality gap ``d_m(q, pos) - d_m(q, neg)``.

    The hinge loss and its gradient are both linear in these gaps, so one
    precomputation serves every epoch.
    """
    rows = []
    for t in triplets:
        row = []
        for qm, pm, nm in zip(t.query, t.positive, t.negative):
            dp = qm - pm
            dn = qm - nm
            row.append(float(dp @ dp) - float(dn @ dn))
        rows.append(row)
    return np.asarray(rows, dtype=np.float64)


def hinge_loss(theta, triplets, margin: float = 0.1) -> float:
    """Triplet hinge loss of softmax(theta) over the weighted distance."""
    gaps = _gap_matrix(triplets)
    w = softmax(np.asarray(theta, dtype=np.float64))
    act = margin + gaps @ w
    return float(np.sum(act[act > 0]))


def loss_gradient(theta, triplets, margin: float = 0.1) -> np.ndarray:
    """Analytic gradient of :func:`hinge_loss` with respect to theta.

    For active triplets the loss is linear in w, so dL/dw_m is just the sum
    of active gaps; the softmax Jacobian folds that into
    ``w * (g - <g, w>)``.
    """
    gaps = _gap_matrix(triplets)
    theta = np.asarray(theta, dtype=np.float64)
    w = softmax(theta)
    act = margin + gaps @ w
    g_w = gaps[act > 0].sum(axis=0) if np.any(act > 0) else np.zeros(len(w))
    return w * (g_w - float(g_w @ w))


class ModalityWeightLearner(BaseEstimator):
    """Learns per-modality importance weights from contrastive triplets.

    Parametrizes the simplex through a softmax and runs full-batch gradient
    descent on a triplet hinge loss over the weighted squared distance. The
    run is deterministic: fixed epoch count, no stochasticity, no early
    stopping.

    Attributes
    ----------
    weights_ : ndarray of shape (n_modalities,)
        Learned weights on the probability simplex.
    loss_curve_ : list of float, length epochs + 1
        Hinge loss before each update plus the final loss.
    """

    def __init__(self, margin: float = 0.1, learning_rate: float = 0.05, epochs: int = 100):
        self.margin = margin
        self.learning_rate = learning_rate
        self.epochs = epochs

    def fit(self, triplets, y=None):
        triplets = list(triplets)
        if not triplets:
            raise EmptyTrainingSet("at least one training triplet is required")
        n_modalities = len(triplets[0].query)
        if n_modalities < 1:
            raise EmptyTrainingSet("triplets must cover at least one modality")
        gaps = _gap_matrix(triplets)

        theta = np.zeros(n_modalities)
        losses = []
        for _ in range(self.epochs):
            w = softmax(theta)
            act = self.margin + gaps @ w
            active = act > 0
            losses.append(float(np.sum(act[active])))
            g_w = gaps[active].sum(axis=0) if np.any(active) else np.zeros(n_modalities)
            theta = theta - self.learning_rate * (w * (g_w - float(g_w @ w)))

        w = softmax(theta)
        act = self.margin + gaps @ w
        losses.append(float(np.sum(act[act > 0])))

        self.n_modalities_ = n_modalities
        self.theta_ = theta
        self.weights_ = w
        self.loss_curve_ = losses
        return self

    def transform(self, segments_list):
        """Fuse per-modality vector sequences with the learned weights."""
        if not hasattr(self, "weights_"):
            raise NotFittedError("ModalityWeightLearner is not fitted yet")
        return np.stack([fuse(segments, self.weights_) for segments in segments_list])


def learn_weights(triplets, margin: float = 0.1, lr: float = 0.05, epochs: int = 100) -> np.ndarray:
    """Convenience wrapper around :class:`ModalityWeightLearner`."""
    learner = ModalityWeightLearner(margin=margin, learning_rate=lr, epochs=epochs)
    return learner.fit(triplets).weights_


def load_triplets(path, modalities) -> list[TrainingTriplet]:
    """Read training triplets from a JSON-lines file.

    Each line is ``{"q": {modality: [...]}, "pos": ..., "neg": ...}``;
    vectors are picked up in the given schema order.
    """
    import json
    from pathlib import Path

    modalities = list(modalities)
    triplets = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            triplets.append(TrainingTriplet.from_arrays(
                [record["q"][m] for m in modalities],
                [record["pos"][m] for m in modalities],
                [record["neg"][m] for m in modalities],
            ))
    return triplets
