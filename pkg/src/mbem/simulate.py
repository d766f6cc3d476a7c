"""Synthetic crowdsourcing: worker pools, assignments, and label corruption.

Two worker skill models are supported. "hammer_spammer" makes each worker
either perfectly accurate (identity confusion matrix, probability gamma)
or a uniform guesser (all entries 1/K). "classwise_hammer_spammer" applies
the same coin per row, so a worker can be reliable on some classes and
random on the rest.

The feature generator is a deliberately simple stand-in for real image
data: class centroids are scaled one-hot vectors plus unit Gaussian noise,
which is linearly separable in expectation once the margin scale is a few
noise standard deviations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AnnotationSet, check_confusions
from .seeding import RngSeed, as_seed

__all__ = [
    "WorkerSkillModel",
    "sample_worker_pool",
    "assign_workers",
    "corrupt_labels",
    "make_synthetic_dataset",
    "subsample_redundancy",
]

SKILL_KINDS = ("hammer_spammer", "classwise_hammer_spammer")


@dataclass(frozen=True)
class WorkerSkillModel:
    """Distribution over worker confusion matrices."""

    kind: str
    gamma: float
    K: int

    def __post_init__(self):
        if self.kind not in SKILL_KINDS:
            raise ValueError(f"kind must be one of {SKILL_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.K < 2:
            raise ValueError("need at least two classes")


def sample_worker_pool(model: WorkerSkillModel, m: int, seed) -> np.ndarray:
    """Draw m confusion matrices from the skill model. Returns (m, K, K)."""
    if m < 1:
        raise ValueError("need at least one worker")
    rng = as_seed(seed).child("worker-pool").generator()
    K = model.K
    eye = np.eye(K)
    flat = np.full((K, K), 1.0 / K)
    if model.kind == "hammer_spammer":
        is_hammer = rng.random(m) < model.gamma
        conf = np.where(is_hammer[:, None, None], eye, flat)
    else:
        is_hammer_row = rng.random((m, K)) < model.gamma
        conf = np.where(is_hammer_row[:, :, None], eye, flat)
    return conf


def assign_workers(n: int, r: int, m: int, seed) -> np.ndarray:
    """(n, r) table of worker ids drawn i.i.d. uniform with replacement.

    Assignment is independent of features and labels; a worker may appear
    more than once on the same example.
    """
    if min(n, r, m) < 1:
        raise ValueError("n, r, m must all be at least 1")
    rng = as_seed(seed).child("assignment").generator()
    return rng.integers(0, m, size=(n, r), dtype=np.int64)


def corrupt_labels(truth: np.ndarray, assignment: np.ndarray,
                   confusions: np.ndarray, seed) -> AnnotationSet:
    """Draw each annotation from row truth[i] of its worker's confusion matrix."""
    truth = np.asarray(truth, dtype=np.int64)
    assignment = np.asarray(assignment, dtype=np.int64)
    conf = check_confusions(confusions)
    n, r = assignment.shape
    if truth.shape != (n,):
        raise ValueError("truth must supply one label per assigned example")
    m, K, _ = conf.shape
    if assignment.size and assignment.max() >= m:
        raise ValueError("assignment references workers beyond the pool")

    rng = as_seed(seed).child("corrupt").generator()
    rows = conf[assignment, truth[:, None], :]          # (n, r, K)
    cdf = np.cumsum(rows, axis=2)
    u = rng.random((n, r, 1))
    labels = np.minimum((u > cdf).sum(axis=2), K - 1)
    return AnnotationSet.from_tables(assignment, labels, m=m, K=K)


def make_synthetic_dataset(n: int, K: int, d: int, margin: float, seed):
    """Class-balanced features/labels: scaled one-hot centroids plus unit noise.

    Returns (features (n, d) float array, truth (n,) int array). Class
    counts differ by at most one. margin=0 removes all class signal.
    """
    if d < K:
        raise ValueError("feature dimension must be at least the class count")
    if n < 1:
        raise ValueError("need at least one example")
    rng = as_seed(seed).child("dataset").generator()
    truth = np.arange(n, dtype=np.int64) % K
    truth = truth[rng.permutation(n)]
    features = rng.standard_normal((n, d))
    features[np.arange(n), truth] += margin
    return features, truth


def subsample_redundancy(ann: AnnotationSet, r: int, seed) -> AnnotationSet:
    """Keep r annotations per example, chosen uniformly without replacement.

    Supports budget sweeps over a pre-collected annotation file whose
    native redundancy exceeds r. Every example must carry at least r
    annotations.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    counts = ann.redundancy_counts()
    if counts.min() < r:
        short = int(np.flatnonzero(counts < r)[0])
        raise ValueError(f"example {short} has fewer than {r} annotations")
    rng = as_seed(seed).child("subsample", r).generator()

    order = np.argsort(ann.example_ids, kind="stable")
    keep = []
    start = 0
    for count in counts:
        idx = order[start:start + count]
        keep.append(rng.permutation(idx)[:r])
        start += count
    keep = np.sort(np.concatenate(keep))
    return AnnotationSet(n=ann.n, m=ann.m, K=ann.K,
                         example_ids=ann.example_ids[keep],
                         worker_ids=ann.worker_ids[keep],
                         labels=ann.labels[keep])
