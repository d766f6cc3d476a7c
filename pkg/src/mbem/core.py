"""Dawid-Skene probability model of crowdsourced annotation.

Workers are modelled by row-stochastic K x K confusion matrices: entry
[k, s] is the probability that the worker reports class s when the true
class is k. This module holds the label-side machinery shared by every
aggregation method: majority-vote initialization, the label posterior
given confusion estimates, the maximum-likelihood confusion/prior
estimator against a set of hard labels, and the classic (model-free)
EM aggregator built from those two updates.

All operations are pure functions of their inputs and safe to call
concurrently. Confusion matrices for m workers travel as one (m, K, K)
array; per-example posteriors ("soft labels") as an (n, K) array whose
rows sum to one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AnnotationSet",
    "clamp_confusions",
    "check_confusions",
    "check_prior",
    "check_soft_labels",
    "majority_vote_init",
    "posterior",
    "estimate_confusions_and_prior",
    "classic_em",
    "hard_labels",
    "uniform_prior",
]

ROW_SUM_TOL = 1e-9

_EMPTY_ROW_MESSAGE = (
    "confusion estimate with smoothing=0 has worker classes with no "
    "annotations; the affected rows were set to uniform"
)


@dataclass
class AnnotationSet:
    """Sparse (example, worker, label) triples over n examples, m workers, K classes.

    Redundancy may vary per example; the only structural requirement is
    that every example carries at least one annotation.
    """

    n: int
    m: int
    K: int
    example_ids: np.ndarray
    worker_ids: np.ndarray
    labels: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.example_ids = np.asarray(self.example_ids, dtype=np.int64)
        self.worker_ids = np.asarray(self.worker_ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.validate:
            self._check()

    def _check(self):
        if not (self.example_ids.shape == self.worker_ids.shape == self.labels.shape):
            raise ValueError("example_ids, worker_ids, labels must have equal length")
        if self.example_ids.ndim != 1:
            raise ValueError("annotation records must be one-dimensional")
        for name, arr, bound in (
            ("example_id", self.example_ids, self.n),
            ("worker_id", self.worker_ids, self.m),
            ("label", self.labels, self.K),
        ):
            if arr.size and (arr.min() < 0 or arr.max() >= bound):
                raise ValueError(f"{name} out of range [0, {bound})")
        counts = np.bincount(self.example_ids, minlength=self.n)
        if self.n and counts.min() == 0:
            missing = int(np.flatnonzero(counts == 0)[0])
            raise ValueError(f"example {missing} has no annotations")

    def __len__(self):
        return self.example_ids.size

    @property
    def records(self):
        """Annotations as a list of (example_id, worker_id, label) tuples."""
        return list(
            zip(self.example_ids.tolist(), self.worker_ids.tolist(), self.labels.tolist())
        )

    @classmethod
    def from_records(cls, records, n: int, m: int, K: int) -> "AnnotationSet":
        rec = np.asarray(records, dtype=np.int64).reshape(-1, 3)
        return cls(n=n, m=m, K=K,
                   example_ids=rec[:, 0], worker_ids=rec[:, 1], labels=rec[:, 2])

    @classmethod
    def from_tables(cls, worker_table: np.ndarray, label_table: np.ndarray,
                    m: int, K: int) -> "AnnotationSet":
        """Build from dense (n, r) worker-id and label tables."""
        worker_table = np.asarray(worker_table, dtype=np.int64)
        label_table = np.asarray(label_table, dtype=np.int64)
        if worker_table.shape != label_table.shape:
            raise ValueError("worker and label tables must have the same shape")
        n, r = worker_table.shape
        example_ids = np.repeat(np.arange(n, dtype=np.int64), r)
        return cls(n=n, m=m, K=K, example_ids=example_ids,
                   worker_ids=worker_table.ravel(), labels=label_table.ravel())

    def redundancy_counts(self) -> np.ndarray:
        """Number of annotations per example."""
        return np.bincount(self.example_ids, minlength=self.n)


def uniform_prior(K: int) -> np.ndarray:
    return np.full(K, 1.0 / K)


def check_confusions(confusions: np.ndarray, tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate an (m, K, K) or (K, K) stack of row-stochastic matrices."""
    conf = np.asarray(confusions, dtype=np.float64)
    if conf.ndim == 2:
        conf = conf[None]
    if conf.ndim != 3 or conf.shape[1] != conf.shape[2]:
        raise ValueError(f"expected (m, K, K) confusion stack, got shape {conf.shape}")
    if conf.min() < -tol or conf.max() > 1 + tol:
        raise ValueError("confusion entries must lie in [0, 1]")
    if np.abs(conf.sum(axis=2) - 1.0).max() > tol:
        raise ValueError("confusion rows must sum to 1")
    return conf


def check_prior(prior: np.ndarray, tol: float = ROW_SUM_TOL) -> np.ndarray:
    prior = np.asarray(prior, dtype=np.float64)
    if prior.ndim != 1:
        raise ValueError("class prior must be a vector")
    if prior.min() < -tol or abs(prior.sum() - 1.0) > tol:
        raise ValueError("class prior must be a probability vector")
    return prior


def check_soft_labels(soft: np.ndarray, tol: float = ROW_SUM_TOL) -> np.ndarray:
    soft = np.asarray(soft, dtype=np.float64)
    if soft.ndim != 2:
        raise ValueError("soft labels must be an (n, K) matrix")
    if soft.min() < -tol or np.abs(soft.sum(axis=1) - 1.0).max() > tol:
        raise ValueError("soft label rows must be probability vectors")
    return soft


def clamp_confusions(confusions: np.ndarray, clamp: float = 1e-6) -> np.ndarray:
    """Clamp entries to [clamp, 1-clamp] and renormalize each row.

    Keeps the posterior away from zero-probability annihilation when an
    estimated matrix contains exact zeros. clamp=0 is a no-op.
    """
    conf = np.asarray(confusions, dtype=np.float64)
    if clamp == 0.0:
        return conf
    if not 0.0 < clamp < 0.5:
        raise ValueError("clamp must lie in [0, 0.5)")
    conf = np.clip(conf, clamp, 1.0 - clamp)
    return conf / conf.sum(axis=-1, keepdims=True)


def majority_vote_init(ann: AnnotationSet) -> np.ndarray:
    """Per-example label frequencies: row i is the fraction of i's
    annotations voting for each class.

    The standard initializer for every aggregation loop here; with one
    annotation per example it reduces to a one-hot row at the observed
    label.
    """
    counts = np.zeros((ann.n, ann.K))
    np.add.at(counts, (ann.example_ids, ann.labels), 1.0)
    totals = counts.sum(axis=1)
    if ann.n and totals.min() == 0:
        missing = int(np.flatnonzero(totals == 0)[0])
        raise ValueError(f"example {missing} has no annotations")
    return counts / totals[:, None]


def posterior(ann: AnnotationSet, confusions: np.ndarray, prior: np.ndarray,
              clamp: float = 1e-6) -> np.ndarray:
    """Posterior distribution of each true label given its annotations.

    Row i is proportional to prior[k] * prod_j conf[w_ij, k, z_ij] over
    the annotations (w_ij, z_ij) of example i, normalized over k. The
    product is accumulated in log space so long annotation lists cannot
    underflow. Confusion entries are clamped away from exact 0/1 first
    (see clamp_confusions); pass clamp=0 to use the matrices as given,
    in which case an example whose numerator vanishes for every class
    raises.
    """
    conf = clamp_confusions(check_confusions(confusions), clamp)
    prior = check_prior(prior)
    if conf.shape[0] < ann.m or conf.shape[1] != ann.K:
        raise ValueError("confusion stack does not cover this annotation set")

    lik = conf[ann.worker_ids, :, ann.labels]  # (records, K)
    with np.errstate(divide="ignore"):
        log_rows = np.tile(np.log(prior), (ann.n, 1))
        np.add.at(log_rows, ann.example_ids, np.log(lik))
    shift = log_rows.max(axis=1)
    dead = ~np.isfinite(shift)
    if dead.any():
        raise ValueError(
            f"example {int(np.flatnonzero(dead)[0])} has zero posterior mass "
            "for every class; enable clamping or fix the confusion estimates"
        )
    rows = np.exp(log_rows - shift[:, None])
    return rows / rows.sum(axis=1, keepdims=True)


def estimate_confusions_and_prior(ann: AnnotationSet, t: np.ndarray,
                                  smoothing: float = 1.0):
    """Maximum-likelihood confusion matrices and class prior against hard labels t.

    conf[a, k, s] = (#{worker a labelled s where t=k} + smoothing)
                  / (#{worker a annotations where t=k} + K * smoothing)
    prior[k]      = fraction of t equal to k.

    smoothing=0 gives the exact count-ratio estimate; worker classes
    that then have no annotations are returned as uniform rows and
    flagged with a RuntimeWarning. Workers never seen in ann get
    all-uniform matrices.
    """
    t = np.asarray(t, dtype=np.int64)
    if t.shape != (ann.n,):
        raise ValueError("t must supply one hard label per example")
    if ann.n and (t.min() < 0 or t.max() >= ann.K):
        raise ValueError("hard labels out of range")
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")

    num = np.zeros((ann.m, ann.K, ann.K))
    np.add.at(num, (ann.worker_ids, t[ann.example_ids], ann.labels), 1.0)
    den = num.sum(axis=2)

    if smoothing > 0:
        conf = (num + smoothing) / (den + ann.K * smoothing)[:, :, None]
    else:
        conf = np.empty_like(num)
        seen = den > 0
        np.divide(num, den[:, :, None], out=conf, where=seen[:, :, None])
        conf[~seen] = 1.0 / ann.K
        if not seen.all():
            warnings.warn(_EMPTY_ROW_MESSAGE, RuntimeWarning, stacklevel=2)

    prior = np.bincount(t, minlength=ann.K) / max(ann.n, 1)
    return conf, prior


def hard_labels(soft: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties break toward the lowest class index."""
    return np.argmax(np.asarray(soft), axis=1)


def classic_em(ann: AnnotationSet, max_iters: int = 100, tol: float = 1e-8,
               smoothing: float = 0.0, prior_mode: str = "uniform"):
    """Model-free Dawid-Skene EM over the annotations alone.

    Starts from the majority vote, then alternates the confusion/prior
    estimate on the current argmax labels with the posterior update,
    stopping when the max absolute posterior change drops below tol or
    after max_iters rounds. Returns (soft_labels, confusions, prior)
    from the final round.

    With one label per example this degenerates as expected: every
    worker's visited confusion rows come out exactly diagonal, i.e. the
    procedure believes all workers are perfect.
    """
    if prior_mode not in ("uniform", "estimated"):
        raise ValueError(f"unknown prior_mode {prior_mode!r}")
    soft = majority_vote_init(ann)
    conf = np.tile(np.eye(ann.K), (ann.m, 1, 1))
    prior = uniform_prior(ann.K)
    for _ in range(max_iters):
        t = hard_labels(soft)
        conf, q_hat = estimate_confusions_and_prior(ann, t, smoothing=smoothing)
        prior = uniform_prior(ann.K) if prior_mode == "uniform" else q_hat
        new_soft = posterior(ann, conf, prior)
        delta = np.abs(new_soft - soft).max()
        soft = new_soft
        if delta < tol:
            break
    return soft, conf, prior
