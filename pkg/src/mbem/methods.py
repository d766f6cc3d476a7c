"""Training methods: the model-bootstrapped EM loop and all baselines.

run_mbem alternates two steps for a fixed number of rounds: train the
classifier on the current soft labels, then re-estimate every worker's
confusion matrix by treating the model's argmax predictions as ground
truth and recompute the label posterior. Because the comparison is
against a model rather than against other annotations, worker quality is
identifiable even at redundancy one, where plain EM collapses to
believing every worker is perfect.

The baselines reproduce the standard alternatives: aggregate-then-train
on hard labels (majority vote or EM), posterior-weighted training with
weights from majority vote or EM, and two oracles that see the true
confusion matrices or the true labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    AnnotationSet,
    classic_em,
    estimate_confusions_and_prior,
    hard_labels,
    majority_vote_init,
    posterior,
    uniform_prior,
)
from .learn import LearnerConfig, TrainedModel, fit, predict_proba
from .seeding import as_seed

__all__ = [
    "MbemConfig",
    "MbemResult",
    "run_mbem",
    "weighted_soft_labels",
    "run_weighted_baseline",
    "aggregate_hard_labels",
    "run_hard_baseline",
    "one_hot",
]

WEIGHTED_MODES = ("weighted_mv", "weighted_em", "oracle_weighted_em")
HARD_MODES = ("mv", "em", "oracle_correct")


@dataclass(frozen=True)
class MbemConfig:
    rounds: int = 2
    prior_mode: str = "uniform"     # "uniform" or "estimated"
    smoothing: float = 1.0
    learner: LearnerConfig = field(default_factory=LearnerConfig)

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.prior_mode not in ("uniform", "estimated"):
            raise ValueError(f"unknown prior_mode {self.prior_mode!r}")
        if self.smoothing < 0:
            raise ValueError("smoothing must be nonnegative")


@dataclass(eq=False)
class MbemResult:
    model: TrainedModel
    confusions: np.ndarray
    prior: np.ndarray
    soft: np.ndarray
    per_round_train_risk: list[float]


def one_hot(labels: np.ndarray, K: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, K))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _mean_weighted_loss(model, features, soft):
    probs = np.maximum(predict_proba(model, features), 1e-12)
    return float(-(soft * np.log(probs)).sum(axis=1).mean())


def run_mbem(features: np.ndarray, ann: AnnotationSet, cfg: MbemConfig,
             seed) -> MbemResult:
    """Alternate posterior-weighted training with model-based confusion
    re-estimation for cfg.rounds rounds.

    The posterior starts at the per-example label frequencies. Each
    round then: (1) retrains the learner from scratch on the current
    soft labels, using substream seed.child("round", t); (2) takes the
    model's argmax predictions on the training examples as provisional
    truth; (3) re-estimates all confusion matrices and the class prior
    against them; (4) recomputes the label posterior. Artifacts of the
    final round are returned, together with each round's mean weighted
    training loss.
    """
    seed = as_seed(seed)
    soft = majority_vote_init(ann)
    conf = None
    prior = uniform_prior(ann.K)
    risks = []
    model = None
    for t in range(cfg.rounds):
        try:
            model = fit(features, soft, cfg.learner, seed.child("round", t))
        except Exception as exc:
            raise RuntimeError(f"learner failed in round {t}: {exc}") from exc
        risks.append(_mean_weighted_loss(model, features, soft))
        t_hat = hard_labels(predict_proba(model, features))
        conf, q_hat = estimate_confusions_and_prior(ann, t_hat,
                                                    smoothing=cfg.smoothing)
        prior = uniform_prior(ann.K) if cfg.prior_mode == "uniform" else q_hat
        soft = posterior(ann, conf, prior)
    return MbemResult(model=model, confusions=conf, prior=prior, soft=soft,
                      per_round_train_risk=risks)


def weighted_soft_labels(ann: AnnotationSet, mode: str,
                         oracle_confusions: np.ndarray | None = None,
                         prior: np.ndarray | None = None) -> np.ndarray:
    """Soft labels for the posterior-weighted baselines.

    weighted_mv uses the raw label frequencies; weighted_em the final
    posterior of classic EM; oracle_weighted_em the posterior under the
    true confusion matrices (uniform prior unless one is given).
    """
    if mode == "weighted_mv":
        return majority_vote_init(ann)
    if mode == "weighted_em":
        soft, _, _ = classic_em(ann)
        return soft
    if mode == "oracle_weighted_em":
        if oracle_confusions is None:
            raise ValueError("oracle_weighted_em requires the true confusion matrices")
        if prior is None:
            prior = uniform_prior(ann.K)
        return posterior(ann, oracle_confusions, prior)
    raise ValueError(f"mode must be one of {WEIGHTED_MODES}, got {mode!r}")


def run_weighted_baseline(features: np.ndarray, ann: AnnotationSet, mode: str,
                          cfg: MbemConfig, seed, *,
                          oracle_confusions: np.ndarray | None = None) -> TrainedModel:
    """One posterior-weighted fit; weights per weighted_soft_labels.

    The fit draws from substream seed.child("fit")."""
    soft = weighted_soft_labels(ann, mode, oracle_confusions=oracle_confusions)
    return fit(features, soft, cfg.learner, as_seed(seed).child("fit"))


def aggregate_hard_labels(ann: AnnotationSet, mode: str) -> np.ndarray:
    """Hard label per example by majority vote or classic EM (argmax,
    ties toward the lowest class)."""
    if mode == "mv":
        return hard_labels(majority_vote_init(ann))
    if mode == "em":
        soft, _, _ = classic_em(ann)
        return hard_labels(soft)
    raise ValueError(f"mode must be 'mv' or 'em', got {mode!r}")


def correctly_labeled_mask(ann: AnnotationSet, truth: np.ndarray) -> np.ndarray:
    """Boolean mask of examples where at least one annotation hits the truth."""
    truth = np.asarray(truth, dtype=np.int64)
    hit = np.zeros(ann.n, dtype=bool)
    hit_records = ann.labels == truth[ann.example_ids]
    hit[ann.example_ids[hit_records]] = True
    return hit


def run_hard_baseline(features: np.ndarray, ann: AnnotationSet, mode: str,
                      cfg: MbemConfig, seed, *,
                      truth: np.ndarray | None = None) -> TrainedModel:
    """Aggregate-then-train baselines.

    mv/em aggregate the annotations to one label per example and train
    on the resulting one-hot targets. oracle_correct trains on the true
    labels, restricted to examples where at least one annotation matches
    the truth; it requires truth and fails if no example survives.
    """
    seed = as_seed(seed)
    if mode in ("mv", "em"):
        targets = one_hot(aggregate_hard_labels(ann, mode), ann.K)
        return fit(features, targets, cfg.learner, seed.child("fit"))
    if mode == "oracle_correct":
        if truth is None:
            raise ValueError("oracle_correct requires the true labels")
        truth = np.asarray(truth, dtype=np.int64)
        hit = correctly_labeled_mask(ann, truth)
        if not hit.any():
            raise ValueError("no example has a correct annotation; nothing to train on")
        X = np.asarray(features, dtype=np.float64)[hit]
        return fit(X, one_hot(truth[hit], ann.K), cfg.learner, seed.child("fit"))
    raise ValueError(f"mode must be one of {HARD_MODES}, got {mode!r}")
