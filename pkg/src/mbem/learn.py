"""Probabilistic classifiers trained on posterior-weighted labels.

The training objective is the expected cross-entropy under each example's
soft label row,

    mean_i  sum_k soft[i, k] * (-log p_k(x_i))  +  l2/2 * ||params||^2,

minimized by plain mini-batch gradient descent with a fixed step size.
The deliberately simple optimizer keeps runs bit-reproducible and makes
the analytic gradients easy to verify against finite differences
(gradient_check). Two hypothesis classes are provided: multinomial
logistic regression and a one-hidden-layer tanh MLP.

With one-hot soft labels the objective reduces to the ordinary
cross-entropy, so every baseline that aggregates to hard labels trains
through the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import as_seed

__all__ = [
    "LearnerConfig",
    "TrainedModel",
    "weighted_loss",
    "fit",
    "predict_proba",
    "gradient_check",
    "zero_one_risk",
]

LEARNER_KINDS = ("multinomial_logistic", "one_hidden_layer_mlp")
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LearnerConfig:
    learner_kind: str = "multinomial_logistic"
    l2_penalty: float = 1e-4
    learning_rate: float = 0.1
    epochs: int = 300
    batch_size: int = 0          # 0 means full batch
    hidden_units: int = 32       # MLP only
    init_scale: float = 0.01

    def __post_init__(self):
        if self.learner_kind not in LEARNER_KINDS:
            raise ValueError(f"learner_kind must be one of {LEARNER_KINDS}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")
        if self.learner_kind == "one_hidden_layer_mlp" and self.hidden_units < 1:
            raise ValueError("hidden_units must be at least 1")


@dataclass(eq=False)
class TrainedModel:
    parameters: np.ndarray
    learner_kind: str
    K: int
    d: int
    hidden_units: int = 0
    loss_history: np.ndarray | None = field(default=None, repr=False)


def param_count(cfg: LearnerConfig, d: int, K: int) -> int:
    if cfg.learner_kind == "multinomial_logistic":
        return K * d + K
    H = cfg.hidden_units
    return H * d + H + K * H + K


def _softmax(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(params, X, kind, K, H):
    d = X.shape[1]
    if kind == "multinomial_logistic":
        W = params[: K * d].reshape(K, d)
        b = params[K * d:]
        return _softmax(X @ W.T + b), None
    W1 = params[: H * d].reshape(H, d)
    b1 = params[H * d: H * d + H]
    W2 = params[H * d + H: H * d + H + K * H].reshape(K, H)
    b2 = params[H * d + H + K * H:]
    hidden = np.tanh(X @ W1.T + b1)
    return _softmax(hidden @ W2.T + b2), hidden


def _objective(params, X, soft, cfg, K):
    probs, _ = _forward(params, X, cfg.learner_kind, K, cfg.hidden_units)
    ce = -(soft * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=1).mean()
    return ce + 0.5 * cfg.l2_penalty * float(params @ params)


def _objective_and_grad(params, X, soft, cfg, K):
    n, d = X.shape
    kind, H = cfg.learner_kind, cfg.hidden_units
    probs, hidden = _forward(params, X, kind, K, H)
    ce = -(soft * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=1).mean()
    loss = ce + 0.5 * cfg.l2_penalty * float(params @ params)

    G = (probs - soft) / n
    if kind == "multinomial_logistic":
        grad = np.concatenate([(G.T @ X).ravel(), G.sum(axis=0)])
    else:
        gW2 = G.T @ hidden
        gb2 = G.sum(axis=0)
        W2 = params[H * d + H: H * d + H + K * H].reshape(K, H)
        Gh = (G @ W2) * (1.0 - hidden * hidden)
        grad = np.concatenate([(Gh.T @ X).ravel(), Gh.sum(axis=0),
                               gW2.ravel(), gb2])
    grad += cfg.l2_penalty * params
    return loss, grad


def _init_params(cfg, d, K, rng):
    return cfg.init_scale * rng.standard_normal(param_count(cfg, d, K))


def weighted_loss(predicted_probs: np.ndarray, weights: np.ndarray) -> float:
    """Cross-entropy of one prediction against a soft label row:
    sum_k weights[k] * (-log predicted_probs[k]), with probabilities
    floored at 1e-12 before the log."""
    p = np.maximum(np.asarray(predicted_probs, dtype=np.float64), PROB_FLOOR)
    w = np.asarray(weights, dtype=np.float64)
    if p.shape != w.shape:
        raise ValueError("prediction and weight vectors must have equal length")
    return float(-(w * np.log(p)).sum())


def fit(features: np.ndarray, soft: np.ndarray, cfg: LearnerConfig, seed,
        record_loss: bool = False) -> TrainedModel:
    """Train a model on soft labels by mini-batch gradient descent.

    Deterministic given (inputs, seed): initialization draws from the
    seed's "init" substream and per-epoch shuffles from its "shuffle"
    substream. batch_size=0 (or >= n) runs full-batch steps. When
    record_loss is set, the full objective at the start of every epoch
    (plus the final value) is stored on the returned model.

    Raises RuntimeError if the objective turns non-finite mid-training.
    """
    X = np.asarray(features, dtype=np.float64)
    S = np.asarray(soft, dtype=np.float64)
    if X.ndim != 2 or S.ndim != 2 or X.shape[0] != S.shape[0]:
        raise ValueError("features and soft labels must align on examples")
    n, d = X.shape
    K = S.shape[1]
    seed = as_seed(seed)
    params = _init_params(cfg, d, K, seed.child("init").generator())
    shuffle_rng = seed.child("shuffle").generator()

    batch = cfg.batch_size if 0 < cfg.batch_size < n else n
    full_batch = batch == n
    history = [] if record_loss else None

    for epoch in range(cfg.epochs):
        if record_loss:
            history.append(_objective(params, X, S, cfg, K))
        if full_batch:
            loss, grad = _objective_and_grad(params, X, S, cfg, K)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}; "
                    "reduce the learning rate or feature scale"
                )
            params = params - cfg.learning_rate * grad
        else:
            order = shuffle_rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                loss, grad = _objective_and_grad(params, X[idx], S[idx], cfg, K)
                if not np.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite training loss at epoch {epoch}; "
                        "reduce the learning rate or feature scale"
                    )
                params = params - cfg.learning_rate * grad
    if record_loss:
        history.append(_objective(params, X, S, cfg, K))

    return TrainedModel(
        parameters=params,
        learner_kind=cfg.learner_kind,
        K=K,
        d=d,
        hidden_units=cfg.hidden_units if cfg.learner_kind == "one_hidden_layer_mlp" else 0,
        loss_history=np.asarray(history) if record_loss else None,
    )


def predict_proba(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Row-stochastic (n, K) class probabilities."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValueError(
            f"features must be (n, {model.d}) for this model, got {X.shape}"
        )
    probs, _ = _forward(model.parameters, X, model.learner_kind, model.K,
                        model.hidden_units)
    return probs


def zero_one_risk(model: TrainedModel, features: np.ndarray,
                  truth: np.ndarray) -> float:
    """Fraction of argmax predictions that disagree with the true labels."""
    truth = np.asarray(truth, dtype=np.int64)
    preds = np.argmax(predict_proba(model, features), axis=1)
    return float(np.mean(preds != truth))


def gradient_check(cfg: LearnerConfig, features: np.ndarray, soft: np.ndarray,
                   seed, h: float = 1e-5) -> float:
    """Max deviation between analytic and central-difference gradients.

    Evaluated at a random parameter point drawn from the seed. The
    deviation is normalized by the largest gradient magnitude so the
    result reads as a relative error at the gradient's own scale.
    Intended for small instances (the finite-difference sweep is one
    objective pair per parameter).
    """
    X = np.asarray(features, dtype=np.float64)
    S = np.asarray(soft, dtype=np.float64)
    n, d = X.shape
    K = S.shape[1]
    rng = as_seed(seed).child("gradient-check").generator()
    params = _init_params(cfg, d, K, rng) + 0.1 * rng.standard_normal(
        param_count(cfg, d, K))

    _, analytic = _objective_and_grad(params, X, S, cfg, K)
    numeric = np.empty_like(analytic)
    for i in range(params.size):
        step = np.zeros_like(params)
        step[i] = h
        numeric[i] = (_objective(params + step, X, S, cfg, K)
                      - _objective(params - step, X, S, cfg, K)) / (2 * h)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return float(np.abs(analytic - numeric).max() / scale)
