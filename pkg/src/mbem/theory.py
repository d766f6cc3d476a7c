"""Worker-quality functionals and the redundancy/budget trade-off.

For binary classification the excess risk of a posterior-weighted
learner inflates by 1/(1 - 2*beta), where beta measures how much
posterior mass the confusion estimates put on the wrong label, averaged
over worker assignments. alpha is the same idea for raw majority-vote
weights: the average worst-class flip probability.

When all workers share a single flip probability rho and the confusion
estimates are off by at most eps entrywise, beta has a closed form:

    beta_eps = (rho+eps)^r * sum_u  C(r, u) / (tau^u + tau^(r-u)),
    tau      = (rho+eps) / (1-rho-eps).

Dividing sqrt(r) by (1 - 2*beta_eps) gives the redundancy-dependent
factor of the generalization bound under a fixed total annotation
budget; minimizing it over r answers how many labels to buy per example.
Collecting one label per example wins whenever worker accuracy (1-rho)
exceeds roughly 0.825.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import check_confusions, check_prior
from .seeding import as_seed

__all__ = [
    "TheoryParams",
    "BetaEstimate",
    "beta_eps_closed_form",
    "beta_general_binary",
    "alpha_general",
    "bound_factor",
    "optimal_redundancy",
    "sample_size_condition",
    "confusion_error_bound",
]

EXACT_TUPLE_LIMIT = 1_000_000
MC_TUPLES = 100_000
_CHUNK = 4096


@dataclass(frozen=True)
class TheoryParams:
    """Inputs to the sample-size and confusion-error formulas.

    rho is the identical-worker flip probability, epsilon the entrywise
    confusion estimation error, V a VC-dimension surrogate for the
    hypothesis class, delta the failure probability, m the worker count,
    and N the total annotation budget (examples times redundancy).
    """

    rho: float
    epsilon: float
    r: int
    V: float
    delta: float
    m: int
    N: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 0.5:
            raise ValueError("rho must lie in [0, 0.5)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.rho + self.epsilon >= 0.5:
            raise ValueError("rho + epsilon must be < 0.5 for a finite bound")
        if self.r < 1:
            raise ValueError("redundancy must be at least 1")
        if self.V <= 0:
            raise ValueError("V must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("worker count must be at least 1")
        if self.N <= 0:
            raise ValueError("annotation budget must be positive")


class BetaEstimate(NamedTuple):
    value: float
    stderr: float | None   # None when computed by exact enumeration


def beta_eps_closed_form(rho: float, epsilon: float, r: int) -> float:
    """Identical-worker beta under flip probability rho and estimation
    error epsilon, at redundancy r.

    Evaluated term by term; for r > 30 the binomial sum moves to log
    space to avoid overflow. rho + epsilon must stay below 1/2.
    """
    if not 0.0 <= rho < 0.5 or epsilon < 0:
        raise ValueError("need 0 <= rho < 0.5 and epsilon >= 0")
    p = rho + epsilon
    if p >= 0.5:
        raise ValueError("rho + epsilon must be < 0.5")
    if r < 1:
        raise ValueError("redundancy must be at least 1")
    if p == 0.0:
        return 0.0
    tau = p / (1.0 - p)
    if r <= 30:
        total = sum(math.comb(r, u) / (tau ** u + tau ** (r - u))
                    for u in range(r + 1))
        return p ** r * total
    log_tau = math.log(tau)
    log_p = math.log(p)
    term_logs = np.array([
        math.lgamma(r + 1) - math.lgamma(u + 1) - math.lgamma(r - u + 1)
        + r * log_p - np.logaddexp(u * log_tau, (r - u) * log_tau)
        for u in range(r + 1)
    ])
    peak = term_logs.max()
    return float(math.exp(peak) * np.exp(term_logs - peak).sum())


def _binary_patterns(r: int) -> np.ndarray:
    codes = np.arange(2 ** r, dtype=np.int64)
    return (codes[:, None] >> np.arange(r)) & 1


def _beta_for_tuples(tuples, conf_true, conf_est, prior, patterns):
    """Per-tuple beta contribution max_y sum_Z rho_hat(-y, Z) tau(y, Z)."""
    c, r = tuples.shape
    P = patterns.shape[0]
    tau = np.ones((2, c, P))
    num = np.empty((2, c, P))
    num[0].fill(prior[0])
    num[1].fill(prior[1])
    for j in range(r):
        w = tuples[:, j]
        z = patterns[:, j]
        for y in (0, 1):
            tau[y] *= conf_true[w][:, y, :][:, z]
            num[y] *= conf_est[w][:, y, :][:, z]
    den = num[0] + num[1]
    rho_hat = np.divide(num, den[None], out=np.zeros_like(num),
                        where=den[None] > 0)
    s0 = (rho_hat[1] * tau[0]).sum(axis=1)   # mass on -y when truth is y=0
    s1 = (rho_hat[0] * tau[1]).sum(axis=1)
    return np.maximum(s0, s1)


def beta_general_binary(confusions: np.ndarray, confusion_estimates: np.ndarray,
                        prior: np.ndarray, r: int, seed=0,
                        mc_tuples: int = MC_TUPLES) -> BetaEstimate:
    """Binary beta for arbitrary worker pools.

    Averages, over length-r worker tuples drawn uniformly with
    replacement, the worst-case posterior mass that the estimated
    matrices place on the wrong label under the true annotation
    distribution. Tuples are enumerated exactly while m^r stays within
    1e6; beyond that a seeded Monte-Carlo sample of mc_tuples tuples is
    used and the estimate carries its standard error. Confusion
    estimates are used as given (no clamping); annotation patterns with
    zero estimated mass contribute nothing.
    """
    conf_true = check_confusions(confusions)
    conf_est = check_confusions(confusion_estimates)
    prior = check_prior(prior)
    m, K, _ = conf_true.shape
    if K != 2 or conf_est.shape != conf_true.shape or prior.size != 2:
        raise ValueError("general beta is defined for binary classification only")
    if not 1 <= r <= 12:
        raise ValueError("redundancy must lie in [1, 12]")

    patterns = _binary_patterns(r)
    total_tuples = m ** r
    if total_tuples <= EXACT_TUPLE_LIMIT:
        acc = 0.0
        shape = (m,) * r
        for start in range(0, total_tuples, _CHUNK):
            ids = np.arange(start, min(start + _CHUNK, total_tuples))
            tuples = np.stack(np.unravel_index(ids, shape), axis=1)
            acc += _beta_for_tuples(tuples, conf_true, conf_est, prior,
                                    patterns).sum()
        return BetaEstimate(acc / total_tuples, None)

    rng = as_seed(seed).child("beta-mc").generator()
    values = np.empty(mc_tuples)
    done = 0
    while done < mc_tuples:
        c = min(_CHUNK, mc_tuples - done)
        tuples = rng.integers(0, m, size=(c, r))
        values[done:done + c] = _beta_for_tuples(tuples, conf_true, conf_est,
                                                 prior, patterns)
        done += c
    stderr = float(values.std(ddof=1) / math.sqrt(mc_tuples))
    return BetaEstimate(float(values.mean()), stderr)


def alpha_general(confusions: np.ndarray) -> float:
    """Mean over workers of the larger off-diagonal (flip) probability."""
    conf = check_confusions(confusions)
    if conf.shape[1] != 2:
        raise ValueError("alpha is defined for binary classification only")
    return float(np.maximum(conf[:, 0, 1], conf[:, 1, 0]).mean())


def bound_factor(rho: float, epsilon: float, r: int) -> float:
    """Redundancy-dependent excess-risk factor sqrt(r) / (1 - 2*beta_eps).

    Returns inf when beta_eps reaches 1/2 and the bound is vacuous.
    """
    beta = beta_eps_closed_form(rho, epsilon, r)
    if beta >= 0.5:
        return math.inf
    return math.sqrt(r) / (1.0 - 2.0 * beta)


def optimal_redundancy(rho: float, epsilon: float, r_max: int) -> int:
    """argmin over r in 1..r_max of bound_factor; ties go to smaller r."""
    if r_max < 1:
        raise ValueError("r_max must be at least 1")
    best_r, best_val = 1, bound_factor(rho, epsilon, 1)
    for r in range(2, r_max + 1):
        val = bound_factor(rho, epsilon, r)
        if val < best_val:
            best_r, best_val = r, val
    return best_r


def sample_size_condition(params: TheoryParams, alpha: float,
                          C: float = 1.0) -> tuple[float, bool]:
    """Annotation budget needed before the excess-risk bound applies.

    required_N = max( C * r * ((sqrt(V) + sqrt(ln(1/delta))) / (1-2*alpha))^2,
                      2^12 * m * ln(2^6 * m / delta) )

    with natural logarithms. C is the unknown universal constant,
    supplied by the caller (default 1). Returns (required_N, whether
    params.N meets it).
    """
    if not 0.0 <= alpha < 0.5:
        raise ValueError("alpha must lie in [0, 0.5)")
    if C < 0:
        raise ValueError("C must be nonnegative")
    learn_branch = C * params.r * (
        (math.sqrt(params.V) + math.sqrt(math.log(1.0 / params.delta)))
        / (1.0 - 2.0 * alpha)
    ) ** 2
    worker_branch = 2 ** 12 * params.m * math.log(2 ** 6 * params.m / params.delta)
    required = max(learn_branch, worker_branch)
    return required, params.N >= required


def confusion_error_bound(params: TheoryParams, quality: float,
                          min_risk: float = 0.0, C: float = 1.0) -> float:
    """Entrywise confusion estimation error after one estimation pass.

    quality is alpha for the first round (majority-vote weights) and
    beta_eps for later rounds. The expression is only meaningful up to
    the universal constant C, so callers must pick one; it is

        2^4 * g + 2^8 * sqrt(m * ln(2^6 * m / delta) / N),
        g = min_risk + C * (sqrt(V) + sqrt(ln(1/delta)))
                       / ((1 - 2*quality) * sqrt(N / r)).
    """
    if not 0.0 <= quality < 0.5:
        raise ValueError("quality must lie in [0, 0.5)")
    g = min_risk + C * (
        math.sqrt(params.V) + math.sqrt(math.log(1.0 / params.delta))
    ) / ((1.0 - 2.0 * quality) * math.sqrt(params.N / params.r))
    tail = math.sqrt(params.m * math.log(2 ** 6 * params.m / params.delta)
                     / params.N)
    return 2 ** 4 * g + 2 ** 8 * tail
