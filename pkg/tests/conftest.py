import numpy as np
import pytest

from mbem.core import AnnotationSet


def random_confusions(rng, m, K, floor=0.02):
    """Row-stochastic matrices with every entry bounded away from 0."""
    conf = floor + rng.random((m, K, K))
    return conf / conf.sum(axis=2, keepdims=True)


def random_prior(rng, K, floor=0.05):
    p = floor + rng.random(K)
    return p / p.sum()


def random_instance(rng, n, m, K, r_max, variable_r=True):
    """An annotation set with 1..r_max labels per example."""
    records = []
    for i in range(n):
        r = int(rng.integers(1, r_max + 1)) if variable_r else r_max
        for _ in range(r):
            records.append((i, int(rng.integers(0, m)), int(rng.integers(0, K))))
    return AnnotationSet.from_records(records, n=n, m=m, K=K)


def posterior_oracle(ann, conf, prior):
    """Direct per-example evaluation of prior[k] * prod conf[w, k, z]."""
    rows = []
    records = list(zip(ann.example_ids, ann.worker_ids, ann.labels))
    for i in range(ann.n):
        probs = []
        for k in range(ann.K):
            p = float(prior[k])
            for e, w, z in records:
                if e == i:
                    p *= float(conf[w][k][z])
            probs.append(p)
        total = sum(probs)
        rows.append([p / total for p in probs])
    return np.array(rows)


def estimate_oracle(ann, t, smoothing=0.0):
    """Naive counting version of the confusion/prior estimator."""
    records = list(zip(ann.example_ids, ann.worker_ids, ann.labels))
    conf = np.empty((ann.m, ann.K, ann.K))
    for a in range(ann.m):
        for k in range(ann.K):
            den = sum(1 for e, w, _ in records if w == a and t[e] == k)
            for s in range(ann.K):
                num = sum(1 for e, w, z in records
                          if w == a and t[e] == k and z == s)
                if den + ann.K * smoothing > 0:
                    conf[a, k, s] = (num + smoothing) / (den + ann.K * smoothing)
                else:
                    conf[a, k, s] = 1.0 / ann.K
    prior = np.array([sum(1 for x in t if x == k) / ann.n
                      for k in range(ann.K)])
    return conf, prior


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
