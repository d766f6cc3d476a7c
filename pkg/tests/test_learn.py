import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mbem.learn import (
    LearnerConfig,
    TrainedModel,
    _objective_and_grad,
    fit,
    gradient_check,
    param_count,
    predict_proba,
    weighted_loss,
    zero_one_risk,
)
from mbem.methods import one_hot
from mbem.simulate import make_synthetic_dataset

MLP = LearnerConfig(learner_kind="one_hidden_layer_mlp", hidden_units=6)


class TestWeightedLoss:
    def test_one_hot_reduces_to_cross_entropy(self):
        p = np.array([0.3, 0.6, 0.1])
        for k in range(3):
            w = np.zeros(3)
            w[k] = 1.0
            assert weighted_loss(p, w) == -math.log(p[k])

    def test_hand_value(self):
        value = weighted_loss(np.array([0.9, 0.1]), np.array([0.5, 0.5]))
        assert_allclose(value, 0.5 * (-math.log(0.9)) + 0.5 * (-math.log(0.1)),
                        atol=1e-15)
        assert_allclose(value, 1.2039728043259361, atol=1e-12)

    def test_uniform_weights_are_permutation_symmetric(self, rng):
        p = rng.dirichlet(np.ones(4))
        w = np.full(4, 0.25)
        for _ in range(5):
            perm = rng.permutation(4)
            assert_allclose(weighted_loss(p[perm], w), weighted_loss(p, w),
                            atol=1e-12)

    def test_floors_probabilities(self):
        assert np.isfinite(weighted_loss(np.array([1.0, 0.0]),
                                         np.array([0.0, 1.0])))


class TestFit:
    def test_separable_data_reaches_low_train_error(self):
        X, y = make_synthetic_dataset(1000, 3, 6, margin=6.0, seed=0)
        model = fit(X, one_hot(y, 3), LearnerConfig(), seed=1)
        assert zero_one_risk(model, X, y) <= 0.01

    def test_uniform_soft_labels_shrink_to_uniform_predictions(self):
        X, _ = make_synthetic_dataset(500, 2, 4, margin=6.0, seed=2)
        Xt, _ = make_synthetic_dataset(200, 2, 4, margin=6.0, seed=3)
        soft = np.full((500, 2), 0.5)
        cfg = LearnerConfig(l2_penalty=1e-3, epochs=400)
        model = fit(X, soft, cfg, seed=4)
        assert np.abs(model.parameters).max() < 0.05
        assert predict_proba(model, Xt).max() <= 0.5 + 0.05

    def test_duplicated_examples_with_split_weights_match_uniform(self):
        X, _ = make_synthetic_dataset(80, 2, 4, margin=1.0, seed=5)
        uniform = np.full((80, 2), 0.5)
        X2 = np.repeat(X, 2, axis=0)
        split = one_hot(np.tile([0, 1], 80), 2)
        cfg = LearnerConfig(epochs=60)
        a = fit(X, uniform, cfg, seed=6)
        b = fit(X2, split, cfg, seed=6)
        assert_allclose(a.parameters, b.parameters, atol=1e-9)

    def test_deterministic_given_seed(self):
        X, y = make_synthetic_dataset(100, 2, 4, margin=2.0, seed=7)
        cfg = LearnerConfig(epochs=20, batch_size=16)
        a = fit(X, one_hot(y, 2), cfg, seed=8)
        b = fit(X, one_hot(y, 2), cfg, seed=8)
        assert_array_equal(a.parameters, b.parameters)

    def test_full_batch_objective_monotone_small_lr(self):
        from dataclasses import replace
        X, y = make_synthetic_dataset(120, 3, 5, margin=2.0, seed=9)
        soft = one_hot(y, 3)
        for cfg in (LearnerConfig(learning_rate=0.01, epochs=80),
                    replace(MLP, learning_rate=0.01, epochs=80)):
            model = fit(X, soft, cfg, seed=10, record_loss=True)
            diffs = np.diff(model.loss_history)
            assert diffs.max() <= 1e-9

    def test_nonfinite_loss_aborts_with_diagnostic(self):
        X, y = make_synthetic_dataset(50, 2, 4, margin=2.0, seed=11)
        cfg = LearnerConfig(learning_rate=1e12, epochs=50)
        with np.errstate(all="ignore"), pytest.raises(RuntimeError,
                                                      match="non-finite"):
            fit(1e6 * X, one_hot(y, 2), cfg, seed=12)

    def test_minibatch_path_trains(self):
        X, y = make_synthetic_dataset(300, 2, 4, margin=6.0, seed=13)
        cfg = LearnerConfig(epochs=40, batch_size=32, learning_rate=0.2)
        model = fit(X, one_hot(y, 2), cfg, seed=14)
        assert zero_one_risk(model, X, y) <= 0.02


class TestPredictProba:
    def test_zero_parameters_give_uniform(self):
        cfg = LearnerConfig()
        model = TrainedModel(parameters=np.zeros(param_count(cfg, 4, 3)),
                             learner_kind=cfg.learner_kind, K=3, d=4)
        assert_allclose(predict_proba(model, np.ones((5, 4))), 1 / 3,
                        atol=1e-15)

    def test_hand_softmax(self):
        # W = [[1, -1], [0, 2]], b = [0.5, -0.5], x = [1, 2]
        params = np.array([1.0, -1.0, 0.0, 2.0, 0.5, -0.5])
        model = TrainedModel(parameters=params,
                             learner_kind="multinomial_logistic", K=2, d=2)
        probs = predict_proba(model, np.array([[1.0, 2.0]]))
        p0 = 1.0 / (1.0 + math.exp(4.0))   # scores (-0.5, 3.5)
        assert_allclose(probs, [[p0, 1.0 - p0]], atol=1e-15)

    def test_rows_on_simplex_random_models(self, rng):
        for kind, cfg in (("logistic", LearnerConfig()), ("mlp", MLP)):
            params = rng.standard_normal(param_count(cfg, 5, 4))
            model = TrainedModel(parameters=params, learner_kind=cfg.learner_kind,
                                 K=4, d=5, hidden_units=cfg.hidden_units)
            probs = predict_proba(model, rng.standard_normal((30, 5)))
            assert probs.min() >= 0
            assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_dimension_mismatch(self):
        cfg = LearnerConfig()
        model = TrainedModel(parameters=np.zeros(param_count(cfg, 4, 2)),
                             learner_kind=cfg.learner_kind, K=2, d=4)
        with pytest.raises(ValueError, match=r"\(n, 4\)"):
            predict_proba(model, np.ones((3, 5)))


class TestGradientCheck:
    def test_logistic_matches_finite_differences(self, rng):
        for trial in range(5):
            X = rng.standard_normal((16, 5))
            soft = rng.dirichlet(np.ones(3), size=16)
            err = gradient_check(LearnerConfig(), X, soft, seed=trial)
            assert err <= 1e-5

    def test_mlp_matches_finite_differences(self, rng):
        for trial in range(5):
            X = rng.standard_normal((12, 4))
            soft = rng.dirichlet(np.ones(2), size=12)
            err = gradient_check(MLP, X, soft, seed=trial)
            assert err <= 1e-4

    def test_zero_point_uniform_labels_zero_gradient(self):
        cfg = LearnerConfig(l2_penalty=0.0)
        X = np.ones((8, 3))
        soft = np.full((8, 2), 0.5)
        params = np.zeros(param_count(cfg, 3, 2))
        _, grad = _objective_and_grad(params, X, soft, cfg, K=2)
        assert_array_equal(grad[-2:], 0.0)   # bias block vanishes by symmetry


class TestZeroOneRisk:
    def test_exact_predictor(self):
        X, y = make_synthetic_dataset(400, 2, 4, margin=6.0, seed=15)
        model = fit(X, one_hot(y, 2), LearnerConfig(), seed=16)
        Xt, yt = make_synthetic_dataset(400, 2, 4, margin=6.0, seed=17)
        assert zero_one_risk(model, X, y) == 0.0
        assert zero_one_risk(model, Xt, yt) <= 0.02

    def test_constant_model_on_balanced_labels(self):
        cfg = LearnerConfig()
        params = np.zeros(param_count(cfg, 3, 2))
        params[-2] = 10.0   # always predicts class 0
        model = TrainedModel(parameters=params, learner_kind=cfg.learner_kind,
                             K=2, d=3)
        X = np.zeros((100, 3))
        y = np.tile([0, 1], 50)
        assert zero_one_risk(model, X, y) == 0.5
