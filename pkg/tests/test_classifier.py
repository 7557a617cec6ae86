"""Training, the closed-form posterior, the witness, excess risk, and the
imbalance-corrected tilt."""

import math

import numpy as np
import pytest

from t3.classifier import (
    LabeledDataset,
    OptimizerConfig,
    PiecewiseClassifier,
    QuadClassifier,
    _train,
    bayes_classifier,
    estimate_excess_risk,
    imbalance_corrected_tilt,
    indicator_classifier,
    loss,
    reg_loss_and_grad,
    train,
    witness_classifier,
)
from t3.dist import GaussianComponent, Mixture, UniformComponent, integration_window, quadrature, quadrature_seeds

DEFAULT = Mixture(0.1, GaussianComponent(1.0, 1.0), GaussianComponent(0.0, 1.0))


def _dataset(m, n, seed):
    return LabeledDataset.from_mixture(m, n, np.random.default_rng(seed))


class TestLabeledDataset:
    def test_observed_mu(self):
        d = LabeledDataset(z=np.arange(4.0), s=np.array([1, 0, 0, 1]), source_gamma=0.3)
        assert d.observed_mu == 0.5

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            LabeledDataset(z=np.arange(3.0), s=np.array([0, 1, 2]), source_gamma=0.1)


class TestTrain:
    def test_one_class_degenerate_saturates(self):
        rng = np.random.default_rng(0)
        d = LabeledDataset(z=rng.normal(1, 1, 200), s=np.ones(200, dtype=int), source_gamma=0.1)
        clf = train(d, 0.0)
        assert float(clf.predict(d.z).min()) > 1.0 - 1e-6

    def test_large_sample_consistency_against_bayes(self):
        d = _dataset(DEFAULT, 10**5, 7)
        clf = train(d, 1e-4)
        bayes = bayes_classifier(DEFAULT)
        assert float(np.max(np.abs(clf.weights - bayes.weights))) < 0.1

    def test_huge_lambda_shrinks_weights(self):
        d = _dataset(DEFAULT, 2000, 3)
        clf = train(d, 1e6)
        assert float(np.linalg.norm(clf.weights)) <= 1e-3

    def test_deterministic(self):
        d = _dataset(DEFAULT, 500, 11)
        a = train(d, 1e-3)
        b = train(d, 1e-3)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_monotone_objective(self):
        d = _dataset(DEFAULT, 500, 13)
        _, history = _train(d, 1e-3, OptimizerConfig())
        diffs = np.diff(history)
        assert np.all(diffs <= 1e-14)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            train(_dataset(DEFAULT, 10, 0), -1.0)


class TestLoss:
    def test_perfect_classifier_near_zero(self):
        d = LabeledDataset(z=np.array([-2.0, 2.0]), s=np.array([0, 1]), source_gamma=0.5)
        clf = QuadClassifier(weights=np.array([0.0, 100.0, 0.0]))
        assert loss(clf, d) <= 1e-11

    def test_constant_half_is_ln2(self):
        rng = np.random.default_rng(1)
        d = LabeledDataset(z=rng.normal(size=50), s=(rng.random(50) < 0.3).astype(int), source_gamma=0.7)
        clf = QuadClassifier(weights=np.zeros(3))
        np.testing.assert_allclose(loss(clf, d), math.log(2.0), rtol=1e-14)

    def test_matches_hand_rolled_sum(self):
        z = np.array([-1.0, 0.0, 0.5, 1.5, 3.0])
        s = np.array([0, 1, 1, 0, 1])
        w = np.array([0.2, -0.4, 0.1])
        clf = QuadClassifier(weights=w, lam=0.05)
        total = 0.0
        for zi, si in zip(z, s):
            p = 1.0 / (1.0 + math.exp(-(w[0] + w[1] * zi + w[2] * zi * zi)))
            total += -si * math.log(p) - (1 - si) * math.log(1 - p)
        d = LabeledDataset(z=z, s=s, source_gamma=0.5)
        np.testing.assert_allclose(loss(clf, d), total / 5.0, rtol=1e-14)
        np.testing.assert_allclose(
            loss(clf, d, regularized=True), total / 5.0 + 0.05 * float(w @ w), rtol=1e-14
        )


class TestGradient:
    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=200)
        s = (rng.random(200) < 0.8).astype(int)
        h = 1e-5
        for _ in range(20):
            w = rng.normal(size=3)
            _, g = reg_loss_and_grad(w, z, s, 1e-3)
            fd = np.array(
                [
                    (reg_loss_and_grad(w + h * e, z, s, 1e-3)[0] - reg_loss_and_grad(w - h * e, z, s, 1e-3)[0])
                    / (2 * h)
                    for e in np.eye(3)
                ]
            )
            rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
            assert rel <= 1e-5


class TestBayesClassifier:
    def test_default_instance_weights(self):
        bayes = bayes_classifier(DEFAULT)
        np.testing.assert_allclose(
            bayes.weights, [math.log(9.0) - 0.5, 1.0, 0.0], rtol=1e-14, atol=1e-15
        )
        # predict agrees with (1-gamma) p_r / p on a grid
        z = np.linspace(-4, 6, 101)
        direct = 0.9 * np.exp(DEFAULT.retain.log_density(z)) / DEFAULT.density(z)
        np.testing.assert_allclose(bayes.predict(z), direct, atol=1e-12)

    def test_indistinguishable_components_predict_half(self):
        m = Mixture(0.5, GaussianComponent(0.0, 1.0), GaussianComponent(0.0, 1.0))
        bayes = bayes_classifier(m)
        z = np.linspace(-5, 5, 21)
        np.testing.assert_allclose(bayes.predict(z), 0.5, atol=1e-15)

    def test_bayes_identity_pointwise(self):
        m = Mixture(0.27, GaussianComponent(0.4, 2.0), GaussianComponent(-1.0, 0.3))
        bayes = bayes_classifier(m)
        z = np.linspace(-6, 7, 101)
        np.testing.assert_allclose(
            bayes.predict(z) * m.density(z), (1 - 0.27) * np.exp(m.retain.log_density(z)), atol=1e-12
        )

    def test_rejects_uniform_components(self):
        m = Mixture(0.1, UniformComponent(2, 3), UniformComponent(0, 1))
        with pytest.raises(TypeError):
            bayes_classifier(m)


class TestWitness:
    def test_epsilon_value(self):
        wit = witness_classifier(0.01, 0.1, (2.0, 3.0), (0.0, 1.0))
        np.testing.assert_allclose(wit.forget_value, 1.0 - math.exp(-0.1), rtol=1e-12)

    def test_epsilon_vanishes_with_delta(self):
        eps = [
            witness_classifier(d, 0.1, (2.0, 3.0), (0.0, 1.0)).forget_value
            for d in (1e-2, 1e-4, 1e-6)
        ]
        assert eps[0] > eps[1] > eps[2]
        assert eps[2] < 2e-5

    def test_mc_excess_risk_matches_delta(self):
        gamma, delta = 0.1, 0.01
        m = Mixture(gamma, UniformComponent(2.0, 3.0), UniformComponent(0.0, 1.0))
        wit = witness_classifier(delta, gamma, (2.0, 3.0), (0.0, 1.0))
        d_hat, se = estimate_excess_risk(wit, m, indicator_classifier(m), 10**5, np.random.default_rng(5))
        assert abs(d_hat - delta) <= 3 * se + 1e-3

    def test_rejects_overlapping_supports(self):
        with pytest.raises(ValueError):
            PiecewiseClassifier((0.0, 2.0), (1.0, 3.0))


class TestExcessRisk:
    def test_bayes_vs_itself_is_zero(self):
        bayes = bayes_classifier(DEFAULT)
        d_hat, se = estimate_excess_risk(bayes, DEFAULT, bayes, 10**5, np.random.default_rng(0))
        assert d_hat == 0.0 and se == 0.0

    def test_constant_half_matches_quadrature(self):
        clf = QuadClassifier(weights=np.zeros(3))
        bayes = bayes_classifier(DEFAULT)
        d_hat, se = estimate_excess_risk(clf, DEFAULT, bayes, 2 * 10**5, np.random.default_rng(9))

        # quadrature oracle for E[l(0.5) - l(f*)] under the joint law
        def integrand(z):
            f = bayes.predict(z)
            p = DEFAULT.density(z)
            l_half = math.log(2.0)
            f = np.clip(f, 1e-300, 1 - 1e-16)
            l_star = -(f * np.log(f) + (1 - f) * np.log1p(-f))
            return p * (l_half - l_star)

        lo, hi = integration_window(DEFAULT)
        exact = quadrature(integrand, lo, hi, tol=1e-10, breakpoints=quadrature_seeds(DEFAULT))
        assert abs(d_hat - exact) <= 3 * se

    def test_trained_classifier_nonnegative(self):
        d = _dataset(DEFAULT, 300, 21)
        clf = train(d, 1e-3)
        d_hat, se = estimate_excess_risk(clf, DEFAULT, bayes_classifier(DEFAULT), 10**5, np.random.default_rng(3))
        assert d_hat >= -3 * se


class TestLemma1Property:
    def test_l1_error_bounded_by_sqrt_half_delta(self):
        rng = np.random.default_rng(31)
        bayes = bayes_classifier(DEFAULT)
        for seed in range(5):
            d = _dataset(DEFAULT, 150, 100 + seed)
            clf = train(d, 1e-3)
            d_hat, d_se = estimate_excess_risk(clf, DEFAULT, bayes, 10**5, rng)
            z = DEFAULT.sample(rng, 10**5)
            terms = np.abs(bayes.predict(z) - clf.predict(z))
            l1 = float(np.mean(terms))
            l1_se = float(np.std(terms, ddof=1) / math.sqrt(terms.size))
            bound = math.sqrt(max(d_hat + 3 * d_se, 0.0) / 2.0)
            assert l1 <= bound + 3 * l1_se


class TestImbalanceCorrectedTilt:
    def test_mu_equals_gamma_proportional_to_f(self):
        clf = QuadClassifier(weights=np.array([0.3, 0.7, -0.2]))
        z = np.linspace(-3, 3, 41)
        tilt = imbalance_corrected_tilt(clf, 0.1, 0.1, z)
        f = clf.predict(z)
        ratio = tilt / f
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)

    def test_exact_posterior_recovers_retain_density(self):
        # data observed at forget fraction mu != population gamma
        gamma, mu = 0.1, 0.4
        m = Mixture(gamma, GaussianComponent(1.0, 1.0), GaussianComponent(0.0, 0.5))
        m_mu = Mixture(mu, m.retain, m.forget)
        f_mu = bayes_classifier(m_mu)

        def unnorm(z):
            return imbalance_corrected_tilt(f_mu, mu, gamma, z) * m.density(z)

        lo, hi = integration_window(m)
        seeds = quadrature_seeds(m)
        norm = quadrature(unnorm, lo, hi, tol=1e-10, breakpoints=seeds)
        z = np.linspace(-4, 5, 101)
        np.testing.assert_allclose(
            unnorm(z) / norm, np.exp(m.retain.log_density(z)), atol=1e-8
        )

    def test_zero_classifier_output_gives_zero_tilt(self):
        clf = PiecewiseClassifier((2.0, 3.0), (0.0, 1.0), retain_value=1.0, forget_value=0.0)
        tilt = imbalance_corrected_tilt(clf, 0.3, 0.1, np.array([0.5]))
        assert tilt[0] == 0.0

    def test_rejects_bad_proportions(self):
        clf = QuadClassifier(weights=np.zeros(3))
        with pytest.raises(ValueError):
            imbalance_corrected_tilt(clf, 0.0, 0.1, np.array([0.0]))
