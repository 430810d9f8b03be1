"""Acquisition closed forms, limits and invariances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetbo import (
    AcquisitionSpec,
    GPRegressor,
    InvalidInputError,
    SquaredExponential,
    anpei,
    augmented_ei,
    expected_improvement,
    heteroscedastic_aei,
    incumbent,
)

PHI0 = 0.3989422804014327  # standard normal density at zero


class TestExpectedImprovement:
    def test_zero_std_no_improvement(self):
        assert expected_improvement(2.0, 0.0, 1.0) == 0.0

    def test_zero_std_positive_gap(self):
        assert expected_improvement(0.25, 0.0, 1.0) == 0.75

    def test_at_incumbent_equals_density(self):
        assert expected_improvement(1.0, 1.0, 1.0) == pytest.approx(PHI0, abs=1e-12)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(0)
        draws = rng.standard_normal(1_000_000)
        for _ in range(20):
            mu = float(rng.uniform(-2, 2))
            sigma = float(rng.uniform(0.1, 2.0))
            eta = float(rng.uniform(-2, 2))
            # antithetic pairing tightens the estimate enough for 1e-3
            mc = 0.5 * (
                np.mean(np.maximum(eta - (mu + sigma * draws), 0.0))
                + np.mean(np.maximum(eta - (mu - sigma * draws), 0.0))
            )
            assert expected_improvement(mu, sigma, eta) == pytest.approx(
                mc, abs=1e-3, rel=1e-3
            )

    def test_increases_with_std_at_incumbent(self):
        sigmas = np.linspace(0.1, 3.0, 20)
        values = expected_improvement(np.zeros(20), sigmas, 0.0)
        assert np.all(np.diff(values) > 0)

    def test_negative_std_rejected(self):
        with pytest.raises(InvalidInputError):
            expected_improvement(0.0, -1.0, 0.0)


class TestAugmentedEI:
    def test_zero_noise_recovers_ei_exactly(self):
        mu, sd, eta = np.array([0.1, 0.9]), np.array([0.5, 1.5]), 0.8
        assert np.array_equal(augmented_ei(mu, sd, eta, 0.0),
                              expected_improvement(mu, sd, eta))

    def test_equal_variances_factor(self):
        ei = expected_improvement(0.0, 0.3, 0.1)
        aei = augmented_ei(0.0, 0.3, 0.1, 0.3)
        assert aei == pytest.approx(ei * (1 - 1 / np.sqrt(2)), rel=1e-12)

    def test_large_variance_limit(self):
        sn = 1e-6
        sd = np.sqrt(1e12 * sn**2)
        factor = augmented_ei(0.0, sd, 0.1, sn) / expected_improvement(0.0, sd, 0.1)
        assert abs(factor - 1.0) < 1e-5

    def test_never_exceeds_ei(self):
        rng = np.random.default_rng(1)
        mu, sd = rng.normal(size=50), rng.uniform(0, 2, 50)
        assert np.all(augmented_ei(mu, sd, 0.3, 0.7)
                      <= expected_improvement(mu, sd, 0.3) + 1e-15)


class TestHeteroscedasticAEI:
    def test_zero_noise_recovers_ei_exactly(self):
        mu, var = np.array([0.2, -0.4]), np.array([0.9, 0.1])
        assert np.array_equal(
            heteroscedastic_aei(mu, var, np.zeros(2), 0.5, gamma=3.0),
            expected_improvement(mu, np.sqrt(var), 0.5),
        )

    def test_zero_epistemic_variance_is_exact_zero(self):
        assert heteroscedastic_aei(-1.0, 0.0, 0.7, 0.5, gamma=500.0) == 0.0

    def test_both_zero_falls_back_to_deterministic_ei(self):
        assert heteroscedastic_aei(0.2, 0.0, 0.0, 0.5, gamma=2.0) == pytest.approx(0.3)

    def test_factor_at_ratio_gamma_squared(self):
        gamma, r = 7.0, 0.3
        var = gamma**2 * r
        value = heteroscedastic_aei(0.0, var, r, 0.4, gamma)
        ei = expected_improvement(0.0, np.sqrt(var), 0.4)
        assert value / ei == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-12)

    def test_linear_approximation_for_small_ratio(self):
        # S(k) ~ k / (2 gamma^2) when k << gamma^2
        gamma = 10.0
        for k in (0.04 * gamma**2, 0.01 * gamma**2, 0.001 * gamma**2):
            r = 1.0
            factor = 1 - gamma * np.sqrt(r) / np.sqrt(k * r + gamma**2 * r)
            approx = k / (2 * gamma**2)
            assert abs(factor - approx) / factor < 0.2

    def test_monotone_decreasing_in_noise(self):
        rs = np.linspace(0.0, 5.0, 30)
        values = heteroscedastic_aei(np.zeros(30), np.full(30, 0.8), rs, 0.5, 2.0)
        assert np.all(np.diff(values) <= 1e-15)


class TestANPEI:
    def test_beta_one_is_ei_exactly(self):
        mu, sd, r = np.array([0.3]), np.array([0.9]), np.array([0.4])
        assert np.array_equal(anpei(mu, sd, r, 0.6, beta=1.0),
                              expected_improvement(mu, sd, 0.6))

    def test_beta_zero_is_pure_noise_penalty(self):
        assert anpei(0.0, 1.0, 0.09, 0.5, beta=0.0) == pytest.approx(-0.3)

    def test_hand_arithmetic(self):
        # sigma=0 pins EI to 0.4, so: 0.5*0.4 - 0.5*sqrt(0.04) = 0.1
        value = anpei(0.1, 0.0, 0.04, 0.5, beta=0.5)
        assert value == pytest.approx(0.5 * 0.4 - 0.5 * 0.2, abs=1e-12)


class TestIncumbent:
    def _fit(self, X, y):
        return GPRegressor(kernel=SquaredExponential(), noise_variance=0.0,
                           fix_noise=True, optimizer=None, standardize=False,
                           jitter=1e-12).fit(X, y)

    def test_single_noise_free_observation(self):
        gp = self._fit(np.array([[0.5]]), [2.5])
        assert incumbent(gp, np.array([[0.5]])) == pytest.approx(2.5, abs=1e-6)

    def test_dominated_observation_leaves_incumbent(self):
        X = np.array([[0.0], [1.0]])
        gp = self._fit(X, [1.0, 3.0])
        eta = incumbent(gp, X)
        X3 = np.array([[0.0], [1.0], [2.0]])
        gp3 = self._fit(X3, [1.0, 3.0, 5.0])
        assert incumbent(gp3, X3) == pytest.approx(eta, abs=1e-6)

    def test_matches_exhaustive_minimum(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 5, size=(20, 1))
        y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=20)
        gp = GPRegressor(n_restarts=3, random_state=0).fit(X, y)
        exhaustive = min(gp.predict(X[i : i + 1])[0] for i in range(20))
        assert incumbent(gp, X) == pytest.approx(exhaustive, rel=1e-12)


class TestSpecValidation:
    def test_exactly_own_parameters(self):
        AcquisitionSpec(kind="haei", gamma=1.0)
        AcquisitionSpec(kind="anpei", beta=0.5)
        AcquisitionSpec(kind="aei", fixed_noise=0.1)
        AcquisitionSpec(kind="ei")
        with pytest.raises(InvalidInputError):
            AcquisitionSpec(kind="ei", gamma=1.0)
        with pytest.raises(InvalidInputError):
            AcquisitionSpec(kind="haei")
        with pytest.raises(InvalidInputError):
            AcquisitionSpec(kind="anpei", beta=1.5)
        with pytest.raises(InvalidInputError):
            AcquisitionSpec(kind="haei", gamma=-1.0)
        with pytest.raises(InvalidInputError):
            AcquisitionSpec(kind="nonsense")


@settings(max_examples=50, deadline=None)
@given(
    mu=st.floats(-3, 3), sd=st.floats(0, 3), eta=st.floats(-3, 3),
    r=st.floats(0, 3), gamma=st.floats(0.1, 100), beta=st.floats(0, 1),
)
def test_pointwise_invariants_property(mu, sd, eta, r, gamma, beta):
    ei = expected_improvement(mu, sd, eta)
    assert ei >= 0.0
    assert heteroscedastic_aei(mu, sd**2, r, eta, gamma) <= ei + 1e-15
    assert augmented_ei(mu, sd, eta, np.sqrt(r)) <= ei + 1e-15
    # purity: identical inputs give bit-identical outputs
    assert anpei(mu, sd, r, eta, beta) == anpei(mu, sd, r, eta, beta)


def test_argmax_invariant_to_positive_scaling():
    rng = np.random.default_rng(3)
    for _ in range(10):
        mu = rng.normal(size=40)
        sd = rng.uniform(0.05, 2.0, size=40)
        r = rng.uniform(0.0, 1.5, size=40)
        eta = float(rng.normal())
        base = expected_improvement(mu, sd, eta)
        scaled_haei = heteroscedastic_aei(mu, sd**2, r, eta, 2.0)
        for c in (0.1, 3.0, 250.0):
            assert np.argmax(c * base) == np.argmax(base)
            assert np.argmax(c * scaled_haei) == np.argmax(scaled_haei)
