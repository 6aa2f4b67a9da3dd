import mpmath
import numpy as np
import pytest

from factories import PREDATOR_PREY, definite_system, planted_equilibrium_system, skew_qp_system
from qpstab.certificate import CertificateConfig, Classification, search_certificate, thresholds, symmetrized_form
from qpstab.errors import NotAnEquilibrium
from qpstab.liapunov import (
    chain_rule_Wdot,
    evaluate,
    evaluate_W,
    evaluate_W_batch,
    evaluate_Wdot,
    evaluate_Wdot_batch,
    exp_remainder,
    gradient_W,
    log_ratio,
    positivity_oracle,
)
from qpstab.liapunov import _entropy_term
from qpstab.model import from_lotka_volterra, interaction_matrix, quasimonomials, validate_system

COMPETITIVE = from_lotka_volterra([1.0, 1.0], -np.eye(2))


def test_exp_remainder_against_high_precision():
    mpmath.mp.dps = 50
    d = np.concatenate([np.logspace(-12, 1.5, 300), -np.logspace(-12, 1.5, 300), [0.0]])
    got = exp_remainder(d)
    want = np.array([float(mpmath.expm1(mpmath.mpf(v)) - mpmath.mpf(v)) for v in d])
    np.testing.assert_allclose(got, want, rtol=4e-16, atol=0)
    assert np.all(got >= 0)


def test_entropy_term_against_high_precision():
    mpmath.mp.dps = 50
    r = np.concatenate([1 + np.logspace(-12, 1, 300), 1 - np.logspace(-12, -0.001, 300)])
    got = _entropy_term(r - 1.0, np.log(r))
    want = np.array([float(mpmath.mpf(v) - 1 - mpmath.log(mpmath.mpf(v))) for v in r])
    np.testing.assert_allclose(got, want, rtol=2e-15, atol=0)


def test_log_ratio_against_high_precision():
    mpmath.mp.dps = 50
    xstar = np.full(400, 1.7)
    x = xstar * np.concatenate([1 + np.logspace(-15, 1, 200), 1 - np.logspace(-15, -0.01, 200)])
    want = np.array([float(mpmath.log(mpmath.mpf(a) / mpmath.mpf(b))) for a, b in zip(x, xstar)])
    np.testing.assert_allclose(log_ratio(x, xstar), want, rtol=4e-16, atol=0)


class TestW:
    def test_zero_at_equilibrium(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 3, 5)
        assert evaluate_W(sys, np.ones(5), xstar, xstar) == 0.0

    def test_hand_value(self):
        assert evaluate_W(COMPETITIVE, [1.0, 1.0], [1.0, 1.0], [2.0, 1.0]) == pytest.approx(
            1 - np.log(2), rel=1e-15)

    def test_full_relative_accuracy_near_equilibrium(self):
        mpmath.mp.dps = 50
        sys = validate_system([0.0, 0.0], np.zeros((2, 3)), [[1.0, 0.0], [0.5, -1.5], [2.0, 1.0]])
        xstar = np.array([1.3, 0.7])
        c = np.array([0.5, 1.0, 2.0])
        for eps in (1e-3, 1e-6, 1e-9):
            x = xstar * np.array([1 + eps, 1 - 0.6 * eps])
            lx = [mpmath.log(mpmath.mpf(a) / mpmath.mpf(b)) for a, b in zip(x, xstar)]
            ref = 0
            for i in range(3):
                d = sum(mpmath.mpf(sys.B[i, j]) * lx[j] for j in range(2))
                phis = mpmath.exp(sum(mpmath.mpf(sys.B[i, j]) * mpmath.log(xstar[j]) for j in range(2)))
                ref += mpmath.mpf(c[i]) * phis * (mpmath.expm1(d) - d)
            assert evaluate_W(sys, c, xstar, x) == pytest.approx(float(ref), rel=1e-14)
            assert positivity_oracle(sys, c, xstar, x) == pytest.approx(float(ref), rel=1e-14)

    def test_batch_matches_pointwise(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 3, 4)
        c = rng.uniform(0.5, 2, 4)
        X = rng.uniform(0.1, 10, (50, 3))
        np.testing.assert_allclose(evaluate_W_batch(sys, c, xstar, X),
                                   [evaluate_W(sys, c, xstar, x) for x in X], rtol=1e-14)

    def test_raw_formula_far_from_equilibrium(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 2, 4)
        c = rng.uniform(0.5, 2, 4)
        ps = quasimonomials(sys, xstar)
        for x in rng.uniform(0.1, 10, (50, 2)):
            p = quasimonomials(sys, x)
            raw = np.sum(c * (p - ps - ps * np.log(p / ps)))
            assert evaluate_W(sys, c, xstar, x) == pytest.approx(raw, rel=1e-10)


class TestWdot:
    def test_hand_value(self):
        assert evaluate_Wdot(COMPETITIVE, [1.0, 1.0], [1.0, 1.0], [2.0, 3.0]) == pytest.approx(-5.0)

    def test_conservative_is_zero(self, rng):
        sys = from_lotka_volterra(**PREDATOR_PREY)
        for x in rng.uniform(0.1, 10, (20, 2)):
            assert evaluate_Wdot(sys, [1.0, 1.0], [1.0, 1.0], x) == 0.0
            assert chain_rule_Wdot(sys, [1.0, 1.0], [1.0, 1.0], x) == pytest.approx(0.0, abs=1e-12)

    def test_zero_at_equilibrium(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 3, 4)
        assert evaluate_Wdot(sys, np.ones(4), xstar, xstar) == 0.0
        assert chain_rule_Wdot(sys, np.ones(4), xstar, xstar) == 0.0

    def test_gated_on_equilibrium(self):
        with pytest.raises(NotAnEquilibrium):
            evaluate_Wdot(COMPETITIVE, [1.0, 1.0], [2.0, 1.0], [1.5, 1.5])
        with pytest.raises(NotAnEquilibrium):
            chain_rule_Wdot(COMPETITIVE, [1.0, 1.0], [2.0, 1.0], [1.5, 1.5])

    def test_batch_matches_pointwise(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 3, 5)
        c = rng.uniform(0.5, 2, 5)
        X = rng.uniform(0.2, 5, (40, 3))
        np.testing.assert_allclose(evaluate_Wdot_batch(sys, c, xstar, X),
                                   [evaluate_Wdot(sys, c, xstar, x) for x in X], rtol=1e-12)

    def test_chain_rule_identity(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n, 7))
            sys, xstar = planted_equilibrium_system(rng, n, m)
            c = rng.uniform(0.2, 3, m)
            x = xstar * np.exp(rng.uniform(-1, 1, n))
            a, b = evaluate_Wdot(sys, c, xstar, x), chain_rule_Wdot(sys, c, xstar, x)
            assert a == pytest.approx(b, rel=1e-10, abs=1e-13)

    def test_evaluate_bundle(self):
        ev = evaluate(COMPETITIVE, [1.0, 1.0], [1.0, 1.0], [2.0, 3.0])
        assert ev.Wdot == pytest.approx(-5.0)
        np.testing.assert_allclose(ev.gradW, [0.5, 2 / 3])


class TestGradient:
    def test_zero_at_equilibrium(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 3, 5)
        np.testing.assert_array_equal(gradient_W(sys, np.ones(5), xstar, xstar), np.zeros(3))

    def test_lotka_volterra_closed_form(self, rng):
        xstar = rng.uniform(0.5, 2, 3)
        A = -np.eye(3)
        sys = from_lotka_volterra(-A @ xstar, A)
        x = rng.uniform(0.1, 10, 3)
        np.testing.assert_allclose(gradient_W(sys, np.ones(3), xstar, x), 1 - xstar / x, rtol=1e-14)

    def test_finite_differences(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n, 7))
            sys, xstar = planted_equilibrium_system(rng, n, m, bound=1.5)
            c = rng.uniform(0.2, 3, m)
            x = xstar * np.exp(rng.uniform(-1, 1, n))
            g = gradient_W(sys, c, xstar, x)
            fd = np.empty(n)
            for j in range(n):
                h = 1e-6 * x[j]
                e = np.zeros(n)
                e[j] = h
                fd[j] = (evaluate_W(sys, c, xstar, x + e) - evaluate_W(sys, c, xstar, x - e)) / (2 * h)
            scale = max(np.max(np.abs(g)), 1e-3)
            assert np.max(np.abs(fd - g)) <= 1e-6 * scale


class TestSignContract:
    def test_definite(self, rng):
        for _ in range(10):
            sys, xstar, c0 = definite_system(rng, 3)
            X = xstar * np.exp(rng.uniform(-1, 1, (200, 3)))
            assert np.all(evaluate_Wdot_batch(sys, c0, xstar, X) < 0)

    def test_semidefinite(self, rng):
        sys = skew_qp_system()
        cert = search_certificate(interaction_matrix(sys))
        assert cert.classification is Classification.NEGATIVE_SEMIDEFINITE
        M = symmetrized_form(interaction_matrix(sys), cert.scaling)
        _, tau = thresholds(M, CertificateConfig())
        X = np.exp(rng.uniform(-2, 2, (200, 2)))
        dphi = np.exp(np.log(X) @ sys.B.T) - 1.0  # phi(x*) = 1
        wdot = evaluate_Wdot_batch(sys, cert.scaling, [1.0, 1.0], X)
        assert np.all(wdot <= tau * np.sum(dphi**2, axis=1))


class TestPositivityOracle:
    def test_square_case(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 3, 3)
        c = rng.uniform(0.5, 2, 3)
        X = rng.uniform(0.1, 10, (100, 3))
        np.testing.assert_allclose(positivity_oracle(sys, c, xstar, X),
                                   evaluate_W_batch(sys, c, xstar, X), rtol=1e-12)

    def test_one_state_two_monomials(self, rng):
        sys = validate_system([-3.0], [[1.0, 2.0]], [[1.0], [2.0]])
        xstar = np.array([1.0])
        c = np.array([0.7, 1.3])
        X = rng.uniform(0.1, 10, (100, 1))
        np.testing.assert_allclose(positivity_oracle(sys, c, xstar, X),
                                   evaluate_W_batch(sys, c, xstar, X), rtol=1e-12)

    def test_zero_at_equilibrium(self, rng):
        sys, xstar = planted_equilibrium_system(rng, 2, 4)
        assert positivity_oracle(sys, np.ones(4), xstar, xstar) == 0.0

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            positivity_oracle(COMPETITIVE, [1.0, 1.0], [1.0, 1.0], [0.0, 1.0])
