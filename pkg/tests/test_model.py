import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misclassit import (
    Dataset,
    DomainError,
    IdentifiabilityError,
    MisclassProbs,
    h1,
    h2,
    h3,
    pseudo_loglik,
    psi,
    score,
    score_jacobian,
    population_score_jacobian,
)
from misclassit.model import THETA_BOX, h3_reciprocal_bound, log_psi, score_parts

from conftest import random_dataset

LN9 = math.log(9.0)


class TestPsi:
    def test_anchor_values(self):
        assert psi(0.0) == 0.5
        assert psi(LN9) == pytest.approx(0.9, abs=1e-15)
        assert psi(-LN9) == pytest.approx(0.1, abs=1e-15)

    @given(st.floats(-700, 700))
    def test_complement_identity(self, u):
        assert abs(psi(u) + psi(-u) - 1.0) <= 1e-15

    @given(st.floats(-30, 20), st.floats(1e-6, 10))
    def test_strictly_increasing(self, u, step):
        # strictness is float-visible only before the link saturates
        assert psi(u + step) > psi(u)

    def test_saturates_without_overflow(self):
        assert psi(800.0) == 1.0
        assert psi(-800.0) == pytest.approx(0.0, abs=1e-300)
        assert np.isfinite(log_psi(-800.0))


class TestH1:
    def test_anchor_values(self):
        np.testing.assert_allclose(h1(np.zeros(2), 1, np.array([1.0, 2.0])), [0.5, 1.0])
        np.testing.assert_allclose(
            h1(np.array([LN9]), 0, np.array([1.0])), [-0.9], atol=1e-15
        )

    def test_residual_vanishes_at_saturation(self):
        out = h1(np.array([40.0]), 1, np.array([1.0]))
        assert np.max(np.abs(out)) < 1e-15

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            h1(np.zeros(3), 1, np.array([1.0, 2.0]))


class TestH3:
    def test_anchor_value(self):
        assert h3(np.zeros(1), (0.1, 0.3), np.array([1.0])) == pytest.approx(0.4)

    def test_no_misclassification_reduces_to_psi(self, rng):
        x = rng.normal(size=5)
        b = rng.normal(size=5)
        assert h3(b, (0.0, 0.0), x) == pytest.approx(psi(x @ b), abs=1e-15)

    def test_reciprocal_bound_random_triples(self, rng):
        d1, d2 = THETA_BOX
        m0 = h3_reciprocal_bound()
        t1 = rng.uniform(d1, d2, 20000)
        t2 = rng.uniform(d1, d2, 20000)
        u = rng.normal(scale=30, size=20000)
        ps = psi(u)
        vals = 1.0 / ((t1 * (1 - ps) + (1 - t2) * ps) * ((1 - t1) * (1 - ps) + t2 * ps))
        assert np.all(vals >= 4.0)
        assert np.all(vals < m0)


class TestH2:
    def test_zero_when_ytilde_matches_h3(self, rng):
        x = rng.normal(size=3)
        b = rng.normal(size=3)
        target = h3(b, (0.2, 0.25), x)
        np.testing.assert_allclose(h2(b, (0.2, 0.25), target, x), np.zeros(3), atol=1e-16)

    def test_anchor_value(self):
        out = h2(np.zeros(1), (0.1, 0.3), 1, np.array([1.0]))
        assert out[0] == pytest.approx(0.375)

    def test_identifiability_error(self):
        with pytest.raises(IdentifiabilityError):
            h2(np.zeros(1), (0.4, 0.6), 1, np.array([1.0]))

    @given(st.floats(0.1, 10), st.integers(0, 1))
    @settings(max_examples=25)
    def test_linear_prefactor_scaling(self, c, ytilde):
        # Scaling x by c while dividing beta by c keeps the residual factor
        # fixed and scales the output linearly.
        rng = np.random.default_rng(7)
        x = rng.normal(size=3)
        b = rng.normal(size=3)
        theta = (0.15, 0.2)
        np.testing.assert_allclose(
            h2(b / c, theta, ytilde, c * x), c * h2(b, theta, ytilde, x), rtol=1e-12
        )
        np.testing.assert_allclose(
            h1(b / c, ytilde, c * x), c * h1(b, ytilde, x), rtol=1e-12
        )


def _fd_gradient(fun, beta, step=1e-5):
    g = np.zeros_like(beta)
    for j in range(beta.size):
        h = step * (1.0 + abs(beta[j]))
        bp, bm = beta.copy(), beta.copy()
        bp[j] += h
        bm[j] -= h
        g[j] = (fun(bp) - fun(bm)) / (2.0 * h)
    return g


class TestPseudoLoglik:
    def test_single_observation_anchor(self):
        data = Dataset(y_val=[1], ytilde_val=[1], x_val=np.zeros((1, 1)))
        value = pseudo_loglik(data, np.array([5.0]) * 0.0, MisclassProbs(0.1, 0.3))
        assert value == pytest.approx(math.log(0.7) + math.log(0.5))

    def test_validation_only_is_logistic_up_to_constant(self, rng):
        data = random_dataset(rng, n=40, p=2, n1=40)
        theta = MisclassProbs(0.2, 0.2)

        def plain(beta):
            u = data.x_val @ beta
            return float(np.sum(data.y_val * log_psi(u) + (1 - data.y_val) * log_psi(-u))) / data.n

        b1, b2 = rng.normal(size=2), rng.normal(size=2)
        gap1 = pseudo_loglik(data, b1, theta) - plain(b1)
        gap2 = pseudo_loglik(data, b2, theta) - plain(b2)
        assert gap1 == pytest.approx(gap2, abs=1e-12)

    def test_rejects_boundary_theta(self, rng):
        data = random_dataset(rng, n=20, p=1)
        with pytest.raises(DomainError):
            pseudo_loglik(data, np.zeros(1), MisclassProbs(0.0, 0.3))

    def test_score_is_gradient(self, rng):
        data = random_dataset(rng, n=50, p=2)
        theta = MisclassProbs(0.12, 0.27)
        beta = rng.normal(size=2)
        grad = _fd_gradient(lambda b: pseudo_loglik(data, b, theta), beta)
        np.testing.assert_allclose(score(data, beta, theta), grad, atol=1e-6)


class TestScore:
    def test_validation_only_equals_logistic_score(self, rng):
        data = random_dataset(rng, n=30, p=2, n1=30)
        beta = rng.normal(size=2)
        expected = data.x_val.T @ (data.y_val - psi(data.x_val @ beta)) / data.n
        np.testing.assert_allclose(
            score(data, beta, MisclassProbs(0.1, 0.3)), expected, atol=1e-15
        )

    def test_balanced_validation_zeroes_first_part(self):
        # x'beta = 0 on all rows and y balanced: residuals cancel exactly.
        data = Dataset(
            y_val=[0, 1], ytilde_val=[0, 1], x_val=np.ones((2, 1)),
            ytilde_nv=[1], x_nv=np.ones((1, 1)),
        )
        z1, _ = score_parts(data, np.zeros(1), MisclassProbs(0.1, 0.3))
        np.testing.assert_allclose(z1, 0.0, atol=1e-16)

    def test_identifiability_guard(self, rng):
        data = random_dataset(rng, n=30, p=1)
        with pytest.raises(IdentifiabilityError):
            score(data, np.zeros(1), MisclassProbs(0.5, 0.5))


class TestScoreJacobian:
    def test_validation_only_anchor(self):
        data = Dataset(y_val=[0, 1], ytilde_val=[0, 1], x_val=np.ones((2, 1)))
        jac = score_jacobian(data, np.zeros(1), MisclassProbs(0.1, 0.3))
        assert jac[0, 0] == pytest.approx(-0.25)

    def test_matches_finite_differences(self, rng):
        data = random_dataset(rng, n=70, p=3)
        theta = MisclassProbs(0.15, 0.25)
        beta = rng.normal(size=3)
        jac = score_jacobian(data, beta, theta)
        fd = np.column_stack(
            [
                _fd_gradient(lambda b, i=i: score(data, b, theta)[i], beta, step=1e-6)
                for i in range(3)
            ]
        ).T
        assert np.max(np.abs(jac - fd)) <= 1e-5 * (1.0 + np.max(np.abs(jac)))

    def test_symmetric_for_validation_only(self, rng):
        data = random_dataset(rng, n=40, p=3, n1=40)
        jac = score_jacobian(data, rng.normal(size=3), MisclassProbs(0.1, 0.3))
        assert np.max(np.abs(jac - jac.T)) < 1e-10

    def test_population_hand_value(self):
        jac = population_score_jacobian(np.ones((3, 1)), np.zeros(1), (0.1, 0.3), 0.5)
        assert jac[0, 0] == pytest.approx(-0.171875)
