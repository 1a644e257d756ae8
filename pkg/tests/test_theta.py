import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misclassit import (
    CellCounts,
    Dataset,
    DegenerateError,
    ValidationObs,
    count_cells,
    estimate_theta,
    theta_asymptotic_cov,
)
from misclassit.theta import theta_cov_matrices

from conftest import assert_symmetric_psd, relative_close


def obs(y, yt):
    return ValidationObs(y=y, ytilde=yt, x=np.array([1.0]))


class TestCountCells:
    def test_basic_crosstab(self):
        cells = count_cells([obs(0, 1), obs(1, 1)])
        assert (cells.n10, cells.n11, cells.n00, cells.n01) == (1, 1, 0, 0)

    def test_all_in_one_cell(self):
        cells = count_cells([obs(0, 0)] * 5)
        assert cells.n00 == 5 and cells.n1 == 5

    def test_order_invariance(self):
        rows = [obs(0, 1), obs(1, 1), obs(1, 0), obs(0, 0), obs(1, 1)]
        assert count_cells(rows) == count_cells(rows[::-1])

    def test_accepts_dataset(self):
        data = Dataset(y_val=[0, 1], ytilde_val=[1, 1], x_val=np.ones((2, 1)))
        cells = count_cells(data)
        assert cells.n10 == 1 and cells.n11 == 1


class TestEstimateTheta:
    def test_formula_arithmetic(self):
        est = estimate_theta(CellCounts(n00=7, n01=0, n10=3, n11=0))
        assert est.theta.theta1 == pytest.approx(3.5 / 11)

    def test_zero_cell(self):
        est = estimate_theta(CellCounts(n00=9, n01=0, n10=0, n11=1))
        assert est.theta.theta1 == pytest.approx(0.05)

    def test_no_reference_rows(self):
        est = estimate_theta(CellCounts(n00=0, n01=2, n10=0, n11=8))
        assert est.theta.theta1 == pytest.approx(0.5)

    def test_pi_and_a0(self):
        est = estimate_theta(CellCounts(n00=4, n01=1, n10=2, n11=3))
        assert est.pi_hat.sum() == pytest.approx(1.0)
        assert est.a0_hat == pytest.approx(0.4)

    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
    @settings(max_examples=60)
    def test_always_interior(self, a, b, c, d):
        if a + b + c + d == 0:
            return
        est = estimate_theta(CellCounts(a, b, c, d))
        assert 0.0 < est.theta.theta1 < 1.0
        assert 0.0 < est.theta.theta2 < 1.0

    def test_adjustment_vanishes_asymptotically(self):
        # fixed proportions, growing counts: adjusted -> raw ratio as O(1/n1)
        for scale in (10, 100, 1000, 10000):
            est = estimate_theta(
                CellCounts(n00=7 * scale, n01=2 * scale, n10=3 * scale, n11=8 * scale)
            )
            raw = 3.0 / 10.0
            assert abs(est.theta.theta1 - raw) < 2.0 / (10 * scale)


class TestAsymptoticCov:
    def test_structure(self):
        est = estimate_theta(CellCounts(n00=40, n01=12, n10=8, n11=40))
        cov = theta_asymptotic_cov(est)
        assert_symmetric_psd(cov, sym_tol=1e-12, eig_tol_scale=1e-12)

    def test_scales_inversely_with_n1(self):
        small = estimate_theta(CellCounts(n00=40, n01=12, n10=8, n11=40))
        big = estimate_theta(CellCounts(n00=80, n01=24, n10=16, n11=80))
        np.testing.assert_allclose(
            theta_asymptotic_cov(big), 0.5 * theta_asymptotic_cov(small), rtol=1e-12
        )

    def test_degenerate_event_rate(self):
        with pytest.raises(DegenerateError):
            theta_asymptotic_cov(estimate_theta(CellCounts(n00=10, n01=0, n10=5, n11=0)))

    def test_closed_form_diagonal(self):
        # At exact plug-ins the delta-method covariance collapses to
        # diag(t1(1-t1)/(1-a0), t2(1-t2)/a0).
        a0, t1, t2 = 0.5, 0.1, 0.3
        b0, s22 = theta_cov_matrices(a0, t2 * a0, t1 * (1 - a0))
        got = b0 @ s22 @ b0.T
        want = np.diag([t1 * (1 - t1) / (1 - a0), t2 * (1 - t2) / a0])
        np.testing.assert_allclose(got, want, atol=1e-15)

    def test_monte_carlo_against_plugin(self, rng):
        # Lighter cousin of the acceptance check: 600 samples, 25% band.
        n1, reps = 400, 600
        t1, t2, a0 = 0.1, 0.3, 0.5
        theta_hats = np.empty((reps, 2))
        for r in range(reps):
            y = (rng.random(n1) < a0).astype(int)
            flip = rng.random(n1) < np.where(y == 1, t2, t1)
            yt = np.where(flip, 1 - y, y)
            data = Dataset(y_val=y, ytilde_val=yt, x_val=np.ones((n1, 1)))
            est = estimate_theta(count_cells(data))
            theta_hats[r] = [est.theta.theta1, est.theta.theta2]
        emp = np.cov(np.sqrt(n1) * (theta_hats - [t1, t2]), rowvar=False)
        b0, s22 = theta_cov_matrices(a0, t2 * a0, t1 * (1 - a0))
        assert relative_close(emp, b0 @ s22 @ b0.T, 0.25)
