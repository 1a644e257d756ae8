import math
import pathlib

import numpy as np
import pytest

from misclassit import (
    Dataset,
    FitWarning,
    Method,
    MisclassProbs,
    SimConfig,
    SolverOptions,
    fit_cmle,
    fit_jmle,
    fit_naive,
    fit_pmle,
    generate_dataset,
    model_a,
    pseudo_loglik,
)
from misclassit.cli import load_dataset
from misclassit.rng import substream

from conftest import random_dataset

DATA_DIR = pathlib.Path(__file__).parent / "data"


def golden_section_max(fun, lo, hi, tol=1e-7):
    """Independent 1-d maximizer used as the oracle for the p=1 fit."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while abs(b - a) > tol:
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
        else:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
    return 0.5 * (a + b)


class TestFitNaive:
    def test_intercept_only_closed_form(self):
        data = Dataset(
            y_val=[0, 0, 0, 1], ytilde_val=[1, 1, 0, 0], x_val=np.ones((4, 1)),
            ytilde_nv=[0, 0, 0, 0], x_nv=np.ones((4, 1)),
        )
        fit = fit_naive(data, SolverOptions(tol=1e-12))
        assert fit.converged
        assert fit.beta[0] == pytest.approx(math.log(1.0 / 3.0), abs=1e-8)

    def test_perfect_separation_flagged(self):
        x = np.linspace(-2, 2, 20).reshape(-1, 1)
        y = (x[:, 0] > 0).astype(int)
        fit = fit_naive(Dataset(y_val=y, ytilde_val=y, x_val=x))
        assert (FitWarning.SEPARATION_SUSPECTED in fit.warnings) or not fit.converged

    def test_matches_lattice_grid_search(self):
        data = load_dataset(DATA_DIR / "naive_fixture.csv")
        fit = fit_naive(data)
        assert fit.converged

        yt = data.ytilde_val.astype(float)
        x = data.x_val

        def loglik(beta):
            u = x @ beta
            return float(np.sum(yt * u - np.logaddexp(0.0, u)))

        # Coarse lattice over [-3,3]^2, then a 1e-3 lattice around the
        # coarse argmax; never touches the Newton solution.
        coarse = np.arange(-3.0, 3.0001, 0.05)
        best, best_val = None, -np.inf
        for b1 in coarse:
            for b2 in coarse:
                v = loglik(np.array([b1, b2]))
                if v > best_val:
                    best, best_val = (b1, b2), v
        fine1 = np.arange(best[0] - 0.06, best[0] + 0.0601, 1e-3)
        fine2 = np.arange(best[1] - 0.06, best[1] + 0.0601, 1e-3)
        for b1 in fine1:
            for b2 in fine2:
                v = loglik(np.array([b1, b2]))
                if v > best_val:
                    best, best_val = (b1, b2), v
        np.testing.assert_allclose(fit.beta, best, atol=2e-3)


class TestFitPmle:
    def test_validation_only_equals_plain_logistic(self, rng):
        data = random_dataset(rng, n=50, p=2, n1=50)
        tight = SolverOptions(tol=1e-12)
        pml = fit_pmle(data, tight)
        plain = fit_naive(
            Dataset(y_val=data.y_val, ytilde_val=data.y_val, x_val=data.x_val), tight
        )
        assert pml.converged and plain.converged
        np.testing.assert_allclose(pml.beta, plain.beta, atol=1e-8)

    def test_matches_golden_section_oracle(self):
        data = load_dataset(DATA_DIR / "tiny_fixture.csv")
        fit = fit_pmle(data)
        assert fit.converged
        theta = fit.theta_hat
        argmax = golden_section_max(
            lambda b: pseudo_loglik(data, np.array([b]), theta), -10.0, 10.0
        )
        assert fit.beta[0] == pytest.approx(argmax, abs=1e-4)

    def test_zero_theta_reduces_to_pooled_logistic(self, rng):
        data = random_dataset(rng, n=80, p=2)
        pml = fit_pmle(data, theta=MisclassProbs(0.0, 0.0))
        pooled = fit_naive(
            Dataset(
                y_val=data.y_val, ytilde_val=data.y_val, x_val=data.x_val,
                ytilde_nv=data.ytilde_nv, x_nv=data.x_nv,
            )
        )
        np.testing.assert_allclose(pml.beta, pooled.beta, atol=1e-8)

    def test_row_order_invariance(self, rng):
        data = random_dataset(rng, n=60, p=2)
        perm_v = rng.permutation(data.n1)
        perm_n = rng.permutation(data.n2)
        shuffled = Dataset(
            y_val=data.y_val[perm_v], ytilde_val=data.ytilde_val[perm_v],
            x_val=data.x_val[perm_v], ytilde_nv=data.ytilde_nv[perm_n],
            x_nv=data.x_nv[perm_n],
        )
        np.testing.assert_allclose(fit_pmle(data).beta, fit_pmle(shuffled).beta, atol=1e-10)

    def test_deterministic_bitwise(self, rng):
        data = random_dataset(rng, n=60, p=2)
        opts = SolverOptions()
        a, b = fit_pmle(data, opts), fit_pmle(data, opts)
        assert np.array_equal(a.beta, b.beta)
        assert a.final_score_norm == b.final_score_norm

    def test_converged_norm_within_tol(self, rng):
        opts = SolverOptions(tol=1e-9)
        for k in range(3):
            data = random_dataset(rng, n=70, p=2)
            fit = fit_pmle(data, opts)
            if fit.converged:
                assert fit.final_score_norm <= opts.tol

    def test_monte_carlo_consistency_model_a(self):
        # mean over 50 replications at n=10000, n1=2000 lands near truth
        model = model_a()
        cfg = SimConfig(n=10000, f_n=0.2, reps=50, seed=5150)
        betas = []
        for r in range(cfg.reps):
            data = generate_dataset(model, cfg, substream(cfg.seed, r))
            fit = fit_pmle(data)
            assert fit.converged
            betas.append(fit.beta)
        mean_beta = np.mean(betas, axis=0)
        np.testing.assert_allclose(mean_beta, model.beta0, atol=0.05)


class TestFitJmle:
    def test_beta_subsystem_with_theta_fixed(self, rng):
        data = random_dataset(rng, n=60, p=2, n1=60)
        fit = fit_jmle(data, theta_fixed=MisclassProbs(0.1, 0.3))
        assert fit.converged
        assert fit.final_score_norm <= 1e-8

    def test_validation_only_theta_is_raw_cell_ratio(self, rng):
        data = random_dataset(rng, n=400, p=2, n1=400, theta=(0.25, 0.3))
        fit = fit_jmle(data)
        assert fit.converged
        y, yt = data.y_val, data.ytilde_val
        raw1 = np.sum((yt == 1) & (y == 0)) / np.sum(y == 0)
        raw2 = np.sum((yt == 0) & (y == 1)) / np.sum(y == 1)
        assert fit.theta_hat.theta1 == pytest.approx(raw1, abs=1e-7)
        assert fit.theta_hat.theta2 == pytest.approx(raw2, abs=1e-7)


class TestFitCmle:
    def test_theta_frozen_at_zero_reduces_to_naive(self, rng):
        data = random_dataset(rng, n=60, p=2)
        frozen = fit_cmle(data, theta_fixed=MisclassProbs(0.0, 0.0))
        naive = fit_naive(data)
        assert frozen.converged
        np.testing.assert_allclose(frozen.beta, naive.beta, atol=1e-7)

    def test_duplication_invariance(self, rng):
        data = random_dataset(rng, n=40, p=2, theta=(0.2, 0.2))
        doubled = Dataset(
            y_val=np.tile(data.y_val, 2), ytilde_val=np.tile(data.ytilde_val, 2),
            x_val=np.tile(data.x_val, (2, 1)), ytilde_nv=np.tile(data.ytilde_nv, 2),
            x_nv=np.tile(data.x_nv, (2, 1)),
        )
        a, b = fit_cmle(data), fit_cmle(doubled)
        if a.converged and b.converged:
            np.testing.assert_allclose(a.beta, b.beta, atol=1e-6)
            np.testing.assert_allclose(
                a.theta_hat.as_array(), b.theta_hat.as_array(), atol=1e-6
            )

    def test_near_nonidentifiable_warning(self):
        # Covariates tightly around zero keep every fitted probability in
        # the nearly-linear band.
        rng = np.random.default_rng(8)
        x = rng.normal(scale=0.1, size=(200, 1))
        y = (rng.random(200) < 0.5).astype(int)
        data = Dataset(y_val=y[:50], ytilde_val=y[:50], x_val=x[:50],
                       ytilde_nv=y[50:], x_nv=x[50:])
        fit = fit_cmle(data)
        assert FitWarning.NEAR_NONIDENTIFIABLE in fit.warnings


class TestFitResultContract:
    def test_method_tags_and_theta_presence(self, rng):
        data = random_dataset(rng, n=60, p=2)
        assert fit_naive(data).method is Method.NAIVE
        pml = fit_pmle(data)
        assert pml.method is Method.PMLE
        assert pml.theta_hat is not None and pml.theta_estimate is not None
        assert fit_jmle(data).method is Method.JMLE
        assert fit_cmle(data).method is Method.CMLE
