"""Group-dependent misclassification and the one-sided (theta2 = 0) variant.

Differential misclassification partitions the rows into K known groups,
each with its own rate pair estimated from that group's validation rows.
A single coefficient vector solves the group-share weighted sum of
per-group two-part scores,

    sum_k (n_k / n) * [ f_k * mean_val_k h1 + (1 - f_k) * mean_nonval_k h2(theta_k) ],

which is exactly the pooled score when all groups share the same rates.

The one-sided variant pins theta2 = 0 (a surrogate that never misses true
events), estimates theta1 as usual, and zeroes every entry of the
rate-estimate covariance block except its (1,1) element.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .covariance import CovarianceBundle, assemble_bundle, estimate_bundle
from .data import Dataset, MisclassProbs, RegressionCoef
from .errors import DomainError, IdentifiabilityError, NonConvergence, SingularJacobian
from .estimators import (
    FitResult,
    FitWarning,
    Method,
    SolverOptions,
    _common_warnings,
    _run_newton,
    fit_naive,
    fit_pmle,
)
from .model import psi, require_identifiable, score, score_jacobian
from .theta import ThetaEstimate, estimate_theta_from_dataset, theta_cov_matrices

# Advisory bound on the linear predictor for the one-sided variant.
LINEAR_PREDICTOR_BOUND = 30.0
ONE_MINUS_H3_FLOOR = 1e-12


@dataclass(frozen=True)
class GroupedDataset:
    """K datasets sharing covariate dimension and intercept convention."""

    groups: tuple[Dataset, ...]

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise DomainError("at least one group is required")
        p = groups[0].p
        intercept = groups[0].has_intercept
        for g in groups[1:]:
            if g.p != p or g.has_intercept != intercept:
                raise DomainError("groups must share p and the intercept convention")
        object.__setattr__(self, "groups", groups)

    @property
    def K(self) -> int:
        return len(self.groups)

    @property
    def n(self) -> int:
        return sum(g.n for g in self.groups)

    @property
    def p(self) -> int:
        return self.groups[0].p

    def pooled(self) -> Dataset:
        """All rows merged into one dataset (used for warm starts)."""
        if self.K == 1:
            return self.groups[0]
        return Dataset(
            y_val=np.concatenate([g.y_val for g in self.groups]),
            ytilde_val=np.concatenate([g.ytilde_val for g in self.groups]),
            x_val=np.vstack([g.x_val for g in self.groups]),
            ytilde_nv=np.concatenate([g.ytilde_nv for g in self.groups]),
            x_nv=np.vstack([g.x_nv for g in self.groups]),
            has_intercept=self.groups[0].has_intercept,
        )


def grouped_score(gd: GroupedDataset, beta, thetas) -> np.ndarray:
    """Group-share weighted sum of per-group two-part scores."""
    n = gd.n
    total = np.zeros(gd.p)
    for g, th in zip(gd.groups, thetas):
        total += (g.n / n) * score(g, beta, th)
    return total


def grouped_score_jacobian(gd: GroupedDataset, beta, thetas) -> np.ndarray:
    n = gd.n
    total = np.zeros((gd.p, gd.p))
    for g, th in zip(gd.groups, thetas):
        total += (g.n / n) * score_jacobian(g, beta, th)
    return total


def fit_pmle_grouped(
    gd: GroupedDataset, opts: SolverOptions | None = None
) -> tuple[FitResult, tuple[ThetaEstimate, ...]]:
    """Shared-beta fit with per-group misclassification rates.

    Raises ``IdentifiabilityError`` tagged with the group index when a
    group's rate estimates sit on theta1 + theta2 = 1.
    """
    opts = opts or SolverOptions()
    theta_ests = []
    for k, g in enumerate(gd.groups):
        est = estimate_theta_from_dataset(g)
        if g.n2:
            try:
                require_identifiable(est.theta)
            except IdentifiabilityError as exc:
                raise IdentifiabilityError(f"group {k}: {exc}") from exc
        theta_ests.append(est)
    thetas = [e.theta for e in theta_ests]

    def system(beta):
        return grouped_score(gd, beta, thetas), grouped_score_jacobian(gd, beta, thetas)

    if opts.start is not None:
        start = opts.start.beta.copy()
    else:
        naive = fit_naive(gd.pooled(), SolverOptions(tol=opts.tol, max_iter=opts.max_iter))
        start = naive.beta.copy() if naive.converged else np.zeros(gd.p)
    sol, diag, ok = _run_newton(system, start, opts)
    final = float(np.max(np.abs(grouped_score(gd, sol, thetas))))
    fit = FitResult(
        method=Method.PMLE,
        beta_hat=RegressionCoef(sol),
        theta_hat=None,
        converged=ok,
        iterations=diag.iterations,
        final_score_norm=final,
        warnings=tuple(_common_warnings(diag, sol)),
    )
    return fit, tuple(theta_ests)


def grouped_covariance(
    gd: GroupedDataset, fit: FitResult, theta_ests
) -> CovarianceBundle:
    """Sandwich covariance for the grouped fit.

    The validation score block is shared (pooled over all rows, weighted
    by the overall validation fraction f = sum_k (n_k/n) f_k); the
    rate-estimation and surrogate blocks are assembled per group and
    added with group-share weights.  For K = 1 this is identical to
    ``estimate_bundle``; for K > 1 the per-group block fields of the
    returned bundle are stacked along a leading group axis.
    """
    beta = fit.beta_hat.beta
    n = gd.n
    if gd.K == 1:
        return estimate_bundle(gd.groups[0], fit.beta_hat, theta_ests[0])
    omegas = np.array([g.n / n for g in gd.groups])
    f = float(sum(w * g.f_n for w, g in zip(omegas, gd.groups)))
    sub = [
        assemble_bundle(g.x_all, beta, est.theta, est, g.f_n, g.n)
        for g, est in zip(gd.groups, theta_ests)
    ]
    x_all = np.vstack([g.x_all for g in gd.groups])
    u = x_all @ beta
    w_all = psi(u) * psi(-u)
    sigma11 = 0.5 * ((x_all.T * w_all) @ x_all / x_all.shape[0])
    sigma11 = sigma11 + sigma11.T
    # Each group's sigma0 is f_k*Sigma11_k plus its three own terms.
    sigma0 = f * sigma11 + sum(
        w * (b.sigma0 - g.f_n * b.sigma11) for w, g, b in zip(omegas, gd.groups, sub)
    )
    zdot = -(f * sigma11 + sum(
        w * (1.0 - g.f_n) * b.gamma for w, g, b in zip(omegas, gd.groups, sub)
    ))
    zinv = np.linalg.solve(zdot, np.eye(gd.p))
    beta_cov = zinv @ sigma0 @ zinv.T / n
    beta_cov = 0.5 * (beta_cov + beta_cov.T)
    return CovarianceBundle(
        sigma11=sigma11,
        sigma21=np.stack([b.sigma21 for b in sub]),
        sigma22=np.stack([b.sigma22 for b in sub]),
        gamma=np.stack([b.gamma for b in sub]),
        a0_mat=np.stack([b.a0_mat for b in sub]),
        b0_mat=np.stack([b.b0_mat for b in sub]),
        zdot=zdot,
        sigma0=0.5 * (sigma0 + sigma0.T),
        beta_cov=beta_cov,
        f_used=f,
    )


def _theta2_zero_estimate(dataset: Dataset) -> ThetaEstimate:
    est = estimate_theta_from_dataset(dataset)
    return replace(est, theta=MisclassProbs(est.theta.theta1, 0.0))


def fit_pmle_theta2_zero(dataset: Dataset, opts: SolverOptions | None = None) -> FitResult:
    """Plug-in fit with the false-negative rate pinned to zero.

    Intended for bounded covariates; a fitted linear predictor exceeding
    30 in magnitude is flagged with SEPARATION_SUSPECTED rather than
    rejected.  The conditional surrogate mean becomes
    ``h3 = theta1 + (1 - theta1)*psi``, bounded away from 1 only through
    the linear predictor, so the fit verifies 1 - h3 stayed above 1e-12
    at the solution.
    """
    est = _theta2_zero_estimate(dataset)
    fit = fit_pmle(dataset, opts, theta=est.theta)
    u = dataset.x_all @ fit.beta
    one_minus_h3 = (1.0 - est.theta.theta1) * psi(-u)
    if np.any(one_minus_h3 < ONE_MINUS_H3_FLOOR):
        raise DomainError("1 - h3 fell below 1e-12; covariates too unbounded for theta2=0")
    warnings = fit.warnings
    if float(np.max(np.abs(u))) > LINEAR_PREDICTOR_BOUND and (
        FitWarning.SEPARATION_SUSPECTED not in warnings
    ):
        warnings = warnings + (FitWarning.SEPARATION_SUSPECTED,)
    return replace(fit, warnings=warnings, theta_estimate=est)


def theta2_zero_covariance(dataset: Dataset, fit: FitResult) -> CovarianceBundle:
    """Covariance for the theta2 = 0 fit.

    Identical pipeline to ``estimate_bundle`` with theta2 = 0 in every
    integrand; the rate-estimate covariance block keeps only its (1,1)
    entry because only theta1 is estimated.
    """
    est = fit.theta_estimate or _theta2_zero_estimate(dataset)
    theta = MisclassProbs(est.theta.theta1, 0.0)
    b0_mat, sigma22 = theta_cov_matrices(
        est.a0_hat, float(est.pi_hat[1]), float(est.pi_hat[2])
    )
    t_full = b0_mat @ sigma22 @ b0_mat.T
    t_zeroed = np.zeros((2, 2))
    t_zeroed[0, 0] = t_full[0, 0]
    return assemble_bundle(
        dataset.x_all,
        fit.beta_hat.beta,
        theta,
        replace(est, theta=theta),
        dataset.f_n,
        dataset.n,
        theta_cov_override=t_zeroed,
    )
