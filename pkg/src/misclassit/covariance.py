"""Plug-in sandwich covariance for the plug-in estimator, and Wald intervals.

The large-sample covariance of the coefficient estimate has the sandwich
form ``Zdot^{-1} Sigma0 Zdot^{-T} / n``.  ``Sigma0`` collects four pieces:
the validation score covariance, the surrogate score covariance, and two
terms induced by estimating the misclassification rates from the same
validation rows,

    Sigma0 = f*Sigma11
           + (1-f) * (A0 B0 Sigma21 + (A0 B0 Sigma21)')
           + ((1-f)^2 / f) * A0 B0 Sigma22 B0' A0'
           + (1-f) * Gamma.

Every block is an explicit integrand averaged over the empirical covariate
distribution of all n rows, evaluated at the fitted (beta, theta); the
limiting validation fraction f is replaced by the observed n1/n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, MisclassProbs, RegressionCoef
from .errors import DegenerateError, DomainError, SingularZdot
from .estimators import FitResult
from .model import psi, require_identifiable
from .special import norm_ppf
from .theta import A0_BOUNDARY_TOL, ThetaEstimate, theta_cov_matrices

COND_LIMIT = 1e12


@dataclass(frozen=True)
class CovarianceBundle:
    """All plug-in matrices behind the sandwich, plus the result.

    sigma11 : p x p, covariance of the validation score term
    sigma21 : 3 x p, cell-indicator / validation-score cross-covariance
    sigma22 : 3 x 3, cell-indicator covariance
    gamma   : p x p, covariance of the surrogate score term
    a0_mat  : p x 2, derivative of the mean surrogate score in theta
    b0_mat  : 2 x 3, derivative of the rate estimates in the cell means
    zdot    : p x p, limit derivative of the two-part score
    sigma0  : p x p, assembled score covariance
    beta_cov: p x p, sandwich covariance of the coefficient estimate
    f_used  : validation fraction entering the assembly
    """

    sigma11: np.ndarray
    sigma21: np.ndarray
    sigma22: np.ndarray
    gamma: np.ndarray
    a0_mat: np.ndarray
    b0_mat: np.ndarray
    zdot: np.ndarray
    sigma0: np.ndarray
    beta_cov: np.ndarray
    f_used: float


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _integrands(x: np.ndarray, beta: np.ndarray, theta: MisclassProbs):
    """Per-row pieces shared by all blocks: w, w^2/(h3(1-h3)), psi(1-psi)^2/(h3(1-h3))."""
    t1, t2 = theta.theta1, theta.theta2
    u = x @ beta
    ps = psi(u)
    om = psi(-u)
    w = ps * om
    doh = (t1 * om + (1.0 - t2) * ps) * ((1.0 - t1) * om + t2 * ps)
    return ps, om, w, doh


def _theta_block(theta_est: ThetaEstimate) -> tuple[np.ndarray, np.ndarray]:
    a0 = theta_est.a0_hat
    if a0 < A0_BOUNDARY_TOL or a0 > 1.0 - A0_BOUNDARY_TOL:
        raise DegenerateError(
            f"validation event rate a0_hat = {a0:.6g} too close to the boundary"
        )
    return theta_cov_matrices(a0, float(theta_est.pi_hat[1]), float(theta_est.pi_hat[2]))


def assemble_bundle(
    x_rows: np.ndarray,
    beta: np.ndarray,
    theta: MisclassProbs,
    theta_est: ThetaEstimate,
    f: float,
    n: int,
    theta_cov_override: np.ndarray | None = None,
) -> CovarianceBundle:
    """Assemble every block over the given covariate rows.

    ``theta_cov_override`` replaces B0 Sigma22 B0' in the third term (the
    one-sided variant zeroes all but its (1,1) entry).
    """
    require_identifiable(theta)
    x = np.atleast_2d(np.asarray(x_rows, dtype=float))
    m = x.shape[0]
    ps, om, w, doh = _integrands(x, beta, theta)
    t1, t2 = theta.theta1, theta.theta2
    c = 1.0 - t1 - t2

    sigma11 = _sym((x.T * w) @ x / m)
    gamma = _sym(c * c * (x.T * (w * w / doh)) @ x / m)
    s_vec = x.T @ w / m  # E[x * psi(1-psi)]
    sigma12 = np.column_stack([-(1.0 - t1) * s_vec, t2 * s_vec, -t1 * s_vec])
    sigma21 = sigma12.T
    # d/dtheta of the mean surrogate score: the residual kills every term
    # except -dh3/dtheta_j through the numerator, giving column integrands
    # psi(1-psi)^2 (theta1) and psi^2(1-psi) (theta2) over h3(1-h3).
    a_col1 = c * (x.T @ (ps * om * om / doh)) / m
    a_col2 = c * (x.T @ (ps * ps * om / doh)) / m
    a0_mat = np.column_stack([-a_col1, a_col2])

    b0_mat, sigma22 = _theta_block(theta_est)
    theta_cov = b0_mat @ sigma22 @ b0_mat.T if theta_cov_override is None else theta_cov_override

    zdot = -(f * sigma11 + (1.0 - f) * gamma)
    mixed = a0_mat @ b0_mat @ sigma21
    sigma0 = (
        f * sigma11
        + (1.0 - f) * (mixed + mixed.T)
        + ((1.0 - f) ** 2 / f) * a0_mat @ theta_cov @ a0_mat.T
        + (1.0 - f) * gamma
    )
    sigma0 = _sym(sigma0)

    if not np.all(np.isfinite(zdot)) or np.linalg.cond(zdot) > COND_LIMIT:
        raise SingularZdot("plug-in score derivative is numerically singular")
    zinv = np.linalg.solve(zdot, np.eye(zdot.shape[0]))
    beta_cov = _sym(zinv @ sigma0 @ zinv.T / n)
    return CovarianceBundle(
        sigma11=sigma11,
        sigma21=sigma21,
        sigma22=sigma22,
        gamma=gamma,
        a0_mat=a0_mat,
        b0_mat=b0_mat,
        zdot=zdot,
        sigma0=sigma0,
        beta_cov=beta_cov,
        f_used=f,
    )


def estimate_bundle(dataset: Dataset, beta_hat, theta_est: ThetaEstimate) -> CovarianceBundle:
    """Plug-in covariance bundle at the fitted coefficients.

    Empirical averages run over all n covariate rows (both sample parts);
    the misclassification-rate block comes from the validation
    cross-table frequencies.
    """
    beta = beta_hat.beta if isinstance(beta_hat, RegressionCoef) else np.asarray(beta_hat, float)
    return assemble_bundle(
        dataset.x_all, beta, theta_est.theta, theta_est, dataset.f_n, dataset.n
    )


def bundle_from_fit(dataset: Dataset, fit: FitResult) -> CovarianceBundle:
    if fit.theta_estimate is None:
        raise DomainError("fit carries no validation-sample rate estimate")
    return estimate_bundle(dataset, fit.beta_hat, fit.theta_estimate)


def wald_ci(bundle: CovarianceBundle, beta_hat, level: float) -> list[tuple[float, float]]:
    """Per-coordinate normal intervals beta_j +- z * sqrt(cov_jj)."""
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0,1)")
    beta = beta_hat.beta if isinstance(beta_hat, RegressionCoef) else np.asarray(beta_hat, float)
    z = norm_ppf(0.5 * (1.0 + level))
    se = np.sqrt(np.clip(np.diag(bundle.beta_cov), 0.0, None))
    return [(float(b - z * s), float(b + z * s)) for b, s in zip(beta, se)]


def linear_functional_ci(
    bundle: CovarianceBundle, beta_hat, c, level: float
) -> tuple[float, float]:
    """Normal interval for c'beta."""
    c = np.asarray(c, dtype=float)
    if not np.any(c != 0.0):
        raise DomainError("c must be a nonzero vector")
    beta = beta_hat.beta if isinstance(beta_hat, RegressionCoef) else np.asarray(beta_hat, float)
    z = norm_ppf(0.5 * (1.0 + level))
    center = float(c @ beta)
    half = z * float(np.sqrt(max(c @ bundle.beta_cov @ c, 0.0)))
    return (center - half, center + half)


def risk_ci_delta(
    bundle: CovarianceBundle, beta_hat, x0, level: float
) -> tuple[float, float]:
    """Delta-method interval for the event probability psi(x0'beta),
    truncated to [0, 1]."""
    x0 = np.asarray(x0, dtype=float)
    if not np.any(x0 != 0.0):
        raise DomainError("x0 must be a nonzero covariate profile")
    beta = beta_hat.beta if isinstance(beta_hat, RegressionCoef) else np.asarray(beta_hat, float)
    u = float(x0 @ beta)
    ps = psi(u)
    grad = ps * psi(-u) * x0
    z = norm_ppf(0.5 * (1.0 + level))
    half = z * float(np.sqrt(max(grad @ bundle.beta_cov @ grad, 0.0)))
    return (max(ps - half, 0.0), min(ps + half, 1.0))
