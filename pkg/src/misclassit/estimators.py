"""The four estimators: naive logistic, plug-in (PMLE), joint, contaminated.

* ``fit_naive`` ignores misclassification and fits plain logistic
  regression to the surrogate responses of all rows.
* ``fit_pmle`` plugs validation-sample misclassification rates into the
  two-part score and solves it for beta alone.
* ``fit_jmle`` solves the joint (p+2)-dimensional system in (beta, theta)
  over both sample parts.
* ``fit_cmle`` solves the (p+2) system using surrogate responses only,
  which is prone to near-non-identifiability when few fitted
  probabilities fall outside (0.1, 0.9).

All fitters return a ``FitResult`` with raw estimates and diagnostics;
solver failure is reported through ``converged=False`` plus the last
iterate rather than by discarding the run.  Joint-likelihood theta
estimates are *not* projected into [0, 1]; values outside the unit
interval are flagged with a warning and reported as-is.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset, MisclassProbs, RegressionCoef
from .errors import NonConvergence, SingularJacobian
from .model import psi, require_identifiable, score, score_jacobian
from .solver import NewtonDiagnostics, SolverOptions, newton_root
from .theta import ThetaEstimate, estimate_theta_from_dataset

# Iterates with ||beta|| beyond this suggest separated data.
SEPARATION_NORM = 50.0

# CMLE near-non-identifiability: fraction of fitted probabilities
# inside (0.1, 0.9) above which the warning fires.
FLAT_REGION = (0.1, 0.9)
FLAT_FRACTION_WARN = 0.95

THETA_START = (0.1, 0.1)
FD_STEP = 1e-5


class Method(Enum):
    NAIVE = "naive"
    PMLE = "pmle"
    JMLE = "jmle"
    CMLE = "cmle"


class FitWarning(Enum):
    THETA_OUT_OF_UNIT_INTERVAL = "theta_out_of_unit_interval"
    NEAR_NONIDENTIFIABLE = "near_nonidentifiable"
    SEPARATION_SUSPECTED = "separation_suspected"
    STEP_CAP_HIT = "step_cap_hit"


@dataclass(frozen=True)
class FitResult:
    method: Method
    beta_hat: RegressionCoef
    theta_hat: MisclassProbs | None
    converged: bool
    iterations: int
    final_score_norm: float
    warnings: tuple[FitWarning, ...] = ()
    theta_estimate: ThetaEstimate | None = None

    @property
    def beta(self) -> np.ndarray:
        return self.beta_hat.beta


def _pooled_rows(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """All n rows as (ytilde, x); validation rows contribute their surrogate."""
    yt = np.concatenate([dataset.ytilde_val, dataset.ytilde_nv])
    return yt.astype(float), dataset.x_all


def _run_newton(system, start, opts) -> tuple[np.ndarray, NewtonDiagnostics, bool]:
    """Newton wrapper that keeps the last iterate on failure."""
    try:
        sol, diag = newton_root(system, start, opts)
        return sol, diag, True
    except (NonConvergence, SingularJacobian) as exc:
        last = exc.last_iterate if exc.last_iterate is not None else start
        diag = exc.diagnostics or NewtonDiagnostics()
        return np.asarray(last, dtype=float).copy(), diag, False


def _common_warnings(diag: NewtonDiagnostics, beta: np.ndarray) -> list[FitWarning]:
    warns = []
    if max(diag.max_iterate_norm, float(np.linalg.norm(beta))) > SEPARATION_NORM:
        warns.append(FitWarning.SEPARATION_SUSPECTED)
    if diag.step_cap_hit:
        warns.append(FitWarning.STEP_CAP_HIT)
    return warns


def fit_naive(dataset: Dataset, opts: SolverOptions | None = None) -> FitResult:
    """Plain logistic regression of the surrogate response on x, all rows."""
    opts = opts or SolverOptions()
    yt, x = _pooled_rows(dataset)
    n = x.shape[0]

    def system(beta):
        u = x @ beta
        ps = psi(u)
        r = x.T @ (yt - ps) / n
        jac = -(x.T * (ps * psi(-u))) @ x / n
        return r, jac

    start = opts.start.beta if opts.start is not None else np.zeros(dataset.p)
    sol, diag, ok = _run_newton(system, start, opts)
    final = float(np.max(np.abs(system(sol)[0])))
    return FitResult(
        method=Method.NAIVE,
        beta_hat=RegressionCoef(sol),
        theta_hat=None,
        converged=ok,
        iterations=diag.iterations,
        final_score_norm=final,
        warnings=tuple(_common_warnings(diag, sol)),
    )


def _default_start(dataset: Dataset, opts: SolverOptions) -> np.ndarray:
    if opts.start is not None:
        return opts.start.beta.copy()
    naive = fit_naive(dataset, SolverOptions(tol=opts.tol, max_iter=opts.max_iter))
    if naive.converged:
        return naive.beta.copy()
    return np.zeros(dataset.p)


def fit_pmle(
    dataset: Dataset,
    opts: SolverOptions | None = None,
    theta: MisclassProbs | None = None,
) -> FitResult:
    """Solve the two-part score for beta with misclassification rates
    plugged in.

    ``theta`` overrides the validation-sample estimate (used by the
    one-sided variant and by reduction tests); by default the rates are
    estimated from the validation cross-table, which raises
    ``IdentifiabilityError`` if theta1_hat + theta2_hat is numerically 1.
    """
    opts = opts or SolverOptions()
    theta_est = None
    if theta is None:
        theta_est = estimate_theta_from_dataset(dataset)
        theta = theta_est.theta
    if dataset.n2:
        # Fail fast rather than inside the iteration.
        require_identifiable(theta)

    def system(beta):
        return score(dataset, beta, theta), score_jacobian(dataset, beta, theta)

    start = _default_start(dataset, opts)
    sol, diag, ok = _run_newton(system, start, opts)
    final = float(np.max(np.abs(score(dataset, sol, theta))))
    return FitResult(
        method=Method.PMLE,
        beta_hat=RegressionCoef(sol),
        theta_hat=theta,
        converged=ok,
        iterations=diag.iterations,
        final_score_norm=final,
        warnings=tuple(_common_warnings(diag, sol)),
        theta_estimate=theta_est,
    )


def _joint_residual_factory(dataset: Dataset, pooled_only: bool):
    """Residual of the (p+2) estimating system in z = (beta, theta1, theta2).

    ``pooled_only=True`` gives the contaminated-data system: all n rows,
    surrogate responses, no validation terms in the theta rows.  Otherwise
    the joint system over both sample parts.
    """
    p = dataset.p
    if pooled_only:
        yt_all, x_all = _pooled_rows(dataset)
        n = x_all.shape[0]

        def residual(z):
            beta, t1, t2 = z[:p], z[p], z[p + 1]
            u = x_all @ beta
            ps = psi(u)
            om = psi(-u)
            w = ps * om
            h3v = t1 * om + (1.0 - t2) * ps
            denom = h3v * (1.0 - h3v)
            ratio = (yt_all - h3v) / denom
            r_beta = x_all.T @ (w * ratio) / n
            r_t1 = float(np.sum(om * ratio)) / n
            r_t2 = float(np.sum(ps * ratio)) / n
            return np.concatenate([r_beta, [r_t1, r_t2]])

        return residual

    f = dataset.f_n
    y_v = dataset.y_val.astype(float)
    yt_v = dataset.ytilde_val.astype(float)
    x_v = dataset.x_val
    n1 = dataset.n1

    def residual(z):
        beta, t1, t2 = z[:p], z[p], z[p + 1]
        u_v = x_v @ beta
        ps_v = psi(u_v)
        r_beta = f * (x_v.T @ (y_v - ps_v)) / n1
        r_t1 = f * float(np.sum((1.0 - y_v) * (yt_v - t1))) / (t1 * (1.0 - t1)) / n1
        r_t2 = f * float(np.sum(y_v * (1.0 - yt_v - t2))) / (t2 * (1.0 - t2)) / n1
        if dataset.n2:
            u_n = dataset.x_nv @ beta
            ps = psi(u_n)
            om = psi(-u_n)
            h3v = t1 * om + (1.0 - t2) * ps
            denom = h3v * (1.0 - h3v)
            ratio = (dataset.ytilde_nv - h3v) / denom
            c = 1.0 - t1 - t2
            r_beta = r_beta + (1.0 - f) * c * (dataset.x_nv.T @ (ps * om * ratio)) / dataset.n2
            r_t1 += (1.0 - f) * float(np.sum(om * ratio)) / dataset.n2
            r_t2 -= (1.0 - f) * float(np.sum(ps * ratio)) / dataset.n2
        return np.concatenate([r_beta, [r_t1, r_t2]])

    return residual


def _joint_system_factory(dataset: Dataset, pooled_only: bool):
    """Residual plus Jacobian for the (p+2) system.

    The theta rows and theta columns are differenced centrally (the
    second-order theta expressions are not worth deriving by hand).  For
    the joint system the beta block is the analytic two-part score
    derivative, which is the same expression as the plug-in score
    Jacobian at the current theta; the contaminated system keeps the
    differenced beta block.
    """
    residual = _joint_residual_factory(dataset, pooled_only)
    p = dataset.p

    def system(z):
        r = residual(z)
        m = p + 2
        jac = np.empty((m, m))
        for j in range(m):
            h = FD_STEP * (1.0 + abs(z[j]))
            zp = z.copy()
            zm = z.copy()
            zp[j] += h
            zm[j] -= h
            jac[:, j] = (residual(zp) - residual(zm)) / (2.0 * h)
        if not pooled_only:
            beta, t1, t2 = z[:p], z[p], z[p + 1]
            jac[:p, :p] = score_jacobian(dataset, beta, MisclassProbs(t1, t2), tol=0.0)
        return r, jac

    return system


def _fit_joint(dataset: Dataset, opts: SolverOptions, method: Method,
               theta_fixed: MisclassProbs | None) -> FitResult:
    pooled_only = method is Method.CMLE
    opts = opts or SolverOptions()
    p = dataset.p
    beta_start = _default_start(dataset, opts)

    if theta_fixed is not None:
        # Beta sub-system with theta held fixed (diagnostic/testing slice).
        residual = _joint_residual_factory(dataset, pooled_only)
        t = np.array([theta_fixed.theta1, theta_fixed.theta2])

        def system(beta):
            z = np.concatenate([beta, t])
            r = residual(z)[:p]
            jac = np.empty((p, p))
            for j in range(p):
                h = FD_STEP * (1.0 + abs(beta[j]))
                bp, bm = beta.copy(), beta.copy()
                bp[j] += h
                bm[j] -= h
                zp = np.concatenate([bp, t])
                zm = np.concatenate([bm, t])
                jac[:, j] = (residual(zp)[:p] - residual(zm)[:p]) / (2.0 * h)
            return r, jac

        sol, diag, ok = _run_newton(system, beta_start, opts)
        final = float(np.max(np.abs(system(sol)[0])))
        warns = _common_warnings(diag, sol)
        return FitResult(
            method=method,
            beta_hat=RegressionCoef(sol),
            theta_hat=theta_fixed,
            converged=ok,
            iterations=diag.iterations,
            final_score_norm=final,
            warnings=tuple(warns),
        )

    system = _joint_system_factory(dataset, pooled_only)
    z0 = np.concatenate([beta_start, THETA_START])
    sol, diag, ok = _run_newton(system, z0, opts)
    beta, theta = sol[:p], MisclassProbs(float(sol[p]), float(sol[p + 1]))
    with np.errstate(all="ignore"):
        r = _joint_residual_factory(dataset, pooled_only)(sol)
    final = float(np.max(np.abs(r))) if np.all(np.isfinite(r)) else float("inf")
    warns = _common_warnings(diag, beta)
    if not (0.0 <= theta.theta1 <= 1.0 and 0.0 <= theta.theta2 <= 1.0):
        warns.append(FitWarning.THETA_OUT_OF_UNIT_INTERVAL)
    if pooled_only:
        ps = psi(dataset.x_all @ beta)
        flat = np.mean((ps > FLAT_REGION[0]) & (ps < FLAT_REGION[1]))
        if flat > FLAT_FRACTION_WARN:
            warns.append(FitWarning.NEAR_NONIDENTIFIABLE)
    return FitResult(
        method=method,
        beta_hat=RegressionCoef(beta),
        theta_hat=theta,
        converged=ok,
        iterations=diag.iterations,
        final_score_norm=final,
        warnings=tuple(warns),
    )


def fit_jmle(
    dataset: Dataset,
    opts: SolverOptions | None = None,
    theta_fixed: MisclassProbs | None = None,
) -> FitResult:
    """Joint (beta, theta) solution of the full-sample estimating system."""
    return _fit_joint(dataset, opts or SolverOptions(), Method.JMLE, theta_fixed)


def fit_cmle(
    dataset: Dataset,
    opts: SolverOptions | None = None,
    theta_fixed: MisclassProbs | None = None,
) -> FitResult:
    """Joint (beta, theta) solution using contaminated responses only."""
    return _fit_joint(dataset, opts or SolverOptions(), Method.CMLE, theta_fixed)
