"""Logistic model with a misreported response: link, score pieces, likelihood.

The true response follows ``P(Y=1|x) = psi(x'beta)``.  The recorded response
``ytilde`` flips with rates ``theta = (theta1, theta2)``, so its conditional
mean is ``h3 = theta1*(1-psi) + (1-theta2)*psi``.  Estimation combines two
score pieces: ``h1 = x*(y - psi)`` from validated rows and

    h2 = (1 - theta1 - theta2) * x * psi*(1-psi) * (ytilde - h3) / (h3*(1-h3))

from surrogate-only rows.  The two-part score is

    score(beta) = f_n * mean_val h1 + (1 - f_n) * mean_nonval h2,

the gradient of the scaled pseudo log-likelihood in which theta has been
replaced by a validation-sample estimate.

Everything here is a pure function of its arguments; no shared state.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, MisclassProbs, RegressionCoef
from .errors import DomainError, IdentifiabilityError

# |1 - theta1 - theta2| below this is treated as non-identifiable.
IDENTIFIABILITY_TOL = 1e-6

# Box for admissible misclassification rates used in bound checks.
THETA_BOX = (1e-4, 1.0 - 1e-4)


def psi(u):
    """Logistic link 1/(1+exp(-u)), exponentiating non-positive arguments only."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    if out.ndim == 0:
        return float(out)
    return out


def log_psi(u):
    """log(psi(u)) = -log(1 + exp(-u)), stable for any finite u."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = -np.log1p(np.exp(-u[pos]))
    out[~pos] = u[~pos] - np.log1p(np.exp(u[~pos]))
    if out.ndim == 0:
        return float(out)
    return out


def _theta_pair(theta) -> tuple[float, float]:
    if isinstance(theta, MisclassProbs):
        return float(theta.theta1), float(theta.theta2)
    t1, t2 = theta
    return float(t1), float(t2)


def _beta_vec(beta) -> np.ndarray:
    if isinstance(beta, RegressionCoef):
        return beta.beta
    return np.asarray(beta, dtype=float)


def require_identifiable(theta, tol: float = IDENTIFIABILITY_TOL) -> None:
    t1, t2 = _theta_pair(theta)
    if abs(1.0 - t1 - t2) < tol:
        raise IdentifiabilityError(
            f"theta1 + theta2 = {t1 + t2:.6g} is within {tol:g} of 1"
        )


def h1(beta, y, x) -> np.ndarray:
    """Plain logistic score contribution x*(y - psi(x'beta))."""
    b = _beta_vec(beta)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != b.shape[0]:
        raise DomainError(f"covariate length {x.shape[-1]} != coefficient length {b.shape[0]}")
    resid = np.asarray(y, dtype=float) - psi(x @ b)
    return x * np.expand_dims(resid, -1) if x.ndim > 1 else x * resid


def h3(beta, theta, x) -> float | np.ndarray:
    """Conditional mean of the surrogate response given x."""
    t1, t2 = _theta_pair(theta)
    b = _beta_vec(beta)
    u = np.asarray(x, dtype=float) @ b
    ps = psi(u)
    one_minus = psi(-u)
    return t1 * one_minus + (1.0 - t2) * ps


def h2(beta, theta, ytilde, x, tol: float = IDENTIFIABILITY_TOL) -> np.ndarray:
    """Surrogate-row score contribution; zero when ytilde equals h3(x)."""
    require_identifiable(theta, tol)
    t1, t2 = _theta_pair(theta)
    b = _beta_vec(beta)
    x = np.asarray(x, dtype=float)
    u = x @ b
    ps = psi(u)
    one_minus = psi(-u)
    w = ps * one_minus
    h3v = t1 * one_minus + (1.0 - t2) * ps
    one_minus_h3 = (1.0 - t1) * one_minus + t2 * ps
    denom = h3v * one_minus_h3
    g = (1.0 - t1 - t2) * w * (np.asarray(ytilde, dtype=float) - h3v) / denom
    return x * np.expand_dims(g, -1) if x.ndim > 1 else x * g


def h3_reciprocal_bound(delta1: float = THETA_BOX[0], delta2: float = THETA_BOX[1]) -> float:
    """Upper bound M0 on 1/(h3*(1-h3)) over the (delta1, delta2) theta box."""
    return 1.0 / max(delta1 * (1.0 - delta1), delta2 * (1.0 - delta2))


def _split_terms(dataset: Dataset, beta, theta):
    """Per-row quantities for both halves: (u, psi, 1-psi, w) and h3 pieces."""
    b = _beta_vec(beta)
    t1, t2 = _theta_pair(theta)
    uv = dataset.x_val @ b
    quants = {
        "uv": uv,
        "ps_v": psi(uv),
    }
    if dataset.n2:
        un = dataset.x_nv @ b
        ps = psi(un)
        om = psi(-un)
        quants.update(
            un=un,
            ps_n=ps,
            om_n=om,
            w_n=ps * om,
            h3_n=t1 * om + (1.0 - t2) * ps,
            omh3_n=(1.0 - t1) * om + t2 * ps,
        )
    return quants


def pseudo_loglik(dataset: Dataset, beta, theta_hat) -> float:
    """Scaled pseudo log-likelihood at beta with the misclassification
    rates plugged in.

    Three sums over rows, divided by n: validated y=1 rows contribute
    ``ytilde*log(1-t2) + (1-ytilde)*log(t2) + log(psi)``, validated y=0
    rows the mirror image in t1 and 1-psi, and surrogate-only rows
    ``log(h3)`` or ``log(1-h3)`` according to ytilde.
    """
    t1, t2 = _theta_pair(theta_hat)
    if not (0.0 < t1 < 1.0 and 0.0 < t2 < 1.0):
        raise DomainError("plugged-in misclassification rates must lie strictly in (0,1)")
    require_identifiable(theta_hat)
    b = _beta_vec(beta)
    uv = dataset.x_val @ b
    y = dataset.y_val.astype(float)
    yt = dataset.ytilde_val.astype(float)
    total = np.sum(
        y * (yt * np.log(1.0 - t2) + (1.0 - yt) * np.log(t2) + log_psi(uv))
        + (1.0 - y) * (yt * np.log(t1) + (1.0 - yt) * np.log(1.0 - t1) + log_psi(-uv))
    )
    if dataset.n2:
        un = dataset.x_nv @ b
        ps = psi(un)
        om = psi(-un)
        h3v = t1 * om + (1.0 - t2) * ps
        omh3 = (1.0 - t1) * om + t2 * ps
        ytn = dataset.ytilde_nv.astype(float)
        args = np.where(ytn == 1.0, h3v, omh3)
        if np.any(args <= 0.0):
            raise DomainError("non-positive likelihood term in surrogate rows")
        total += np.sum(np.log(args))
    return float(total) / dataset.n


def score_parts(dataset: Dataset, beta, theta_hat, tol: float = IDENTIFIABILITY_TOL):
    """Validation and surrogate score means (Z_{n,1}, Z_{n,2}) separately."""
    b = _beta_vec(beta)
    q = _split_terms(dataset, beta, theta_hat)
    z1 = dataset.x_val.T @ (dataset.y_val - q["ps_v"]) / dataset.n1
    if dataset.n2:
        require_identifiable(theta_hat, tol)
        t1, t2 = _theta_pair(theta_hat)
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = q["h3_n"] * q["omh3_n"]
            g = (1.0 - t1 - t2) * q["w_n"] * (dataset.ytilde_nv - q["h3_n"]) / denom
        z2 = dataset.x_nv.T @ g / dataset.n2
    else:
        z2 = np.zeros_like(b)
    return z1, z2


def score(dataset: Dataset, beta, theta_hat, tol: float = IDENTIFIABILITY_TOL) -> np.ndarray:
    """Two-part score f_n * Z_{n,1} + (1 - f_n) * Z_{n,2}."""
    z1, z2 = score_parts(dataset, beta, theta_hat, tol)
    f = dataset.f_n
    return f * z1 + (1.0 - f) * z2


def score_jacobian(dataset: Dataset, beta, theta_hat, tol: float = IDENTIFIABILITY_TOL) -> np.ndarray:
    """Exact derivative of ``score`` with respect to beta.

    The validation block is the usual -mean(w * x x'); the surrogate block
    differentiates the h2 residual through both psi and h3.
    """
    b = _beta_vec(beta)
    q = _split_terms(dataset, beta, theta_hat)
    wv = q["ps_v"] * psi(-q["uv"])
    jac = -dataset.f_n * (dataset.x_val.T * wv) @ dataset.x_val / dataset.n1
    if dataset.n2:
        require_identifiable(theta_hat, tol)
        t1, t2 = _theta_pair(theta_hat)
        c = 1.0 - t1 - t2
        w = q["w_n"]
        h3v = q["h3_n"]
        doh = h3v * q["omh3_n"]
        r = dataset.ytilde_nv - h3v
        # d/du of w*r/(h3*(1-h3)) with dpsi/du = w and dh3/du = c*w
        one_minus_2psi = 1.0 - 2.0 * q["ps_n"]
        one_minus_2h3 = 1.0 - 2.0 * h3v
        with np.errstate(divide="ignore", invalid="ignore"):
            gprime = (w / doh) * (
                one_minus_2psi * r - c * w - c * w * r * one_minus_2h3 / doh
            )
        jac += (
            (1.0 - dataset.f_n)
            * c
            * (dataset.x_nv.T * gprime)
            @ dataset.x_nv
            / dataset.n2
        )
    return jac


def population_score_jacobian(
    x_rows: np.ndarray, beta, theta, f: float, tol: float = IDENTIFIABILITY_TOL
) -> np.ndarray:
    """Limit derivative of the score, averaged over the given covariate rows.

    Uses the model-based conditional mean of the surrogate response, so the
    residual terms of ``score_jacobian`` drop out:

        -f * E[x x' w] - (1-f) * c^2 * E[x x' w^2 / (h3*(1-h3))].
    """
    require_identifiable(theta, tol)
    t1, t2 = _theta_pair(theta)
    b = _beta_vec(beta)
    x = np.atleast_2d(np.asarray(x_rows, dtype=float))
    u = x @ b
    ps = psi(u)
    om = psi(-u)
    w = ps * om
    doh = (t1 * om + (1.0 - t2) * ps) * ((1.0 - t1) * om + t2 * ps)
    c = 1.0 - t1 - t2
    first = (x.T * w) @ x / x.shape[0]
    second = (x.T * (w * w / doh)) @ x / x.shape[0]
    return -f * first - (1.0 - f) * c * c * second
