"""Two-sample nonparametric bootstrap of the plug-in estimator.

Each replicate redraws the validation and non-validation halves
independently, with replacement and at their original sizes, re-estimates
the misclassification rates from the redrawn validation rows, and re-solves
the two-part score warm-started at the original solution.  Percentile
intervals invert the empirical quantiles of the centered, sqrt(n)-scaled
replicate statistics:

    I_eta = (stat_hat - xi_{1-eta} / sqrt(n),  stat_hat - xi_eta / sqrt(n)),

a nominal level 1-2*eta interval.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .data import Dataset, MisclassProbs, RegressionCoef
from .errors import (
    DegenerateError,
    DomainError,
    IdentifiabilityError,
    InsufficientSuccesses,
)
from .estimators import FitResult, SolverOptions, fit_naive, fit_pmle
from .model import psi
from .rng import TAG_NONVALIDATION, TAG_VALIDATION, substream


class ReplicateStatus(Enum):
    OK = "ok"
    NONCONVERGED = "nonconverged"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 700
    seed: int = 0
    min_success_fraction: float = 0.95
    level: float = 0.95

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if not 0.0 < self.min_success_fraction <= 1.0:
            raise ValueError("min_success_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class BootstrapDraws:
    """Successful replicate estimates plus per-replicate status.

    ``beta_star`` has one row per OK replicate (aligned with
    ``theta_star``); failures appear only in ``statuses``.
    """

    beta_star: np.ndarray
    theta_star: np.ndarray
    statuses: tuple[ReplicateStatus, ...]
    beta_hat: RegressionCoef
    n: int

    @property
    def n_ok(self) -> int:
        return self.beta_star.shape[0]

    def status_counts(self) -> dict[str, int]:
        out = {s.value: 0 for s in ReplicateStatus}
        for s in self.statuses:
            out[s.value] += 1
        return out


def resample(dataset: Dataset, seed: int, replicate: int = 0) -> Dataset:
    """Redraw both halves independently, with replacement, original sizes.

    The two halves use separate streams keyed by (seed, replicate, half),
    so the draw is reproducible under any scheduling.
    """
    rng_v = substream(seed, replicate, TAG_VALIDATION)
    idx_v = rng_v.integers(0, dataset.n1, dataset.n1)
    kwargs = dict(
        y_val=dataset.y_val[idx_v],
        ytilde_val=dataset.ytilde_val[idx_v],
        x_val=dataset.x_val[idx_v],
        has_intercept=dataset.has_intercept,
    )
    if dataset.n2:
        rng_n = substream(seed, replicate, TAG_NONVALIDATION)
        idx_n = rng_n.integers(0, dataset.n2, dataset.n2)
        kwargs.update(ytilde_nv=dataset.ytilde_nv[idx_n], x_nv=dataset.x_nv[idx_n])
    return Dataset(**kwargs)


def _one_replicate(dataset: Dataset, opts: SolverOptions, seed: int, b: int,
                   beta_hat: np.ndarray):
    boot = resample(dataset, seed, b)
    warm = SolverOptions(
        tol=opts.tol, max_iter=opts.max_iter, start=RegressionCoef(beta_hat),
        damping=opts.damping, max_step=opts.max_step,
    )
    try:
        fit = fit_pmle(boot, warm)
        if not fit.converged:
            # Retry from the naive fit on the resample before giving up.
            fallback = SolverOptions(
                tol=opts.tol, max_iter=opts.max_iter,
                damping=opts.damping, max_step=opts.max_step,
            )
            fit = fit_pmle(boot, fallback)
    except (IdentifiabilityError, DegenerateError):
        return ReplicateStatus.DEGENERATE, None, None
    if not fit.converged or not np.all(np.isfinite(fit.beta)):
        return ReplicateStatus.NONCONVERGED, None, None
    th = fit.theta_hat
    return ReplicateStatus.OK, fit.beta, np.array([th.theta1, th.theta2])


def _replicate_star(args):
    return _one_replicate(*args)


def run_bootstrap(
    dataset: Dataset,
    opts: SolverOptions | None = None,
    cfg: BootstrapConfig | None = None,
    fit: FitResult | None = None,
    threads: int | None = None,
) -> BootstrapDraws:
    """B bootstrap replicates of the plug-in estimator.

    ``fit`` supplies the original solution (computed here when omitted);
    replicates are warm-started at it.  Raises ``InsufficientSuccesses``
    when fewer than ``min_success_fraction`` of replicates yield usable
    estimates.
    """
    opts = opts or SolverOptions()
    cfg = cfg or BootstrapConfig()
    if fit is None:
        fit = fit_pmle(dataset, opts)
    if not fit.converged:
        raise DomainError("original plug-in fit did not converge; nothing to bootstrap")
    beta_hat = fit.beta
    if threads is None:
        threads = int(os.environ.get("MISCLASSIT_THREADS", "1"))
    tasks = [(dataset, opts, cfg.seed, b, beta_hat) for b in range(cfg.B)]
    if threads > 1 and cfg.B > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_replicate_star, tasks, chunksize=max(1, cfg.B // (8 * threads))))
    else:
        results = [_one_replicate(*t) for t in tasks]
    statuses = tuple(r[0] for r in results)
    oks = [(b, t) for s, b, t in results if s is ReplicateStatus.OK]
    n_ok = len(oks)
    if n_ok < cfg.min_success_fraction * cfg.B:
        raise InsufficientSuccesses(
            f"only {n_ok}/{cfg.B} replicates succeeded "
            f"(floor {cfg.min_success_fraction:.0%})"
        )
    beta_star = np.array([b for b, _ in oks]) if oks else np.zeros((0, dataset.p))
    theta_star = np.array([t for _, t in oks]) if oks else np.zeros((0, 2))
    return BootstrapDraws(
        beta_star=beta_star,
        theta_star=theta_star,
        statuses=statuses,
        beta_hat=fit.beta_hat,
        n=dataset.n,
    )


def percentile_quantile(draws: np.ndarray, eta: float) -> float:
    """Order-statistic quantile: the ceil(eta*m)-th smallest value, clamped."""
    draws = np.sort(np.asarray(draws, dtype=float))
    m = draws.shape[0]
    if m < 1:
        raise DomainError("no draws to take a quantile of")
    k = min(max(math.ceil(eta * m), 1), m)
    return float(draws[k - 1])


def _check_eta(eta: float) -> None:
    if not 0.0 < eta < 0.5:
        raise DomainError("eta must lie in (0, 1/2)")


def percentile_ci_linear(draws: BootstrapDraws, c, eta: float) -> tuple[float, float]:
    """Percentile interval for c'beta at nominal level 1 - 2*eta."""
    c = np.asarray(c, dtype=float)
    if not np.any(c != 0.0):
        raise DomainError("c must be a nonzero vector")
    _check_eta(eta)
    if draws.n_ok < 1:
        raise InsufficientSuccesses("no successful replicates")
    center = float(c @ draws.beta_hat.beta)
    root_n = math.sqrt(draws.n)
    pivots = root_n * (draws.beta_star @ c - center)
    lo = center - percentile_quantile(pivots, 1.0 - eta) / root_n
    hi = center - percentile_quantile(pivots, eta) / root_n
    return (lo, hi)


def percentile_ci_risk(draws: BootstrapDraws, x0, eta: float) -> tuple[float, float]:
    """Percentile interval for the event probability psi(x0'beta),
    truncated to [0, 1]."""
    x0 = np.asarray(x0, dtype=float)
    if not np.any(x0 != 0.0):
        raise DomainError("x0 must be a nonzero covariate profile")
    _check_eta(eta)
    if draws.n_ok < 1:
        raise InsufficientSuccesses("no successful replicates")
    center = float(psi(float(x0 @ draws.beta_hat.beta)))
    root_n = math.sqrt(draws.n)
    pivots = root_n * (psi(draws.beta_star @ x0) - center)
    lo = center - percentile_quantile(pivots, 1.0 - eta) / root_n
    hi = center - percentile_quantile(pivots, eta) / root_n
    return (max(lo, 0.0), min(hi, 1.0))
