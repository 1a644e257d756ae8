"""Synthetic-data designs and Monte Carlo studies (bias/MSE and coverage).

Data generation follows the model: covariates from the design's marginals,
``Y ~ Bernoulli(psi(x'beta0))``, then the surrogate flips Y with the
design's rates.  All draws are inverse-CDF transforms of uniforms from a
counter-based stream, so results are reproducible across platforms and
worker counts.

Built-in designs:

* ``model_a/b/c`` -- intercept + centered Log-normal(0,1), Bernoulli(1/3),
  Uniform(0,1) covariates with the standard coefficient/rate choices.
* ``model_p9`` -- nine covariates including a correlated normal pair
  (correlation 0.6), Poisson, chi-square and a two-component normal
  mixture, all centered.
* ``eta_design(eta)`` -- two independent normals without intercept where
  ``eta`` controls how much of the fitted-probability mass falls in the
  nearly-linear band (0.1, 0.9); larger eta makes the contaminated-data
  estimator's identifiability problem more severe.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import BootstrapConfig, percentile_ci_linear, run_bootstrap
from .covariance import estimate_bundle, wald_ci
from .data import Dataset, MisclassProbs
from .errors import DomainError, InsufficientSuccesses, MisclassitError
from .estimators import FitResult, Method, SolverOptions, fit_cmle, fit_jmle, fit_naive, fit_pmle
from .model import psi
from .rng import TAG_BOOT, TAG_DATA, substream
from .special import norm_ppf

LOG9 = math.log(9.0)

# eta grid and sample sizes of the four-method comparison design.
ETA_GRID = (0.6, 0.7, 0.8, 0.9)
ETA_DESIGN_N = 300
ETA_DESIGN_F = 0.2


def sigma_of_eta(eta: float) -> float:
    """Spread of the second covariate that puts mass eta of psi(x'beta0)
    inside (0.1, 0.9) for the two-normal design; valid for eta in (0, 0.97)."""
    if not 0.0 < eta < 0.97:
        raise DomainError("eta must lie in (0, 0.97)")
    q = norm_ppf(0.5 * (1.0 + eta))
    var = 0.25 * (LOG9**2 / q**2 - 1.0)
    if var <= 0.0:
        raise DomainError(f"eta = {eta} leaves no positive variance")
    return math.sqrt(var)


@dataclass(frozen=True)
class CovariateSpec:
    """One covariate column (or pair) as an inverse-CDF generator."""

    kind: str
    params: tuple = ()
    centered: bool = False

    @property
    def ncols(self) -> int:
        return 2 if self.kind == "bivariate_normal" else 1

    def mean(self) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "intercept":
            m = [1.0]
        elif k == "normal":
            m = [p[0]]
        elif k == "lognormal":
            m = [math.exp(p[0] + 0.5 * p[1] ** 2)]
        elif k == "bernoulli":
            m = [p[0]]
        elif k == "uniform":
            m = [0.5 * (p[0] + p[1])]
        elif k == "poisson":
            m = [p[0]]
        elif k == "chi2":
            m = [float(p[0])]
        elif k == "normal_mixture":
            w1, mu1, _, mu2, _ = p
            m = [w1 * mu1 + (1.0 - w1) * mu2]
        elif k == "bivariate_normal":
            m = [0.0, 0.0]
        else:
            raise DomainError(f"unknown covariate kind {k!r}")
        return np.asarray(m)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "intercept":
            cols = np.ones((n, 1))
        elif k == "normal":
            cols = (p[0] + p[1] * norm_ppf(rng.random(n)))[:, None]
        elif k == "lognormal":
            cols = np.exp(p[0] + p[1] * norm_ppf(rng.random(n)))[:, None]
        elif k == "bernoulli":
            cols = (rng.random(n) < p[0]).astype(float)[:, None]
        elif k == "uniform":
            cols = (p[0] + (p[1] - p[0]) * rng.random(n))[:, None]
        elif k == "poisson":
            cols = _poisson_inverse_cdf(p[0], rng.random(n))[:, None]
        elif k == "chi2":
            df = int(p[0])
            if df % 2:
                raise DomainError("chi2 generator supports even df only")
            cols = np.zeros(n)
            for _ in range(df // 2):
                cols = cols - 2.0 * np.log1p(-rng.random(n))
            cols = cols[:, None]
        elif k == "normal_mixture":
            w1, mu1, sd1, mu2, sd2 = p
            pick = rng.random(n) < w1
            z = norm_ppf(rng.random(n))
            cols = np.where(pick, mu1 + sd1 * z, mu2 + sd2 * z)[:, None]
        elif k == "bivariate_normal":
            rho = p[0]
            z1 = norm_ppf(rng.random(n))
            z2 = norm_ppf(rng.random(n))
            cols = np.column_stack([z1, rho * z1 + math.sqrt(1.0 - rho**2) * z2])
        else:
            raise DomainError(f"unknown covariate kind {k!r}")
        if self.centered:
            cols = cols - self.mean()
        return cols


def _poisson_inverse_cdf(lam: float, u: np.ndarray) -> np.ndarray:
    pmf = math.exp(-lam)
    cdf = [pmf]
    k = 0
    while cdf[-1] < 1.0 - 1e-15 and k < 200:
        k += 1
        pmf *= lam / k
        cdf.append(cdf[-1] + pmf)
    return np.searchsorted(np.asarray(cdf), u, side="right").astype(float)


@dataclass(frozen=True)
class SimModel:
    name: str
    beta0: np.ndarray
    theta0: MisclassProbs
    covariates: tuple[CovariateSpec, ...]
    has_intercept: bool = False

    def __post_init__(self):
        beta0 = np.asarray(self.beta0, dtype=float)
        object.__setattr__(self, "beta0", beta0)
        ncols = sum(s.ncols for s in self.covariates)
        if ncols != beta0.shape[0]:
            raise DomainError("covariate columns do not match coefficient length")


def _three_covariate_model(name: str, beta0, theta0) -> SimModel:
    return SimModel(
        name=name,
        beta0=np.asarray(beta0, dtype=float),
        theta0=MisclassProbs(*theta0),
        covariates=(
            CovariateSpec("intercept"),
            CovariateSpec("lognormal", (0.0, 1.0), centered=True),
            CovariateSpec("bernoulli", (1.0 / 3.0,), centered=True),
            CovariateSpec("uniform", (0.0, 1.0), centered=True),
        ),
        has_intercept=True,
    )


def model_a() -> SimModel:
    return _three_covariate_model("a", (0.0, 0.7, 1.5, -0.6), (0.1, 0.3))


def model_b() -> SimModel:
    return _three_covariate_model("b", (0.0, 0.7, 1.5, -0.6), (0.1, 0.1))


def model_c() -> SimModel:
    return _three_covariate_model("c", (-1.0, 0.7, 1.5, -0.6), (0.1, 0.3))


def model_p9() -> SimModel:
    return SimModel(
        name="p9",
        beta0=np.array([-1.0, 0.7, 1.5, -0.6, 1.0, -0.75, -2.0, -1.5, 1.0]),
        theta0=MisclassProbs(0.1, 0.3),
        covariates=(
            CovariateSpec("intercept"),
            CovariateSpec("lognormal", (0.0, 1.0), centered=True),
            CovariateSpec("bernoulli", (1.0 / 3.0,), centered=True),
            CovariateSpec("uniform", (0.0, 1.0), centered=True),
            CovariateSpec("bivariate_normal", (0.6,)),
            CovariateSpec("poisson", (3.0,), centered=True),
            CovariateSpec("chi2", (2,), centered=True),
            CovariateSpec("normal_mixture", (0.6, -1.0, 1.0, 4.0, math.sqrt(2.0)), centered=True),
        ),
        has_intercept=True,
    )


def eta_design(eta: float) -> SimModel:
    return SimModel(
        name=f"eta_{eta:g}",
        beta0=np.array([1.0, 2.0]),
        theta0=MisclassProbs(0.1, 0.3),
        covariates=(
            CovariateSpec("normal", (0.0, 1.0)),
            CovariateSpec("normal", (0.0, sigma_of_eta(eta))),
        ),
    )


BUILTIN_MODELS = {"a": model_a, "b": model_b, "c": model_c, "p9": model_p9}


@dataclass(frozen=True)
class SimConfig:
    n: int
    f_n: float
    reps: int
    seed: int = 0
    B: int = 700
    level: float = 0.95

    @property
    def n1(self) -> int:
        n1 = int(round(self.n * self.f_n))
        if n1 < 1:
            raise DomainError("n * f_n must round to at least one validation row")
        return n1


def generate_dataset(model: SimModel, cfg: SimConfig, rng: np.random.Generator) -> Dataset:
    """Draw one dataset; the first n1 rows form the validation half."""
    n = cfg.n
    x = np.column_stack([spec.sample(rng, n) for spec in model.covariates])
    y = (rng.random(n) < psi(x @ model.beta0)).astype(np.int8)
    flip_prob = np.where(y == 1, model.theta0.theta2, model.theta0.theta1)
    ytilde = np.where(rng.random(n) < flip_prob, 1 - y, y).astype(np.int8)
    n1 = cfg.n1
    return Dataset(
        y_val=y[:n1],
        ytilde_val=ytilde[:n1],
        x_val=x[:n1],
        ytilde_nv=ytilde[n1:],
        x_nv=x[n1:] if n1 < n else None,
        has_intercept=model.has_intercept,
    )


@dataclass
class BiasMseCell:
    eta: float
    sigma_eta: float
    method: str
    param: str
    truth: float
    bias: float
    mse: float
    reps: int
    failures: int
    estimates: np.ndarray = field(repr=False, default=None)


@dataclass
class CoverageCell:
    model: str
    n: int
    n1: int
    ci_type: str
    param: int
    truth: float
    coverage: float
    avg_length: float
    reps: int
    failures: int


@dataclass
class SimSummary:
    kind: str
    config: dict
    bias_mse: list = field(default_factory=list)
    coverage: list = field(default_factory=list)


def _threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("MISCLASSIT_THREADS", "1"))
    return max(1, threads)


_FIT_FUNCS = {
    Method.NAIVE: fit_naive,
    Method.PMLE: fit_pmle,
    Method.JMLE: fit_jmle,
    Method.CMLE: fit_cmle,
}


# The joint estimators converge slowly near non-identifiability, so the
# comparison study runs every method with a larger iteration budget (the
# stable methods converge within ten iterations regardless).  The
# contaminated-data fit additionally drops the step cap: its estimating
# system has quasi-roots at arbitrarily large |theta| and the reported
# failure magnitudes (|theta| of order 1e4-1e5) are unreachable under a
# small per-iteration cap, which would understate how badly that
# estimator breaks down.
BIAS_MSE_SOLVER = SolverOptions(max_iter=300)
CMLE_STUDY_SOLVER = SolverOptions(max_iter=300, max_step=1e6)


def _bias_mse_worker(payload) -> dict:
    model, cfg, eta_index, rep, opts, cmle_opts = payload
    rng = substream(cfg.seed, eta_index, rep, TAG_DATA)
    data = generate_dataset(model, cfg, rng)
    out = {}
    for method, fitter in _FIT_FUNCS.items():
        fit: FitResult = fitter(data, cmle_opts if method is Method.CMLE else opts)
        theta1 = fit.theta_hat.theta1 if fit.theta_hat is not None else None
        out[method.value] = (float(fit.beta[0]), theta1, fit.converged)
    return out


def run_bias_mse_study(
    etas=ETA_GRID,
    cfg: SimConfig | None = None,
    threads: int | None = None,
    exclude_failures: bool = False,
    solver_options: SolverOptions | None = None,
    cmle_solver_options: SolverOptions | None = None,
) -> SimSummary:
    """Four-method bias/MSE comparison over an eta grid.

    Aggregates are raw by default: non-converged solutions contribute
    their last iterate, mirroring how unstable joint estimators blow up
    the reported MSE.  ``exclude_failures=True`` drops them instead.
    """
    cfg = cfg or SimConfig(n=ETA_DESIGN_N, f_n=ETA_DESIGN_F, reps=250, seed=1)
    opts = solver_options or BIAS_MSE_SOLVER
    cmle_opts = cmle_solver_options or CMLE_STUDY_SOLVER
    summary = SimSummary(
        kind="bias_mse",
        config={
            "etas": list(etas), "n": cfg.n, "f_n": cfg.f_n, "reps": cfg.reps,
            "seed": cfg.seed, "exclude_failures": exclude_failures,
            "max_iter": opts.max_iter,
        },
    )
    nthreads = _threads(threads)
    for eta_index, eta in enumerate(etas):
        model = eta_design(eta)
        payloads = [
            (model, cfg, eta_index, rep, opts, cmle_opts) for rep in range(cfg.reps)
        ]
        if nthreads > 1:
            with ProcessPoolExecutor(max_workers=nthreads) as pool:
                results = list(pool.map(_bias_mse_worker, payloads, chunksize=4))
        else:
            results = [_bias_mse_worker(p) for p in payloads]
        for method in _FIT_FUNCS:
            rows = [r[method.value] for r in results]
            failures = sum(1 for b, t, ok in rows if not ok)

            def keep(b, t, ok):
                if not exclude_failures:
                    return True
                return ok and (t is None or abs(t) <= 10.0)

            for param, truth, values in (
                ("beta1", float(model.beta0[0]),
                 [b for b, t, ok in rows if keep(b, t, ok)]),
                ("theta1", model.theta0.theta1,
                 [t for b, t, ok in rows if t is not None and keep(b, t, ok)]),
            ):
                est = np.asarray(values, dtype=float)
                summary.bias_mse.append(
                    BiasMseCell(
                        eta=eta,
                        sigma_eta=sigma_of_eta(eta),
                        method=method.value,
                        param=param,
                        truth=truth,
                        bias=float(np.mean(est) - truth) if est.size else float("nan"),
                        mse=float(np.mean((est - truth) ** 2)) if est.size else float("nan"),
                        reps=cfg.reps,
                        failures=failures,
                        estimates=est,
                    )
                )
    return summary


def _coverage_worker(payload) -> dict:
    model, cfg, rep, with_bootstrap = payload
    rng = substream(cfg.seed, rep, TAG_DATA)
    data = generate_dataset(model, cfg, rng)
    out = {"fit_ok": False, "boot_ok": False, "wald": None, "boot": None}
    opts = SolverOptions()
    try:
        fit = fit_pmle(data, opts)
    except MisclassitError:
        return out
    if not fit.converged:
        return out
    out["fit_ok"] = True
    p = data.p
    try:
        bundle = estimate_bundle(data, fit.beta_hat, fit.theta_estimate)
        out["wald"] = wald_ci(bundle, fit.beta_hat, cfg.level)
    except MisclassitError:
        pass
    if with_bootstrap:
        boot_seed = int(np.random.SeedSequence([cfg.seed, rep, TAG_BOOT]).generate_state(1)[0])
        bcfg = BootstrapConfig(B=cfg.B, seed=boot_seed, level=cfg.level)
        eta = 0.5 * (1.0 - cfg.level)
        try:
            draws = run_bootstrap(data, opts, bcfg, fit=fit, threads=1)
            out["boot"] = [
                percentile_ci_linear(draws, np.eye(p)[j], eta) for j in range(p)
            ]
            out["boot_ok"] = True
        except (InsufficientSuccesses, MisclassitError):
            pass
    return out


def run_coverage_study(
    model: SimModel,
    cfg: SimConfig,
    threads: int | None = None,
    with_bootstrap: bool = True,
) -> SimSummary:
    """Empirical coverage and average length of the two interval types."""
    summary = SimSummary(
        kind="coverage",
        config={
            "model": model.name, "n": cfg.n, "f_n": cfg.f_n, "n1": cfg.n1,
            "reps": cfg.reps, "seed": cfg.seed, "B": cfg.B, "level": cfg.level,
            "with_bootstrap": with_bootstrap,
        },
    )
    payloads = [(model, cfg, rep, with_bootstrap) for rep in range(cfg.reps)]
    nthreads = _threads(threads)
    if nthreads > 1:
        with ProcessPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(_coverage_worker, payloads, chunksize=1))
    else:
        results = [_coverage_worker(p) for p in payloads]
    p = model.beta0.shape[0]
    ci_kinds = [("wald", "wald")] + ([("boot", "percentile")] if with_bootstrap else [])
    for key, label in ci_kinds:
        for j in range(p):
            hits, lengths = [], []
            for r in results:
                ci = r[key]
                if ci is None:
                    continue
                lo, hi = ci[j]
                hits.append(lo <= model.beta0[j] <= hi)
                lengths.append(hi - lo)
            used = len(hits)
            summary.coverage.append(
                CoverageCell(
                    model=model.name,
                    n=cfg.n,
                    n1=cfg.n1,
                    ci_type=label,
                    param=j + 1,
                    truth=float(model.beta0[j]),
                    coverage=float(np.mean(hits)) if used else float("nan"),
                    avg_length=float(np.mean(lengths)) if used else float("nan"),
                    reps=cfg.reps,
                    failures=cfg.reps - used,
                )
            )
    return summary


def _num(x: float) -> str:
    return "" if math.isnan(x) else repr(x)


def bias_mse_csv(summary: SimSummary) -> str:
    lines = ["eta,sigma_eta,method,param,truth,bias,mse,reps,failures"]
    for c in summary.bias_mse:
        lines.append(
            f"{c.eta!r},{c.sigma_eta!r},{c.method},{c.param},{c.truth!r},"
            f"{_num(c.bias)},{_num(c.mse)},{c.reps},{c.failures}"
        )
    return "\n".join(lines) + "\n"


def coverage_csv(summary: SimSummary) -> str:
    lines = ["model,n,n1,ci_type,param,truth,coverage,avg_length,reps,failures"]
    for c in summary.coverage:
        lines.append(
            f"{c.model},{c.n},{c.n1},{c.ci_type},beta{c.param},{c.truth!r},"
            f"{_num(c.coverage)},{_num(c.avg_length)},{c.reps},{c.failures}"
        )
    return "\n".join(lines) + "\n"
