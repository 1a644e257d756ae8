"""Damped Newton root finder for small nonlinear systems.

The estimating systems here are p- or (p+2)-dimensional with cheap
residuals and Jacobians, so full Newton with a norm-reducing backtracking
line search is the right tool.  The step is capped in norm, the backtrack
gives up after a fixed number of halvings, and a Jacobian whose condition
estimate exceeds 1e12 is refused.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import RegressionCoef
from .errors import NonConvergence, SingularJacobian

MAX_HALVINGS = 30
COND_LIMIT = 1e12


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the Newton iteration.

    ``start`` overrides the default warm start of the calling estimator
    (the naive logistic fit, or zero for the naive fit itself).
    """

    tol: float = 1e-8
    max_iter: int = 100
    start: RegressionCoef | None = None
    damping: float = 0.5
    max_step: float = 10.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0,1)")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


@dataclass
class NewtonDiagnostics:
    converged: bool = False
    iterations: int = 0
    final_norm: float = np.inf
    step_cap_hit: bool = False
    max_iterate_norm: float = 0.0
    path_norms: list = field(default_factory=list)


def _norm(r: np.ndarray) -> float:
    if not np.all(np.isfinite(r)):
        return np.inf
    return float(np.max(np.abs(r))) if r.size else 0.0


def newton_root(system, start, opts: SolverOptions) -> tuple[np.ndarray, NewtonDiagnostics]:
    """Solve system(x) = 0 from ``start``.

    ``system(x)`` must return ``(residual, jacobian)`` with matching
    dimensions.  Each step solves J d = -r, caps ||d|| at ``max_step``,
    then backtracks by ``damping`` until the max-norm of the residual
    decreases (or MAX_HALVINGS is reached, after which the shrunken step
    is taken as-is).

    Raises ``SingularJacobian`` if the Jacobian condition estimate exceeds
    1e12, ``NonConvergence`` after ``max_iter`` iterations; the exception
    carries the last iterate and diagnostics.
    """
    x = np.array(start, dtype=float).ravel().copy()
    diag = NewtonDiagnostics()
    with np.errstate(all="ignore"):
        r, jac = system(x)
        r = np.asarray(r, dtype=float).ravel()
        rnorm = _norm(r)
        diag.final_norm = rnorm
        diag.max_iterate_norm = float(np.linalg.norm(x))
        for it in range(opts.max_iter):
            if rnorm <= opts.tol:
                diag.converged = True
                diag.iterations = it
                diag.final_norm = rnorm
                return x, diag
            jac = np.atleast_2d(np.asarray(jac, dtype=float))
            if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > COND_LIMIT:
                raise SingularJacobian(
                    f"Jacobian unusable at iteration {it} (norm of residual {rnorm:.3g})",
                    last_iterate=x,
                    diagnostics=diag,
                )
            delta = np.linalg.solve(jac, -r)
            dnorm = float(np.linalg.norm(delta))
            if dnorm > opts.max_step:
                delta *= opts.max_step / dnorm
                diag.step_cap_hit = True
            step = delta
            for _ in range(MAX_HALVINGS):
                x_try = x + step
                r_try, jac_try = system(x_try)
                r_try = np.asarray(r_try, dtype=float).ravel()
                if _norm(r_try) < rnorm:
                    break
                step = step * opts.damping
            else:
                # No damped step reduced the residual: take the full capped
                # step rather than stalling in place.  Benign systems never
                # reach this; nearly non-identifiable ones keep moving (and
                # visibly diverge instead of silently freezing).
                x_try = x + delta
                r_try, jac_try = system(x_try)
                r_try = np.asarray(r_try, dtype=float).ravel()
                if not np.all(np.isfinite(x_try)):
                    raise NonConvergence(
                        "iterates left the floating-point range",
                        last_iterate=x,
                        diagnostics=diag,
                    )
            x, r, jac = x_try, r_try, jac_try
            rnorm = _norm(r)
            diag.final_norm = rnorm
            diag.path_norms.append(rnorm)
            diag.max_iterate_norm = max(diag.max_iterate_norm, float(np.linalg.norm(x)))
        diag.iterations = opts.max_iter
        if rnorm <= opts.tol:
            diag.converged = True
            return x, diag
    raise NonConvergence(
        f"no root after {opts.max_iter} iterations (residual norm {rnorm:.3g})",
        last_iterate=x,
        diagnostics=diag,
    )
