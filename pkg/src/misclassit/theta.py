"""Misclassification-rate estimation from the validation cross-table.

The validation rows cross-tabulate (ytilde, y) into four cells.  The rate
estimates add 1/2 to each cell before forming ratios, which keeps them
strictly inside (0, 1) even with empty cells:

    theta1_hat = (1/2 + n10) / (1 + n00 + n10)     # P(ytilde=1 | y=0)
    theta2_hat = (1/2 + n01) / (1 + n01 + n11)     # P(ytilde=0 | y=1)

Their joint large-sample covariance is assembled from the raw cell
frequencies via the delta method: ``B0 @ Sigma22 @ B0.T / n1`` where
``Sigma22`` is the multinomial covariance of the first three cell
indicators and ``B0`` is the derivative of the (theta1, theta2) map at the
cell means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, MisclassProbs
from .errors import DegenerateError, SchemaError

# a0_hat closer than this to {0,1} makes the 1/a0, 1/(1-a0) factors explode.
A0_BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class CellCounts:
    """Counts of (ytilde, y) pairs: n<ytilde><y>."""

    n00: int
    n01: int
    n10: int
    n11: int

    @property
    def n1(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11


@dataclass(frozen=True)
class ThetaEstimate:
    """Adjusted rate estimates plus the raw frequencies behind them.

    ``pi_hat`` orders the cells as (ytilde=0,y=0), (ytilde=0,y=1),
    (ytilde=1,y=0), (ytilde=1,y=1); ``a0_hat = pi_hat[1] + pi_hat[3]`` is
    the validation frequency of y = 1.
    """

    theta: MisclassProbs
    n1: int
    cells: CellCounts
    a0_hat: float
    pi_hat: np.ndarray


def count_cells(validation) -> CellCounts:
    """Cross-tabulate (ytilde, y) over validation rows.

    Accepts a ``Dataset`` or a list of ``ValidationObs``.
    """
    if isinstance(validation, Dataset):
        y = validation.y_val
        yt = validation.ytilde_val
    else:
        if len(validation) == 0:
            raise SchemaError("validation sample is empty")
        y = np.array([o.y for o in validation])
        yt = np.array([o.ytilde for o in validation])
    if y.size == 0:
        raise SchemaError("validation sample is empty")
    n11 = int(np.sum((yt == 1) & (y == 1)))
    n10 = int(np.sum((yt == 1) & (y == 0)))
    n01 = int(np.sum((yt == 0) & (y == 1)))
    n00 = int(np.sum((yt == 0) & (y == 0)))
    return CellCounts(n00=n00, n01=n01, n10=n10, n11=n11)


def estimate_theta(cells: CellCounts) -> ThetaEstimate:
    """Haldane-adjusted rate estimates with raw cell frequencies attached."""
    if cells.n1 < 1:
        raise SchemaError("validation sample is empty")
    t1 = (0.5 + cells.n10) / (1.0 + cells.n00 + cells.n10)
    t2 = (0.5 + cells.n01) / (1.0 + cells.n01 + cells.n11)
    pi = np.array([cells.n00, cells.n01, cells.n10, cells.n11], dtype=float) / cells.n1
    return ThetaEstimate(
        theta=MisclassProbs(t1, t2),
        n1=cells.n1,
        cells=cells,
        a0_hat=float(pi[1] + pi[3]),
        pi_hat=pi,
    )


def theta_cov_matrices(a0: float, pi2: float, pi3: float) -> tuple[np.ndarray, np.ndarray]:
    """(B0, Sigma22) evaluated at event rate ``a0`` and cell means
    ``pi2 = P(ytilde=0, y=1)``, ``pi3 = P(ytilde=1, y=0)``.

    ``B0`` is the 2x3 derivative of (theta1, theta2) = (z/(x+z), y/(1-x-z))
    at (x, y, z) = (1-a0-pi3, pi2, pi3); ``Sigma22`` is the covariance of
    the corresponding cell indicators.
    """
    one_minus_a0 = 1.0 - a0
    pi1 = one_minus_a0 - pi3
    b0 = np.array(
        [
            [-pi3 / one_minus_a0**2, 0.0, pi1 / one_minus_a0**2],
            [pi2 / a0**2, 1.0 / a0, pi2 / a0**2],
        ]
    )
    sigma22 = np.array(
        [
            [pi1 * (1.0 - pi1), -pi1 * pi2, -pi1 * pi3],
            [-pi1 * pi2, pi2 * (1.0 - pi2), -pi2 * pi3],
            [-pi1 * pi3, -pi2 * pi3, pi3 * (1.0 - pi3)],
        ]
    )
    return b0, sigma22


def theta_asymptotic_cov(est: ThetaEstimate) -> np.ndarray:
    """Plug-in covariance matrix of the rate estimates, B0 Sigma22 B0' / n1."""
    a0 = est.a0_hat
    if a0 < A0_BOUNDARY_TOL or a0 > 1.0 - A0_BOUNDARY_TOL:
        raise DegenerateError(
            f"validation event rate a0_hat = {a0:.6g} too close to the boundary"
        )
    b0, sigma22 = theta_cov_matrices(a0, float(est.pi_hat[1]), float(est.pi_hat[2]))
    cov = b0 @ sigma22 @ b0.T / est.n1
    return 0.5 * (cov + cov.T)


def estimate_theta_from_dataset(dataset: Dataset) -> ThetaEstimate:
    return estimate_theta(count_cells(dataset))
