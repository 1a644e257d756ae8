"""Containers for two-part samples: validated and surrogate-only rows.

A study observes a binary outcome through an error-prone surrogate.  For a
subsample (the validation rows) both the true response ``y`` and the
surrogate ``ytilde`` are recorded; the remaining rows carry ``ytilde`` only.
``Dataset`` stores the two parts as contiguous numpy arrays so estimation
code can stay vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

# A covariate vector is a finite 1-d float array of length p.
CovariateVector = np.ndarray


@dataclass(frozen=True)
class ValidationObs:
    """One fully observed row: true response, surrogate response, covariates."""

    y: int
    ytilde: int
    x: CovariateVector


@dataclass(frozen=True)
class NonValidationObs:
    """One surrogate-only row."""

    ytilde: int
    x: CovariateVector


@dataclass(frozen=True)
class MisclassProbs:
    """False-positive and false-negative rates of the surrogate response.

    ``theta1 = P(ytilde=1 | y=0)`` and ``theta2 = P(ytilde=0 | y=1)``.
    The container itself accepts any floats: joint-likelihood estimators
    may legitimately produce values outside [0, 1], and those are reported
    raw.  Contexts that need interior or identifiable values call the
    predicates below.
    """

    theta1: float
    theta2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2], dtype=float)

    def is_interior(self) -> bool:
        return 0.0 < self.theta1 < 1.0 and 0.0 < self.theta2 < 1.0

    def identifiability_gap(self) -> float:
        """|1 - theta1 - theta2|; must stay positive for the surrogate score."""
        return abs(1.0 - self.theta1 - self.theta2)


@dataclass(frozen=True)
class RegressionCoef:
    """Logistic regression coefficient vector."""

    beta: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if b.ndim != 1:
            raise SchemaError("beta must be a 1-d vector")
        if not np.all(np.isfinite(b)):
            raise SchemaError("beta entries must be finite")
        object.__setattr__(self, "beta", b)

    @property
    def p(self) -> int:
        return self.beta.shape[0]


def _check_binary(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.size and not np.isin(a, (0, 1)).all():
        raise SchemaError(f"{name} entries must be 0 or 1")
    return a.astype(np.int8)


@dataclass(frozen=True)
class Dataset:
    """Validation rows (y, ytilde, x) plus surrogate-only rows (ytilde, x).

    Attributes
    ----------
    y_val, ytilde_val : (n1,) int8 arrays, n1 >= 1
    x_val : (n1, p) float array
    ytilde_nv : (n2,) int8 array, n2 >= 0
    x_nv : (n2, p) float array
    has_intercept : first covariate column is identically 1
    """

    y_val: np.ndarray
    ytilde_val: np.ndarray
    x_val: np.ndarray
    ytilde_nv: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    x_nv: np.ndarray | None = None
    has_intercept: bool = False

    def __post_init__(self):
        y = _check_binary(self.y_val, "y")
        yt = _check_binary(self.ytilde_val, "ytilde")
        xv = np.ascontiguousarray(np.atleast_2d(np.asarray(self.x_val, dtype=float)))
        if xv.shape[0] != y.shape[0] or yt.shape[0] != y.shape[0]:
            raise SchemaError("validation arrays disagree in length")
        if y.shape[0] < 1:
            raise SchemaError("at least one validation row is required")
        p = xv.shape[1]
        ytn = _check_binary(self.ytilde_nv, "ytilde")
        xn = self.x_nv
        if xn is None:
            xn = np.zeros((0, p))
        xn = np.ascontiguousarray(np.atleast_2d(np.asarray(xn, dtype=float)))
        if xn.shape[0] == 0:
            xn = xn.reshape(0, p)
        if xn.shape[0] != ytn.shape[0]:
            raise SchemaError("non-validation arrays disagree in length")
        if xn.shape[1] != p:
            raise SchemaError("covariate dimension differs between sample parts")
        if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(xn))):
            raise SchemaError("covariates must be finite")
        if self.has_intercept:
            if not (np.all(xv[:, 0] == 1.0) and (xn.shape[0] == 0 or np.all(xn[:, 0] == 1.0))):
                raise SchemaError("has_intercept requires x[0] == 1 on every row")
        object.__setattr__(self, "y_val", y)
        object.__setattr__(self, "ytilde_val", yt)
        object.__setattr__(self, "x_val", xv)
        object.__setattr__(self, "ytilde_nv", ytn)
        object.__setattr__(self, "x_nv", xn)

    @property
    def n1(self) -> int:
        return self.y_val.shape[0]

    @property
    def n2(self) -> int:
        return self.ytilde_nv.shape[0]

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def p(self) -> int:
        return self.x_val.shape[1]

    @property
    def f_n(self) -> float:
        """Validation fraction n1 / n, in (0, 1]."""
        return self.n1 / self.n

    @property
    def x_all(self) -> np.ndarray:
        """All n covariate rows, validation first."""
        if self.n2 == 0:
            return self.x_val
        return np.vstack([self.x_val, self.x_nv])

    @classmethod
    def from_observations(
        cls,
        validation: list[ValidationObs],
        nonvalidation: list[NonValidationObs] = (),
        has_intercept: bool = False,
    ) -> "Dataset":
        if not validation:
            raise SchemaError("at least one validation row is required")
        return cls(
            y_val=np.array([o.y for o in validation]),
            ytilde_val=np.array([o.ytilde for o in validation]),
            x_val=np.array([np.asarray(o.x, dtype=float) for o in validation]),
            ytilde_nv=np.array([o.ytilde for o in nonvalidation], dtype=np.int8),
            x_nv=(
                np.array([np.asarray(o.x, dtype=float) for o in nonvalidation])
                if nonvalidation
                else None
            ),
            has_intercept=has_intercept,
        )

    def validation_only(self) -> "Dataset":
        """The validation half as a stand-alone dataset (f_n = 1)."""
        return Dataset(
            y_val=self.y_val,
            ytilde_val=self.ytilde_val,
            x_val=self.x_val,
            has_intercept=self.has_intercept,
        )
