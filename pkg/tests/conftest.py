import numpy as np
import pytest

from misclassit import Dataset, MisclassProbs


def random_dataset(rng, n=60, p=2, n1=None, beta=None, theta=(0.1, 0.3),
                   intercept=False) -> Dataset:
    """Draw a dataset from the generative model with standard-normal
    covariates (plus an intercept column when asked)."""
    if n1 is None:
        n1 = max(1, n // 3)
    if beta is None:
        beta = rng.normal(scale=0.8, size=p)
    x = rng.normal(size=(n, p))
    if intercept:
        x[:, 0] = 1.0
    from misclassit.model import psi

    y = (rng.random(n) < psi(x @ np.asarray(beta))).astype(int)
    t1, t2 = theta
    flip = rng.random(n) < np.where(y == 1, t2, t1)
    yt = np.where(flip, 1 - y, y)
    return Dataset(
        y_val=y[:n1],
        ytilde_val=yt[:n1],
        x_val=x[:n1],
        ytilde_nv=yt[n1:],
        x_nv=x[n1:] if n1 < n else None,
        has_intercept=intercept,
    )


def assert_symmetric_psd(mat, sym_tol=1e-10, eig_tol_scale=1e-8):
    mat = np.asarray(mat)
    assert np.max(np.abs(mat - mat.T)) <= sym_tol
    eigs = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    assert eigs.min() >= -eig_tol_scale * max(np.trace(mat), 1e-30)


def relative_close(actual, expected, rel):
    """Entrywise relative comparison; zero entries are measured against the
    geometric mean of the matching diagonal entries."""
    actual = np.atleast_2d(np.asarray(actual, dtype=float))
    expected = np.atleast_2d(np.asarray(expected, dtype=float))
    d = np.sqrt(np.abs(np.diag(expected)))
    scale = np.maximum(np.abs(expected), np.outer(d, d))
    return np.all(np.abs(actual - expected) <= rel * np.maximum(scale, 1e-12))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def theta_default():
    return MisclassProbs(0.1, 0.3)
