"""Regenerate the committed test fixtures and CLI golden reports.

Run from the repository root:

    python scripts/make_fixtures.py

Fixture datasets are drawn with recorded seeds; golden reports are the CLI
output on those fixtures under --deterministic.  Oracle tests (golden
section, lattice grid search) validate the numbers in the goldens, so this
script only needs rerunning if the fixtures or report schema change.
"""

from __future__ import annotations

import pathlib
import sys

import numpy as np

REPO = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from misclassit import Dataset, MisclassProbs, SimConfig, SimModel  # noqa: E402
from misclassit.cli import main, write_dataset_csv  # noqa: E402
from misclassit.model import psi  # noqa: E402
from misclassit.rng import substream  # noqa: E402
from misclassit.simulate import CovariateSpec, generate_dataset  # noqa: E402

DATA_DIR = REPO / "tests" / "data"

TINY_SEED = 424242
NAIVE_SEED = 90210


def tiny_fixture() -> Dataset:
    """n=30 (n1=10), p=1 standard-normal covariate, beta0=1, rates (0.1, 0.3)."""
    model = SimModel(
        name="tiny",
        beta0=np.array([1.0]),
        theta0=MisclassProbs(0.1, 0.3),
        covariates=(CovariateSpec("normal", (0.0, 1.0)),),
    )
    cfg = SimConfig(n=30, f_n=1.0 / 3.0, reps=1, seed=TINY_SEED)
    return generate_dataset(model, cfg, substream(TINY_SEED, 0))


def naive_fixture() -> Dataset:
    """n=40, p=2, all rows validated; used by the lattice-search oracle."""
    rng = substream(NAIVE_SEED, 0)
    x = np.column_stack([rng.normal(size=40), rng.normal(size=40)])
    beta0 = np.array([0.8, -0.5])
    y = (rng.random(40) < psi(x @ beta0)).astype(int)
    return Dataset(y_val=y, ytilde_val=y, x_val=x)


def main_():
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(tiny_fixture(), DATA_DIR / "tiny_fixture.csv")
    write_dataset_csv(naive_fixture(), DATA_DIR / "naive_fixture.csv")
    main([
        "fit", "--method", "pmle", "--data", str(DATA_DIR / "tiny_fixture.csv"),
        "--ci", "wald", "--deterministic",
        "--out", str(DATA_DIR / "golden_fit_pmle.json"),
    ])
    main([
        "bootstrap", "--data", str(DATA_DIR / "tiny_fixture.csv"),
        "--B", "200", "--seed", "7", "--eta", "0.025", "--deterministic",
        "--out", str(DATA_DIR / "golden_bootstrap.json"),
    ])
    print(f"fixtures written to {DATA_DIR}")


if __name__ == "__main__":
    main_()
