import numpy as np
import pytest

from remeta.model import Dataset
from remeta.simulation import run_grid

ACCEPTANCE_SEED = 20160101

# (number, title, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE_LOG = []


def random_datasets(n, k_choices=(2, 3, 4, 5, 6, 7, 8), seed=12345):
    """Random (y, s) datasets drawn from the marginal model with random tau2."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = int(rng.choice(k_choices))
        s = rng.uniform(0.2, 2.0, size=k)
        tau2 = rng.choice([0.0, rng.uniform(0.0, 3.0)])
        y = rng.normal(rng.uniform(-2, 2), np.sqrt(s**2 + tau2))
        out.append(Dataset.from_arrays(y, s))
    return out


@pytest.fixture(scope="session")
def full_grid():
    """The complete 4 x 10 x 5 grid, all estimators, 10^4 replicates per cell."""
    return run_grid(reps=10_000, seed=ACCEPTANCE_SEED)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_LOG, key=lambda r: r[0]):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {number:>2}. {title}: {detail}")
