from pathlib import Path

import numpy as np
import pytest

from paretofair.data_io import GroupedDataset

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
ADULT_TRAIN = DATA_DIR / "adult.data"
ADULT_TEST = DATA_DIR / "adult.test"
COMPAS = DATA_DIR / "compas-scores-two-years.csv"

needs_data = pytest.mark.skipif(
    not (ADULT_TRAIN.is_file() and ADULT_TEST.is_file() and COMPAS.is_file()),
    reason="Adult/COMPAS files not present under data/",
)


def random_dataset(n=40, d=4, c=2, seed=0, intercept=True) -> GroupedDataset:
    """Random grouped data where every (group, label) cell is populated."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    names = [f"x{j}" for j in range(d)]
    if intercept:
        X = np.hstack([X, np.ones((n, 1))])
        names.append("intercept")
    groups = np.arange(n) % c
    y = np.where((np.arange(n) // c) % 2 == 0, 1.0, -1.0)
    return GroupedDataset(X, y, groups, tuple(f"g{k}" for k in range(c)), tuple(names))


@pytest.fixture
def small_dataset():
    return random_dataset()


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance criteria lines collected during the run."""
    import sys

    module = sys.modules.get("tests.test_acceptance")
    report = getattr(module, "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(report):
        terminalreporter.write_line(report[number])
