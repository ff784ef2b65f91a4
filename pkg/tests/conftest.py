import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybridcf import RatingsMatrix  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_matrix(rng: np.random.Generator, n_users: int, n_items: int, missing: float) -> np.ndarray:
    v = rng.integers(0, 6, size=(n_users, n_items)).astype(float)
    v[rng.random(v.shape) < missing] = np.nan
    return v


def to_lists(values: np.ndarray):
    return [[None if np.isnan(x) else float(x) for x in row] for row in values]


def as_matrix(values) -> RatingsMatrix:
    values = np.asarray(values, dtype=float)
    users = tuple(f"u{i}" for i in range(values.shape[0]))
    items = tuple(f"i{j}" for j in range(values.shape[1]))
    return RatingsMatrix(users, items, values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
