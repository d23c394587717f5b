import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from mixer.core import ViewPartition, validate_affinity

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")


@st.composite
def partitions(draw, max_views=4, max_card=4):
    n = draw(st.integers(1, max_views))
    return ViewPartition(tuple(draw(st.integers(1, max_card)) for _ in range(n)))


@st.composite
def simplex_rows(draw, m, binary=False):
    """An m x m row-stochastic matrix; one-hot rows when ``binary``."""
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    if binary:
        U = np.zeros((m, m))
        U[np.arange(m), rng.integers(0, m, size=m)] = 1.0
        return U
    U = rng.random((m, m)) ** 3
    return U / U.sum(axis=1, keepdims=True)


def random_affinity(partition, rng, within_view_zero=True):
    m = partition.m
    A = rng.random((m, m))
    A = np.triu(A, 1)
    A = A + A.T
    if within_view_zero:
        ids = partition.view_ids
        A[ids[:, None] == ids[None, :]] = 0.0
    np.fill_diagonal(A, 1.0)
    return validate_affinity(A, partition)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
