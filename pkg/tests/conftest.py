import numpy as np
import pytest
from hypothesis import strategies as st

from singlering import AtomicMeasure, SymmetricMeasure


@st.composite
def half_laws(draw, max_atoms=5, lo=0.05, hi=3.0):
    """Random law on (0, inf) given as the half of a symmetric law."""
    n = draw(st.integers(1, max_atoms))
    t = draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n, unique=True))
    w = np.array(draw(st.lists(st.floats(0.1, 1.0), min_size=n, max_size=n)))
    return AtomicMeasure(t, w / w.sum())


@st.composite
def symmetric_laws(draw, max_atoms=5):
    return SymmetricMeasure(draw(half_laws(max_atoms)))


@pytest.fixture
def bernoulli():
    return SymmetricMeasure(AtomicMeasure([1.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, filled by tests/test_acceptance.py and printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, name, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:2d} {name}: {detail}")
