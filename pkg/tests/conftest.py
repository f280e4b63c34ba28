import time
from contextlib import contextmanager

import numpy as np
import pytest

from hjverse import states
from hjverse.grid import make_grid

_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def periodic_grid():
    return make_grid(1, 1024, 40.0, "periodic", spectral=True)


@pytest.fixture
def small_grid():
    return make_grid(1, 256, 20.0, "periodic", spectral=True)


@pytest.fixture
def gaussian(periodic_grid):
    return states.gaussian(periodic_grid, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion(request):
    """Time a numbered acceptance criterion and record its verdict for the summary."""
    results = request.config.stash.setdefault(_CRITERIA, [])

    @contextmanager
    def run(number, title, budget):
        start = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            within = elapsed < budget
            verdict = "PASS" if ok and within else "FAIL"
            note = "" if within else f" (over {budget:g} s budget)"
            results.append(f"criterion {number}: {verdict}  {title}  [{elapsed:.2f} s]{note}")
        assert within, f"criterion {number} took {elapsed:.2f} s, budget {budget} s"

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_CRITERIA, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(results, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
