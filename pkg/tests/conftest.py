"""Shared fixtures.

The expensive objects (ground state, basin maps, the velocity-threshold
bracket) are session scoped so the unit tests and the acceptance tests split
the cost of a single computation.
"""

import sys
import time

import pytest

from trichotomy import IntegratorOptions, find_U1
from trichotomy.cli import BasinJob, run_basin
from trichotomy.kg import TorusGrid, ground_state_search


@pytest.fixture(scope="session")
def l8_grid():
    return TorusGrid(1, 128, 8.0)


@pytest.fixture(scope="session")
def ground_l8(l8_grid):
    result = ground_state_search(l8_grid)
    assert result.converged
    return result


@pytest.fixture(scope="session")
def u1_bracket_g1():
    return find_U1(1.0, width=1e-4)


@pytest.fixture(scope="session")
def basin_maps():
    """Three 300x300 phase-plane maps on [-3,3]^2, plus their total wall time."""
    opts = IntegratorOptions()
    out = {}
    t0 = time.perf_counter()
    for gamma in (0.0, 0.5, 2.0):
        job = BasinJob(-3.0, 3.0, -3.0, 3.0, 300, 300, gamma, opts, threads=2)
        out[gamma] = run_basin(job)
    return out, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = None
    for m in sys.modules.values():
        if hasattr(m, "ACCEPTANCE_RESULTS"):
            mod = m
            break
    if mod is None or not mod.ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.ACCEPTANCE_RESULTS):
        ok, detail = mod.ACCEPTANCE_RESULTS[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")
