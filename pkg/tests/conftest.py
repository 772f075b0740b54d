"""Shared fixtures for the acceptance tests.

The three simulation fixtures are session scoped: the null grid, the
altered-pair cell, and the power sweep are each computed once and shared
by every criterion that reads them.  Criterion outcomes are collected in
a module-level list and echoed as a terminal section so a plain pytest
run ends with one pass/fail line per criterion.
"""

import time
from typing import NamedTuple

import pytest

from ggmtest.lrt import NodeSet
from ggmtest.simulate import ScenarioSpec, conjecture_check, run_scenario

ACCEPTANCE_SEED = 2026
ACCEPTANCE_B = 2000

_acceptance_lines: list[str] = []


@pytest.fixture
def criterion_log():
    """Sink for one formatted pass/fail line per acceptance criterion."""
    return _acceptance_lines.append


@pytest.fixture(scope="session")
def mc_replicates():
    return ACCEPTANCE_B


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)


class NullGrid(NamedTuple):
    summaries: dict
    elapsed: float


@pytest.fixture(scope="session")
def h0_grid():
    """Null cells at the default p=8, rho=0.4 design, keyed by group size.

    n=10 carries singletons only (the anti-conservative corner); the
    larger sizes carry l in {1, 2, 3}.
    """
    start = time.perf_counter()
    summaries = {}
    for n in (10, 50, 100, 250):
        l_values = (1,) if n == 10 else (1, 2, 3)
        spec = ScenarioSpec(
            n1=n, n2=n, b=ACCEPTANCE_B, master_seed=ACCEPTANCE_SEED,
            l_values=l_values,
        )
        summaries[n] = run_scenario(spec)
    return NullGrid(summaries, time.perf_counter() - start)


@pytest.fixture(scope="session")
def altered_pair_cell():
    """Nodes 1 and 2 altered (means +1.5, variances halved) at n=100."""
    spec = ScenarioSpec(
        n1=100, n2=100, delta_mu=1.5, xi=0.5, s=NodeSet((1, 2), 8),
        b=ACCEPTANCE_B, master_seed=ACCEPTANCE_SEED, l_values=(1,),
    )
    summary = run_scenario(spec)
    return spec, summary, conjecture_check(spec, summary)


@pytest.fixture(scope="session")
def power_grid():
    """Holm singleton power under mean shifts, one altered node vs five.

    Keyed by (scenario, n, delta_mu); values are (power_any, power_all)
    for the adjusted statistic.
    """
    cells = {}
    scenarios = (("one", NodeSet((1,), 8)), ("five", NodeSet((1, 2, 3, 4, 5), 8)))
    for name, s in scenarios:
        for n in (50, 100):
            for delta_mu in (0.0, 0.5, 1.0, 1.5):
                spec = ScenarioSpec(
                    n1=n, n2=n, delta_mu=delta_mu, xi=1.0, s=s,
                    b=ACCEPTANCE_B, master_seed=ACCEPTANCE_SEED, l_values=(1,),
                )
                family = run_scenario(spec).families[1]
                cells[name, n, delta_mu] = (
                    family.power_any["holm"]["t"],
                    family.power_all["holm"]["t"],
                )
    return cells
