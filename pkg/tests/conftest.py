import numpy as np
import pytest

from adaptive_pl import BlockPartition, CompositeProblem, FunctionOracle, SimplexBlock
from adaptive_pl.applications.benchmark import BenchmarkSpec, build_benchmark, starting_point

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def linear_simplex_problem(c, sizes):
    """``f(x) = <c, x>`` over a product of unit simplices."""
    c = np.asarray(c, dtype=float)
    part = BlockPartition(tuple(sizes))
    oracle = FunctionOracle(part, lambda x: float(c @ x), lambda x: c, convex=True)
    return CompositeProblem(part, oracle, [SimplexBlock(s, lipschitz=1e-12) for s in sizes])


def random_simplex_point(rng, problem):
    return problem.vector(np.concatenate([rng.dirichlet(np.ones(s)) for s in problem.partition.sizes]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def f1_small():
    spec = BenchmarkSpec(10, 5, "f1")
    return build_benchmark(spec), starting_point(spec)
