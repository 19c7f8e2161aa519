import numpy as np
import pytest

from adaptive_pl import (
    BlockPartition,
    BoxBlock,
    CompositeProblem,
    FunctionOracle,
    SolverConfig,
    all_proposals,
    apply_block_step,
    armijo_search,
    basic_cycle,
    block_proposal,
    convex_rule_search,
    lipschitz_step,
    mu_value,
    solve_adaptive,
    solve_classic_cg,
    total_gap,
)
from adaptive_pl.applications.benchmark import BenchmarkSpec, build_benchmark, starting_point
from adaptive_pl.blockcore import BlockProposal
from adaptive_pl.errors import (
    IterationBudgetExceeded,
    NotDeclaredConvex,
    StageBudgetExceeded,
    StepsizeUnderflow,
)

from conftest import linear_simplex_problem, random_simplex_point


class _NoHBox(BoxBlock):
    def h_value(self, y):
        raise AssertionError("h oracle must not be called for h = 0")


def half_square(convex=True, block=None):
    """``f(x) = 0.5 x^2`` on ``[0, 1]``."""
    part = BlockPartition((1,))
    oracle = FunctionOracle(part, lambda x: 0.5 * float(x @ x), lambda x: x.copy(), convex=convex)
    return CompositeProblem(part, oracle, [block or BoxBlock([0.0], [1.0], lipschitz=1.0)])


# -- stepsize rules ---------------------------------------------------------


def test_armijo_full_step_on_half_square():
    prob = half_square()
    x = prob.vector([1.0])
    p = block_proposal(prob, x, 0)
    assert p.y[0] == 0.0 and p.phi == 1.0
    lam, m, mu_new = armijo_search(prob, x, p, beta=0.5, theta=0.5)
    assert (lam, m, mu_new) == (1.0, 0, 0.0)


def test_armijo_exponent_is_minimal(f1_small):
    prob, x = f1_small
    beta, theta = 0.3, 0.5
    mu_x = mu_value(prob, x)
    for s in range(prob.n):
        p = block_proposal(prob, x, s)
        lam, m, mu_new = armijo_search(prob, x, p, beta, theta)
        assert mu_new <= mu_x - beta * lam * p.phi
        if m >= 1:
            prev = theta ** (m - 1)
            assert mu_value(prob, apply_block_step(x, s, p.y, prev)) > mu_x - beta * prev * p.phi


def test_convex_rule_half_step_on_half_square():
    prob = half_square()
    x = prob.vector([1.0])
    p = block_proposal(prob, x, 0)
    assert convex_rule_search(prob, x, p, beta=0.5, theta=0.5) == (0.5, 1)


def test_convex_rule_skips_h_when_h_is_zero():
    prob = half_square(block=_NoHBox([0.0], [1.0]))
    x = prob.vector([1.0])
    prob.smooth.reset_counters()
    p = block_proposal(prob, x, 0)
    lam, m = convex_rule_search(prob, x, p, 0.5, 0.5)
    # one call for the proposal plus one per probe, no function values
    assert prob.smooth.counters() == (0, 1 + m + 1)


@pytest.mark.parametrize("objective", ["f1", "f1_plus_f2"])
def test_convex_rule_acceptance_implies_armijo(objective, rng):
    prob = build_benchmark(BenchmarkSpec(20, 5, objective))
    beta, theta = 0.3, 0.5
    for _ in range(30):
        x = random_simplex_point(rng, prob)
        mu_x = mu_value(prob, x)
        for s in range(prob.n):
            p = block_proposal(prob, x, s)
            lam, m = convex_rule_search(prob, x, p, beta, theta)
            assert mu_value(prob, apply_block_step(x, s, p.y, lam)) <= mu_x - beta * lam * p.phi + 1e-12


def test_convex_rule_needs_convexity_flag():
    prob = half_square(convex=False)
    x = prob.vector([1.0])
    with pytest.raises(NotDeclaredConvex):
        convex_rule_search(prob, x, block_proposal(prob, x, 0), 0.5, 0.5)
    with pytest.raises(NotDeclaredConvex):
        solve_adaptive(prob, x, SolverConfig(stepsize_rule="convex"))


def test_lipschitz_step_examples():
    p = BlockProposal(0, np.zeros(1), 2.0, 2.0)
    assert lipschitz_step(p, 1.0, 4.0, 0.5) == 0.5
    p = BlockProposal(0, np.zeros(1), 10.0, 10.0)
    assert lipschitz_step(p, 1.0, 1.0, 0.5) == 1.0
    with pytest.raises(ValueError):
        lipschitz_step(p, 0.0, 1.0, 0.5)


@pytest.mark.parametrize("objective", ["f1", "f1_plus_f2"])
def test_lipschitz_steps_descend(objective, rng):
    prob = build_benchmark(BenchmarkSpec(20, 5, objective))
    beta = 0.3
    for _ in range(30):
        x = random_simplex_point(rng, prob)
        mu_x = mu_value(prob, x)
        for s in range(prob.n):
            p = block_proposal(prob, x, s)
            d = np.linalg.norm(p.y - x.block(s))
            if d == 0:
                continue
            lam = lipschitz_step(p, d, prob.terms[s].lipschitz, beta)
            assert mu_value(prob, apply_block_step(x, s, p.y, lam)) - mu_x <= -beta * lam * p.phi + 1e-12


def test_armijo_underflow_on_inconsistent_oracle():
    part = BlockPartition((1,))
    # the gradient claims descent towards 0 while the value increases
    oracle = FunctionOracle(part, lambda x: -float(x[0]), lambda x: np.array([1.0]))
    prob = CompositeProblem(part, oracle, [BoxBlock([0.0], [1.0])])
    x = prob.vector([1.0])
    with pytest.raises(StepsizeUnderflow):
        armijo_search(prob, x, block_proposal(prob, x, 0), 0.3, 0.5, max_m=10)
    with pytest.raises(StepsizeUnderflow):
        solve_adaptive(prob, x, SolverConfig(max_armijo_exponent=10))


# -- basic cycle --------------------------------------------------------------


def test_basic_cycle_returns_start_when_all_gaps_small(f1_small):
    prob, x0 = f1_small
    prob.smooth.reset_counters()
    z, records = basic_cycle(prob, x0, 1e3)
    assert records == [] and np.array_equal(z.data, x0.data)
    assert prob.smooth.partial_gradient_calls == prob.n


@pytest.mark.parametrize("delta", [0.5, 0.05, 0.005])
def test_basic_cycle_exit_is_sound(f1_small, delta):
    prob, x0 = f1_small
    beta = 0.3
    z, records = basic_cycle(prob, x0, delta, SolverConfig(beta=beta))
    assert max(p.phi for p in all_proposals(prob, z)) < delta
    mu = mu_value(prob, x0)
    for r in records:
        assert r.phi >= delta
        assert r.mu <= mu - beta * r.lam * delta + 1e-12
        mu = r.mu


def test_basic_cycle_budget(f1_small):
    prob, x0 = f1_small
    with pytest.raises(IterationBudgetExceeded):
        basic_cycle(prob, x0, 1e-6, SolverConfig(max_iterations=3))


# -- staged method ------------------------------------------------------------


def test_already_stationary_start_takes_no_steps():
    prob = linear_simplex_problem([3.0, 1.0, 2.0, 0.0, 1.0], [3, 2])
    x = prob.vector([0.0, 1.0, 0.0, 1.0, 0.0])
    trace = solve_adaptive(prob, x)
    assert trace.iterations == 0 and trace.final_gap == 0.0 and trace.converged


@pytest.mark.parametrize("objective", ["f1", "f1_plus_f2"])
def test_adaptive_small_benchmark(objective):
    spec = BenchmarkSpec(10, 5, objective)
    prob = build_benchmark(spec)
    trace = solve_adaptive(prob, starting_point(spec), SolverConfig(epsilon=0.1))
    assert trace.converged and trace.final_gap <= 0.1
    assert total_gap(prob, trace.z) == pytest.approx(trace.final_gap, abs=1e-12)
    # magnitude reference: 9 iterations / 28 gradient calls (f1), 10 / 32 (f1 + f2)
    assert 1 <= trace.iterations <= 90
    assert sum(trace.stage_iterations) == trace.iterations


@pytest.mark.parametrize("rule", ["armijo", "convex", "lipschitz"])
@pytest.mark.parametrize("selection", ["cyclic", "greedy", "random"])
def test_all_rules_and_selections_reach_target(rule, selection):
    spec = BenchmarkSpec(20, 5, "f1_plus_f2")
    prob = build_benchmark(spec)
    cfg = SolverConfig(epsilon=0.01, stepsize_rule=rule, selection=selection, seed=7)
    trace = solve_adaptive(prob, starting_point(spec), cfg)
    assert trace.converged and trace.final_gap <= 0.01
    mus = [r.mu for r in trace.records]
    assert all(b <= a for a, b in zip(mus, mus[1:]))


def test_stage_gaps_respect_stage_tolerance():
    spec = BenchmarkSpec(20, 5)
    prob = build_benchmark(spec)
    trace = solve_adaptive(prob, starting_point(spec), SolverConfig(epsilon=1e-3))
    for delta, gap in zip(trace.stage_deltas, trace.stage_gaps):
        assert gap <= prob.n * delta
    assert trace.stage_deltas == pytest.approx([trace.delta0 * 0.5**l for l in range(1, trace.stages + 1)])


def test_records_are_monotone_and_counted():
    spec = BenchmarkSpec(50, 10)
    prob = build_benchmark(spec)
    cfg = SolverConfig(beta=0.3)
    trace = solve_adaptive(prob, starting_point(spec), cfg)
    mu = mu_value(build_benchmark(spec), starting_point(spec))
    prev_pg = 0
    for r in trace.records:
        assert 0 < r.lam <= 1
        assert r.mu <= mu - cfg.beta * r.lam * r.phi + 1e-12
        assert r.pg_calls > prev_pg
        mu, prev_pg = r.mu, r.pg_calls
    assert trace.pg_calls == trace.cl + prob.n


def test_random_selection_is_seeded():
    spec = BenchmarkSpec(20, 5)
    runs = [
        solve_adaptive(build_benchmark(spec), starting_point(spec), SolverConfig(selection="random", seed=s))
        for s in (3, 3, 4)
    ]
    assert runs[0].records == runs[1].records
    assert [r.block for r in runs[0].records] != [r.block for r in runs[2].records]


def test_budget_exits_carry_trace():
    spec = BenchmarkSpec(50, 5)
    prob = build_benchmark(spec)
    with pytest.raises(IterationBudgetExceeded) as info:
        solve_adaptive(prob, starting_point(spec), SolverConfig(max_iterations=10))
    assert info.value.trace.iterations == 10
    assert info.value.trace.final_gap > 0.1
    with pytest.raises(StageBudgetExceeded) as info:
        solve_adaptive(prob, starting_point(spec), SolverConfig(max_stages=1, epsilon=1e-6))
    assert info.value.trace.stages == 1


def test_lipschitz_rule_needs_constants():
    prob = half_square(block=BoxBlock([0.0], [1.0]))
    with pytest.raises(ValueError, match="Lipschitz"):
        solve_adaptive(prob, prob.vector([1.0]), SolverConfig(stepsize_rule="lipschitz"))


def test_sharp_linear_problem_ends_on_exact_vertex():
    c = np.array([3.0, 1.0, 2.0, 0.5, 4.0, 1.5, 0.2, 7.0, 2.0, 2.5, 9.0, 1.0, 6.0, 0.0, 3.0])
    prob = linear_simplex_problem(c, [3] * 5)
    x0 = prob.vector(np.full(15, 1 / 3))
    trace = solve_adaptive(prob, x0, SolverConfig(epsilon=1e-12))
    assert trace.final_gap == 0.0
    expected = np.zeros(15)
    for i in range(5):
        expected[3 * i + np.argmin(c[3 * i: 3 * i + 3])] = 1.0
    assert np.array_equal(trace.z.data, expected)
    assert trace.iterations <= 5 * 5


# -- classic baseline ---------------------------------------------------------


def test_classic_cg_accounting(f1_small):
    prob, x0 = f1_small
    trace = solve_classic_cg(prob, x0, epsilon=0.1)
    assert trace.converged and trace.final_gap <= 0.1
    assert trace.cl == trace.iterations * prob.n
    assert trace.pg_calls == trace.iterations * prob.n + prob.n


def test_classic_cg_budget_reports_gap():
    spec = BenchmarkSpec(100, 50)
    with pytest.raises(IterationBudgetExceeded) as info:
        solve_classic_cg(build_benchmark(spec), starting_point(spec), max_iterations=20)
    trace = info.value.trace
    assert trace.iterations == 20 and trace.cl == 20 * 50 and trace.final_gap > 0.1


@pytest.mark.parametrize("objective", ["f1", "f1_plus_f2"])
def test_single_block_methods_coincide(objective):
    spec = BenchmarkSpec(6, 1, objective)
    cfg = SolverConfig(epsilon=1e-2, delta0=1e-3)
    a = solve_adaptive(build_benchmark(spec), starting_point(spec), cfg)
    c = solve_classic_cg(build_benchmark(spec), starting_point(spec), epsilon=1e-2, max_iterations=10_000)
    assert a.iterations == c.iterations
    assert np.array_equal(a.z.data, c.z.data)
    assert [r.lam for r in a.records] == [r.lam for r in c.records]


@pytest.mark.parametrize("kwargs", [dict(beta=0.0), dict(theta=1.0), dict(nu=1.5), dict(epsilon=0.0),
                                    dict(delta0=-1.0), dict(stepsize_rule="exact"), dict(selection="best")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)
