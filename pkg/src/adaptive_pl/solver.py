"""Adaptive partial linearization (ACGM) and the classic conditional gradient baseline.

The adaptive method works in stages.  Stage ``l`` runs a *basic cycle* with
tolerance ``delta_l = nu**l * delta0``: while some block has gap
``phi_s >= delta_l`` it moves that single block towards its proposal with a
backtracked step; once every block is below ``delta_l`` the stage ends.
Only the scanned blocks pay for a partial gradient, which is where the
savings over the full-gradient method come from.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .blockcore import (
    BlockProposal,
    BlockVector,
    CompositeProblem,
    all_proposals,
    apply_block_step,
    block_proposal,
    mu_value,
)
from .errors import (
    IterationBudgetExceeded,
    NotDeclaredConvex,
    StageBudgetExceeded,
    StepsizeUnderflow,
)

log = logging.getLogger(__name__)

STEPSIZE_RULES = ("armijo", "convex_rule", "lipschitz")
SELECTIONS = ("cyclic_first", "greedy_max", "random")
_ALIASES = {
    "convex": "convex_rule",
    "cyclic": "cyclic_first",
    "greedy": "greedy_max",
}


@dataclass
class SolverConfig:
    beta: float = 0.3
    theta: float = 0.5
    delta0: float | None = None
    nu: float = 0.5
    epsilon: float = 0.1
    max_stages: int = 200
    max_iterations: int = 100_000
    max_armijo_exponent: int = 60
    stepsize_rule: str = "armijo"
    selection: str = "cyclic_first"
    seed: int = 0

    def __post_init__(self):
        self.stepsize_rule = _ALIASES.get(self.stepsize_rule, self.stepsize_rule)
        self.selection = _ALIASES.get(self.selection, self.selection)
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if self.delta0 is not None and self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_stages < 1 or self.max_iterations < 0 or self.max_armijo_exponent < 0:
            raise ValueError("budgets must be nonnegative (max_stages >= 1)")
        if self.stepsize_rule not in STEPSIZE_RULES:
            raise ValueError(f"unknown stepsize rule {self.stepsize_rule!r}")
        if self.selection not in SELECTIONS:
            raise ValueError(f"unknown selection {self.selection!r}")


@dataclass(frozen=True)
class IterationRecord:
    stage: int
    iteration: int
    block: int
    phi: float
    lam: float
    m: int
    mu: float
    value_calls: int
    pg_calls: int


@dataclass
class RunTrace:
    method: str
    z: BlockVector
    final_gap: float
    mu_final: float
    termination: str
    records: list[IterationRecord] = field(default_factory=list)
    stage_iterations: list[int] = field(default_factory=list)
    stage_deltas: list[float] = field(default_factory=list)
    stage_gaps: list[float] = field(default_factory=list)
    delta0: float | None = None
    value_calls: int = 0
    pg_calls: int = 0
    # gradient calls spent certifying the returned point (one per block)
    terminal_calls: int = 0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def stages(self) -> int:
        return len(self.stage_iterations)

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    @property
    def cl(self) -> int:
        """Partial-gradient count in the benchmark-table convention.

        The final certification scan of the returned point is not charged,
        so the full-gradient method reports exactly ``it * n``.
        """
        return self.pg_calls - self.terminal_calls


# -- stepsize rules ---------------------------------------------------------


def armijo_search(problem: CompositeProblem, x: BlockVector, proposal: BlockProposal,
                  beta: float, theta: float, max_m: int = 60, mu_x: float | None = None):
    """Smallest ``m`` with ``mu(x + theta**m d) <= mu(x) - beta theta**m phi_s``.

    Returns ``(lam, m, mu_new)``.
    """
    if not proposal.phi > 0:
        raise ValueError("Armijo search needs a proposal with positive gap")
    if mu_x is None:
        mu_x = mu_value(problem, x)
    s = proposal.block
    for m in range(max_m + 1):
        lam = theta**m
        trial = apply_block_step(x, s, proposal.y, lam)
        mu_new = mu_value(problem, trial, check=False)
        if mu_new <= mu_x - beta * lam * proposal.phi:
            return lam, m, mu_new
    raise StepsizeUnderflow(f"no acceptable step for block {s} up to theta**{max_m}")


def convex_rule_search(problem: CompositeProblem, x: BlockVector, proposal: BlockProposal,
                       beta: float, theta: float, max_m: int = 60):
    """Backtracking on the directional slope at the trial point (convex ``f`` only).

    Accepts the smallest ``m`` with
    ``<g_s(x + theta**m d), d_s> + theta**-m [h_s(x_s + theta**m d_s) - h_s(x_s)] <= -beta phi_s``.
    Each probe costs one partial gradient and no function value.
    """
    if not problem.convex:
        raise NotDeclaredConvex("the convex rule needs a smooth part declared convex")
    if not proposal.phi > 0:
        raise ValueError("line search needs a proposal with positive gap")
    s = proposal.block
    term = problem.terms[s]
    x_s = x.block(s)
    d_s = proposal.y - x_s
    h_x = term.h_value(x_s) if term.has_h else 0.0
    for m in range(max_m + 1):
        lam = theta**m
        trial = apply_block_step(x, s, proposal.y, lam)
        slope = float(problem.smooth.partial_gradient(trial, s) @ d_s)
        if term.has_h:
            slope += (term.h_value(trial.block(s)) - h_x) / lam
        if slope <= -beta * proposal.phi:
            return lam, m
    raise StepsizeUnderflow(f"convex rule found no step for block {s} up to theta**{max_m}")


def lipschitz_step(proposal: BlockProposal, d_norm: float, L_s: float, beta: float) -> float:
    """Predefined step ``min(1, 2 (1 - beta) phi_s / (|d_s|^2 L_s))``."""
    if L_s <= 0 or d_norm <= 0:
        raise ValueError("Lipschitz step needs positive L_s and |d_s|")
    return min(1.0, 2.0 * (1.0 - beta) * proposal.phi / (d_norm**2 * L_s))


# -- adaptive method --------------------------------------------------------


class _BudgetHit(Exception):
    pass


class _AdaptiveRun:
    """Mutable state of one adaptive solve.

    ``fresh`` holds the proposals evaluated at the current point; it is
    emptied by every step because all partial gradients depend on the whole
    vector.  A point scanned at the end of one stage is reused by the next.
    """

    def __init__(self, problem: CompositeProblem, x0, config: SolverConfig):
        self.problem = problem
        self.config = config
        self.x = x0 if isinstance(x0, BlockVector) else problem.vector(x0)
        problem.check_feasible(self.x)
        if config.stepsize_rule == "lipschitz" and any(t.lipschitz is None for t in problem.terms):
            raise ValueError("the lipschitz rule needs a Lipschitz constant on every block")
        if config.stepsize_rule == "convex_rule" and not problem.convex:
            raise NotDeclaredConvex("the convex rule needs a smooth part declared convex")
        self.rng = np.random.default_rng(config.seed)
        self.fresh: dict[int, BlockProposal] = {}
        self.last = -1
        self.stage = 0
        self.records: list[IterationRecord] = []
        self.mu = mu_value(problem, self.x)

    # proposals at the current point
    def proposal(self, i: int) -> BlockProposal:
        p = self.fresh.get(i)
        if p is None:
            p = block_proposal(self.problem, self.x, i)
            self.fresh[i] = p
        return p

    def scan_all(self) -> None:
        missing = [i for i in range(self.problem.n) if i not in self.fresh]
        if len(missing) == self.problem.n:
            for p in all_proposals(self.problem, self.x):
                self.fresh[p.block] = p
        else:
            for i in missing:
                self.proposal(i)

    def known_gap(self) -> float | None:
        if len(self.fresh) == self.problem.n:
            return float(sum(p.phi for p in self.fresh.values()))
        return None

    def select(self, delta: float) -> BlockProposal | None:
        n = self.problem.n
        eps = self.config.epsilon
        sel = self.config.selection
        if sel == "greedy_max":
            self.scan_all()
            best = max(range(n), key=lambda i: (self.fresh[i].phi, -i))
            p = self.fresh[best]
            return p if p.phi >= delta and self.known_gap() > eps else None
        if sel == "cyclic_first":
            order = [(self.last + 1 + j) % n for j in range(n)]
        else:
            order = [int(i) for i in self.rng.permutation(n)]
        chosen = None
        for i in order:
            p = self.proposal(i)
            if p.phi >= delta:
                chosen = p
                break
        # a complete scan at this point may already certify the target accuracy
        gap = self.known_gap()
        if gap is not None and gap <= eps:
            return None
        return chosen

    def step(self, p: BlockProposal) -> None:
        cfg = self.config
        problem = self.problem
        if len(self.records) >= cfg.max_iterations:
            raise _BudgetHit()
        s = p.block
        if cfg.stepsize_rule == "armijo":
            lam, m, mu_new = armijo_search(problem, self.x, p, cfg.beta, cfg.theta,
                                           cfg.max_armijo_exponent, mu_x=self.mu)
            x_new = apply_block_step(self.x, s, p.y, lam)
        elif cfg.stepsize_rule == "convex_rule":
            lam, m = convex_rule_search(problem, self.x, p, cfg.beta, cfg.theta, cfg.max_armijo_exponent)
            x_new = apply_block_step(self.x, s, p.y, lam)
            mu_new = mu_value(problem, x_new, check=False)
        else:
            d_norm = float(np.linalg.norm(p.y - self.x.block(s)))
            lam, m = lipschitz_step(p, d_norm, problem.terms[s].lipschitz, cfg.beta), 0
            x_new = apply_block_step(self.x, s, p.y, lam)
            mu_new = mu_value(problem, x_new, check=False)
        self.x = x_new
        self.mu = mu_new
        self.fresh = {}
        self.last = s
        vc, pc = problem.smooth.counters()
        self.records.append(IterationRecord(self.stage, len(self.records), s, p.phi, lam, m, mu_new, vc, pc))

    def cycle(self, delta: float) -> str:
        """Run one basic cycle; returns ``"stage"`` on a normal exit or ``"converged"``."""
        while True:
            p = self.select(delta)
            if p is None:
                gap = self.known_gap()
                return "converged" if gap is not None and gap <= self.config.epsilon else "stage"
            self.step(p)


def basic_cycle(problem: CompositeProblem, x0, delta: float, config: SolverConfig | None = None):
    """Selective block steps until every block gap is below ``delta``.

    Returns ``(z, records)``.  Unlike the staged solver this never stops
    early on ``config.epsilon``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    config = config or SolverConfig()
    # epsilon -> 0 disables the early accuracy exit inside the cycle
    run = _AdaptiveRun(problem, x0, _replace(config, epsilon=np.finfo(float).tiny))
    run.stage = 1
    try:
        run.cycle(delta)
    except _BudgetHit:
        raise IterationBudgetExceeded(f"basic cycle exceeded {config.max_iterations} iterations") from None
    return run.x, run.records


def _replace(config: SolverConfig, **changes) -> SolverConfig:
    values = dict(config.__dict__)
    values.update(changes)
    return SolverConfig(**values)


def solve_adaptive(problem: CompositeProblem, z0, config: SolverConfig | None = None) -> RunTrace:
    """Adaptive PL method with the geometric tolerance schedule.

    Stops once the total gap at a fully scanned point is at most
    ``config.epsilon``.  Budget exits raise with the trace attached.
    """
    config = config or SolverConfig()
    problem.smooth.reset_counters()
    run = _AdaptiveRun(problem, z0, config)
    delta0 = config.delta0
    if delta0 is None:
        run.scan_all()
        delta0 = max(p.phi for p in run.fresh.values()) / 2.0
    trace = RunTrace("ACGM", run.x, np.nan, run.mu, "running", records=run.records, delta0=delta0)

    def finish(termination: str) -> RunTrace:
        run.scan_all()
        trace.z = run.x
        trace.final_gap = run.known_gap()
        trace.mu_final = run.mu
        trace.termination = termination
        trace.value_calls, trace.pg_calls = problem.smooth.counters()
        trace.terminal_calls = problem.n
        return trace

    done_before = 0
    for l in range(1, config.max_stages + 1):
        run.stage = l
        delta = delta0 * config.nu**l if delta0 > 0 else 0.0
        trace.stage_deltas.append(delta)
        try:
            outcome = run.cycle(delta) if delta > 0 else "converged"
        except _BudgetHit:
            trace.stage_iterations.append(len(run.records) - done_before)
            finish("iteration_budget")
            trace.stage_gaps.append(trace.final_gap)
            raise IterationBudgetExceeded(
                f"iteration budget {config.max_iterations} exhausted, gap {trace.final_gap:.4g}", trace
            ) from None
        trace.stage_iterations.append(len(run.records) - done_before)
        done_before = len(run.records)
        run.scan_all()
        trace.stage_gaps.append(run.known_gap())
        log.debug("stage %d: delta=%.3e steps=%d gap=%.4g", l, delta, trace.stage_iterations[-1], trace.stage_gaps[-1])
        if outcome == "converged" or trace.stage_gaps[-1] <= config.epsilon:
            return finish("converged")
    finish("stage_budget")
    raise StageBudgetExceeded(f"stage budget {config.max_stages} exhausted, gap {trace.final_gap:.4g}", trace)


# -- baseline -----------------------------------------------------------------


def solve_classic_cg(problem: CompositeProblem, x0, epsilon: float = 0.1, beta: float = 0.3,
                     theta: float = 0.5, max_iterations: int = 500, max_m: int = 60) -> RunTrace:
    """Full-gradient conditional gradient method with the Armijo rule.

    Every iteration solves all block subproblems (``n`` gradient calls) and
    moves all blocks along ``d = y(x) - x``.
    """
    problem.smooth.reset_counters()
    x = x0 if isinstance(x0, BlockVector) else problem.vector(x0)
    problem.check_feasible(x)
    mu = mu_value(problem, x)
    records: list[IterationRecord] = []
    trace = RunTrace("CGM", x, np.nan, mu, "running", records=records, stage_deltas=[np.nan])
    while True:
        props = all_proposals(problem, x)
        gap = float(sum(p.phi for p in props))
        if gap <= epsilon or len(records) >= max_iterations:
            break
        y = BlockVector(np.concatenate([p.y for p in props]), x.partition)
        for m in range(max_m + 1):
            lam = theta**m
            trial = y.copy() if lam == 1.0 else BlockVector(x.data + lam * (y.data - x.data), x.partition)
            mu_new = mu_value(problem, trial, check=False)
            if mu_new <= mu - beta * lam * gap:
                break
        else:
            raise StepsizeUnderflow(f"no acceptable full step up to theta**{max_m}")
        x, mu = trial, mu_new
        vc, pc = problem.smooth.counters()
        records.append(IterationRecord(1, len(records), -1, gap, lam, m, mu, vc, pc))
    trace.z = x
    trace.final_gap = gap
    trace.mu_final = mu
    trace.stage_iterations = [len(records)]
    trace.stage_gaps = [gap]
    trace.value_calls, trace.pg_calls = problem.smooth.counters()
    trace.terminal_calls = problem.n
    if gap <= epsilon:
        trace.termination = "converged"
        return trace
    trace.termination = "iteration_budget"
    raise IterationBudgetExceeded(f"CGM budget {max_iterations} exhausted, gap {gap:.4g}", trace)
