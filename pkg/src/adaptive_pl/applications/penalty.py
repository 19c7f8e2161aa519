"""Quadratic penalty decomposition of block-angular linear programs.

The coupled problem ``max sum_i <c_i, x_i>`` s.t. ``sum_i A_i x_i = b0``,
``x_i in X_i`` is replaced by the sequence of block-separable problems

    min  0.5 tau |sum_i A_i x_i - b0|^2 - sum_i <c_i, x_i>,   x_i in X_i,

with ``tau`` increased between solves.  The oracle keeps the coupling
residual ``r = sum_j A_j x_j - b0`` and refreshes only the blocks that moved,
so a single-block step costs one ``A_s d_s`` product.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from ..blockcore import BlockPartition, BlockTerm, BlockVector, CompositeProblem, SmoothOracle
from ..errors import BudgetExceeded, DimensionMismatch
from ..solver import RunTrace, SolverConfig, solve_adaptive


@dataclass
class PenaltySpec:
    prices: list[np.ndarray]
    coupling: list[np.ndarray]
    b0: np.ndarray
    blocks: list[BlockTerm]
    tau: float = 1.0
    growth: float = 10.0

    def __post_init__(self):
        self.prices = [np.atleast_1d(np.asarray(c, dtype=float)) for c in self.prices]
        self.coupling = [np.atleast_2d(np.asarray(A, dtype=float)) for A in self.coupling]
        self.b0 = np.atleast_1d(np.asarray(self.b0, dtype=float))
        if not (len(self.prices) == len(self.coupling) == len(self.blocks)):
            raise DimensionMismatch("prices, coupling matrices and blocks must have one entry per block")
        for i, (c, A, blk) in enumerate(zip(self.prices, self.coupling, self.blocks)):
            if A.shape != (self.b0.size, c.size) or blk.dim != c.size:
                raise DimensionMismatch(f"block {i}: A is {A.shape}, c has {c.size}, set has dim {blk.dim}")
        if not self.tau > 0:
            raise ValueError("penalty parameter tau must be positive")

    @property
    def partition(self) -> BlockPartition:
        return BlockPartition(tuple(c.size for c in self.prices))


class PenaltyOracle(SmoothOracle):
    convex = True

    def __init__(self, partition: BlockPartition, prices, coupling, b0, tau: float):
        super().__init__(partition)
        self.c = np.concatenate(prices)
        self.A = list(coupling)
        self.b0 = np.asarray(b0, dtype=float)
        self.tau = float(tau)
        self._x = None
        self._r = None

    def residual_from_scratch(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(A @ x[self.partition.slice(j)] for j, A in enumerate(self.A)) - self.b0

    def residual(self, x) -> np.ndarray:
        """Coupling residual, updated incrementally from the last point seen."""
        x = np.asarray(x, dtype=float)
        if self._x is None:
            self._x, self._r = x.copy(), self.residual_from_scratch(x)
            return self._r
        moved = [j for j in range(self.partition.n)
                 if not np.array_equal(x[self.partition.slice(j)], self._x[self.partition.slice(j)])]
        if 2 * len(moved) > self.partition.n:
            self._r = self.residual_from_scratch(x)
        else:
            for j in moved:
                sl = self.partition.slice(j)
                self._r = self._r + self.A[j] @ (x[sl] - self._x[sl])
        self._x = x.copy()
        return self._r

    def gradient_shift(self, i: int, s: int, d_s, theta: float) -> np.ndarray:
        """Change of ``g_i`` when block ``s`` moves by ``theta * d_s``."""
        return theta * self.tau * self.A[i].T @ (self.A[s] @ np.asarray(d_s, dtype=float))

    def _value(self, x):
        r = self.residual(x)
        return 0.5 * self.tau * r @ r - self.c @ x

    def _partial_gradient(self, x, i):
        r = self.residual(x)
        return self.tau * self.A[i].T @ r - self.c[self.partition.slice(i)]

    def _full_gradient(self, x):
        r = self.residual(x)
        return np.concatenate([self.tau * A.T @ r for A in self.A]) - self.c


def build_penalty_problem(spec: PenaltySpec) -> CompositeProblem:
    partition = spec.partition
    oracle = PenaltyOracle(partition, spec.prices, spec.coupling, spec.b0, spec.tau)
    terms = []
    for blk, A in zip(spec.blocks, spec.coupling):
        term = copy.copy(blk)
        term.lipschitz = max(spec.tau * float(np.linalg.norm(A.T @ A, "fro")), 1e-12)
        terms.append(term)
    return CompositeProblem(partition, oracle, terms)


def income(spec: PenaltySpec, x) -> float:
    """The original (maximized) objective ``sum_i <c_i, x_i>``."""
    return float(np.concatenate(spec.prices) @ np.asarray(x, dtype=float))


@dataclass
class ContinuationStep:
    tau: float
    x: BlockVector
    residual_norm: float
    income: float
    trace: RunTrace = field(repr=False)


def tau_schedule(spec: PenaltySpec, stages: int = 3) -> list[float]:
    """Geometric schedule ``tau, tau*growth, tau*growth**2, ...``."""
    if spec.growth <= 1:
        raise ValueError("growth factor must exceed 1")
    return [spec.tau * spec.growth**k for k in range(stages)]


def penalty_continuation(spec: PenaltySpec, taus=None, config: SolverConfig | None = None,
                         x0=None) -> list[ContinuationStep]:
    """Solve the penalty problem for an increasing ``tau`` sequence with warm starts.

    ``taus`` defaults to :func:`tau_schedule`.  A budget exit keeps the last
    iterate and continues with the next ``tau``.
    """
    config = config or SolverConfig()
    taus = [float(t) for t in (tau_schedule(spec) if taus is None else taus)]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("penalty schedule must be strictly increasing")
    if x0 is None:
        x0 = np.concatenate([_anchor(blk) for blk in spec.blocks])
    x = BlockVector(np.asarray(x0, dtype=float), spec.partition)
    steps = []
    for tau in taus:
        problem = build_penalty_problem(replace(spec, tau=tau))
        try:
            trace = solve_adaptive(problem, x, config)
        except BudgetExceeded as exc:
            trace = exc.trace
        x = trace.z
        r = problem.smooth.residual_from_scratch(x)
        steps.append(ContinuationStep(tau, x, float(np.linalg.norm(r)), income(spec, x), trace))
    return steps


def _anchor(blk: BlockTerm) -> np.ndarray:
    """A feasible point of a built-in block: the projection of 0 or the barycentre."""
    if hasattr(blk, "lower"):
        return np.clip(np.zeros(blk.dim), blk.lower, blk.upper)
    if hasattr(blk, "center"):
        return blk.center()
    return np.zeros(blk.dim)
