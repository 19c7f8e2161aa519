"""Block-structured vectors, the composite problem model and the gap function.

The problem solved throughout the package is

    min  f(x) + sum_i h_i(x_i)   subject to  x_i in X_i,  i = 1..n,

where ``f`` is smooth and every ``h_i`` is convex.  For each block the
linearized subproblem ``min <g_i(x), y> + h_i(y)`` over ``X_i`` gives a
proposal ``y_i(x)`` and the block gap

    phi_i(x) = <g_i(x), x_i - y_i(x)> + h_i(x_i) - h_i(y_i(x)) >= 0,

which vanishes for every block exactly at stationary points.
"""
from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, InfeasibleInput, StepOutOfRange, SubsolverFailure

FEASIBILITY_TOL = 1e-9
NEGATIVE_GAP_TOL = 1e-9
OBJECTIVE_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class BlockPartition:
    """Split of ``range(N)`` into ``n`` consecutive blocks."""

    sizes: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise DimensionMismatch(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "offsets", tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist()))

    @classmethod
    def even(cls, N: int, n: int) -> "BlockPartition":
        if n < 1 or N % n:
            raise DimensionMismatch(f"N={N} is not divisible into n={n} equal blocks")
        return cls((N // n,) * n)

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return self.offsets[-1]

    def slice(self, i: int) -> slice:
        return slice(self.offsets[i], self.offsets[i + 1])


class BlockVector:
    """A flat float array addressable block by block.

    ``np.asarray(v)`` returns the underlying data without copying, so the
    vector can be passed straight to numpy code and to the oracles.
    """

    __slots__ = ("data", "partition")

    def __init__(self, data, partition: BlockPartition):
        data = np.array(data, dtype=float)
        if data.ndim != 1 or data.size != partition.total:
            raise DimensionMismatch(
                f"vector of shape {data.shape} does not match partition total {partition.total}"
            )
        self.data = data
        self.partition = partition

    @classmethod
    def from_blocks(cls, blocks: Sequence, partition: BlockPartition | None = None) -> "BlockVector":
        blocks = [np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]
        if partition is None:
            partition = BlockPartition(tuple(b.size for b in blocks))
        return cls(np.concatenate(blocks), partition)

    def block(self, i: int) -> np.ndarray:
        return self.data[self.partition.slice(i)]

    def blocks(self) -> list[np.ndarray]:
        return [self.block(i) for i in range(self.partition.n)]

    def copy(self) -> "BlockVector":
        return BlockVector(self.data, self.partition)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __len__(self):
        return self.data.size

    def __repr__(self):
        return f"BlockVector({self.data!r}, sizes={self.partition.sizes})"


class SmoothOracle(ABC):
    """Smooth part ``f`` with per-block gradients and call counters.

    Subclasses implement ``_value`` and ``_partial_gradient`` (and may
    override ``_full_gradient`` with a vectorized version).  A full gradient
    counts as ``n`` partial-gradient calls.
    """

    convex: bool = False

    def __init__(self, partition: BlockPartition):
        self.partition = partition
        self._lock = threading.Lock()
        self.value_calls = 0
        self.partial_gradient_calls = 0

    @abstractmethod
    def _value(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def _partial_gradient(self, x: np.ndarray, i: int) -> np.ndarray: ...

    def _full_gradient(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([self._partial_gradient(x, i) for i in range(self.partition.n)])

    def value(self, x) -> float:
        with self._lock:
            self.value_calls += 1
        return float(self._value(np.asarray(x, dtype=float)))

    def partial_gradient(self, x, i: int) -> np.ndarray:
        with self._lock:
            self.partial_gradient_calls += 1
        return np.asarray(self._partial_gradient(np.asarray(x, dtype=float), i), dtype=float)

    def full_gradient(self, x) -> BlockVector:
        with self._lock:
            self.partial_gradient_calls += self.partition.n
        return BlockVector(self._full_gradient(np.asarray(x, dtype=float)), self.partition)

    def reset_counters(self) -> None:
        with self._lock:
            self.value_calls = 0
            self.partial_gradient_calls = 0

    def counters(self) -> tuple[int, int]:
        return self.value_calls, self.partial_gradient_calls


class FunctionOracle(SmoothOracle):
    """Smooth oracle built from plain callables.

    ``gradient`` returns the full gradient; partial gradients slice it, so
    this adapter is convenient but not cheap for large problems.
    """

    def __init__(
        self,
        partition: BlockPartition,
        value: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        convex: bool = False,
    ):
        super().__init__(partition)
        self._value_fn = value
        self._gradient_fn = gradient
        self.convex = convex

    def _value(self, x):
        return self._value_fn(x)

    def _partial_gradient(self, x, i):
        return np.asarray(self._gradient_fn(x), dtype=float)[self.partition.slice(i)]

    def _full_gradient(self, x):
        return np.asarray(self._gradient_fn(x), dtype=float)


class BlockTerm(ABC):
    """One factor ``X_i`` of the feasible set together with its convex term ``h_i``.

    ``solve_linearized(g)`` must return an exact minimizer of
    ``<g, y> + h(y)`` over the set and the attained objective value.
    """

    dim: int
    diameter: float
    lipschitz: float | None = None
    # False when h is identically zero; lets line searches skip h evaluations.
    has_h: bool = True

    def h_value(self, y: np.ndarray) -> float:
        return 0.0

    @abstractmethod
    def solve_linearized(self, g: np.ndarray) -> tuple[np.ndarray, float]: ...

    @abstractmethod
    def contains(self, y: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool: ...


@dataclass
class CompositeProblem:
    partition: BlockPartition
    smooth: SmoothOracle
    terms: list[BlockTerm]

    def __post_init__(self):
        self.terms = list(self.terms)
        if len(self.terms) != self.partition.n:
            raise DimensionMismatch(f"{len(self.terms)} block terms for {self.partition.n} blocks")
        for i, term in enumerate(self.terms):
            if term.dim != self.partition.sizes[i]:
                raise DimensionMismatch(
                    f"block {i}: term dimension {term.dim} != block size {self.partition.sizes[i]}"
                )
        # identical simplex blocks allow one vectorized membership test
        from .subsolvers import SimplexBlock

        first = self.terms[0]
        self._uniform_simplex = all(
            type(t) is SimplexBlock and t.dim == first.dim and t.scale == first.scale
            for t in self.terms
        )

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def convex(self) -> bool:
        return bool(self.smooth.convex)

    def vector(self, data) -> BlockVector:
        return BlockVector(np.asarray(data, dtype=float), self.partition)

    def check_feasible(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if self._uniform_simplex:
            rows = x.reshape(self.n, -1)
            scale = self.terms[0].scale
            if rows.min() >= -FEASIBILITY_TOL and np.abs(rows.sum(axis=1) - scale).max() <= FEASIBILITY_TOL:
                return
        for i, term in enumerate(self.terms):
            if not term.contains(x[self.partition.slice(i)]):
                raise InfeasibleInput(f"block {i} of x lies outside its feasible set")

    def is_feasible(self, x) -> bool:
        try:
            self.check_feasible(x)
        except InfeasibleInput:
            return False
        return True

    def h_total(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(t.h_value(x[self.partition.slice(i)]) for i, t in enumerate(self.terms) if t.has_h))


@dataclass(frozen=True)
class BlockProposal:
    """Answer of the linearized subproblem for one block."""

    block: int
    y: np.ndarray
    phi: float
    phi_raw: float


def _proposal(problem: CompositeProblem, x: np.ndarray, i: int, g: np.ndarray) -> BlockProposal:
    term = problem.terms[i]
    xi = x[problem.partition.slice(i)]
    if not term.contains(xi):
        raise InfeasibleInput(f"block {i} of x lies outside its feasible set")
    y, obj = term.solve_linearized(g)
    y = np.asarray(y, dtype=float)
    if not term.contains(y):
        raise SubsolverFailure(f"block {i}: subsolver returned an infeasible point")
    h_y = term.h_value(y) if term.has_h else 0.0
    if abs(obj - (float(g @ y) + h_y)) > OBJECTIVE_CHECK_TOL * (1.0 + abs(obj)):
        raise SubsolverFailure(f"block {i}: reported objective does not match re-evaluation")
    h_x = term.h_value(xi) if term.has_h else 0.0
    phi_raw = float(g @ xi) + h_x - obj
    if phi_raw < -NEGATIVE_GAP_TOL * (1.0 + abs(obj)):
        raise SubsolverFailure(f"block {i}: negative gap {phi_raw:.3e}, subsolver is not exact")
    return BlockProposal(block=i, y=y, phi=max(phi_raw, 0.0), phi_raw=phi_raw)


def block_proposal(problem: CompositeProblem, x, i: int) -> BlockProposal:
    """Solve the linearized subproblem of block ``i`` at ``x`` (one gradient call)."""
    x = np.asarray(x, dtype=float)
    g = problem.smooth.partial_gradient(x, i)
    return _proposal(problem, x, i, g)


def all_proposals(problem: CompositeProblem, x) -> list[BlockProposal]:
    """Proposals for every block from one full gradient (``n`` gradient calls)."""
    x = np.asarray(x, dtype=float)
    g = problem.smooth.full_gradient(x)
    return [_proposal(problem, x, i, g.block(i)) for i in range(problem.n)]


def total_gap(problem: CompositeProblem, x) -> float:
    return float(sum(p.phi for p in all_proposals(problem, x)))


def mu_value(problem: CompositeProblem, x, check: bool = True) -> float:
    """Composite objective ``f(x) + sum_i h_i(x_i)``.

    ``check=False`` skips the membership test; solvers use it for trial
    points that are convex combinations of feasible points.
    """
    if check:
        problem.check_feasible(x)
    return problem.smooth.value(x) + problem.h_total(x)


def apply_block_step(x, i: int, y_i, lam: float) -> BlockVector:
    """Move block ``i`` of ``x`` a fraction ``lam`` of the way towards ``y_i``."""
    if not (0.0 < lam <= 1.0):
        raise StepOutOfRange(f"step {lam!r} is outside (0, 1]")
    if isinstance(x, BlockVector):
        out = x.copy()
    else:
        raise TypeError("apply_block_step expects a BlockVector")
    sl = out.partition.slice(i)
    y_i = np.asarray(y_i, dtype=float)
    if lam == 1.0:
        out.data[sl] = y_i
    else:
        out.data[sl] = out.data[sl] + lam * (y_i - out.data[sl])
    return out
