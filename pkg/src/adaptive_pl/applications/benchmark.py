"""Quadratic test problems over products of standard simplices.

``f1(x) = 0.5 <Px, x> - <q, x>`` with (1-based indices)

    p_ij = sin(i) cos(j)  (i < j),   sin(j) cos(i)  (i > j),
    p_ii = sum_{s != i} |p_is| + 1,
    q_j  = sin(j) / j,

optionally plus ``f2(x) = 1 / (<c, x> + tau)`` with ``c_i = 2 + sin(i)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blockcore import BlockPartition, BlockVector, CompositeProblem, SmoothOracle
from ..errors import DimensionMismatch
from ..subsolvers import SimplexBlock

OBJECTIVES = ("f1", "f1_plus_f2")


@dataclass(frozen=True)
class BenchmarkSpec:
    N: int
    n: int
    objective: str = "f1"
    tau: float = 5.0

    def __post_init__(self):
        if self.objective == "f1f2":
            object.__setattr__(self, "objective", "f1_plus_f2")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.n < 1 or self.N < 1 or self.N % self.n:
            raise DimensionMismatch(f"N={self.N} must be a positive multiple of n={self.n}")

    @property
    def t(self) -> int:
        return self.N // self.n


def benchmark_matrix(N: int) -> np.ndarray:
    idx = np.arange(1, N + 1, dtype=float)
    i = idx[:, None]
    j = idx[None, :]
    P = np.where(i < j, np.sin(i) * np.cos(j), np.sin(j) * np.cos(i))
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, np.abs(P).sum(axis=1) + 1.0)
    return P


def benchmark_vector(N: int) -> np.ndarray:
    j = np.arange(1, N + 1, dtype=float)
    return np.sin(j) / j


def benchmark_weights(N: int) -> np.ndarray:
    return 2.0 + np.sin(np.arange(1, N + 1, dtype=float))


class BenchmarkOracle(SmoothOracle):
    convex = True

    def __init__(self, partition: BlockPartition, P, q, c=None, tau: float = 5.0):
        super().__init__(partition)
        self.P = np.asarray(P, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.c = None if c is None else np.asarray(c, dtype=float)
        self.tau = float(tau)

    def _value(self, x):
        val = 0.5 * x @ (self.P @ x) - self.q @ x
        if self.c is not None:
            val += 1.0 / (self.c @ x + self.tau)
        return val

    def _partial_gradient(self, x, i):
        sl = self.partition.slice(i)
        g = self.P[sl] @ x - self.q[sl]
        if self.c is not None:
            g -= self.c[sl] / (self.c @ x + self.tau) ** 2
        return g

    def _full_gradient(self, x):
        g = self.P @ x - self.q
        if self.c is not None:
            g -= self.c / (self.c @ x + self.tau) ** 2
        return g


def build_benchmark(spec: BenchmarkSpec) -> CompositeProblem:
    partition = BlockPartition.even(spec.N, spec.n)
    P = benchmark_matrix(spec.N)
    q = benchmark_vector(spec.N)
    off = np.abs(P).sum(axis=1) - np.abs(np.diag(P))
    assert np.allclose(P, P.T) and np.all(np.diag(P) - off > 0), "P must be symmetric diagonally dominant"
    c = None
    if spec.objective == "f1_plus_f2":
        c = benchmark_weights(spec.N)
        # <c, x> + tau >= tau > 0 on the simplex product since c >= 1
        assert c.min() > 0 and spec.tau > 0
    terms = []
    for i in range(spec.n):
        sl = partition.slice(i)
        L = float(np.linalg.norm(P[sl, sl], "fro"))
        if c is not None:
            # block Hessian of f2 is 2 c_i c_i^T / (<c,x> + tau)^3
            L += 2.0 * float(c[sl] @ c[sl]) / spec.tau**3
        terms.append(SimplexBlock(spec.t, lipschitz=L))
    return CompositeProblem(partition, BenchmarkOracle(partition, P, q, c, spec.tau), terms)


def starting_point(spec: BenchmarkSpec) -> BlockVector:
    """The barycentre ``(1/t) e`` of every simplex."""
    return BlockVector(np.full(spec.N, 1.0 / spec.t), BlockPartition.even(spec.N, spec.n))
