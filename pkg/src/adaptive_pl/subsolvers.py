"""Exact minimizers of ``<g, y> + h(y)`` over the built-in block sets.

Every argmin scans left to right and keeps the lowest index on ties, so all
answers are deterministic.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate

from .blockcore import FEASIBILITY_TOL, BlockTerm
from .errors import DimensionMismatch, NonMonotoneDemand

BISECTION_TOL = 1e-10
BISECTION_MAX_HALVINGS = 200


def simplex_linearized_min(g, scale: float = 1.0) -> tuple[np.ndarray, float]:
    g = np.asarray(g, dtype=float)
    j = int(np.argmin(g))
    y = np.zeros_like(g)
    y[j] = scale
    return y, float(scale * g[j])


def capped_simplex_linearized_min(g, cap: float) -> tuple[np.ndarray, float]:
    g = np.asarray(g, dtype=float)
    y = np.zeros_like(g)
    j = int(np.argmin(g))
    if g[j] >= 0.0:
        return y, 0.0
    y[j] = cap
    return y, float(cap * g[j])


def box_l1_linearized_min(g, lower, upper, w=None) -> tuple[np.ndarray, float]:
    """Coordinatewise minimizer of ``g*y + w*|y|`` on ``[lower, upper]``.

    The objective is piecewise linear with a single kink at 0, so the
    minimum is attained at a bound or at 0 when 0 is inside the box.
    Candidates are tried in the order lower, 0, upper.
    """
    g = np.asarray(g, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    w = np.zeros_like(g) if w is None else np.asarray(w, dtype=float)
    y = np.empty_like(g)
    total = 0.0
    for j in range(g.size):
        candidates = [lower[j]]
        if lower[j] < 0.0 < upper[j]:
            candidates.append(0.0)
        candidates.append(upper[j])
        values = [g[j] * c + w[j] * abs(c) for c in candidates]
        k = int(np.argmin(values))
        y[j] = candidates[k]
        total += values[k]
    return y, float(total)


def _bisect_level(tau: Callable[[float], float], level: float, hi: float) -> float:
    """Root of the decreasing function ``tau(v) - level`` on ``[0, hi]``."""
    lo = 0.0
    mid = 0.5 * (lo + hi)
    for _ in range(BISECTION_MAX_HALVINGS):
        mid = 0.5 * (lo + hi)
        r = tau(mid) - level
        if abs(r) <= BISECTION_TOL:
            break
        if r > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 0.0:
            break
    return mid


class SimplexBlock(BlockTerm):
    """``{y >= 0, sum(y) = scale}`` with ``h = 0``."""

    has_h = False

    def __init__(self, dim: int, scale: float = 1.0, lipschitz: float | None = None):
        if scale <= 0:
            raise ValueError("simplex scale must be positive")
        self.dim = int(dim)
        self.scale = float(scale)
        self.diameter = self.scale * math.sqrt(2.0) if self.dim > 1 else 0.0
        self.lipschitz = lipschitz

    def solve_linearized(self, g):
        return simplex_linearized_min(g, self.scale)

    def contains(self, y, tol=FEASIBILITY_TOL):
        y = np.asarray(y, dtype=float)
        return y.shape == (self.dim,) and bool(np.all(y >= -tol)) and abs(y.sum() - self.scale) <= tol

    def vertices(self) -> np.ndarray:
        return self.scale * np.eye(self.dim)

    def center(self) -> np.ndarray:
        return np.full(self.dim, self.scale / self.dim)


class CappedSimplexBlock(BlockTerm):
    """``{y >= 0, sum(y) <= cap}`` with ``h = 0``."""

    has_h = False

    def __init__(self, dim: int, cap: float, lipschitz: float | None = None):
        if cap <= 0:
            raise ValueError("cap must be positive")
        self.dim = int(dim)
        self.cap = float(cap)
        self.diameter = self.cap * math.sqrt(2.0) if self.dim > 1 else self.cap
        self.lipschitz = lipschitz

    def solve_linearized(self, g):
        return capped_simplex_linearized_min(g, self.cap)

    def contains(self, y, tol=FEASIBILITY_TOL):
        y = np.asarray(y, dtype=float)
        return y.shape == (self.dim,) and bool(np.all(y >= -tol)) and y.sum() <= self.cap + tol

    def vertices(self) -> np.ndarray:
        return np.vstack([np.zeros(self.dim), self.cap * np.eye(self.dim)])


class BoxBlock(BlockTerm):
    """Box ``[lower, upper]`` with optional weighted l1 term ``sum_j w_j |y_j|``."""

    def __init__(self, lower, upper, weights=None, lipschitz: float | None = None):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise DimensionMismatch("lower and upper bounds differ in shape")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        self.dim = self.lower.size
        self.weights = np.zeros(self.dim) if weights is None else np.atleast_1d(np.asarray(weights, dtype=float))
        if self.weights.shape != self.lower.shape or np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative and match the bounds")
        self.has_h = bool(np.any(self.weights > 0))
        self.diameter = float(np.linalg.norm(self.upper - self.lower))
        self.lipschitz = lipschitz

    def h_value(self, y):
        return float(self.weights @ np.abs(y))

    def solve_linearized(self, g):
        return box_l1_linearized_min(g, self.lower, self.upper, self.weights)

    def contains(self, y, tol=FEASIBILITY_TOL):
        y = np.asarray(y, dtype=float)
        return (
            y.shape == (self.dim,)
            and bool(np.all(y >= self.lower - tol))
            and bool(np.all(y <= self.upper + tol))
        )


def _integral(tau):
    def sigma(v):
        return integrate.quad(tau, 0.0, v)[0]

    return sigma


class ElasticDemandBlock(BlockTerm):
    """Path flows and demand of one O/D pair.

    Variables are laid out as ``(u_1, ..., u_P, v)`` on the set
    ``{u >= 0, sum(u) = v, 0 <= v <= gamma}``.  The convex term is
    ``h(u, v) = -sigma(v)`` with ``sigma`` the integral of the inverse demand
    ``tau``.  ``sigma`` falls back to numerical quadrature when not given.
    """

    def __init__(
        self,
        n_paths: int,
        tau: Callable[[float], float],
        gamma: float,
        sigma: Callable[[float], float] | None = None,
        lipschitz: float | None = None,
    ):
        if n_paths < 1:
            raise DimensionMismatch("an O/D pair needs at least one path")
        if not (0.0 <= gamma < math.inf):
            raise ValueError("demand cap gamma must be finite and nonnegative")
        self.n_paths = int(n_paths)
        self.dim = self.n_paths + 1
        self.tau = tau
        self.gamma = float(gamma)
        self.sigma = sigma if sigma is not None else _integral(tau)
        # gamma = 0 pins the block to the origin; monotonicity is then moot.
        if self.gamma > 0 and not tau(0.0) > tau(self.gamma):
            raise NonMonotoneDemand(
                f"inverse demand is not decreasing: tau(0)={tau(0.0)} <= tau(gamma)={tau(self.gamma)}"
            )
        self.diameter = self.gamma * math.sqrt(2.0)
        self.lipschitz = lipschitz

    def h_value(self, y):
        return -float(self.sigma(float(y[-1])))

    def solve_linearized(self, g):
        g = np.asarray(g, dtype=float)
        # a nonzero demand coordinate only shifts the level against tau
        u, v, _ = elastic_demand_block_min(g[:-1] + g[-1], self)
        y = np.append(u, v)
        return y, float(g @ y) + self.h_value(y)

    def contains(self, y, tol=FEASIBILITY_TOL):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            return False
        u, v = y[:-1], y[-1]
        return (
            bool(np.all(u >= -tol))
            and -tol <= v <= self.gamma + tol
            and abs(u.sum() - v) <= tol * (1.0 + abs(v))
        )


def elastic_demand_block_min(path_costs, block: ElasticDemandBlock):
    """Minimize ``sum_p cost_p u_p - sigma(v)`` over the block's set.

    All demand goes on the cheapest path ``t`` with cost ``lam``; the demand
    level is 0 if ``tau(0) <= lam``, the cap if ``tau(gamma) >= lam`` and
    otherwise the root of ``tau(v) = lam``.
    """
    costs = np.asarray(path_costs, dtype=float)
    if costs.shape != (block.n_paths,):
        raise DimensionMismatch(f"expected {block.n_paths} path costs, got {costs.shape}")
    t = int(np.argmin(costs))
    lam = float(costs[t])
    u = np.zeros(block.n_paths)
    if block.gamma == 0.0 or block.tau(0.0) <= lam:
        return u, 0.0, 0.0
    if block.tau(block.gamma) >= lam:
        v = block.gamma
    else:
        v = _bisect_level(block.tau, lam, block.gamma)
    u[t] = v
    return u, v, lam * v - float(block.sigma(v))
