"""Path-flow network equilibrium with elastic demands.

For every O/D pair ``m`` the block holds the path flows ``u_p`` and the
demand ``v_m``.  The objective is

    sum_a eta_a(f_a) - sum_m sigma_m(v_m),   f_a = sum_p alpha_pa u_p,

with ``eta_a`` and ``sigma_m`` the integrals of the affine arc cost
``c_a(f) = a0 + a1 f`` and of the inverse demand
``tau_m(v) = tau0 - slope v``.  Its partial gradient over paths is the
vector of path costs.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from ..blockcore import BlockPartition, BlockVector, CompositeProblem, SmoothOracle
from ..errors import DimensionMismatch, DisconnectedPair
from ..subsolvers import ElasticDemandBlock


@dataclass(frozen=True)
class Arc:
    tail: str
    head: str
    a0: float
    a1: float

    def cost(self, flow):
        return self.a0 + self.a1 * flow


@dataclass(frozen=True)
class ODPair:
    origin: str
    dest: str
    tau0: float
    slope: float
    gamma: float

    def tau(self, v):
        return self.tau0 - self.slope * v

    def sigma(self, v):
        return self.tau0 * v - 0.5 * self.slope * v * v


@dataclass
class NetworkSpec:
    nodes: list[str]
    arcs: list[Arc]
    pairs: list[ODPair]
    # paths[m] lists the arc indices of every path of pair m
    paths: list[list[tuple[int, ...]]] = field(default_factory=list)

    def __post_init__(self):
        known = set(self.nodes)
        for a in self.arcs:
            if a.tail not in known or a.head not in known:
                raise ValueError(f"arc {a.tail}->{a.head} uses an undeclared node")
            if a.a1 < 0:
                raise ValueError(f"arc {a.tail}->{a.head} has a decreasing cost")
        for p in self.pairs:
            if p.origin not in known or p.dest not in known:
                raise ValueError(f"O/D pair {p.origin}->{p.dest} uses an undeclared node")
        if not self.paths:
            self.paths = [enumerate_paths(self, p.origin, p.dest) for p in self.pairs]
        if len(self.paths) != len(self.pairs):
            raise DimensionMismatch("one path list per O/D pair is required")
        for pair, plist in zip(self.pairs, self.paths):
            if not plist:
                raise DisconnectedPair(f"no path from {pair.origin} to {pair.dest}")
            for path in plist:
                _check_path(self, path, pair)

    def incidence(self, m: int) -> np.ndarray:
        """Path-arc incidence ``alpha_pa`` for the paths of pair ``m``."""
        out = np.zeros((len(self.paths[m]), len(self.arcs)))
        for r, path in enumerate(self.paths[m]):
            for a in path:
                out[r, a] += 1.0
        return out


def _check_path(spec: NetworkSpec, path, pair: ODPair) -> None:
    node = pair.origin
    for a in path:
        arc = spec.arcs[a]
        if arc.tail != node:
            raise ValueError(f"path {path} is not contiguous")
        node = arc.head
    if node != pair.dest:
        raise ValueError(f"path {path} does not end at {pair.dest}")


def network_graph(spec: NetworkSpec) -> nx.MultiDiGraph:
    G = nx.MultiDiGraph()
    G.add_nodes_from(spec.nodes)
    for idx, a in enumerate(spec.arcs):
        G.add_edge(a.tail, a.head, key=idx)
    return G


def enumerate_paths(spec: NetworkSpec, origin: str, dest: str) -> list[tuple[int, ...]]:
    """All node-simple paths as tuples of arc indices, parallel arcs kept apart."""
    if origin == dest:
        raise ValueError("origin and destination coincide")
    G = network_graph(spec)
    paths = [tuple(k for _, _, k in p) for p in nx.all_simple_edge_paths(G, origin, dest)]
    return sorted(paths, key=lambda p: (len(p), p))


def read_network(path) -> NetworkSpec:
    return parse_network(Path(path).read_text())


def parse_network(text: str) -> NetworkSpec:
    """Parse the line-oriented network format.

    ``node <id>``, ``arc <from> <to> <a0> <a1>`` and
    ``od <origin> <dest> <tau0> <tau_slope> <gamma>``; ``#`` starts a comment.
    """
    nodes, arcs, pairs = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = re.split(r"\s+", line)
        try:
            if kind == "node" and len(args) == 1:
                nodes.append(args[0])
            elif kind == "arc" and len(args) == 4:
                arcs.append(Arc(args[0], args[1], float(args[2]), float(args[3])))
            elif kind == "od" and len(args) == 5:
                pairs.append(ODPair(args[0], args[1], float(args[2]), float(args[3]), float(args[4])))
            else:
                raise ValueError(f"unrecognized record {kind!r} with {len(args)} fields")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not pairs:
        raise ValueError("network declares no O/D pairs")
    return NetworkSpec(nodes, arcs, pairs)


class NetworkOracle(SmoothOracle):
    convex = True

    def __init__(self, partition: BlockPartition, spec: NetworkSpec):
        super().__init__(partition)
        self.spec = spec
        self.a0 = np.array([a.a0 for a in spec.arcs])
        self.a1 = np.array([a.a1 for a in spec.arcs])
        self.incidences = [spec.incidence(m) for m in range(len(spec.pairs))]
        # positions of the path-flow coordinates inside x
        self.u_index = np.concatenate(
            [np.arange(partition.offsets[m], partition.offsets[m + 1] - 1) for m in range(partition.n)]
        )
        self.Delta = np.vstack(self.incidences)

    def arc_flows(self, x) -> np.ndarray:
        return self.Delta.T @ np.asarray(x, dtype=float)[self.u_index]

    def arc_costs(self, x) -> np.ndarray:
        return self.a0 + self.a1 * self.arc_flows(x)

    def _value(self, x):
        f = self.arc_flows(x)
        return float(self.a0 @ f + 0.5 * self.a1 @ (f * f))

    def _partial_gradient(self, x, i):
        return np.append(self.incidences[i] @ self.arc_costs(x), 0.0)

    def _full_gradient(self, x):
        costs = self.arc_costs(x)
        return np.concatenate([np.append(D @ costs, 0.0) for D in self.incidences])


def build_network_problem(spec: NetworkSpec) -> CompositeProblem:
    partition = BlockPartition(tuple(len(p) + 1 for p in spec.paths))
    oracle = NetworkOracle(partition, spec)
    terms = []
    for m, pair in enumerate(spec.pairs):
        D = oracle.incidences[m]
        L = float(np.linalg.norm(D @ (oracle.a1[:, None] * D.T), "fro"))
        terms.append(ElasticDemandBlock(len(spec.paths[m]), pair.tau, pair.gamma, sigma=pair.sigma,
                                        lipschitz=max(L, 1e-12)))
    return CompositeProblem(partition, oracle, terms)


def zero_flow(problem: CompositeProblem) -> BlockVector:
    return BlockVector(np.zeros(problem.partition.total), problem.partition)


def shortest_path_costs(spec: NetworkSpec, arc_flows) -> list[tuple[int, float]]:
    """Cheapest enumerated path of every pair: ``(path index, cost)``, lowest index on ties."""
    arc_flows = np.asarray(arc_flows, dtype=float)
    costs = np.array([a.cost(f) for a, f in zip(spec.arcs, arc_flows)])
    out = []
    for pair, plist in zip(spec.pairs, spec.paths):
        if not plist:
            raise DisconnectedPair(f"no path from {pair.origin} to {pair.dest}")
        path_costs = [float(sum(costs[a] for a in p)) for p in plist]
        best = int(np.argmin(path_costs))
        out.append((best, path_costs[best]))
    return out


@dataclass
class EquilibriumReport:
    arc_flows: np.ndarray
    arc_costs: np.ndarray
    demands: np.ndarray
    multipliers: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


def equilibrium_report(spec: NetworkSpec, x) -> EquilibriumReport:
    """Natural residuals of the path and demand equilibrium conditions.

    With ``lam_m`` the cheapest path cost of pair ``m``, a path contributes
    ``min(u_p, g_p - lam_m)`` and the demand contributes
    ``|v - clip(v - (lam_m - tau(v)), 0, gamma)|``; both vanish exactly at
    an equilibrium.
    """
    problem_partition = BlockPartition(tuple(len(p) + 1 for p in spec.paths))
    x = np.asarray(x, dtype=float)
    oracle = NetworkOracle(problem_partition, spec)
    flows = oracle.arc_flows(x)
    costs = oracle.arc_costs(x)
    demands, lams, res = [], [], []
    for m, pair in enumerate(spec.pairs):
        block = x[problem_partition.slice(m)]
        u, v = block[:-1], block[-1]
        g = oracle.incidences[m] @ costs
        lam = float(g.min())
        r_path = np.abs(np.minimum(u, g - lam)).max()
        r_dem = abs(v - min(max(v - (lam - pair.tau(v)), 0.0), pair.gamma))
        demands.append(v)
        lams.append(lam)
        res.append(max(r_path, r_dem))
    return EquilibriumReport(flows, costs, np.array(demands), np.array(lams), np.array(res))
