"""Command-line front end.

Exit codes: 0 converged, 1 input error, 2 budget exhausted, 3 oracle
inconsistency (no acceptable step found).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .applications.benchmark import BenchmarkSpec, build_benchmark, starting_point
from .applications.network import build_network_problem, equilibrium_report, read_network, zero_flow
from .applications.svm import build_svm_dual, dual_objective, object_margins, read_svm_csv
from .blockcore import BlockVector
from .errors import AdaptivePLError, BudgetExceeded, StepsizeUnderflow
from .solver import RunTrace, SolverConfig, solve_adaptive, solve_classic_cg

log = logging.getLogger("adaptive_pl")

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_ORACLE = 0, 1, 2, 3

BENCH_HEADER = ["method", "N", "n", "it", "cl", "final_gap", "mu_final", "wall_ms"]
TRACE_HEADER = ["stage", "iter", "block", "phi_s", "lambda", "m", "mu", "value_calls", "pg_calls"]

CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(SolverConfig))
PROBLEM_FIELDS = ("problem", "N", "n", "objective", "network", "data", "C")


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


@dataclass
class RunManifest:
    """Everything needed to replay a run; serialized as one flat JSON object."""

    command: str = "solve"
    problem: dict = field(default_factory=lambda: {"problem": "benchmark", "N": 10, "n": 5, "objective": "f1"})
    config: SolverConfig = field(default_factory=SolverConfig)
    method: str = "acgm"
    out: str = "."
    seed: int = 0

    def to_dict(self) -> dict:
        flat = {"command": self.command, "method": self.method, "out": self.out, "seed": self.seed}
        flat.update(self.problem)
        flat.update(dataclasses.asdict(self.config))
        flat["seed"] = self.seed
        return flat

    @classmethod
    def from_dict(cls, flat: dict) -> "RunManifest":
        unknown = set(flat) - set(CONFIG_FIELDS) - set(PROBLEM_FIELDS) - {"command", "method", "out", "seed"}
        if unknown:
            raise ValueError(f"unknown manifest fields: {sorted(unknown)}")
        seed = int(flat.get("seed", 0))
        cfg = {k: flat[k] for k in CONFIG_FIELDS if k in flat}
        cfg["seed"] = seed
        problem = {k: flat[k] for k in PROBLEM_FIELDS if k in flat}
        return cls(
            command=flat.get("command", "solve"),
            problem=problem or {"problem": "benchmark", "N": 10, "n": 5, "objective": "f1"},
            config=SolverConfig(**cfg),
            method=flat.get("method", "acgm"),
            out=str(flat.get("out", ".")),
            seed=seed,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "RunManifest":
        return cls.from_dict(json.loads(text))


# -- running ----------------------------------------------------------------


def _run(problem, x0, method: str, config: SolverConfig) -> tuple[RunTrace, int]:
    """Run one solver; budget exits still return their trace."""
    try:
        if method == "cgm":
            trace = solve_classic_cg(problem, x0, config.epsilon, config.beta, config.theta,
                                     config.max_iterations, config.max_armijo_exponent)
        else:
            trace = solve_adaptive(problem, x0, config)
        return trace, EXIT_OK
    except BudgetExceeded as exc:
        log.warning("%s", exc)
        return exc.trace, EXIT_BUDGET


def _build(problem_spec: dict):
    kind = problem_spec.get("problem", "benchmark")
    if kind == "benchmark":
        spec = BenchmarkSpec(int(problem_spec["N"]), int(problem_spec["n"]), problem_spec.get("objective", "f1"))
        return build_benchmark(spec), starting_point(spec)
    if kind == "network":
        problem = build_network_problem(read_network(problem_spec["network"]))
        return problem, zero_flow(problem)
    if kind == "svm":
        problem, _ = build_svm_dual(read_svm_csv(problem_spec["data"], float(problem_spec["C"])))
        return problem, BlockVector(np.zeros(problem.partition.total), problem.partition)
    raise ValueError(f"unknown problem kind {kind!r}")


def write_trace(path: Path, trace: RunTrace) -> None:
    write_csv(path, TRACE_HEADER, (
        (r.stage, r.iteration, r.block, r.phi, r.lam, r.m, r.mu, r.value_calls, r.pg_calls)
        for r in trace.records
    ))


def solution_dict(trace: RunTrace) -> dict:
    return {
        "method": trace.method,
        "termination": trace.termination,
        "x": trace.z.data.tolist(),
        "final_gap": trace.final_gap,
        "mu": trace.mu_final,
        "iterations": trace.iterations,
        "stages": trace.stages,
        "stage_iterations": trace.stage_iterations,
        "cl": trace.cl,
        "pg_calls": trace.pg_calls,
        "value_calls": trace.value_calls,
    }


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def cmd_bench(N: int, n: int, objective: str, config: SolverConfig, out_dir) -> int:
    spec = BenchmarkSpec(N, n, objective)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, codes = [], []
    for method in ("cgm", "acgm"):
        # separate instances keep the call counters independent
        problem = build_benchmark(spec)
        t0 = time.perf_counter()
        trace, code = _run(problem, starting_point(spec), method, config)
        wall_ms = 1000.0 * (time.perf_counter() - t0)
        rows.append((method.upper(), N, n, trace.iterations, trace.cl, trace.final_gap, trace.mu_final, wall_ms))
        codes.append(code)
        log.info("%s: it=%d cl=%d gap=%.4g", method.upper(), trace.iterations, trace.cl, trace.final_gap)
    write_csv(out / "bench.csv", BENCH_HEADER, rows)
    return max(codes)


def cmd_solve(manifest: RunManifest) -> int:
    problem, x0 = _build(manifest.problem)
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    trace, code = _run(problem, x0, manifest.method, manifest.config)
    write_trace(out / "trace.csv", trace)
    write_json(out / "solution.json", solution_dict(trace))
    (out / "manifest.json").write_text(manifest.dumps() + "\n")
    return code


def cmd_netassign(network_file, config: SolverConfig, out_dir) -> int:
    spec = read_network(network_file)
    problem = build_network_problem(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace, code = _run(problem, zero_flow(problem), "acgm", config)
    rep = equilibrium_report(spec, trace.z)
    write_csv(out / "flows.csv", ["arc", "from", "to", "flow", "cost"], (
        (k, a.tail, a.head, rep.arc_flows[k], rep.arc_costs[k]) for k, a in enumerate(spec.arcs)
    ))
    write_csv(out / "pairs.csv", ["pair", "origin", "dest", "demand", "lambda", "residual"], (
        (m, p.origin, p.dest, rep.demands[m], rep.multipliers[m], rep.residuals[m])
        for m, p in enumerate(spec.pairs)
    ))
    write_trace(out / "trace.csv", trace)
    sol = solution_dict(trace)
    sol["max_residual"] = rep.max_residual
    write_json(out / "solution.json", sol)
    return code


def cmd_svm(data_csv, C: float, config: SolverConfig, out_dir) -> int:
    spec = read_svm_csv(data_csv, C)
    problem, recover_w = build_svm_dual(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x0 = BlockVector(np.zeros(problem.partition.total), problem.partition)
    trace, code = _run(problem, x0, "acgm", config)
    alpha = trace.z.data
    w = recover_w(alpha)
    margins = object_margins(spec, w)
    alpha_sums = alpha.reshape(len(spec.labels), -1).sum(axis=1)
    write_csv(out / "slacks.csv", ["object_id", "label", "min_margin", "slack", "alpha_sum"], (
        (oid, int(spec.labels[i]), margins[i], max(0.0, 1.0 - margins[i]), alpha_sums[i])
        for i, oid in enumerate(spec.object_ids or range(len(spec.labels)))
    ))
    write_json(out / "svm.json", {
        "dual_objective": dual_objective(spec, alpha),
        "w": w.tolist(),
        "alpha": alpha.tolist(),
        "final_gap": trace.final_gap,
        "iterations": trace.iterations,
        "termination": trace.termination,
    })
    return code


# -- argument parsing -------------------------------------------------------


def _add_solver_flags(p: argparse.ArgumentParser, eps: float) -> None:
    p.add_argument("--rule", choices=["armijo", "convex", "lipschitz"], default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--delta0", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--eps", type=float, default=None, help=f"target total gap (default {eps})")
    p.add_argument("--select", choices=["cyclic", "greedy", "random"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--max-stages", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(default_eps=eps)


def _config_from_args(args, base: SolverConfig | None = None) -> SolverConfig:
    values = dataclasses.asdict(base) if base is not None else {"epsilon": args.default_eps}
    for flag, name in (("rule", "stepsize_rule"), ("beta", "beta"), ("theta", "theta"), ("delta0", "delta0"),
                       ("nu", "nu"), ("eps", "epsilon"), ("select", "selection"), ("seed", "seed"),
                       ("max_iters", "max_iterations"), ("max_stages", "max_stages")):
        v = getattr(args, flag)
        if v is not None:
            values[name] = v
    return SolverConfig(**values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-pl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run CGM and ACGM on a simplex benchmark, write bench.csv")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--objective", choices=["f1", "f1f2"], default="f1")
    _add_solver_flags(p, eps=0.1)

    p = sub.add_parser("solve", help="solve one problem, write trace.csv and solution.json")
    p.add_argument("--manifest", help="flat JSON run manifest; flags override its fields")
    p.add_argument("--problem", choices=["benchmark", "network", "svm"], default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--objective", choices=["f1", "f1f2"], default=None)
    p.add_argument("--network", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--method", choices=["acgm", "cgm"], default=None)
    _add_solver_flags(p, eps=0.1)

    p = sub.add_parser("netassign", help="elastic-demand network equilibrium")
    p.add_argument("network_file")
    _add_solver_flags(p, eps=1e-6)

    p = sub.add_parser("svm", help="soft-margin SVM over point sets via its dual")
    p.add_argument("data_csv")
    p.add_argument("--C", type=float, required=True)
    _add_solver_flags(p, eps=1e-6)
    return parser


def _manifest_from_args(args) -> RunManifest:
    manifest = RunManifest.loads(Path(args.manifest).read_text()) if args.manifest else RunManifest()
    problem = dict(manifest.problem)
    for key in PROBLEM_FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            problem[key] = v
    config = _config_from_args(args, manifest.config if args.manifest else None)
    return RunManifest(
        command="solve",
        problem=problem,
        config=config,
        method=args.method or manifest.method,
        out=args.out or manifest.out,
        seed=config.seed,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            return cmd_bench(args.N, args.n, args.objective, _config_from_args(args), args.out or ".")
        if args.command == "solve":
            return cmd_solve(_manifest_from_args(args))
        if args.command == "netassign":
            return cmd_netassign(args.network_file, _config_from_args(args), args.out or ".")
        if args.command == "svm":
            return cmd_svm(args.data_csv, args.C, _config_from_args(args), args.out or ".")
    except StepsizeUnderflow as exc:
        log.error("oracle inconsistency: %s", exc)
        return EXIT_ORACLE
    except (AdaptivePLError, ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    parser.error(f"unknown command {args.command!r}")
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
