"""Soft-margin linear SVM where every object is the convex hull of ``t`` points.

Dual (maximized):

    sum_{i,k} alpha_ik - 0.5 || sum_{i,k} alpha_ik y_i x^{ik} ||^2
    s.t.  sum_k alpha_ik <= C,  alpha_ik >= 0,

so each object contributes one capped-simplex block.  We minimize the
negated dual; the primal weights are ``w = sum_{i,k} alpha_ik y_i x^{ik}``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..blockcore import BlockPartition, CompositeProblem, SmoothOracle
from ..errors import DimensionMismatch
from ..subsolvers import CappedSimplexBlock


@dataclass
class SvmDualSpec:
    """``points`` has shape ``(l, t, m)``: ``t`` points in R^m for each of ``l`` objects."""

    points: np.ndarray
    labels: np.ndarray
    C: float
    object_ids: list | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.points.ndim != 3:
            raise DimensionMismatch("points must have shape (objects, points_per_object, features)")
        if self.labels.shape != (self.points.shape[0],):
            raise DimensionMismatch("one label per object is required")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not self.C > 0:
            raise ValueError("penalty C must be positive")


class SvmDualOracle(SmoothOracle):
    """``f(alpha) = -sum(alpha) + 0.5 |Z^T alpha|^2`` with rows ``z_ik = y_i x^{ik}``."""

    convex = True

    def __init__(self, partition: BlockPartition, Z):
        super().__init__(partition)
        self.Z = np.asarray(Z, dtype=float)

    def _value(self, a):
        w = self.Z.T @ a
        return 0.5 * w @ w - a.sum()

    def _partial_gradient(self, a, i):
        return self.Z[self.partition.slice(i)] @ (self.Z.T @ a) - 1.0

    def _full_gradient(self, a):
        return self.Z @ (self.Z.T @ a) - 1.0


def build_svm_dual(spec: SvmDualSpec):
    """Return ``(problem, recover_w)``."""
    l, t, m = spec.points.shape
    partition = BlockPartition.even(l * t, l)
    Z = (spec.points * spec.labels[:, None, None]).reshape(l * t, m)
    terms = []
    for i in range(l):
        Zi = Z[partition.slice(i)]
        terms.append(CappedSimplexBlock(t, spec.C, lipschitz=max(float(np.linalg.norm(Zi @ Zi.T, "fro")), 1e-12)))
    problem = CompositeProblem(partition, SvmDualOracle(partition, Z), terms)

    def recover_w(alpha) -> np.ndarray:
        return Z.T @ np.asarray(alpha, dtype=float)

    return problem, recover_w


def dual_objective(spec: SvmDualSpec, alpha) -> float:
    """The dual in its original maximization form."""
    a = np.asarray(alpha, dtype=float)
    l, t, m = spec.points.shape
    w = (spec.points * spec.labels[:, None, None]).reshape(l * t, m).T @ a
    return float(a.sum() - 0.5 * w @ w)


def object_margins(spec: SvmDualSpec, w) -> np.ndarray:
    """Smallest functional margin ``y_i <w, x^{ik}>`` over the points of each object."""
    return (spec.labels[:, None] * (spec.points @ np.asarray(w, dtype=float))).min(axis=1)


def read_svm_csv(path, C: float) -> SvmDualSpec:
    """Rows ``object_id,label,feat1,...,featm``; rows of one object must share its label.

    A header row is skipped when its label column is not numeric.
    """
    groups: dict[str, list] = {}
    labels: dict[str, float] = {}
    with open(Path(path), newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 3:
                raise ValueError(f"line {row_no + 1}: expected object_id,label and at least one feature")
            try:
                label = float(row[1])
            except ValueError:
                if row_no == 0:
                    continue
                raise ValueError(f"line {row_no + 1}: bad label {row[1]!r}") from None
            if label not in (-1.0, 1.0):
                raise ValueError(f"line {row_no + 1}: label must be -1 or +1, got {row[1]!r}")
            oid = row[0].strip()
            if oid in labels and labels[oid] != label:
                raise ValueError(f"object {oid!r} has conflicting labels")
            labels[oid] = label
            groups.setdefault(oid, []).append([float(v) for v in row[2:]])
    if not groups:
        raise ValueError("no data rows")
    sizes = {len(v) for v in groups.values()}
    widths = {len(p) for v in groups.values() for p in v}
    if len(sizes) != 1 or len(widths) != 1:
        raise DimensionMismatch("every object needs the same number of points and features")
    ids = list(groups)
    return SvmDualSpec(np.array([groups[k] for k in ids]), np.array([labels[k] for k in ids]), C, ids)
