"""Exact brute-force optima for small instances.

Every total map from points to centers is enumerated in lexicographic order
(point 0 most significant, centers in the given order), vectorized in
chunks.  The first optimum met is returned, together with the number of
maps attaining the optimal value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Assignment, Facility, Instance

__all__ = [
    "OracleResult",
    "OracleCapError",
    "MAX_POINTS",
    "MAX_CENTERS",
    "MAX_MAPS",
    "brute_force_fair_assignment",
    "brute_force_fmlkc",
    "brute_force_fair_kmedian",
]

# default caps: n <= 10 points, k <= 3 centers, at most 3^10 maps per center set
MAX_POINTS = 10
MAX_CENTERS = 3
MAX_MAPS = 3**10
MAX_CENTER_SETS = 200
_CHUNK = 1 << 15


class OracleCapError(ValueError):
    """The enumeration exceeds the configured cap."""


@dataclass
class OracleResult:
    feasible: bool
    cost: float
    assignment: Assignment | None
    count: int
    objective: str = "max_load"

    @property
    def centers(self) -> tuple[str, ...] | None:
        return None if self.assignment is None else self.assignment.center_ids

    def to_dict(self) -> dict:
        out: dict = {"objective": self.objective, "feasible": self.feasible,
                     "opt": self.cost if self.feasible else None, "count": self.count}
        if self.assignment is not None:
            out["centers"] = list(self.assignment.center_ids)
            out["phi"] = self.assignment.phi
        return out


def _fraction_parts(values) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([q.numerator for q in values], dtype=np.int64),
            np.array([q.denominator for q in values], dtype=np.int64))


def _check_caps(n: int, k: int, max_points: int, max_centers: int, max_maps: int) -> None:
    if n > max_points:
        raise OracleCapError(f"n = {n} exceeds the oracle cap of {max_points} points")
    if k > max_centers:
        raise OracleCapError(f"k = {k} exceeds the oracle cap of {max_centers} centers")
    if k**n > max_maps:
        raise OracleCapError(f"{k}^{n} = {k**n} maps exceeds the cap {max_maps}")


def _enumerate(inst: Instance, centers: tuple[Facility, ...], objective: str,
               ) -> tuple[float, np.ndarray | None, int]:
    n, k = inst.n, len(centers)
    total = k**n
    dist = inst.distances_to(centers)
    groups = inst.groups
    a_num, a_den = _fraction_parts(inst.alpha)
    b_num, b_den = _fraction_parts(inst.beta)
    check = not inst.fairness_vacuous
    weights = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    best, best_labels, count = math.inf, None, 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        labels = (idx[:, None] // weights[None, :]) % k
        onehot = labels[:, :, None] == np.arange(k)[None, None, :]  # maps x n x k
        loads = np.einsum("mjk,jk->mk", onehot, dist)
        value = loads.max(axis=1) if objective == "max_load" else loads.sum(axis=1)
        if check:
            sizes = onehot.sum(axis=1)  # maps x k
            ok = np.ones(len(idx), dtype=bool)
            for g in range(inst.n_groups):
                cnt = onehot[:, groups == g, :].sum(axis=1)
                ok &= np.all(cnt * a_den[g] <= a_num[g] * sizes, axis=1)
                ok &= np.all(cnt * b_den[g] >= b_num[g] * sizes, axis=1)
            value = np.where(ok, value, math.inf)
        m = value.min()
        if m == math.inf:
            continue
        tol = 1e-12 * max(1.0, abs(m), abs(best) if best < math.inf else 0.0)
        if m < best - tol:
            best = float(m)
            best_labels = labels[int(np.argmax(value <= m + tol))]
            count = int(np.count_nonzero(value <= m + tol))
        elif m <= best + tol:
            count += int(np.count_nonzero(value <= best + tol))
    return best, best_labels, count


def _result(inst, centers, objective) -> OracleResult:
    cost, labels, count = _enumerate(inst, centers, objective)
    if labels is None:
        return OracleResult(False, math.inf, None, 0, objective)
    return OracleResult(True, cost, Assignment.from_labels(inst, centers, labels), count, objective)


def brute_force_fair_assignment(inst: Instance, centers: Sequence[str | Facility], *, max_points: int = MAX_POINTS,
                                max_centers: int = MAX_CENTERS, max_maps: int = MAX_MAPS) -> OracleResult:
    """Minimum max-load over all fair total maps to ``centers``."""
    centers = inst.resolve_centers(centers)
    _check_caps(inst.n, len(centers), max_points, max_centers, max_maps)
    return _result(inst, centers, "max_load")


def brute_force_fair_kmedian(inst: Instance, centers: Sequence[str | Facility], *, max_points: int = MAX_POINTS,
                             max_centers: int = MAX_CENTERS, max_maps: int = MAX_MAPS) -> OracleResult:
    """Minimum total distance over all fair total maps to ``centers``."""
    centers = inst.resolve_centers(centers)
    _check_caps(inst.n, len(centers), max_points, max_centers, max_maps)
    return _result(inst, centers, "sum")


def brute_force_fmlkc(inst: Instance, *, max_points: int = MAX_POINTS, max_centers: int = MAX_CENTERS,
                      max_maps: int = MAX_MAPS, max_center_sets: int = MAX_CENTER_SETS) -> OracleResult:
    """Global optimum over every ``k``-subset of facilities and every fair map."""
    n_fac, k = len(inst.facilities), inst.k
    if k > n_fac:
        raise ValueError(f"k exceeds |F| ({k} > {n_fac})")
    _check_caps(inst.n, k, max_points, max_centers, max_maps)
    if math.comb(n_fac, k) > max_center_sets:
        raise OracleCapError(f"C({n_fac}, {k}) center sets exceeds the cap {max_center_sets}")
    best: OracleResult | None = None
    count = 0
    for subset in itertools.combinations(inst.facilities, k):
        res = _result(inst, subset, "max_load")
        if not res.feasible:
            continue
        if best is None or res.cost < best.cost - 1e-12 * max(1.0, best.cost):
            best, count = res, res.count
        elif res.cost <= best.cost + 1e-12 * max(1.0, best.cost):
            count += res.count
    if best is None:
        return OracleResult(False, math.inf, None, 0)
    best.count = count
    return best
