"""Candidate lists of k-center sets.

* :func:`exhaustive_centers` lists every k-subset of the facilities.
* :func:`metric_candidate_centers` grows center sets by D-sampling: in each
  of ``k`` rounds a batch of points is drawn with probability proportional to
  the distance to the centers chosen so far, and each sampled point nominates
  its nearest facilities.  Branching over the nominees gives a tree whose
  leaves form the list.
* :func:`euclidean_candidate_centers` does the same with coordinate centers
  computed from small subsets of the sample (best member and geometric
  median), so centers need not be facilities.

All randomness comes from one seed; every branch gets its own child
generator, so the list depends only on ``(instance, epsilon, seed)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Facility, Instance

__all__ = [
    "CenterList",
    "CenterCapError",
    "exhaustive_centers",
    "metric_candidate_centers",
    "euclidean_candidate_centers",
    "metric_sample_size",
    "euclidean_sample_size",
    "list_cap",
    "geometric_median",
]

EXHAUSTIVE_CAP = 100_000


class CenterCapError(ValueError):
    """The requested list would exceed its configured size cap."""


@dataclass
class CenterList:
    """Ordered k-sets of centers tagged with how they were produced."""

    sets: list[tuple[Facility, ...]]
    provenance: str
    seed: int | None = None
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def validate(self, k: int) -> "CenterList":
        for s in self.sets:
            ids = [c.id for c in s]
            if len(s) != k or len(set(ids)) != k:
                raise AssertionError(f"center set {ids} is not {k} distinct centers")
        return self

    def ids(self) -> list[tuple[str, ...]]:
        return [tuple(c.id for c in s) for s in self.sets]

    def to_dict(self) -> dict:
        def center(c: Facility):
            return c.id if c.coords is None else {"id": c.id, "coords": list(c.coords)}

        return {"provenance": self.provenance, "seed": self.seed,
                "sets": [[center(c) for c in s] for s in self.sets]}


def _check(inst: Instance, epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon out of range (0, 1): {epsilon}")
    return epsilon


def exhaustive_centers(inst: Instance, *, cap: int = EXHAUSTIVE_CAP) -> CenterList:
    """Every k-subset of the facilities, in lexicographic order of index."""
    k, m = inst.k, len(inst.facilities)
    if k > m:
        raise ValueError(f"k exceeds |F| ({k} > {m})")
    count = math.comb(m, k)
    if count > cap:
        raise CenterCapError(f"C({m}, {k}) = {count} center sets exceeds the cap {cap}; use a sampled mode")
    sets = [tuple(s) for s in itertools.combinations(inst.facilities, k)]
    return CenterList(sets, "exhaustive").validate(k)


def metric_sample_size(k: int, epsilon: float) -> int:
    """Points drawn per round in metric mode, ``2 (k/eps) ln(1 + k/eps)``."""
    r = k / epsilon
    return math.ceil(2 * r * math.log1p(r))


def euclidean_sample_size(k: int, epsilon: float) -> int:
    """Points drawn per round in Euclidean mode, ``(k/eps^3) ln(1 + k/eps)``."""
    return math.ceil(k / epsilon**3 * math.log1p(k / epsilon))


def list_cap(k: int, epsilon: float, c: float = 8.0) -> int:
    """Upper bound ``ceil((c k / eps)^k)`` on the sampled list length."""
    return math.ceil((c * k / epsilon) ** k)


def _d_sample(rng: np.random.Generator, weights: np.ndarray, size: int) -> np.ndarray:
    total = weights.sum()
    if not np.isfinite(total) or total <= 0:
        return rng.integers(0, len(weights), size)
    return rng.choice(len(weights), size=size, p=weights / total)


def _seed_of(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def metric_candidate_centers(inst: Instance, epsilon: float, seed=None, *, c: float = 8.0,
                             sample_size: int | None = None) -> CenterList:
    """Facility k-sets from iterative D-sampling.

    A sampled point nominates every unchosen facility within ``(1+eps)``
    times its nearest unchosen facility's distance.  The tree is explored
    depth first, branches in nomination order; duplicate sets are dropped
    and the list stops at :func:`list_cap`.
    """
    epsilon = _check(inst, epsilon)
    k, m = inst.k, len(inst.facilities)
    if k > m:
        raise ValueError(f"k exceeds |F| ({k} > {m})")
    s = sample_size or metric_sample_size(k, epsilon)
    cap = list_cap(k, epsilon, c)
    D = inst.facility_distances
    root = _seed_of(seed)
    seen: set[tuple[int, ...]] = set()
    sets: list[tuple[Facility, ...]] = []
    truncated = False

    def grow(chosen: list[int], ss: np.random.SeedSequence) -> None:
        nonlocal truncated
        if len(sets) >= cap:
            truncated = True
            return
        if len(chosen) == k:
            key = tuple(sorted(chosen))
            if key not in seen:
                seen.add(key)
                sets.append(tuple(inst.facilities[i] for i in key))
            return
        rng = np.random.default_rng(ss)
        weights = D[:, chosen].min(axis=1) if chosen else np.ones(inst.n)
        sample = _d_sample(rng, weights, s)
        free = np.ones(m, dtype=bool)
        free[chosen] = False
        nominees: list[int] = []
        for p in dict.fromkeys(sample.tolist()):
            row = np.where(free, D[p], np.inf)
            near = row.min()
            for f in np.flatnonzero(row <= near * (1 + epsilon)):
                if int(f) not in nominees:
                    nominees.append(int(f))
        for f, child in zip(nominees, ss.spawn(len(nominees))):
            grow(chosen + [f], child)

    grow([], root)
    info = {"sample_size": s, "cap": cap, "truncated": truncated}
    return CenterList(sets, "metric_sampled", root.entropy, info).validate(k)


def geometric_median(X: np.ndarray, iters: int = 200, tol: float = 1e-10) -> np.ndarray:
    """Weiszfeld iteration for the point minimizing the sum of distances."""
    y = X.mean(axis=0)
    for _ in range(iters):
        d = np.linalg.norm(X - y, axis=1)
        if np.any(d < tol):
            # at a data point: stop if it is optimal, otherwise step off it
            j = int(np.argmin(d))
            dr = np.linalg.norm(X - X[j], axis=1)
            away = dr >= tol
            g = ((X[j] - X[away]) / dr[away, None]).sum(axis=0)
            if np.linalg.norm(g) <= np.count_nonzero(~away) + 1e-12:
                return X[j].copy()
            d = np.maximum(d, tol)
        w = 1.0 / d
        y_new = (w[:, None] * X).sum(axis=0) / w.sum()
        if np.linalg.norm(y_new - y) < tol:
            return y_new
        y = y_new
    return y


def _best_member(X: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2).sum(axis=1)
    return X[int(np.argmin(d))]


def euclidean_candidate_centers(inst: Instance, epsilon: float, seed=None, *, c: float = 8.0,
                                sample_size: int | None = None, decimals: int = 9) -> CenterList:
    """Coordinate k-sets from sampling and small-subset medians.

    Each round draws a sample, half uniform and half by D-sampling, then a
    secondary subsample of ``ceil(2/eps) + 2`` points.  Every subset of size
    ``ceil(2/eps)`` of the subsample nominates its best member and its
    geometric median; the whole sample's geometric median is nominated as
    well.  Nominees are deduplicated by coordinates rounded to ``decimals``.
    """
    epsilon = _check(inst, epsilon)
    if inst.metric != "euclidean":
        raise ValueError("euclidean candidate centers need point coordinates")
    k = inst.k
    X = inst.point_coords
    s = sample_size or euclidean_sample_size(k, epsilon)
    sub = math.ceil(2 / epsilon)
    cap = list_cap(k, epsilon, c)
    root = _seed_of(seed)
    ids: dict[tuple[float, ...], Facility] = {}
    seen: set[tuple[str, ...]] = set()
    sets: list[tuple[Facility, ...]] = []
    truncated = False

    def as_center(v: np.ndarray) -> Facility:
        key = tuple(float(x) for x in np.round(v, decimals))
        if key not in ids:
            ids[key] = Facility(f"c{len(ids)}", key)
        return ids[key]

    def grow(chosen: list[Facility], ss: np.random.SeedSequence) -> None:
        nonlocal truncated
        if len(sets) >= cap:
            truncated = True
            return
        if len(chosen) == k:
            key = tuple(sorted(f.id for f in chosen))
            if key not in seen:
                seen.add(key)
                sets.append(tuple(sorted(chosen, key=lambda f: int(f.id[1:]))))
            return
        rng = np.random.default_rng(ss)
        if chosen:
            weights = inst.distances_to(chosen).min(axis=1)
            half = s // 2
            sample = np.concatenate([rng.integers(0, inst.n, s - half), _d_sample(rng, weights, half)])
        else:
            sample = rng.integers(0, inst.n, s)
        S = X[sample]
        secondary = S[rng.choice(len(S), size=min(len(S), sub + 2), replace=False)]
        nominees = [as_center(geometric_median(S))]
        for idx in itertools.combinations(range(len(secondary)), min(sub, len(secondary))):
            Y = secondary[list(idx)]
            nominees += [as_center(_best_member(Y)), as_center(geometric_median(Y))]
        taken = {f.id for f in chosen}
        nominees = [f for f in dict.fromkeys(nominees) if f.id not in taken]
        for f, child in zip(nominees, ss.spawn(len(nominees))):
            grow(chosen + [f], child)

    grow([], root)
    info = {"sample_size": s, "subset_size": sub, "cap": cap, "truncated": truncated}
    return CenterList(sets, "euclidean_sampled", root.entropy, info).validate(k)
