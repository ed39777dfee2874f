"""Instance data model, metric evaluation, fairness accounting and serialization.

An :class:`Instance` bundles the points to cluster (each with a group label),
the candidate facilities, the metric, the number of clusters ``k`` and the
fairness vectors ``alpha``/``beta``.  Instances are immutable once loaded.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import permutations
from typing import IO, Any, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Point",
    "Facility",
    "Instance",
    "Assignment",
    "Clustering",
    "FairnessReport",
    "InstanceError",
    "load_instance",
    "read_instance",
    "dump_instance",
    "instance_to_dict",
    "instance_from_dict",
    "assignment_cost",
    "center_loads",
    "group_counts",
    "check_fairness",
    "assignment_report",
    "to_fraction",
    "fraction_to_json",
]

# relative slack used when validating the triangle inequality on float input
_METRIC_RTOL = 1e-9


class InstanceError(ValueError):
    """Raised when an instance is malformed or violates an invariant."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass(frozen=True)
class Point:
    id: str
    group: int
    coords: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Facility:
    id: str
    coords: tuple[float, ...] | None = None


def to_fraction(value: Any) -> Fraction:
    """Exact rational from a JSON number or a ``"p/q"`` string.

    Floats go through their shortest decimal repr, so ``0.3`` becomes 3/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite rational {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot read {value!r} as a rational")


def fraction_to_json(q: Fraction) -> float | int | str:
    """Number when the decimal expansion terminates, ``"p/q"`` otherwise."""
    if q.denominator == 1:
        return int(q.numerator)
    d = q.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d == 1 and Fraction(repr(float(q))) == q:
        return float(q)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True, eq=False)
class Instance:
    """A (fair) minimum-load k-clustering instance.

    Parameters
    ----------
    points : sequence of Point
        Points to cluster; ``group`` is a 0-based index into ``alpha``.
    facilities : sequence of Facility
        Candidate centers.
    k : int
        Number of clusters.
    alpha, beta : sequence of Fraction
        Upper and lower bounds on the fraction of each group in every
        cluster.
    matrix : ndarray, optional
        Explicit distance matrix over points followed by facilities.  When
        omitted the metric is Euclidean on ``coords``.
    """

    points: tuple[Point, ...]
    facilities: tuple[Facility, ...]
    k: int
    alpha: tuple[Fraction, ...]
    beta: tuple[Fraction, ...]
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "facilities", tuple(self.facilities))
        object.__setattr__(self, "alpha", tuple(to_fraction(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(to_fraction(b) for b in self.beta))
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=float)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)

    @property
    def metric(self) -> str:
        return "euclidean" if self.matrix is None else "explicit"

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def n_groups(self) -> int:
        return len(self.alpha)

    @cached_property
    def groups(self) -> np.ndarray:
        return np.array([p.group for p in self.points], dtype=int)

    @cached_property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.groups, minlength=self.n_groups)

    @cached_property
    def point_index(self) -> dict[str, int]:
        return {p.id: j for j, p in enumerate(self.points)}

    @cached_property
    def facility_index(self) -> dict[str, int]:
        return {f.id: i for i, f in enumerate(self.facilities)}

    @cached_property
    def point_coords(self) -> np.ndarray:
        return np.array([p.coords for p in self.points], dtype=float)

    @property
    def fairness_vacuous(self) -> bool:
        return all(a == 1 for a in self.alpha) and all(b == 0 for b in self.beta)

    def facility(self, ref: str | Facility) -> Facility:
        if isinstance(ref, Facility):
            return ref
        try:
            return self.facilities[self.facility_index[ref]]
        except KeyError:
            raise KeyError(f"unknown facility {ref!r}") from None

    def resolve_centers(self, centers: Iterable[str | Facility]) -> tuple[Facility, ...]:
        out = tuple(self.facility(c) for c in centers)
        ids = [c.id for c in out]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate center ids in {ids}")
        return out

    def distances_to(self, centers: Sequence[str | Facility]) -> np.ndarray:
        """Point-to-center distance matrix of shape ``(n, len(centers))``."""
        centers = [self.facility(c) for c in centers]
        if self.matrix is not None:
            cols = []
            for c in centers:
                if c.id not in self.facility_index:
                    raise KeyError(f"center {c.id!r} is not a facility of an explicit-metric instance")
                cols.append(self.n + self.facility_index[c.id])
            return np.asarray(self.matrix[: self.n][:, cols], dtype=float)
        if any(c.coords is None for c in centers):
            raise ValueError("euclidean centers need coordinates")
        C = np.array([c.coords for c in centers], dtype=float).reshape(len(centers), -1)
        diff = self.point_coords[:, None, :] - C[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    @cached_property
    def facility_distances(self) -> np.ndarray:
        """Distances from every point to every facility, ``(n, |F|)``."""
        return self.distances_to(self.facilities)

    def point_distances(self) -> np.ndarray:
        """Point-to-point distance matrix, ``(n, n)``."""
        if self.matrix is not None:
            return np.asarray(self.matrix[: self.n, : self.n], dtype=float)
        X = self.point_coords
        diff = X[:, None, :] - X[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def digest(self) -> str:
        blob = json.dumps(instance_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self, check_triangle: bool = True) -> "Instance":
        """Check every invariant; returns ``self`` so it can be chained."""
        if not self.points:
            raise InstanceError("no points", "points")
        if not self.facilities:
            raise InstanceError("no facilities", "facilities")
        if not isinstance(self.k, (int, np.integer)) or isinstance(self.k, bool) or self.k < 1:
            raise InstanceError(f"k must be a positive integer, got {self.k!r}", "k")
        ell = len(self.alpha)
        if ell < 1:
            raise InstanceError("at least one group is required", "alpha")
        if len(self.beta) != ell:
            raise InstanceError(f"beta has {len(self.beta)} entries, alpha has {ell}", "beta")
        for g, (a, b) in enumerate(zip(self.alpha, self.beta)):
            if not 0 <= a <= 1:
                raise InstanceError(f"alpha[{g}]={a} outside [0, 1]", "alpha")
            if not 0 <= b <= 1:
                raise InstanceError(f"beta[{g}]={b} outside [0, 1]", "beta")
            if b > a:
                raise InstanceError(f"beta[{g}]={b} exceeds alpha[{g}]={a}", "beta")
        for seq, name in ((self.points, "points"), (self.facilities, "facilities")):
            ids = [x.id for x in seq]
            if len(set(ids)) != len(ids):
                raise InstanceError("duplicate ids", name)
        for p in self.points:
            if not isinstance(p.group, (int, np.integer)) or not 0 <= p.group < ell:
                raise InstanceError(f"point {p.id!r} has unknown group {p.group!r}", "points.group")
        if self.matrix is None:
            dims = {len(x.coords) if x.coords is not None else None for x in self.points + self.facilities}
            if None in dims:
                raise InstanceError("euclidean metric requires coords on every point and facility", "coords")
            if len(dims) != 1:
                raise InstanceError(f"inconsistent coordinate dimensions {sorted(dims)}", "coords")
            if not np.all(np.isfinite(self.point_coords)):
                raise InstanceError("non-finite coordinates", "coords")
        else:
            _validate_matrix(self.matrix, self.n + len(self.facilities), check_triangle)
        return self


def _validate_matrix(m: np.ndarray, size: int, check_triangle: bool) -> None:
    if m.shape != (size, size):
        raise InstanceError(f"expected a {size}x{size} matrix, got {m.shape}", "metric.matrix")
    if not np.all(np.isfinite(m)):
        raise InstanceError("non-finite distance", "metric.matrix")
    if np.any(m < 0):
        raise InstanceError("negative distance", "metric.matrix")
    if np.any(np.diag(m) != 0):
        raise InstanceError("nonzero diagonal", "metric.matrix")
    if not np.array_equal(m, m.T):
        a, b = np.argwhere(m != m.T)[0]
        raise InstanceError(f"asymmetric: d({a},{b})={m[a, b]} != d({b},{a})={m[b, a]}", "metric.matrix")
    if check_triangle:
        scale = max(1.0, float(m.max()))
        for c in range(size):
            # d(a,b) <= d(a,c) + d(c,b) for all a, b
            viol = m - (m[:, c][:, None] + m[c, :][None, :])
            if viol.max() > _METRIC_RTOL * scale:
                a, b = np.unravel_index(np.argmax(viol), viol.shape)
                raise InstanceError(f"triangle inequality fails on ({a},{c},{b})", "metric.matrix")


# ---------------------------------------------------------------------------
# serialization


def instance_to_dict(inst: Instance) -> dict:
    points = []
    for p in inst.points:
        rec: dict[str, Any] = {"id": p.id, "group": int(p.group)}
        if p.coords is not None:
            rec["coords"] = [float(x) for x in p.coords]
        points.append(rec)
    facilities = []
    for f in inst.facilities:
        rec = {"id": f.id}
        if f.coords is not None:
            rec["coords"] = [float(x) for x in f.coords]
        facilities.append(rec)
    metric: dict[str, Any] = {"type": inst.metric}
    if inst.matrix is not None:
        metric["matrix"] = inst.matrix.tolist()
    return {
        "points": points,
        "facilities": facilities,
        "metric": metric,
        "k": int(inst.k),
        "alpha": [fraction_to_json(a) for a in inst.alpha],
        "beta": [fraction_to_json(b) for b in inst.beta],
    }


def _coords(rec: Mapping, where: str) -> tuple[float, ...] | None:
    c = rec.get("coords")
    if c is None:
        return None
    try:
        return tuple(float(x) for x in c)
    except (TypeError, ValueError):
        raise InstanceError(f"bad coordinates {c!r}", where) from None


def instance_from_dict(data: Mapping, check_triangle: bool = True) -> Instance:
    if not isinstance(data, Mapping):
        raise InstanceError("top level must be an object")
    for key in ("points", "facilities", "k", "alpha", "beta"):
        if key not in data:
            raise InstanceError("missing field", key)
    try:
        points = tuple(
            Point(id=str(r["id"]), group=r["group"], coords=_coords(r, "points.coords")) for r in data["points"]
        )
        facilities = tuple(Facility(id=str(r["id"]), coords=_coords(r, "facilities.coords")) for r in data["facilities"])
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed record ({exc})", "points/facilities") from None
    for p in points:
        if isinstance(p.group, bool) or not isinstance(p.group, int):
            raise InstanceError(f"point {p.id!r} group must be an integer", "points.group")
    try:
        alpha = tuple(to_fraction(a) for a in data["alpha"])
        beta = tuple(to_fraction(b) for b in data["beta"])
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InstanceError(str(exc), "alpha/beta") from None
    metric = data.get("metric") or {"type": "euclidean"}
    kind = metric.get("type", "euclidean")
    matrix = None
    if kind == "explicit":
        if "matrix" not in metric:
            raise InstanceError("explicit metric needs a matrix", "metric.matrix")
        try:
            matrix = np.array(metric["matrix"], dtype=float)
        except (TypeError, ValueError):
            raise InstanceError("matrix is not numeric and rectangular", "metric.matrix") from None
    elif kind != "euclidean":
        raise InstanceError(f"unknown metric type {kind!r}", "metric.type")
    k = data["k"]
    if isinstance(k, bool) or not isinstance(k, int):
        raise InstanceError(f"k must be an integer, got {k!r}", "k")
    inst = Instance(points=points, facilities=facilities, k=k, alpha=alpha, beta=beta, matrix=matrix)
    return inst.validate(check_triangle=check_triangle)


def _read_text(source: IO | bytes | str) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def load_instance(
    source: IO | bytes | str,
    format: str = "json",
    *,
    facilities: IO | bytes | str | None = None,
    k: int | None = None,
    alpha: Sequence | None = None,
    beta: Sequence | None = None,
    check_triangle: bool = True,
) -> Instance:
    """Parse and validate an instance.

    ``source`` is a stream or the raw document.  For ``format="csv"`` the
    source holds ``id,group,x1,...,xd`` rows and ``facilities`` holds
    ``id,x1,...,xd`` rows; ``k``, ``alpha`` and ``beta`` are passed
    separately since CSV has no place for them.
    """
    text = _read_text(source)
    if format == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"parse error: {exc}") from None
        return instance_from_dict(data, check_triangle=check_triangle)
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    if facilities is None or k is None or alpha is None or beta is None:
        raise InstanceError("csv input needs facilities, k, alpha and beta")
    points = []
    for row in _csv_rows(text):
        if len(row) < 2:
            raise InstanceError(f"short point row {row!r}", "points")
        try:
            points.append(Point(row[0], int(row[1]), tuple(float(x) for x in row[2:])))
        except ValueError:
            raise InstanceError(f"bad point row {row!r}", "points") from None
    facs = []
    for row in _csv_rows(_read_text(facilities)):
        try:
            facs.append(Facility(row[0], tuple(float(x) for x in row[1:])))
        except (ValueError, IndexError):
            raise InstanceError(f"bad facility row {row!r}", "facilities") from None
    inst = Instance(points=points, facilities=facs, k=k, alpha=alpha, beta=beta)
    return inst.validate(check_triangle=check_triangle)


def _csv_rows(text: str) -> list[list[str]]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    # optional header: first row whose second column is not numeric
    if rows:
        try:
            float(rows[0][1]) if len(rows[0]) > 1 else None
        except ValueError:
            rows = rows[1:]
    return [[c.strip() for c in r] for r in rows]


def read_instance(path, check_triangle: bool = True) -> Instance:
    with open(path, "rb") as fh:
        return load_instance(fh, "json", check_triangle=check_triangle)


def dump_instance(inst: Instance, fh: IO[str] | None = None) -> str:
    text = json.dumps(instance_to_dict(inst), indent=2)
    if fh is not None:
        fh.write(text)
    return text


# ---------------------------------------------------------------------------
# assignments


@dataclass(frozen=True, eq=False)
class Assignment:
    """A total map from points to centers.

    ``labels[j]`` is the index into ``centers`` of the center serving the
    point with id ``point_ids[j]``.  ``trace`` carries solver diagnostics and
    takes no part in comparisons.
    """

    centers: tuple[Facility, ...]
    labels: tuple[int, ...]
    point_ids: tuple[str, ...]
    trace: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(self.centers))
        object.__setattr__(self, "labels", tuple(int(x) for x in self.labels))
        object.__setattr__(self, "point_ids", tuple(self.point_ids))
        if len(self.labels) != len(self.point_ids):
            raise ValueError("labels and point ids differ in length")
        if any(not 0 <= x < len(self.centers) for x in self.labels):
            raise ValueError("label out of range of the center set")

    @classmethod
    def from_labels(cls, inst: Instance, centers: Sequence[str | Facility], labels, trace=None):
        return cls(inst.resolve_centers(centers), tuple(labels), tuple(p.id for p in inst.points), trace or {})

    @classmethod
    def from_phi(cls, inst: Instance, phi: Mapping[str, str], centers: Sequence[str | Facility] | None = None):
        if centers is None:
            centers = sorted(set(phi.values()), key=lambda c: inst.facility_index.get(c, -1))
        centers = inst.resolve_centers(centers)
        index = {c.id: i for i, c in enumerate(centers)}
        missing = [p.id for p in inst.points if p.id not in phi]
        if missing:
            raise ValueError(f"assignment is not total, unmapped points {missing}")
        labels = []
        for p in inst.points:
            c = phi[p.id]
            if c not in index:
                raise ValueError(f"point {p.id!r} mapped to unknown facility {c!r}")
            labels.append(index[c])
        return cls(centers, tuple(labels), tuple(p.id for p in inst.points))

    @property
    def phi(self) -> dict[str, str]:
        return {pid: self.centers[c].id for pid, c in zip(self.point_ids, self.labels)}

    @property
    def center_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.centers)

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.phi == other.phi

    def __hash__(self):
        return hash(tuple(sorted(self.phi.items())))


def _check_total(inst: Instance, a: Assignment) -> None:
    if a.point_ids != tuple(p.id for p in inst.points):
        raise ValueError("assignment does not cover exactly the instance points in order")


def center_loads(inst: Instance, a: Assignment, dist: np.ndarray | None = None) -> np.ndarray:
    """Per-center load under the true metric."""
    _check_total(inst, a)
    if dist is None:
        dist = inst.distances_to(a.centers)
    labels = np.asarray(a.labels, dtype=int)
    loads = np.zeros(len(a.centers))
    np.add.at(loads, labels, dist[np.arange(inst.n), labels])
    return loads


def assignment_cost(inst: Instance, a: Assignment, dist: np.ndarray | None = None) -> float:
    """Maximum load over the centers of ``a``."""
    loads = center_loads(inst, a, dist)
    return float(loads.max()) if loads.size else 0.0


def group_counts(inst: Instance, a: Assignment) -> np.ndarray:
    """Integer matrix ``counts[center, group]``."""
    _check_total(inst, a)
    counts = np.zeros((len(a.centers), inst.n_groups), dtype=int)
    np.add.at(counts, (np.asarray(a.labels, dtype=int), inst.groups), 1)
    return counts


class FairnessReport(NamedTuple):
    fair: bool
    violations: list[tuple[str, int, str]]  # (center id, group, "alpha" | "beta")

    def __bool__(self):
        return self.fair


def check_fairness(inst: Instance, a: Assignment) -> FairnessReport:
    """Exact check of the (alpha, beta) constraints on every used center."""
    counts = group_counts(inst, a)
    violations = []
    for i, row in enumerate(counts):
        size = int(row.sum())
        if size == 0:
            continue
        for g, cnt in enumerate(row):
            cnt = int(cnt)
            a_g, b_g = inst.alpha[g], inst.beta[g]
            if cnt * a_g.denominator > a_g.numerator * size:
                violations.append((a.centers[i].id, g, "alpha"))
            if cnt * b_g.denominator < b_g.numerator * size:
                violations.append((a.centers[i].id, g, "beta"))
    return FairnessReport(not violations, violations)


def assignment_report(inst: Instance, a: Assignment) -> dict:
    loads = center_loads(inst, a)
    counts = group_counts(inst, a)
    return {
        "centers": [c.id for c in a.centers],
        "phi": a.phi,
        "max_load": float(loads.max()) if loads.size else 0.0,
        "per_center": [
            {"center": c.id, "load": float(loads[i]), "group_counts": [int(x) for x in counts[i]]}
            for i, c in enumerate(a.centers)
        ],
        "fair": check_fairness(inst, a).fair,
    }


@dataclass(frozen=True)
class Clustering:
    """A partition of point ids into at most ``k`` blocks."""

    blocks: tuple[frozenset, ...]
    centers: tuple[str | None, ...] | None = None

    def validate(self, inst: Instance) -> "Clustering":
        seen: set = set()
        for b in self.blocks:
            if seen & b:
                raise ValueError("blocks overlap")
            seen |= b
        if seen != set(inst.point_index):
            raise ValueError("blocks do not cover the points")
        if len(self.blocks) > inst.k:
            raise ValueError("more than k blocks")
        return self

    @classmethod
    def from_assignment(cls, inst: Instance, a: Assignment) -> "Clustering":
        blocks = []
        centers = []
        for i, c in enumerate(a.centers):
            members = frozenset(p.id for p, lab in zip(inst.points, a.labels) if lab == i)
            if members:
                blocks.append(members)
                centers.append(c.id)
        return cls(tuple(blocks), tuple(centers))

    def block_costs(self, inst: Instance, centers: Sequence[str | Facility]) -> np.ndarray:
        """``cost[b, c]``: sum of distances from block ``b`` to center ``c``."""
        dist = inst.distances_to(centers)
        out = np.zeros((len(self.blocks), dist.shape[1]))
        for b, block in enumerate(self.blocks):
            rows = [inst.point_index[pid] for pid in block]
            out[b] = dist[rows].sum(axis=0)
        return out

    def cost_with(self, inst: Instance, centers: Sequence[str | Facility]) -> float:
        """Min over matchings of blocks to centers of the maximum block cost."""
        costs = self.block_costs(inst, centers)
        nb, nc = costs.shape
        if nb > nc:
            raise ValueError("more blocks than centers")
        best = math.inf
        for perm in permutations(range(nc), nb):
            best = min(best, max(costs[b, c] for b, c in enumerate(perm)))
        return float(best)

    def optimal_block_costs(self, inst: Instance) -> np.ndarray:
        """Best single-facility cost of every block over ``inst.facilities``."""
        return self.block_costs(inst, inst.facilities).min(axis=1)
