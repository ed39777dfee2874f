"""Approximate fair assignment to a fixed set of centers.

The pipeline for a budget ``B``:

1. Round every point-center distance up to the geometric grid
   ``d_t = (1+eps)^t * eps^2 * B`` (:func:`round_distances`).  Pairs whose
   rounded distance exceeds ``(1+eps)B`` are dropped.  Classes with
   ``t >= 0`` are *costly*; at most ``2/eps^2`` costly points fit under one
   center.
2. Guess, per center, class and group, how many costly points the center
   serves (:func:`enumerate_z_guesses`).
3. For a guess, solve the mixed-integer program of :func:`build_fair_lp`
   (fractional ``x``, integral per-center group counts ``y``).
4. Round the fractional solution group by group through an integral max
   flow (:func:`round_lp_solution`).  Counts are preserved exactly and each
   center's rounded load grows by at most the sum of the cheap class
   distances.

:func:`budgeted_fair_assignment` runs this decision procedure and
:func:`fair_assignment` searches the budget over a geometric grid bracketed
by the optimal fair k-median assignment cost.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .core import Assignment, Facility, Instance, assignment_cost, check_fairness, group_counts
from .flow import FlowNetwork, max_flow, min_cost_flow
from .milp import TAU_INT, LinearProgram, LPSolution, solve_lp, solve_milp

__all__ = [
    "RoundedInstance",
    "ZGuess",
    "FairLPModel",
    "BudgetedOutcome",
    "RoundingAudit",
    "FairnessInfeasibleError",
    "GuaranteeError",
    "RoundingError",
    "round_distances",
    "delta_bound",
    "costly_cap",
    "enumerate_z_guesses",
    "build_fair_lp",
    "round_lp_solution",
    "round_fractional",
    "working_epsilon",
    "budgeted_fair_assignment",
    "fair_kmedian_assignment",
    "nearest_center_assignment",
    "fair_assignment",
    "mlkc_assignment",
]

log = logging.getLogger(__name__)

# sentinel class index for zero-distance pairs
ZERO_CLASS = -(10**9)
# relative slack on budget comparisons, absorbs float rounding of the grid
BUDGET_RTOL = 1e-9


class FairnessInfeasibleError(ValueError):
    """No (alpha, beta)-fair assignment to the given centers exists."""


class GuaranteeError(RuntimeError):
    """An approximation guarantee failed its runtime audit."""


class RoundingError(RuntimeError):
    """The rounding network carried less flow than the group size."""


def _check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not 0 < eps < 1:
        raise ValueError(f"epsilon out of range (0, 1): {eps}")
    return eps


def delta_bound(epsilon: float) -> int:
    """Largest costly class index a budget-feasible pair can have."""
    eps = _check_epsilon(epsilon)
    target = (1 + eps) / eps**2
    t = math.ceil(math.log(target) / math.log1p(eps))
    while (1 + eps) ** (t - 1) >= target:
        t -= 1
    while (1 + eps) ** t < target:
        t += 1
    return t


def costly_cap(epsilon: float) -> int:
    """``floor(2/eps^2)``, the per-center bound on costly points."""
    return int(math.floor(2.0 / epsilon**2 + 1e-12))


@dataclass(frozen=True, eq=False)
class RoundedInstance:
    """Distances rounded to the geometric grid for one (centers, eps, B).

    Arrays are indexed ``[point, center]``.  ``cls`` holds the class index
    ``t`` (``ZERO_CLASS`` for zero distances); ``dhat`` the rounded
    distance, ``inf`` for excluded pairs.
    """

    inst: Instance
    centers: tuple[Facility, ...]
    epsilon: float
    budget: float
    dist: np.ndarray
    cls: np.ndarray
    dhat: np.ndarray
    zero: np.ndarray
    excluded: np.ndarray
    delta: int

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def unit(self) -> float:
        return self.epsilon**2 * self.budget

    @property
    def limit(self) -> float:
        """Per-center rounded-load allowance ``(1+eps)B`` with float slack."""
        return (1 + self.epsilon) * self.budget * (1 + BUDGET_RTOL)

    def d(self, t: int) -> float:
        if t == ZERO_CLASS:
            return 0.0
        return (1 + self.epsilon) ** t * self.unit

    @property
    def allowed(self) -> np.ndarray:
        return ~self.excluded

    @property
    def costly(self) -> np.ndarray:
        return self.allowed & ~self.zero & (self.cls >= 0)

    @property
    def cheap(self) -> np.ndarray:
        return self.allowed & ~self.zero & (self.cls < 0)

    @property
    def populations(self) -> dict[tuple[int, int, int], int]:
        """``|P_g ∩ S_it|`` for every nonempty costly class ``(i, t, g)``."""
        pops: dict[tuple[int, int, int], int] = {}
        groups = self.inst.groups
        for j, i in zip(*np.nonzero(self.costly)):
            key = (int(i), int(self.cls[j, i]), int(groups[j]))
            pops[key] = pops.get(key, 0) + 1
        return dict(sorted(pops.items()))

    def cheap_classes(self, i: int) -> list[int]:
        return sorted({int(t) for t in self.cls[self.cheap[:, i], i]})

    def cheap_tail(self) -> float:
        """Sum of ``d_t`` over all ``t < 0``; equals ``eps * B``."""
        return self.unit / self.epsilon


def round_distances(inst: Instance, centers: Sequence[str | Facility], epsilon: float, budget: float,
                    dist: np.ndarray | None = None) -> RoundedInstance:
    """Round point-center distances up to powers of ``1+eps`` times ``eps^2 B``.

    A zero budget keeps only the zero-distance pairs.
    """
    eps = _check_epsilon(epsilon)
    if budget < 0 or not math.isfinite(budget):
        raise ValueError(f"budget must be a finite nonnegative number, got {budget}")
    centers = inst.resolve_centers(centers)
    if dist is None:
        dist = inst.distances_to(centers)
    dist = np.asarray(dist, dtype=float)
    zero = dist == 0
    cls = np.full(dist.shape, ZERO_CLASS, dtype=np.int64)
    dhat = np.zeros(dist.shape)
    if budget == 0:
        excluded = ~zero
        dhat[excluded] = np.inf
        return RoundedInstance(inst, centers, eps, 0.0, dist, cls, dhat, zero, excluded, -1)
    unit = eps**2 * budget
    base = math.log1p(eps)
    for j, i in zip(*np.nonzero(~zero)):
        d = dist[j, i]
        t = math.ceil(math.log(d / unit) / base)
        while unit * (1 + eps) ** t < d:
            t += 1
        while unit * (1 + eps) ** (t - 1) >= d:
            t -= 1
        cls[j, i] = t
        dhat[j, i] = unit * (1 + eps) ** t
    excluded = dhat > (1 + eps) * budget * (1 + 1e-12)
    dhat[excluded] = np.inf
    costly = ~excluded & ~zero & (cls >= 0)
    delta = int(cls[costly].max()) if costly.any() else -1
    return RoundedInstance(inst, centers, eps, float(budget), dist, cls, dhat, zero, excluded, delta)


@dataclass(frozen=True)
class ZGuess:
    """Guessed number of costly points per nonempty class ``(i, t, g)``.

    Classes absent from ``values`` are guessed as zero.
    """

    values: dict

    def __getitem__(self, key) -> int:
        return self.values.get(key, 0)

    def as_array(self, k: int, delta: int, ell: int) -> np.ndarray:
        out = np.zeros((k, max(delta + 1, 0), ell), dtype=int)
        for (i, t, g), v in self.values.items():
            out[i, t, g] = v
        return out

    def center_load(self, ri: RoundedInstance, i: int) -> float:
        return sum(ri.d(t) * v for (c, t, g), v in self.values.items() if c == i)


def enumerate_z_guesses(ri: RoundedInstance) -> Iterator[ZGuess]:
    """Every guess within the population, count and load bounds, in lexicographic order."""
    pops = ri.populations
    keys = list(pops)
    cap = costly_cap(ri.epsilon)
    limit = ri.limit
    count = [0] * ri.k
    load = [0.0] * ri.k
    current: dict = {}

    def rec(idx: int) -> Iterator[ZGuess]:
        if idx == len(keys):
            yield ZGuess({key: v for key, v in current.items() if v})
            return
        i, t, g = key = keys[idx]
        dt = ri.d(t)
        for v in range(0, min(cap, pops[key]) + 1):
            if count[i] + v > cap or load[i] + dt * v > limit:
                break
            count[i] += v
            load[i] += dt * v
            current[key] = v
            yield from rec(idx + 1)
            count[i] -= v
            load[i] -= dt * v
        current.pop(key, None)

    yield from rec(0)


@dataclass
class FairLPModel:
    """Fair-LP for one rounded instance; maps model variables back to indices."""

    lp: LinearProgram
    ri: RoundedInstance
    x: dict[tuple[int, int], int]  # (point j, center i) -> var
    y: dict[tuple[int, int], int]  # (group g, center i) -> var
    z: dict[tuple[int, int, int], int]  # (center i, class t, group g) -> var
    guess: ZGuess | None = None

    @property
    def n_integer(self) -> int:
        return sum(self.lp.integer)

    def x_matrix(self, sol: LPSolution) -> np.ndarray:
        X = np.zeros(self.ri.dist.shape)
        for (j, i), v in self.x.items():
            X[j, i] = sol.x[v]
        X[X < TAU_INT] = 0.0
        return X

    def y_matrix(self, sol: LPSolution) -> np.ndarray | None:
        if not self.y:
            return None
        Y = np.zeros((self.ri.inst.n_groups, self.ri.k), dtype=int)
        for (g, i), v in self.y.items():
            Y[g, i] = int(round(sol.x[v]))
        return Y

    def z_values(self, sol: LPSolution) -> dict:
        return {key: sol.x[v] for key, v in self.z.items()}


def build_fair_lp(ri: RoundedInstance, z: ZGuess | None = None, *, z_bounds: dict | None = None,
                  with_y: bool = True, integral_y: bool = True, drop_implied: bool = True) -> FairLPModel:
    """Assemble the fair assignment program for ``ri``.

    With a :class:`ZGuess` the costly class weights are fixed to the guess.
    ``z_bounds`` instead gives ``(lo, hi)`` per class, which the guess search
    uses for partial guesses.  ``with_y=False`` drops the group weights and
    the fairness rows (the single-group program).  When ``drop_implied`` is
    set, fairness rows with ``beta_g = 0`` or ``alpha_g = 1`` are omitted as
    they follow from the others.
    """
    inst = ri.inst
    lp = LinearProgram("min")
    groups = inst.groups
    n, k = ri.dist.shape
    xs: dict[tuple[int, int], int] = {}
    for j in range(n):
        for i in range(k):
            if not ri.excluded[j, i]:
                xs[j, i] = lp.add_var(0.0, math.inf, name=f"x_{j}_{i}")
    ys: dict[tuple[int, int], int] = {}
    if with_y:
        for i in range(k):
            for g in range(inst.n_groups):
                ys[g, i] = lp.add_var(0.0, float(inst.group_sizes[g]), integer=integral_y, name=f"y_{g}_{i}")
    pops = ri.populations
    cap = costly_cap(ri.epsilon)
    zs: dict[tuple[int, int, int], int] = {}
    for key, pop in pops.items():
        if z is not None:
            lo = hi = float(z[key])
        elif z_bounds is not None:
            lo, hi = z_bounds[key]
        else:
            lo, hi = 0.0, float(min(cap, pop))
        i, t, g = key
        zs[key] = lp.add_var(lo, hi, name=f"z_{i}_{t}_{g}")

    # each point fully assigned
    for j in range(n):
        lp.add_constraint({xs[j, i]: 1.0 for i in range(k) if (j, i) in xs}, "=", 1.0, name=f"assign_{j}")
    if with_y:
        for i in range(k):
            col = [xs[j, i] for j in range(n) if (j, i) in xs]
            for g in range(inst.n_groups):
                members = {xs[j, i]: 1.0 for j in range(n) if (j, i) in xs and groups[j] == g}
                members[ys[g, i]] = -1.0
                lp.add_constraint(members, "=", 0.0, name=f"weight_{g}_{i}")
                a_g, b_g = float(inst.alpha[g]), float(inst.beta[g])
                if not (drop_implied and b_g == 0):
                    row = {v: -b_g for v in col}
                    row[ys[g, i]] = row.get(ys[g, i], 0.0) + 1.0
                    lp.add_constraint(row, ">=", 0.0, name=f"lower_{g}_{i}")
                if not (drop_implied and a_g == 1):
                    row = {v: -a_g for v in col}
                    row[ys[g, i]] = row.get(ys[g, i], 0.0) + 1.0
                    lp.add_constraint(row, "<=", 0.0, name=f"upper_{g}_{i}")
    # costly class weights equal the guess
    members_of: dict[tuple[int, int, int], list[int]] = {key: [] for key in pops}
    for j, i in zip(*np.nonzero(ri.costly)):
        members_of[int(i), int(ri.cls[j, i]), int(groups[j])].append(xs[int(j), int(i)])
    for key, vars_ in members_of.items():
        row = {v: 1.0 for v in vars_}
        row[zs[key]] = -1.0
        lp.add_constraint(row, "=", 0.0, name="class_{}_{}_{}".format(*key))
    # per-center load and costly count
    for i in range(k):
        row: dict[int, float] = {}
        for key, v in zs.items():
            if key[0] == i:
                row[v] = ri.d(key[1])
        for j in np.flatnonzero(ri.cheap[:, i]):
            row[xs[int(j), i]] = ri.dhat[j, i]
        if row:
            lp.add_constraint(row, "<=", ri.limit, name=f"load_{i}")
        mine = [key for key in zs if key[0] == i]
        if sum(min(cap, pops[key]) for key in mine) > cap:
            lp.add_constraint({zs[key]: 1.0 for key in mine}, "<=", float(cap), name=f"costly_count_{i}")
    return FairLPModel(lp, ri, xs, ys, zs, z)


@dataclass
class RoundingAudit:
    """Per-center evidence for the rounding guarantees."""

    counts_match: bool
    rounded_load: np.ndarray  # sum of dhat over the rounded assignment
    fractional_bound: np.ndarray  # guessed costly load + fractional cheap load
    slack: np.ndarray  # groups * sum of cheap class distances present
    sandwich_ok: bool

    @property
    def load_ok(self) -> bool:
        return bool(np.all(self.rounded_load <= (self.fractional_bound + self.slack) * (1 + 1e-9) + 1e-12))

    @property
    def ok(self) -> bool:
        return self.counts_match and self.load_ok and self.sandwich_ok


def _ceil_tol(v: float) -> int:
    return int(math.ceil(v - TAU_INT))


def round_lp_solution(model: FairLPModel, sol: LPSolution) -> tuple[Assignment, RoundingAudit]:
    """Round a solution of a :func:`build_fair_lp` model; see :func:`round_fractional`."""
    guess = model.guess
    if guess is None:
        guess = ZGuess({key: int(round(v)) for key, v in model.z_values(sol).items() if round(v)})
    return round_fractional(model.ri, model.x_matrix(sol), model.y_matrix(sol), guess)


def round_fractional(ri: RoundedInstance, X: np.ndarray, Y: np.ndarray | None = None,
                     guess: ZGuess | None = None) -> tuple[Assignment, RoundingAudit]:
    """Turn a fractional assignment into an integral one by max flow.

    Parameters
    ----------
    X : ndarray of shape (n, k)
        Fractional assignment; rows sum to one, zero on excluded pairs.
    Y : ndarray of shape (groups, k), optional
        Integral group weights.  Without them a single network over all
        points is used and center ``i`` accepts ``ceil(sum_j X[j, i])``.
    guess : ZGuess, optional
        Costly class counts for the audit; defaults to the costly mass of ``X``.

    Returns
    -------
    Assignment, RoundingAudit
        The network for a group has arcs source -> point (capacity 1),
        point -> (center, class) (capacity 1), (center, class) -> center
        (``ceil`` of the class mass ``lambda``) and center -> sink (``Y``).
    """
    inst = ri.inst
    n, k = ri.dist.shape
    X = np.asarray(X, dtype=float)
    groups = inst.groups if Y is not None else np.zeros(n, dtype=int)
    n_groups = inst.n_groups if Y is not None else 1
    labels = np.full(n, -1, dtype=int)
    for g in range(n_groups):
        members = np.flatnonzero(groups == g)
        if members.size == 0:
            continue
        net = FlowNetwork()
        v_node = {int(j): net.add_node(f"v{j}") for j in members}
        u_node = {i: net.add_node(f"u{i}") for i in range(k)}
        w_node: dict[tuple[int, int], int] = {}
        lam: dict[tuple[int, int], float] = {}
        point_arcs = []
        for j in members:
            net.add_arc(net.source, v_node[int(j)], 1)
        for j in members:
            for i in range(k):
                if ri.excluded[j, i]:
                    continue
                key = (i, int(ri.cls[j, i]))
                if key not in w_node:
                    w_node[key] = net.add_node(f"w{i},{key[1]}")
                    lam[key] = 0.0
                lam[key] += X[j, i]
                point_arcs.append((net.add_arc(v_node[int(j)], w_node[key], 1), int(j), i))
        for key, w in w_node.items():
            net.add_arc(w, u_node[key[0]], _ceil_tol(lam[key]))
        for i in range(k):
            if Y is not None:
                cap = int(Y[g, i])
            else:
                cap = _ceil_tol(float(X[members, i].sum()))
            net.add_arc(u_node[i], net.sink, cap)
        res = max_flow(net)
        if res.value != members.size:
            raise RoundingError(f"group {g}: flow {res.value} < {members.size}")
        for arc, j, i in point_arcs:
            if res.flow[arc]:
                labels[j] = i
    assert np.all(labels >= 0)
    a = Assignment.from_labels(inst, ri.centers, labels)

    # audit
    if Y is not None:
        counts_match = bool(np.array_equal(group_counts(inst, a).T, Y))
    else:
        counts_match = True
    rounded = np.zeros(k)
    np.add.at(rounded, labels, ri.dhat[np.arange(n), labels])
    frac = np.zeros(k)
    slack = np.zeros(k)
    if guess is not None:
        for (i, t, g), v in guess.values.items():
            frac[i] += ri.d(t) * v
    else:
        frac += (np.where(ri.costly, ri.dhat, 0.0) * X).sum(axis=0)
    for i in range(k):
        cheap = ri.cheap[:, i]
        frac[i] += float(ri.dhat[cheap, i] @ X[cheap, i])
        slack[i] = n_groups * sum(ri.d(t) for t in ri.cheap_classes(i))
    allowed = ri.allowed & ~ri.zero
    d, dh = ri.dist[allowed], ri.dhat[allowed]
    sandwich = bool(np.all(d <= dh) and np.all(dh <= (1 + ri.epsilon) * d * (1 + 1e-12)))
    audit = RoundingAudit(counts_match, rounded, frac, slack, sandwich)
    return a, audit


# ---------------------------------------------------------------------------
# budgeted decision


def working_epsilon(epsilon: float, n_groups: int) -> float:
    """Precision for the rounding so that the final load stays within ``(1+eps)B``.

    Rounded load per center is at most ``(1+w)B + groups * w * B``, so any
    ``w <= eps / (groups + 1)`` suffices; ``eps / (4*groups + 4)`` leaves
    room for the ``(1+w)`` factor on the cheap tail as well.
    """
    return epsilon / (4 * n_groups + 4)


@dataclass
class BudgetedOutcome:
    feasible: bool
    budget: float
    epsilon: float
    assignment: Assignment | None = None
    cost: float | None = None
    guess: ZGuess | None = None
    audit: RoundingAudit | None = None
    stats: dict = field(default_factory=dict)
    model: FairLPModel | None = None  # program whose solution was rounded
    solution: LPSolution | None = None


def _search_guess(ri: RoundedInstance, with_y: bool, stats: dict) -> tuple[FairLPModel, LPSolution] | None:
    """Depth-first search over z-guesses with LP-relaxation pruning.

    A partial guess fixes some classes; the rest stay within their bounds
    as continuous variables.  A partial guess whose relaxation is infeasible
    has no feasible completion, so pruning keeps the search complete.
    """
    pops = ri.populations
    cap = costly_cap(ri.epsilon)
    root = {key: (0.0, float(min(cap, pop))) for key, pop in pops.items()}
    stack = [root]
    while stack:
        bounds = stack.pop()
        relax = build_fair_lp(ri, z_bounds=bounds, with_y=with_y, integral_y=False)
        sol = solve_lp(relax.lp)
        stats["relaxations"] = stats.get("relaxations", 0) + 1
        if not sol.optimal:
            continue
        zv = relax.z_values(sol)
        frac = {key: abs(v - round(v)) for key, v in zv.items() if bounds[key][0] < bounds[key][1]}
        if all(f <= TAU_INT for f in frac.values()):
            guess = ZGuess({key: int(round(v)) for key, v in zv.items() if round(v)})
            stats["leaves"] = stats.get("leaves", 0) + 1
            leaf = build_fair_lp(ri, guess, with_y=with_y, integral_y=True)
            leaf_sol = solve_milp(leaf.lp) if with_y else solve_lp(leaf.lp)
            if leaf_sol.optimal:
                return leaf, leaf_sol
            if not frac:
                continue
            key = next(iter(frac))
        else:
            key = max(frac, key=lambda q: (frac[q], [-x for x in q]))
        lo, hi = bounds[key]
        v = zv[key]
        values = sorted(range(int(lo), int(hi) + 1), key=lambda c: (abs(c - v), c))
        for c in reversed(values):
            child = dict(bounds)
            child[key] = (float(c), float(c))
            stack.append(child)
    return None


def _enumerate_guess(ri: RoundedInstance, with_y: bool, stats: dict) -> tuple[FairLPModel, LPSolution] | None:
    for guess in enumerate_z_guesses(ri):
        stats["guesses"] = stats.get("guesses", 0) + 1
        model = build_fair_lp(ri, guess, with_y=with_y, integral_y=True)
        sol = solve_milp(model.lp) if with_y else solve_lp(model.lp)
        if sol.optimal:
            return model, sol
    return None


def budgeted_fair_assignment(inst: Instance, centers: Sequence[str | Facility], budget: float, epsilon: float, *,
                             strategy: str = "search", fair: bool = True, dist: np.ndarray | None = None,
                             ) -> BudgetedOutcome:
    """Decide whether a fair assignment of cost at most ``budget`` exists.

    Returns a feasible outcome whose true cost is at most
    ``(1+epsilon)*budget``, or an infeasible one, in which case no fair
    assignment of cost ``<= budget`` exists.

    Parameters
    ----------
    strategy : {"search", "enumerate"}
        ``"enumerate"`` walks every z-guess in lexicographic order and solves
        its program.  ``"search"`` explores the same guesses depth-first and
        prunes partial guesses whose LP relaxation is infeasible.
    fair : bool
        ``False`` runs the single-group program (no integral variables); the
        instance's fairness constraints must then be vacuous.
    """
    epsilon = _check_epsilon(epsilon)
    centers = inst.resolve_centers(centers)
    if not fair and not inst.fairness_vacuous:
        raise ValueError("the LP-only path needs vacuous fairness constraints; use the fair path")
    n_groups = inst.n_groups if fair else 1
    w = working_epsilon(epsilon, n_groups)
    ri = round_distances(inst, centers, w, budget, dist)
    stats: dict = {"working_epsilon": w, "delta": ri.delta, "classes": len(ri.populations)}
    if strategy == "search":
        found = _search_guess(ri, fair, stats)
    elif strategy == "enumerate":
        found = _enumerate_guess(ri, fair, stats)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if found is None:
        return BudgetedOutcome(False, float(budget), epsilon, stats=stats)
    model, sol = found
    a, audit = round_lp_solution(model, sol)
    cost = assignment_cost(inst, a, ri.dist)
    if fair and not check_fairness(inst, a).fair:
        raise GuaranteeError("rounded assignment violates fairness")
    if not audit.ok:
        raise GuaranteeError(f"rounding audit failed: {audit}")
    if cost > (1 + epsilon) * budget * (1 + BUDGET_RTOL) + 1e-12:
        raise GuaranteeError(f"cost {cost} exceeds (1+eps)B = {(1 + epsilon) * budget}")
    guess = model.guess
    a.trace.update({"budget": float(budget), "z_guess": _guess_json(guess), **stats})
    return BudgetedOutcome(True, float(budget), epsilon, a, cost, guess, audit, stats, model, sol)


def _guess_json(guess: ZGuess | None) -> list:
    if guess is None:
        return []
    return [{"center": i, "class": t, "group": g, "count": v} for (i, t, g), v in sorted(guess.values.items())]


# ---------------------------------------------------------------------------
# k-median bracket and budget search


def fair_kmedian_assignment(inst: Instance, centers: Sequence[str | Facility], dist: np.ndarray | None = None,
                            ) -> tuple[Assignment, float]:
    """Exact minimum-sum fair assignment and its cost.

    Solves the fractional-assignment program with integral group weights,
    then rounds each group by a min-cost flow with the weights as sink
    capacities; with the weights fixed the transportation polytope is
    integral, so the rounding keeps the optimal cost.
    """
    centers = inst.resolve_centers(centers)
    if dist is None:
        dist = inst.distances_to(centers)
    n, k = dist.shape
    groups = inst.groups
    lp = LinearProgram("min")
    x = {(j, i): lp.add_var(cost=float(dist[j, i]), name=f"x_{j}_{i}") for j in range(n) for i in range(k)}
    y = {(g, i): lp.add_var(0, float(inst.group_sizes[g]), integer=True, name=f"y_{g}_{i}")
         for i in range(k) for g in range(inst.n_groups)}
    for j in range(n):
        lp.add_constraint({x[j, i]: 1.0 for i in range(k)}, "=", 1.0)
    for i in range(k):
        for g in range(inst.n_groups):
            row = {x[j, i]: 1.0 for j in range(n) if groups[j] == g}
            row[y[g, i]] = -1.0
            lp.add_constraint(row, "=", 0.0)
            a_g, b_g = float(inst.alpha[g]), float(inst.beta[g])
            if b_g > 0:
                r = {x[j, i]: -b_g for j in range(n)}
                r[y[g, i]] = 1.0
                lp.add_constraint(r, ">=", 0.0)
            if a_g < 1:
                r = {x[j, i]: -a_g for j in range(n)}
                r[y[g, i]] = 1.0
                lp.add_constraint(r, "<=", 0.0)
    sol = solve_milp(lp)
    if not sol.optimal:
        raise FairnessInfeasibleError("no fair assignment to these centers exists")
    Y = np.array([[int(round(sol.x[y[g, i]])) for i in range(k)] for g in range(inst.n_groups)])
    labels = np.full(n, -1, dtype=int)
    for g in range(inst.n_groups):
        members = np.flatnonzero(groups == g)
        if members.size == 0:
            continue
        net = FlowNetwork()
        v_node = {int(j): net.add_node() for j in members}
        u_node = [net.add_node() for _ in range(k)]
        arcs = []
        for j in members:
            net.add_arc(net.source, v_node[int(j)], 1)
        for j in members:
            for i in range(k):
                arcs.append((net.add_arc(v_node[int(j)], u_node[i], 1, float(dist[j, i])), int(j), i))
        for i in range(k):
            net.add_arc(u_node[i], net.sink, int(Y[g, i]))
        res = min_cost_flow(net, int(members.size))
        for arc, j, i in arcs:
            if res.flow[arc]:
                labels[j] = i
    a = Assignment.from_labels(inst, centers, labels)
    total = float(dist[np.arange(n), labels].sum())
    if abs(total - sol.objective) > 1e-6 * (1 + abs(sol.objective)):
        raise GuaranteeError(f"k-median rounding changed the cost: {total} vs {sol.objective}")
    if not np.array_equal(group_counts(inst, a).T, Y):
        raise GuaranteeError("k-median rounding changed the group weights")
    a.trace.update({"kmedian_cost": total, "kmedian_weights": Y.tolist()})
    return a, total


def nearest_center_assignment(inst: Instance, centers: Sequence[str | Facility], dist: np.ndarray | None = None,
                              ) -> tuple[Assignment, float]:
    """Unconstrained minimum-sum assignment: every point to its nearest center."""
    centers = inst.resolve_centers(centers)
    if dist is None:
        dist = inst.distances_to(centers)
    labels = np.argmin(dist, axis=1)
    return Assignment.from_labels(inst, centers, labels), float(dist[np.arange(inst.n), labels].sum())


def _grid_bounds(D: float, k: int, e: float) -> tuple[int, int]:
    base = math.log1p(e)
    lo_target = D / k
    m = math.floor(math.log(lo_target) / base)
    while (1 + e) ** (m + 1) <= lo_target:
        m += 1
    while (1 + e) ** m > lo_target:
        m -= 1
    M = math.ceil(math.log(D) / base)
    while (1 + e) ** (M - 1) >= D:
        M -= 1
    while (1 + e) ** M < D:
        M += 1
    return m, M


def _budget_search(decide, D: float, k: int, e: float) -> tuple[BudgetedOutcome, dict]:
    m, M = _grid_bounds(D, k, e)
    probes: dict[int, BudgetedOutcome] = {}

    def probe(i: int) -> BudgetedOutcome:
        if i not in probes:
            probes[i] = decide((1 + e) ** i)
        return probes[i]

    if not probe(M).feasible:
        raise GuaranteeError(f"decision infeasible at budget {(1 + e) ** M} >= D = {D}")
    lo, hi = m, M
    while lo < hi:
        mid = (lo + hi) // 2
        if probe(mid).feasible:
            hi = mid
        else:
            lo = mid + 1
    feas = sorted(i for i, o in probes.items() if o.feasible)
    infeas = [i for i, o in probes.items() if not o.feasible]
    monotone = not any(i > feas[0] for i in infeas)
    found = hi
    if not monotone:
        log.warning("non-monotone budget responses %s; scanning the grid linearly", sorted(probes))
        for i in range(m, M + 1):
            if probe(i).feasible:
                found = i
                break
    best = min((o for o in probes.values() if o.feasible), key=lambda o: (o.cost, o.budget))
    trace = {
        "grid": {"m": m, "M": M, "found": found, "epsilon": e},
        "probes": [{"index": i, "budget": o.budget, "feasible": o.feasible, "cost": o.cost}
                   for i, o in sorted(probes.items())],
        "monotone": monotone,
    }
    return best, trace


def fair_assignment(inst: Instance, centers: Sequence[str | Facility], epsilon: float, *,
                    strategy: str = "search", dist: np.ndarray | None = None,
                    bracket: tuple[Assignment, float] | None = None) -> Assignment:
    """A fair assignment of cost at most ``(1+epsilon)`` times the optimum.

    ``bracket`` may pass in a precomputed :func:`fair_kmedian_assignment`
    result.  Raises :class:`FairnessInfeasibleError` when no fair assignment
    exists.
    """
    epsilon = _check_epsilon(epsilon)
    centers = inst.resolve_centers(centers)
    if dist is None:
        dist = inst.distances_to(centers)
    kmed, D = bracket if bracket is not None else fair_kmedian_assignment(inst, centers, dist)
    if D == 0:
        kmed.trace.update({"D": 0.0, "note": "zero k-median cost"})
        return kmed
    e = epsilon / 3
    best, trace = _budget_search(
        lambda B: budgeted_fair_assignment(inst, centers, B, e, strategy=strategy, fair=True, dist=dist),
        D, len(centers), e)
    a = best.assignment
    a.trace.update({"D": D, **trace})
    return a


def mlkc_assignment(inst: Instance, centers: Sequence[str | Facility], epsilon: float, *,
                    strategy: str = "search", dist: np.ndarray | None = None,
                    bracket: tuple[Assignment, float] | None = None) -> Assignment:
    """Single-group counterpart of :func:`fair_assignment` using only LPs."""
    epsilon = _check_epsilon(epsilon)
    if not inst.fairness_vacuous:
        raise ValueError("instance has nontrivial fairness constraints; use fair_assignment")
    centers = inst.resolve_centers(centers)
    if dist is None:
        dist = inst.distances_to(centers)
    near, D = bracket if bracket is not None else nearest_center_assignment(inst, centers, dist)
    if D == 0:
        near.trace.update({"D": 0.0, "note": "zero k-median cost"})
        return near
    e = epsilon / 3
    best, trace = _budget_search(
        lambda B: budgeted_fair_assignment(inst, centers, B, e, strategy=strategy, fair=False, dist=dist),
        D, len(centers), e)
    a = best.assignment
    a.trace.update({"D": D, **trace})
    return a
