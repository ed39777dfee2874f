"""Linear and mixed-integer linear programming.

``solve_lp`` is a dense two-phase tableau simplex.  Pricing is Dantzig's
most-negative reduced cost until a run of degenerate pivots is seen, after
which Bland's rule takes over for the rest of the solve so the method cannot
cycle.  ``solve_milp`` is a best-bound branch-and-bound on top of it,
branching on the most fractional integral variable.

Every optimal LP result carries a dual vector and the lower bound it
certifies, so callers can audit weak duality.
"""

from __future__ import annotations

import contextlib
import heapq
import math
import os
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "LinearProgram",
    "LPSolution",
    "SolverStats",
    "SolverError",
    "SolverLimitError",
    "NodeLimitError",
    "NumericalError",
    "solve_lp",
    "solve_milp",
    "instrument",
    "to_lp_format",
    "TAU_FEAS",
    "TAU_INT",
]

TAU_FEAS = 1e-7
TAU_INT = 1e-6
OBJ_RTOL = 1e-9

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_STALL_PIVOTS = 40

LE, EQ, GE = "<=", "=", ">="
_RELS = {LE: LE, "<": LE, "=": EQ, "==": EQ, GE: GE, ">": GE}


class SolverError(RuntimeError):
    pass


class SolverLimitError(SolverError):
    """Pivot or node budget exhausted; the status is unknown."""


class NodeLimitError(SolverLimitError):
    pass


class NumericalError(SolverError):
    """The returned point failed the feasibility audit."""


@dataclass
class SolverStats:
    lp_calls: int = 0
    milp_calls: int = 0
    bb_nodes: int = 0
    pivots: int = 0


_STATS: ContextVar[tuple[SolverStats, ...]] = ContextVar("loadfair_solver_stats", default=())


@contextlib.contextmanager
def instrument():
    """Count solver calls made inside the block.

    >>> with instrument() as stats:
    ...     _ = solve_lp(lp)          # doctest: +SKIP
    >>> stats.lp_calls                # doctest: +SKIP
    1
    """
    stats = SolverStats()
    token = _STATS.set(_STATS.get() + (stats,))
    try:
        yield stats
    finally:
        _STATS.reset(token)


def _bump(attr: str, by: int = 1) -> None:
    for s in _STATS.get():
        setattr(s, attr, getattr(s, attr) + by)


class LinearProgram:
    """A (mixed-integer) linear program built incrementally.

    Variables are added with :meth:`add_var` and constraints with
    :meth:`add_constraint`; both return the new index.
    """

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.cost: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.integer: list[bool] = []
        self.names: list[str] = []
        self.rows: list[tuple[dict[int, float], str, float]] = []
        self.row_names: list[str] = []

    @property
    def n_vars(self) -> int:
        return len(self.cost)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(self, lb: float = 0.0, ub: float = math.inf, cost: float = 0.0, integer: bool = False,
                name: str | None = None) -> int:
        self.cost.append(float(cost))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        self.names.append(name or f"x{len(self.cost) - 1}")
        return len(self.cost) - 1

    def add_constraint(self, coefs: Mapping[int, float] | Iterable[tuple[int, float]], rel: str, rhs: float,
                       name: str | None = None) -> int:
        if rel not in _RELS:
            raise ValueError(f"unknown relation {rel!r}")
        items = coefs.items() if isinstance(coefs, Mapping) else coefs
        row: dict[int, float] = {}
        for j, a in items:
            row[j] = row.get(j, 0.0) + float(a)
        self.rows.append((row, _RELS[rel], float(rhs)))
        self.row_names.append(name or f"r{len(self.rows) - 1}")
        return len(self.rows) - 1

    def validate(self) -> None:
        n = self.n_vars
        for r, (row, _, rhs) in enumerate(self.rows):
            for j in row:
                if not 0 <= j < n:
                    raise ValueError(f"row {self.row_names[r]} references variable {j} out of range")
            if not math.isfinite(rhs):
                raise ValueError(f"row {self.row_names[r]} has a non-finite right-hand side")
        for j in range(n):
            if self.lb[j] > self.ub[j]:
                continue  # reported as infeasible
            if self.integer[j] and not (math.isfinite(self.lb[j]) and math.isfinite(self.ub[j])):
                raise ValueError(f"integral variable {self.names[j]} needs finite bounds")

    def arrays(self):
        """Dense ``(c, A, rel, b, lb, ub, integer)`` in minimisation form."""
        n, m = self.n_vars, self.n_rows
        A = np.zeros((m, n))
        for r, (row, _, _) in enumerate(self.rows):
            for j, a in row.items():
                A[r, j] = a
        c = np.array(self.cost, dtype=float)
        if self.sense == "max":
            c = -c
        rel = np.array([{LE: -1, EQ: 0, GE: 1}[r[1]] for r in self.rows], dtype=int)
        b = np.array([r[2] for r in self.rows], dtype=float)
        return (c, A, rel, b, np.array(self.lb, dtype=float), np.array(self.ub, dtype=float),
                np.array(self.integer, dtype=bool))


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None  # row duals of the minimisation form
    dual_bound: float | None = None  # bound on the objective certified by ``duals``
    nodes: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# simplex core


def _pivot(T: np.ndarray, i: int, j: int) -> None:
    row = T[i] / T[i, j]
    T -= np.outer(T[:, j], row)
    T[i] = row


def _run_simplex(T: np.ndarray, basis: list[int], allowed: np.ndarray, max_pivots: int) -> tuple[str, int]:
    """Minimise over tableau ``T`` whose last row holds reduced costs."""
    m = T.shape[0] - 1
    bland = False
    stall = 0
    pivots = 0
    while True:
        r = T[-1, :-1]
        cand = np.flatnonzero((r < -_COST_TOL) & allowed)
        if cand.size == 0:
            return "optimal", pivots
        j = int(cand[0]) if bland else int(cand[np.argmin(r[cand])])
        col = T[:m, j]
        pos = np.flatnonzero(col > _PIVOT_TOL)
        if pos.size == 0:
            return "unbounded", pivots
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * (1 + abs(best))]
        i = int(min(ties, key=lambda t: basis[t]))
        if pivots >= max_pivots:
            raise SolverLimitError(f"cycling/limit: simplex exceeded {max_pivots} pivots")
        if T[i, -1] <= 1e-12:
            stall += 1
            if stall > _STALL_PIVOTS:
                bland = True
        else:
            stall = 0
        _pivot(T, i, j)
        basis[i] = j
        pivots += 1


def _solve_arrays(c, A, rel, b, lb, ub) -> LPSolution:
    """Solve ``min c.x  s.t.  A x (rel) b,  lb <= x <= ub``."""
    n = c.size
    if np.any(lb > ub + TAU_FEAS):
        return LPSolution("infeasible")
    ub = np.maximum(ub, lb)

    # presolve: fixed variables and free-variable splitting
    fixed = np.isfinite(lb) & np.isfinite(ub) & (ub - lb <= 0)
    keep = np.flatnonzero(~fixed)
    x_fixed = np.where(fixed, lb, 0.0)
    b_eff = b - A[:, fixed] @ x_fixed[fixed]
    const = float(c[fixed] @ x_fixed[fixed])

    cols = []  # (orig var, sign, shift) for each standard-form structural column
    for j in keep:
        if math.isfinite(lb[j]):
            cols.append((j, 1.0, lb[j]))
        elif math.isfinite(ub[j]):
            cols.append((j, -1.0, ub[j]))
        else:
            cols.append((j, 1.0, 0.0))
            cols.append((j, -1.0, 0.0))
    ns = len(cols)
    Ms = np.zeros((A.shape[0], ns))
    cs = np.zeros(ns)
    for k, (j, s, sh) in enumerate(cols):
        Ms[:, k] = s * A[:, j]
        cs[k] = s * c[j]
        b_eff = b_eff - A[:, j] * sh
        const += c[j] * sh

    # bound rows for doubly bounded variables
    ub_rows = []
    for k, (j, s, sh) in enumerate(cols):
        if s > 0 and math.isfinite(ub[j]) and math.isfinite(lb[j]):
            ub_rows.append((k, ub[j] - lb[j]))

    # drop empty original rows after presolve
    row_src = []
    rows_A = []
    rows_b = []
    rows_rel = []
    for r in range(A.shape[0]):
        if not np.any(np.abs(Ms[r]) > 0):
            v, tol = b_eff[r], TAU_FEAS * (1 + abs(b[r]))
            ok = (rel[r] == -1 and v >= -tol) or (rel[r] == 1 and v <= tol) or (rel[r] == 0 and abs(v) <= tol)
            if not ok:
                return LPSolution("infeasible")
            continue
        row_src.append(r)
        rows_A.append(Ms[r])
        rows_b.append(b_eff[r])
        rows_rel.append(rel[r])
    for k, u in ub_rows:
        e = np.zeros(ns)
        e[k] = 1.0
        row_src.append(-1)
        rows_A.append(e)
        rows_b.append(u)
        rows_rel.append(-1)

    m = len(rows_A)
    if m == 0:
        if np.any(cs < -_COST_TOL):
            return LPSolution("unbounded")
        xs = np.zeros(ns)
        return _finish(c, A, rel, b, lb, ub, cols, xs, const, np.zeros(0), [], n, fixed, x_fixed, 0)

    As = np.array(rows_A)
    bs = np.array(rows_b)
    rs = np.array(rows_rel)
    n_slack = int(np.count_nonzero(rs != 0))
    sign = np.where(bs < 0, -1.0, 1.0)

    # tableau columns: structural | slack | artificial | rhs
    N0 = ns + n_slack
    T = np.zeros((m + 1, N0 + m + 1))
    T[:m, :ns] = As * sign[:, None]
    T[:m, -1] = bs * sign
    ident = [-1] * m
    s = ns
    for r in range(m):
        if rs[r] != 0:
            coef = (1.0 if rs[r] == -1 else -1.0) * sign[r]
            T[r, s] = coef
            if coef > 0:
                ident[r] = s
            s += 1
    n_art = 0
    art_cols = []
    for r in range(m):
        if ident[r] < 0:
            col = N0 + n_art
            T[r, col] = 1.0
            ident[r] = col
            art_cols.append(col)
            n_art += 1
        else:
            # unused artificial slot stays zero; keeps the layout fixed
            n_art += 1
    art_mask = np.zeros(N0 + m, dtype=bool)
    art_mask[art_cols] = True
    basis = list(ident)
    max_pivots = 50 * (m + N0 + m) + 1000

    # phase 1
    for r in range(m):
        if art_mask[basis[r]]:
            T[-1] -= T[r]
    T[-1, art_cols] = 0.0
    allowed = np.ones(N0 + m, dtype=bool)
    allowed[N0:] = False
    allowed[art_cols] = True
    status, piv1 = _run_simplex(T, basis, allowed, max_pivots)
    scale = max(1.0, float(np.abs(bs).max()))
    if -T[-1, -1] > 1e-9 * scale * max(1, m):
        _bump("pivots", piv1)
        return LPSolution("infeasible")

    # drive artificials out of the basis
    alive = np.ones(m, dtype=bool)
    for r in range(m):
        if art_mask[basis[r]]:
            cand = np.flatnonzero((np.abs(T[r, :N0]) > 1e-7))
            if cand.size:
                j = int(cand[np.argmax(np.abs(T[r, cand]))])
                _pivot(T, r, j)
                basis[r] = j
            else:
                alive[r] = False

    # phase 2
    cfull = np.zeros(N0 + m)
    cfull[:ns] = cs
    live = np.flatnonzero(alive)
    cb = cfull[[basis[r] for r in live]]
    T[-1, :-1] = cfull - cb @ T[live, :-1]
    T[-1, -1] = -(cb @ T[live, -1])
    allowed = np.zeros(N0 + m, dtype=bool)
    allowed[:N0] = True
    # freeze redundant rows by zeroing them out of the ratio test
    if not alive.all():
        dead = np.flatnonzero(~alive)
        T[dead, :] = 0.0
    status, piv2 = _run_simplex(T, basis, allowed, max_pivots)
    _bump("pivots", piv1 + piv2)
    if status == "unbounded":
        return LPSolution("unbounded")

    xs = np.zeros(N0 + m)
    for r in live:
        xs[basis[r]] = T[r, -1]
    xs = np.maximum(xs[:ns], 0.0)

    # row duals of the standard form: y_r = c_id - reduced_cost_id
    y_std = np.array([cfull[ident[r]] - T[-1, ident[r]] if alive[r] else 0.0 for r in range(m)])
    y_std *= sign  # undo the row sign normalisation
    y_orig = np.zeros(A.shape[0])
    for r, src in enumerate(row_src):
        if src >= 0:
            y_orig[src] = y_std[r]
    return _finish(c, A, rel, b, lb, ub, cols, xs, const, y_orig, row_src, n, fixed, x_fixed, piv1 + piv2)


def _finish(c, A, rel, b, lb, ub, cols, xs, const, y, row_src, n, fixed, x_fixed, pivots) -> LPSolution:
    x = x_fixed.copy()
    for k, (j, s, sh) in enumerate(cols):
        x[j] += sh + s * xs[k]
    x = np.clip(x, lb, ub)
    _audit(A, rel, b, x)
    obj = float(c @ x)
    if y.size == 0:
        y = np.zeros(A.shape[0])
    # sign-feasible duals (min form): y >= 0 on >= rows, y <= 0 on <= rows
    y = np.where(rel == 1, np.maximum(y, 0.0), np.where(rel == -1, np.minimum(y, 0.0), y))
    red = c - A.T @ y
    bound = float(b @ y)
    for j in range(n):
        r = red[j]
        if abs(r) <= 1e-12:
            continue
        v = lb[j] if r > 0 else ub[j]
        if not math.isfinite(v):
            bound = -math.inf
            break
        bound += r * v
    return LPSolution("optimal", x=x, objective=obj, duals=y, dual_bound=bound, info={"pivots": pivots})


def _audit(A, rel, b, x) -> None:
    lhs = A @ x
    tol = TAU_FEAS * (1.0 + np.abs(b))
    bad = ((rel == -1) & (lhs > b + tol)) | ((rel == 1) & (lhs < b - tol)) | ((rel == 0) & (np.abs(lhs - b) > tol))
    if np.any(bad):
        r = int(np.flatnonzero(bad)[0])
        raise NumericalError(f"row {r} residual {lhs[r] - b[r]:.3g} exceeds tolerance")


def _maybe_dump(lp: LinearProgram, tag: str) -> None:
    path = os.environ.get("LOADFAIR_LP_DUMP")
    if not path:
        return
    os.makedirs(path, exist_ok=True)
    k = len(os.listdir(path))
    with open(os.path.join(path, f"{tag}_{k:05d}.lp"), "w") as fh:
        fh.write(to_lp_format(lp))


def solve_lp(lp: LinearProgram) -> LPSolution:
    """Solve the continuous relaxation of ``lp`` (integrality is ignored)."""
    lp.validate()
    _bump("lp_calls")
    _maybe_dump(lp, "lp")
    c, A, rel, b, lb, ub, _ = lp.arrays()
    return _flip(lp, _solve_arrays(c, A, rel, b, lb, ub))


def _flip(lp: LinearProgram, sol: LPSolution) -> LPSolution:
    if lp.sense == "max" and sol.optimal:
        sol.objective = -sol.objective
        sol.dual_bound = -sol.dual_bound
    return sol


def _improves(obj: float, best: float) -> bool:
    return best == math.inf or obj < best - OBJ_RTOL * (1 + abs(best))


def solve_milp(lp: LinearProgram, node_limit: int = 200_000) -> LPSolution:
    """Branch-and-bound over the integral variables of ``lp``.

    Returns an optimal solution with integral variables snapped to exact
    integers, or an ``infeasible``/``unbounded`` status.  Raises
    :class:`NodeLimitError` when ``node_limit`` nodes were explored without
    closing the gap.
    """
    lp.validate()
    c, A, rel, b, lb0, ub0, integer = lp.arrays()
    if not integer.any():
        return solve_lp(lp)
    _bump("milp_calls")
    _maybe_dump(lp, "milp")
    ints = np.flatnonzero(integer)
    lb0 = lb0.copy()
    ub0 = ub0.copy()
    lb0[ints] = np.ceil(lb0[ints] - TAU_INT)
    ub0[ints] = np.floor(ub0[ints] + TAU_INT)

    nodes = 0
    counter = 0
    best_x = None
    best_obj = math.inf

    def relax(lb, ub):
        nonlocal nodes
        nodes += 1
        _bump("bb_nodes")
        if nodes > node_limit:
            raise NodeLimitError(f"branch-and-bound exceeded {node_limit} nodes")
        return _solve_arrays(c, A, rel, b, lb, ub)

    root = relax(lb0, ub0)
    if root.status != "optimal":
        root.nodes = nodes
        return _flip(lp, root)
    heap = [(root.objective, 0, counter, lb0, ub0, root)]
    while heap:
        bound, negdepth, _, lb, ub, sol = heapq.heappop(heap)
        if not _improves(bound, best_obj):
            continue
        xi = sol.x[ints]
        frac = np.abs(xi - np.round(xi))
        if frac.max() <= TAU_INT:
            lbf, ubf = lb.copy(), ub.copy()
            lbf[ints] = ubf[ints] = np.round(xi)
            leaf = sol if frac.max() == 0 else relax(lbf, ubf)
            if leaf.optimal and leaf.objective < best_obj:
                x = leaf.x.copy()
                x[ints] = np.round(x[ints])
                best_x, best_obj = x, leaf.objective
            continue
        k = int(np.argmax(frac - 1e-12 * np.arange(frac.size)))
        j = ints[k]
        v = sol.x[j]
        for side in (0, 1):
            lbc, ubc = lb.copy(), ub.copy()
            if side == 0:
                ubc[j] = math.floor(v)
            else:
                lbc[j] = math.ceil(v)
            if lbc[j] > ubc[j]:
                continue
            child = relax(lbc, ubc)
            if child.optimal and _improves(child.objective, best_obj):
                counter += 1
                heapq.heappush(heap, (child.objective, negdepth - 1, counter, lbc, ubc, child))
    if best_x is None:
        return LPSolution("infeasible", nodes=nodes)
    _audit(A, rel, b, best_x)
    out = LPSolution("optimal", x=best_x, objective=float(c @ best_x), nodes=nodes)
    return _flip(lp, out)


def to_lp_format(lp: LinearProgram) -> str:
    """Render ``lp`` in the CPLEX LP text format."""

    def term(coef: float, name: str, first: bool) -> str:
        sgn = "-" if coef < 0 else ("" if first else "+")
        return f"{sgn} {abs(coef):.17g} {name}".strip()

    def expr(items) -> str:
        parts = [term(a, lp.names[j], k == 0) for k, (j, a) in enumerate(items) if a != 0]
        return " ".join(parts) if parts else "0 " + lp.names[0] if lp.names else "0"

    out = ["Minimize" if lp.sense == "min" else "Maximize"]
    out.append(" obj: " + expr(list(enumerate(lp.cost))))
    out.append("Subject To")
    for (row, rel, rhs), name in zip(lp.rows, lp.row_names):
        out.append(f" {name}: {expr(sorted(row.items()))} {rel} {rhs:.17g}")
    out.append("Bounds")
    for j, name in enumerate(lp.names):
        lo = "-inf" if lp.lb[j] == -math.inf else f"{lp.lb[j]:.17g}"
        hi = "+inf" if lp.ub[j] == math.inf else f"{lp.ub[j]:.17g}"
        out.append(f" {lo} <= {name} <= {hi}")
    gens = [lp.names[j] for j in range(lp.n_vars) if lp.integer[j]]
    if gens:
        out.append("General")
        out.append(" " + " ".join(gens))
    out.append("End")
    return "\n".join(out) + "\n"
