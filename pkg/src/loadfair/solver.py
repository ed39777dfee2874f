"""End-to-end solving: candidate center sets times approximate assignment."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .assignment import (
    FairnessInfeasibleError,
    GuaranteeError,
    fair_assignment,
    fair_kmedian_assignment,
    mlkc_assignment,
    nearest_center_assignment,
)
from .centers import (
    EXHAUSTIVE_CAP,
    CenterList,
    euclidean_candidate_centers,
    exhaustive_centers,
    metric_candidate_centers,
)
from .core import Assignment, Facility, Instance, assignment_cost, assignment_report, check_fairness

__all__ = ["SolveConfig", "SolveResult", "solve_fmlkc", "epsilon_zero", "candidate_list", "MODES"]

log = logging.getLogger(__name__)

MODES = ("exhaustive", "metric", "euclidean")


@dataclass(frozen=True)
class SolveConfig:
    """Parameters of one solve.

    Parameters
    ----------
    epsilon : float
        Target precision in ``(0, 1)``.
    mode : {"exhaustive", "metric", "euclidean"}
        Candidate center generator.
    reps : int
        Independent sampled lists merged together (sampled modes only).
    seed : int, optional
        Root seed; every sampled list is derived from it.
    strategy : {"search", "enumerate"}
        z-guess strategy passed to the assignment routines.
    exhaustive_cap : int
        Largest number of k-subsets the exhaustive mode accepts.
    """

    epsilon: float = 0.5
    mode: str = "exhaustive"
    reps: int = 3
    seed: int | None = None
    strategy: str = "search"
    exhaustive_cap: int = EXHAUSTIVE_CAP

    def validate(self) -> "SolveConfig":
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon out of range (0, 1): {self.epsilon}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.strategy not in ("search", "enumerate"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        return self


@dataclass
class SolveResult:
    centers: tuple[Facility, ...]
    assignment: Assignment
    cost: float
    table: list[dict]
    trace: dict = field(default_factory=dict)

    def report(self, inst: Instance) -> dict:
        out = assignment_report(inst, self.assignment)
        if any(c.coords is not None and c.id not in inst.facility_index for c in self.centers):
            out["center_coords"] = {c.id: list(c.coords) for c in self.centers}
        out["trace"] = {**self.trace, "candidates": self.table}
        return out


def epsilon_zero(mode: str, epsilon: float) -> float:
    """Per-candidate precision so the composed guarantee meets ``epsilon``."""
    if mode == "euclidean":
        e0 = epsilon / 3
        assert (1 + e0) ** 2 <= 1 + epsilon
    elif mode == "metric":
        e0 = epsilon / 5
        assert (3 + e0) * (1 + e0) <= 3 + epsilon
    else:
        e0 = epsilon
    return e0


def candidate_list(inst: Instance, cfg: SolveConfig) -> CenterList:
    """The mode's candidate list; sampled modes merge ``reps`` independent draws."""
    if cfg.mode == "exhaustive":
        return exhaustive_centers(inst, cap=cfg.exhaustive_cap)
    root = np.random.SeedSequence(cfg.seed)
    gen = metric_candidate_centers if cfg.mode == "metric" else euclidean_candidate_centers
    sets: list[tuple[Facility, ...]] = []
    seen: set = set()
    infos = []
    for child in root.spawn(cfg.reps):
        lst = gen(inst, cfg.epsilon, child)
        infos.append({**lst.info, "size": len(lst)})
        for s in lst:
            key = tuple(sorted((c.id, c.coords) for c in s))
            if key not in seen:
                seen.add(key)
                sets.append(s)
    return CenterList(sets, lst.provenance, root.entropy, {"lists": infos})


def _rename(sets: list[tuple[Facility, ...]]) -> list[tuple[Facility, ...]]:
    # coordinate centers from different draws may share ids; make ids global
    ids: dict = {}
    out = []
    for s in sets:
        row = []
        for c in s:
            if c.coords not in ids:
                ids[c.coords] = Facility(f"c{len(ids)}", c.coords)
            row.append(ids[c.coords])
        out.append(tuple(row))
    return out


def _evaluate(inst: Instance, C: tuple[Facility, ...], e0: float, strategy: str,
              bound: float | None) -> tuple[dict, Assignment | None, float | None]:
    row: dict = {"centers": [c.id for c in C]}
    fair = not inst.fairness_vacuous
    dist = inst.distances_to(C)
    try:
        bracket = fair_kmedian_assignment(inst, C, dist) if fair else nearest_center_assignment(inst, C, dist)
    except FairnessInfeasibleError:
        row["status"] = "infeasible"
        return row, None, None
    row["D"] = bracket[1]
    if bound is not None and bracket[1] / len(C) > bound:
        row["status"] = "pruned"
        return row, None, None
    solve = fair_assignment if fair else mlkc_assignment
    a = solve(inst, C, e0, strategy=strategy, dist=dist, bracket=bracket)
    cost = assignment_cost(inst, a, dist)
    row.update(status="solved", cost=cost)
    return row, a, cost


def solve_fmlkc(inst: Instance, cfg: SolveConfig | None = None, *, n_jobs: int = 1, **kwargs) -> SolveResult:
    """Best assignment over the candidate center sets of ``cfg.mode``.

    The per-candidate precision is :func:`epsilon_zero`.  Sequentially, a
    candidate whose k-median lower bound ``D/k`` already exceeds the best
    cost found is skipped.  Ties are broken toward the lexicographically
    smallest sorted center-id tuple, so the result does not depend on
    evaluation order or ``n_jobs``.

    Raises
    ------
    FairnessInfeasibleError
        When no candidate set admits a fair assignment.
    """
    cfg = (cfg or SolveConfig(**kwargs)).validate()
    if cfg.mode == "euclidean" and inst.metric != "euclidean":
        raise ValueError("euclidean mode needs point coordinates")
    e0 = epsilon_zero(cfg.mode, cfg.epsilon)
    cands = candidate_list(inst, cfg)
    sets = _rename(cands.sets) if cfg.mode == "euclidean" else cands.sets
    fair = not inst.fairness_vacuous
    best: tuple | None = None
    table: list[dict] = []
    if n_jobs > 1 and len(sets) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_evaluate, *zip(*[(inst, C, e0, cfg.strategy, None) for C in sets])))
    else:
        outcomes = None
    for idx, C in enumerate(sets):
        if outcomes is not None:
            row, a, cost = outcomes[idx]
        else:
            row, a, cost = _evaluate(inst, C, e0, cfg.strategy, None if best is None else best[0])
        table.append(row)
        if a is None:
            continue
        key_ids = tuple(sorted(c.id for c in C))
        if best is None or (cost, key_ids) < (best[0], best[1]):
            best = (cost, key_ids, C, a)
    if best is None:
        raise FairnessInfeasibleError("no candidate center set admits a fair assignment")
    cost, _, C, a = best
    if fair and not check_fairness(inst, a).fair:
        raise GuaranteeError("solver returned an unfair assignment")
    recomputed = assignment_cost(inst, a)
    if abs(recomputed - cost) > 1e-9 * max(1.0, abs(cost)):
        raise GuaranteeError(f"cost mismatch: {recomputed} vs {cost}")
    trace = {
        "config": asdict(cfg),
        "epsilon0": e0,
        "seed": cands.seed,
        "list_size": len(sets),
        "list_info": cands.info,
        "assignment": dict(a.trace),
    }
    return SolveResult(C, a, recomputed, table, trace)
