import json

import numpy as np
import pytest

from corpus import line_instance, small_instance
from loadfair.assignment import FairnessInfeasibleError, fair_assignment
from loadfair.core import assignment_cost, check_fairness
from loadfair.oracle import brute_force_fmlkc
from loadfair.solver import SolveConfig, candidate_list, epsilon_zero, solve_fmlkc


@pytest.mark.parametrize("fixture", ["t1", "t2"])
def test_examples(fixture, request):
    inst = request.getfixturevalue(fixture)
    res = solve_fmlkc(inst, SolveConfig(epsilon=0.5))
    assert res.cost <= 1.5
    assert check_fairness(inst, res.assignment).fair
    assert res.cost == assignment_cost(inst, res.assignment)
    assert len(res.table) == 1


def test_k_equals_all_facilities(t2):
    res = solve_fmlkc(t2, epsilon=0.5)
    direct = fair_assignment(t2, ["f0", "f1"], epsilon_zero("exhaustive", 0.5))
    assert res.cost == assignment_cost(t2, direct)


def test_infeasible_fairness():
    inst = line_instance([0, 1], [0, 1], [0, 1], 2, [1, 1], [1, 1])
    with pytest.raises(FairnessInfeasibleError):
        solve_fmlkc(inst)


@pytest.mark.parametrize("mode,eps", [("euclidean", 0.9), ("metric", 0.5), ("exhaustive", 0.3)])
def test_epsilon_zero_composes(mode, eps):
    e0 = epsilon_zero(mode, eps)
    if mode == "euclidean":
        assert (1 + e0) ** 2 <= 1 + eps
    elif mode == "metric":
        assert (3 + e0) * (1 + e0) <= 3 + eps
    else:
        assert e0 == eps


@pytest.mark.parametrize("kwargs", [dict(epsilon=0), dict(epsilon=1), dict(mode="grid"), dict(reps=0),
                                    dict(strategy="x")])
def test_config_validation(kwargs, t1):
    with pytest.raises(ValueError):
        solve_fmlkc(t1, SolveConfig(**kwargs))


def test_euclidean_mode_needs_coordinates():
    inst = small_instance(3)
    while inst.metric == "euclidean":
        inst = small_instance(inst.n + 100)
    with pytest.raises(ValueError, match="coordinates"):
        solve_fmlkc(inst, mode="euclidean")


def test_tie_break_is_lexicographic():
    # symmetric instance: {f0,f1} and {f1,f2} are mirror images with equal cost
    inst = line_instance([0, 1, 2], [0, 0, 0], [0, 1, 2], 2, [1], [0])
    res = solve_fmlkc(inst, epsilon=0.5)
    costs = {tuple(r["centers"]): r.get("cost") for r in res.table}
    best = min(c for c in costs.values() if c is not None)
    tied = sorted(k for k, c in costs.items() if c == best)
    assert tuple(sorted(res.assignment.center_ids)) == tied[0]


def test_candidate_pruning_keeps_result():
    inst = small_instance(12)
    res = solve_fmlkc(inst, epsilon=0.5)
    statuses = {r["status"] for r in res.table}
    assert statuses <= {"solved", "pruned", "infeasible"}


def test_parallel_matches_sequential():
    inst = small_instance(21)
    a = solve_fmlkc(inst, SolveConfig(epsilon=0.5))
    b = solve_fmlkc(inst, SolveConfig(epsilon=0.5), n_jobs=2)
    assert a.cost == b.cost and a.assignment.phi == b.assignment.phi


def test_more_candidates_never_hurt():
    inst = small_instance(40, max_f=5)
    full = candidate_list(inst, SolveConfig(epsilon=0.5))
    costs = []
    from loadfair.solver import _evaluate

    best = np.inf
    for C in full:
        row, a, cost = _evaluate(inst, C, 0.5, "search", None)
        if a is not None:
            best = min(best, cost)
        costs.append(best)
    assert all(x >= y for x, y in zip(costs, costs[1:]))
    assert solve_fmlkc(inst, epsilon=0.5).cost == pytest.approx(costs[-1])


@pytest.mark.parametrize("mode", ["metric", "euclidean"])
def test_sampled_modes_are_seed_deterministic(mode):
    inst = line_instance([0, 1, 2, 6, 7], [0, 1, 0, 1, 0], [0, 2, 6, 7], 2, ["2/3", "2/3"], ["1/3", "1/3"])
    a = solve_fmlkc(inst, SolveConfig(epsilon=0.5, mode=mode, seed=3, reps=2))
    b = solve_fmlkc(inst, SolveConfig(epsilon=0.5, mode=mode, seed=3, reps=2))
    assert json.dumps(a.report(inst)) == json.dumps(b.report(inst))


def test_euclidean_mode_reports_center_coordinates():
    inst = line_instance([0, 1, 4, 5], [0, 0, 0, 0], [0, 5], 2, [1], [0])
    res = solve_fmlkc(inst, SolveConfig(epsilon=0.5, mode="euclidean", seed=0, reps=1))
    rep = res.report(inst)
    assert set(rep["center_coords"]) == set(rep["centers"])
    assert res.cost <= 1.5 * 1.0 + 1e-9


@pytest.mark.parametrize("seed", range(25))
def test_exhaustive_ratio(seed):
    inst = small_instance(300 + seed, max_f=5)
    opt = brute_force_fmlkc(inst)
    eps = (0.3, 0.5, 0.9)[seed % 3]
    if not opt.feasible:
        with pytest.raises(FairnessInfeasibleError):
            solve_fmlkc(inst, epsilon=eps)
        return
    res = solve_fmlkc(inst, epsilon=eps)
    assert res.cost <= (1 + eps) * opt.cost * (1 + 1e-9) + 1e-12
    assert check_fairness(inst, res.assignment).fair
