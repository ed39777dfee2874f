import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import assignment_corpus, line_instance
from loadfair.assignment import (
    ZERO_CLASS,
    FairnessInfeasibleError,
    ZGuess,
    budgeted_fair_assignment,
    build_fair_lp,
    costly_cap,
    delta_bound,
    enumerate_z_guesses,
    fair_assignment,
    fair_kmedian_assignment,
    mlkc_assignment,
    round_distances,
    round_fractional,
    working_epsilon,
)
from loadfair.core import assignment_cost, check_fairness, group_counts
from loadfair.milp import instrument, solve_lp, solve_milp
from loadfair.oracle import brute_force_fair_assignment


def star(distances, epsilon, budget):
    """One center at the origin and points on a line at the given distances."""
    inst = line_instance(distances, [0] * len(distances), [0], 1, [1], [0])
    return round_distances(inst, ["f0"], epsilon, budget)


# ---------------------------------------------------------------------------
# distance rounding


def test_costly_class_example():
    ri = star([3], 0.5, 4)
    assert ri.cls[0, 0] == 3
    assert ri.dhat[0, 0] == pytest.approx(3.375)
    assert ri.costly[0, 0]


def test_cheap_class_example():
    ri = star([0.4], 0.5, 4)
    assert ri.cls[0, 0] == -2
    assert ri.dhat[0, 0] == pytest.approx(1.5**-2)
    assert ri.cheap[0, 0]


def test_zero_distance_class():
    ri = star([0, 1], 0.5, 4)
    assert ri.cls[0, 0] == ZERO_CLASS and ri.dhat[0, 0] == 0
    assert not ri.costly[0, 0] and not ri.cheap[0, 0] and ri.allowed[0, 0]


def test_far_pairs_are_excluded():
    ri = star([4.6, 3], 0.5, 3)
    assert ri.excluded[0, 0] and math.isinf(ri.dhat[0, 0])
    assert ri.allowed[1, 0]


def test_exact_grid_distance_maps_to_its_own_class():
    # d equal to a grid value must not be pushed one class up by float error
    for t in range(-6, 6):
        d = 1.5**t * 0.25 * 4
        ri = star([d], 0.5, 4)
        if ri.allowed[0, 0]:
            assert ri.dhat[0, 0] >= d
            assert ri.dhat[0, 0] <= d * 1.5 * (1 + 1e-12)


def test_zero_budget_keeps_only_collocated_pairs():
    ri = star([0, 1], 0.5, 0)
    assert ri.allowed[0, 0] and ri.excluded[1, 0]
    assert ri.delta == -1


def test_rejects_bad_budget_and_epsilon():
    with pytest.raises(ValueError):
        star([1], 0.5, -1)
    with pytest.raises(ValueError):
        star([1], 0.5, math.inf)
    with pytest.raises(ValueError):
        star([1], 1.0, 1)


def test_delta_bound_examples():
    assert delta_bound(0.5) == 5
    assert delta_bound(0.9) == 2


@given(st.floats(0.01, 0.99))
def test_delta_bound_formula(eps):
    t = delta_bound(eps)
    target = (1 + eps) / eps**2
    assert (1 + eps) ** t >= target > (1 + eps) ** (t - 1)


def test_costly_cap():
    assert costly_cap(0.5) == 8
    assert costly_cap(0.3) == 22
    assert costly_cap(0.9) == 2


def test_all_cheap_has_empty_costly_range():
    ri = star([0.1, 0.2], 0.5, 100)
    assert ri.delta == -1 and not ri.costly.any() and ri.populations == {}


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=8),
       st.floats(0.01, 0.99), st.floats(0.01, 40))
def test_rounding_properties(ds, eps, budget):
    ri = star(ds, eps, budget)
    d, dh, cls = ri.dist[:, 0], ri.dhat[:, 0], ri.cls[:, 0]
    for j in range(len(ds)):
        if ri.zero[j, 0]:
            assert dh[j] == 0
            continue
        if ri.excluded[j, 0]:
            assert d[j] * (1 + 1e-9) > budget
            continue
        # sandwich and sign rule
        assert d[j] <= dh[j] <= (1 + eps) * d[j] * (1 + 1e-12)
        assert (cls[j] < 0) == (dh[j] < eps**2 * budget * (1 - 1e-12))
        assert dh[j] <= (1 + eps) * budget * (1 + 1e-9)
    assert ri.delta <= delta_bound(eps)


@given(st.floats(0.05, 0.95), st.floats(0.1, 10))
def test_cheap_tail(eps, budget):
    ri = star([1], eps, budget)
    tail = math.fsum(ri.d(t) for t in range(-1, -4000, -1))
    assert ri.cheap_tail() == pytest.approx(eps * budget)
    assert tail == pytest.approx(ri.cheap_tail(), rel=1e-9)
    assert tail < eps**2 * budget * (1 + eps) / eps


# ---------------------------------------------------------------------------
# z-guesses


def test_no_costly_pairs_gives_single_guess():
    guesses = list(enumerate_z_guesses(star([0.1], 0.5, 100)))
    assert guesses == [ZGuess({})]


def test_population_two_gives_three_guesses():
    ri = star([1.1, 1.2], 0.5, 4)
    assert list(ri.populations.values()) == [2]
    guesses = list(enumerate_z_guesses(ri))
    assert [g[(0, 1, 0)] for g in guesses] == [0, 1, 2]


def _filtered_product(ri):
    pops = ri.populations
    keys = list(pops)
    cap = costly_cap(ri.epsilon)
    out = []
    for values in itertools.product(*[range(min(cap, pops[key]) + 1) for key in keys]):
        count = [0] * ri.k
        load = [0.0] * ri.k
        for (i, t, _), v in zip(keys, values):
            count[i] += v
            load[i] += ri.d(t) * v
        if all(c <= cap for c in count) and all(x <= ri.limit for x in load):
            out.append({key: v for key, v in zip(keys, values) if v})
    return out


@pytest.mark.parametrize("seed", range(40))
def test_guess_stream_is_exactly_the_valid_set(seed):
    _, inst, centers, eps = next(assignment_corpus(1, offset=seed))
    D = inst.distances_to(inst.resolve_centers(centers))
    for frac in (0.3, 0.7):
        budget = float(D.max(initial=0) * frac) or 1.0
        ri = round_distances(inst, centers, eps, budget)
        got = [g.values for g in enumerate_z_guesses(ri)]
        want = _filtered_product(ri)
        assert got == want
        product = math.prod(min(costly_cap(eps), p) + 1 for p in ri.populations.values())
        assert len(got) <= product


def test_pruning_strictly_reduces_count():
    # three costly points near the limit: all three together exceed (1+eps)B
    ri = star([3.9, 3.9, 3.9], 0.5, 4)
    product = math.prod(min(costly_cap(0.5), p) + 1 for p in ri.populations.values())
    assert len(list(enumerate_z_guesses(ri))) < product


# ---------------------------------------------------------------------------
# Fair-LP


def test_t2_model_shape(t2):
    ri = round_distances(t2, ["f0", "f1"], 0.1, 1.0)
    model = build_fair_lp(ri, ZGuess({}))
    assert model.n_integer == 4
    assert len(model.x) <= 8


def test_zero_guess_forces_costly_x_to_zero():
    ri = star([3, 0.1], 0.5, 4)
    model = build_fair_lp(ri, ZGuess({}), with_y=False)
    assert solve_lp(model.lp).status == "infeasible"
    model = build_fair_lp(ri, ZGuess({(0, 3, 0): 1}), with_y=False)
    assert solve_lp(model.lp).optimal


@pytest.mark.parametrize("seed", range(30))
def test_implied_fairness_rows_do_not_change_the_region(seed):
    _, inst, centers, eps = next(assignment_corpus(1, offset=seed))
    D = inst.distances_to(inst.resolve_centers(centers))
    ri = round_distances(inst, centers, eps, float(D.max(initial=0)) or 1.0)
    a = build_fair_lp(ri, integral_y=False, drop_implied=True)
    b = build_fair_lp(ri, integral_y=False, drop_implied=False)
    # compare via a random objective over the shared x variables
    rng = np.random.default_rng(seed)
    for model in (a, b):
        for v in model.x.values():
            model.lp.cost[v] = 0.0
    c = {key: float(rng.normal()) for key in a.x}
    for key, w in c.items():
        a.lp.cost[a.x[key]] = w
        b.lp.cost[b.x[key]] = w
    sa, sb = solve_lp(a.lp), solve_lp(b.lp)
    assert sa.status == sb.status
    if sa.optimal:
        assert sa.objective == pytest.approx(sb.objective, abs=1e-7)


# ---------------------------------------------------------------------------
# flow rounding


def test_balanced_fractional_solution_rounds_to_one_of_each(t2):
    ri = round_distances(t2, ["f0", "f1"], 0.5, 10.0)
    X = np.full((4, 2), 0.5)
    Y = np.array([[1, 1], [1, 1]])
    a, audit = round_fractional(ri, X, Y)
    assert audit.ok
    np.testing.assert_array_equal(group_counts(t2, a), [[1, 1], [1, 1]])
    assert check_fairness(t2, a).fair


def test_integral_input_is_reproduced(t2):
    ri = round_distances(t2, ["f0", "f1"], 0.5, 10.0)
    labels = np.array([0, 0, 1, 1])
    X = np.eye(2)[labels]
    a, audit = round_fractional(ri, X, np.array([[1, 1], [1, 1]]))
    np.testing.assert_array_equal(a.labels, labels)
    assert audit.ok


def test_ceiling_slack():
    # three points at distance 0.25 of two centers: class -3 for eps=0.5, B=4
    inst = line_instance([0.25, 0.25, 0.25], [0, 0, 0], [0, 0.5], 2, [1], [0])
    ri = round_distances(inst, ["f0", "f1"], 0.5, 4)
    assert set(ri.cls.ravel()) == {-3}
    X = np.full((3, 2), 0.5)
    a, audit = round_fractional(ri, X)
    counts = np.bincount(a.labels, minlength=2)
    assert sorted(counts) == [1, 2]  # capacity ceil(1.5) = 2 on each center
    d3 = ri.d(-3)
    assert np.all(audit.rounded_load - audit.fractional_bound <= d3 * (1 + 1e-12))
    assert np.allclose(audit.slack, d3)
    assert audit.ok


# ---------------------------------------------------------------------------
# budgeted decision


def test_t1_budget_one_feasible(t1):
    out = budgeted_fair_assignment(t1, ["f0", "f1"], 1.0, 0.5)
    assert out.feasible and out.cost <= 1.5
    assert out.cost == 1.0
    assert out.audit.ok


def test_t1_budget_half_infeasible(t1):
    assert not budgeted_fair_assignment(t1, ["f0", "f1"], 0.5, 0.5).feasible


def test_zero_budget_collocated():
    inst = line_instance([0, 0, 5, 5], [0, 1, 0, 1], [0, 5], 2, ["1/2", "1/2"], ["1/2", "1/2"])
    out = budgeted_fair_assignment(inst, ["f0", "f1"], 0.0, 0.5)
    assert out.feasible and out.cost == 0.0
    inst = line_instance([0, 1], [0, 0], [0, 5], 2, [1], [0])
    assert not budgeted_fair_assignment(inst, ["f0", "f1"], 0.0, 0.5).feasible


def test_unknown_strategy(t1):
    with pytest.raises(ValueError, match="strategy"):
        budgeted_fair_assignment(t1, ["f0", "f1"], 1.0, 0.5, strategy="guess")


def test_lp_path_rejects_real_fairness(t2):
    with pytest.raises(ValueError):
        budgeted_fair_assignment(t2, ["f0", "f1"], 1.0, 0.5, fair=False)


def test_working_epsilon():
    assert working_epsilon(0.5, 1) == pytest.approx(0.0625)
    assert working_epsilon(0.5, 2) == pytest.approx(0.5 / 12)


@pytest.mark.parametrize("seed", range(40))
def test_search_and_enumerate_decide_alike(seed):
    _, inst, centers, eps = next(assignment_corpus(1, offset=seed))
    opt = brute_force_fair_assignment(inst, centers)
    if not opt.feasible or opt.cost == 0:
        return
    for factor in (0.8, 1.0, 1.2):
        B = opt.cost * factor
        ri = round_distances(inst, centers, working_epsilon(eps, inst.n_groups), B)
        if sum(1 for _ in itertools.islice(enumerate_z_guesses(ri), 201)) > 200:
            continue  # enumeration is the slow reference; keep it to small guess spaces
        a = budgeted_fair_assignment(inst, centers, B, eps, strategy="search")
        b = budgeted_fair_assignment(inst, centers, B, eps, strategy="enumerate")
        assert a.feasible == b.feasible
        if factor >= 1.0:
            assert a.feasible


# ---------------------------------------------------------------------------
# k-median bracket and the full search


def test_kmedian_t1(t1):
    a, D = fair_kmedian_assignment(t1, ["f0", "f1"])
    assert D == 2.0 and list(a.labels) == [0, 0, 1, 1]


def test_kmedian_t2(t2):
    a, D = fair_kmedian_assignment(t2, ["f0", "f1"])
    assert D == 2.0 and list(a.labels) == [0, 0, 1, 1]
    assert check_fairness(t2, a).fair


def test_kmedian_single_center(t1):
    a, D = fair_kmedian_assignment(t1, ["f1"])
    assert D == 5 + 4 + 1 + 0


def test_kmedian_infeasible():
    inst = line_instance([0, 1, 2], [0, 0, 1], [0], 1, ["1/2", "1/2"], ["1/2", "1/2"])
    with pytest.raises(FairnessInfeasibleError):
        fair_kmedian_assignment(inst, ["f0"])
    with pytest.raises(FairnessInfeasibleError):
        fair_assignment(inst, ["f0"], 0.5)


@pytest.mark.parametrize("fixture", ["t1", "t2"])
def test_fair_assignment_examples(fixture, request):
    inst = request.getfixturevalue(fixture)
    a = fair_assignment(inst, ["f0", "f1"], 0.5)
    assert assignment_cost(inst, a) <= 1.5
    assert check_fairness(inst, a).fair
    assert a.trace["D"] == 2.0 and a.trace["monotone"]


def test_fair_assignment_single_center(t2):
    a = fair_assignment(t2, ["f0"], 0.5)
    assert assignment_cost(t2, a) == 0 + 1 + 4 + 5


def test_zero_kmedian_cost_short_circuits():
    inst = line_instance([0, 5], [0, 0], [0, 5], 2, [1], [0])
    a = fair_assignment(inst, ["f0", "f1"], 0.5)
    assert assignment_cost(inst, a) == 0 and a.trace["D"] == 0


def test_mlkc_examples(t1):
    a = mlkc_assignment(t1, ["f0", "f1"], 0.5)
    assert assignment_cost(t1, a) <= 1.5
    one = line_instance([2], [0], [0, 3], 2, [1], [0])
    a = mlkc_assignment(one, ["f0", "f1"], 0.5)
    assert a.center_ids[a.labels[0]] == "f1"


def test_mlkc_rejects_fair_instances(t2):
    with pytest.raises(ValueError, match="fair_assignment"):
        mlkc_assignment(t2, ["f0", "f1"], 0.5)


@pytest.mark.parametrize("seed", range(30))
def test_mlkc_uses_no_branch_and_bound_and_agrees(seed):
    _, inst, centers, eps = next(assignment_corpus(1, offset=seed, ell=1))
    assert inst.fairness_vacuous
    with instrument() as stats:
        a = mlkc_assignment(inst, centers, eps)
    assert stats.milp_calls == 0
    b = fair_assignment(inst, centers, eps)
    opt = brute_force_fair_assignment(inst, centers).cost
    ca, cb = assignment_cost(inst, a), assignment_cost(inst, b)
    assert ca <= (1 + eps) * opt * (1 + 1e-9) + 1e-12
    assert cb <= (1 + eps) * opt * (1 + 1e-9) + 1e-12
