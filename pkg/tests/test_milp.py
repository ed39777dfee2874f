import math

import numpy as np
import pytest

from corpus import build_lp, enumerate_milp, highs_lp, random_lp_data, random_milp_data
from loadfair.assignment import build_fair_lp, round_distances, working_epsilon
from loadfair.milp import (
    NodeLimitError,
    LinearProgram,
    instrument,
    solve_lp,
    solve_milp,
    to_lp_format,
)


def test_single_binding_constraint():
    lp = LinearProgram()
    x = lp.add_var(cost=1)
    lp.add_constraint({x: 1}, ">=", 3)
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.x[x] == pytest.approx(3) and sol.objective == pytest.approx(3)


def test_two_by_two_vertex_and_duals():
    lp = LinearProgram()
    x, y = lp.add_var(cost=1), lp.add_var(cost=1)
    lp.add_constraint({x: 1, y: 2}, ">=", 4)
    lp.add_constraint({x: 3, y: 1}, ">=", 6)
    sol = solve_lp(lp)
    np.testing.assert_allclose(sol.x, [1.6, 1.2], atol=1e-9)
    assert sol.objective == pytest.approx(2.8)
    np.testing.assert_allclose(sol.duals, [0.4, 0.2], atol=1e-9)
    assert sol.dual_bound == pytest.approx(2.8)


def test_contradictory_bounds_infeasible():
    lp = LinearProgram()
    x = lp.add_var()
    lp.add_constraint({x: 1}, "<=", 1)
    lp.add_constraint({x: 1}, ">=", 2)
    assert solve_lp(lp).status == "infeasible"


def test_unbounded_and_max_sense():
    lp = LinearProgram("max")
    x = lp.add_var(cost=1)
    lp.add_constraint({x: 1}, ">=", 1)
    assert solve_lp(lp).status == "unbounded"
    lp = LinearProgram("max")
    x, y = lp.add_var(cost=3), lp.add_var(cost=2)
    lp.add_constraint({x: 1, y: 1}, "<=", 4)
    lp.add_constraint({x: 1, y: 3}, "<=", 6)
    lp.add_constraint({x: 1}, "<=", 3)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(11)
    assert sol.dual_bound >= sol.objective - 1e-9


def test_free_and_negative_bounds():
    lp = LinearProgram()
    x = lp.add_var(-math.inf, math.inf, cost=1)
    y = lp.add_var(-5, -1, cost=-1)
    lp.add_constraint({x: 1, y: -1}, ">=", -2)
    sol = solve_lp(lp)
    # objective x - y is bounded below by the constraint
    assert sol.objective == pytest.approx(-2)
    assert -5 <= sol.x[y] <= -1


def test_beale_cycling_example_terminates():
    # degenerate LP on which Dantzig pricing with lowest-index ties cycles
    lp = LinearProgram()
    v = [lp.add_var(cost=c) for c in (-0.75, 150, -0.02, 6)]
    lp.add_constraint(dict(zip(v, (0.25, -60, -0.04, 9))), "<=", 0)
    lp.add_constraint(dict(zip(v, (0.5, -90, -0.02, 3))), "<=", 0)
    lp.add_constraint({v[2]: 1}, "<=", 1)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-0.05)


def test_milp_without_integers_equals_lp():
    data = random_lp_data(np.random.default_rng(3))
    a, b = solve_lp(build_lp(data)), solve_milp(build_lp(data))
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective)


def test_integer_ceiling():
    lp = LinearProgram()
    y = lp.add_var(0, 10, cost=1, integer=True)
    lp.add_constraint({y: 1}, ">=", 1.5)
    sol = solve_milp(lp)
    assert sol.x[y] == 2.0 and float(sol.x[y]).is_integer()


def test_integral_variables_need_finite_bounds():
    lp = LinearProgram()
    lp.add_var(0, math.inf, integer=True)
    with pytest.raises(ValueError, match="finite bounds"):
        solve_milp(lp)


def test_node_limit_is_a_distinct_error():
    # a knapsack with many near-ties needs more than a handful of nodes
    rng = np.random.default_rng(0)
    lp = LinearProgram("max")
    w = rng.integers(20, 40, 12)
    xs = [lp.add_var(0, 1, cost=float(wi) + 0.1 * rng.random(), integer=True) for wi in w]
    lp.add_constraint({x: float(wi) for x, wi in zip(xs, w)}, "<=", float(w.sum()) / 2 + 0.5)
    with pytest.raises(NodeLimitError):
        solve_milp(lp, node_limit=3)


def test_fair_lp_on_t2_gives_balanced_weights(t2):
    ri = round_distances(t2, ["f0", "f1"], working_epsilon(0.5, 2), 1.0)
    model = build_fair_lp(ri, z_bounds=None)
    sol = solve_milp(model.lp)
    assert sol.optimal
    np.testing.assert_array_equal(model.y_matrix(sol), [[1, 1], [1, 1]])


def test_instrumentation_counts_calls():
    lp = LinearProgram()
    y = lp.add_var(0, 10, cost=1, integer=True)
    lp.add_constraint({y: 2}, ">=", 3)
    with instrument() as outer:
        solve_lp(lp)
        with instrument() as inner:
            solve_milp(lp)
    assert (outer.lp_calls, outer.milp_calls) == (1, 1)
    assert (inner.lp_calls, inner.milp_calls) == (0, 1)
    assert outer.bb_nodes >= 1


def test_lp_format_dump():
    lp = LinearProgram("max")
    x = lp.add_var(0, 4, cost=2, name="x")
    y = lp.add_var(0, 3, cost=-1, integer=True, name="y")
    lp.add_constraint({x: 1, y: 1}, "<=", 5, name="cap")
    text = to_lp_format(lp)
    assert text.startswith("Maximize")
    assert " cap: 1 x + 1 y <= 5" in text
    assert "General\n y" in text


def test_lp_dump_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("LOADFAIR_LP_DUMP", str(tmp_path))
    lp = LinearProgram()
    lp.add_var(cost=1)
    solve_lp(lp)
    assert len(list(tmp_path.glob("*.lp"))) == 1


@pytest.mark.parametrize("seed", range(300))
def test_lp_matches_highs(seed):
    data = random_lp_data(np.random.default_rng(seed))
    sol = solve_lp(build_lp(data))
    status, obj = highs_lp(data)
    if status == "unknown":
        pytest.skip("reference solver gave no verdict")
    assert sol.status == status
    if status == "optimal":
        assert sol.objective == pytest.approx(obj, rel=1e-7, abs=1e-7)
        # weak duality certificate
        assert sol.objective - sol.dual_bound <= 1e-6 * (1 + abs(sol.objective))


@pytest.mark.parametrize("seed", range(200))
def test_branch_and_bound_matches_enumeration(seed):
    data = random_milp_data(np.random.default_rng(10_000 + seed))
    sol = solve_milp(build_lp(data))
    status, obj = enumerate_milp(data)
    assert sol.status == status
    if status == "optimal":
        assert sol.objective == pytest.approx(obj, rel=1e-7, abs=1e-7)
        ints = data["integer"]
        assert np.all(sol.x[ints] == np.round(sol.x[ints]))
