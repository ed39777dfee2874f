import itertools

import numpy as np
import pytest

from corpus import line_instance, small_instance
from loadfair.core import Assignment, assignment_cost, check_fairness
from loadfair.oracle import (
    OracleCapError,
    brute_force_fair_assignment,
    brute_force_fair_kmedian,
    brute_force_fmlkc,
)


def test_t1(t1):
    res = brute_force_fair_assignment(t1, ["f0", "f1"])
    assert res.feasible and res.cost == 1.0
    assert assignment_cost(t1, res.assignment) == res.cost
    assert brute_force_fair_kmedian(t1, ["f0", "f1"]).cost == 2.0


def test_t2(t2):
    res = brute_force_fair_assignment(t2, ["f0", "f1"])
    assert res.cost == 1.0 and check_fairness(t2, res.assignment).fair
    assert brute_force_fair_kmedian(t2, ["f0", "f1"]).cost == 2.0


def test_contradictory_lower_bounds():
    inst = line_instance([0, 1], [0, 1], [0, 1], 2, [1, 1], [1, 1])
    res = brute_force_fair_assignment(inst, ["f0", "f1"])
    assert not res.feasible and res.count == 0 and res.assignment is None
    assert res.to_dict()["opt"] is None


def test_global_optimum_t1(t1):
    res = brute_force_fmlkc(t1)
    assert res.cost == 1.0 and set(res.centers) == {"f0", "f1"}


def test_single_center_global_optimum():
    inst = line_instance([0, 2, 3], [0, 0, 0], [0, 2, 9], 1, [1], [0])
    res = brute_force_fmlkc(inst)
    assert res.cost == 3.0 and res.centers == ("f1",)


def test_single_point_kmedian():
    inst = line_instance([4], [0], [0, 3, 9], 3, [1], [0])
    assert brute_force_fair_kmedian(inst, ["f0", "f1", "f2"]).cost == 1.0


def test_first_optimum_in_lexicographic_order_and_count():
    # both points equidistant from both centers: four optimal maps of load 1
    inst = line_instance([1, 1], [0, 0], [0, 2], 2, [1], [0])
    res = brute_force_fair_assignment(inst, ["f0", "f1"])
    assert res.cost == 1.0
    assert list(res.assignment.labels) == [0, 1]
    assert res.count == 2
    # the sum objective ties on all four maps
    assert brute_force_fair_kmedian(inst, ["f0", "f1"]).count == 4


def test_caps():
    inst = line_instance(range(12), [0] * 12, [0, 5], 2, [1], [0])
    with pytest.raises(OracleCapError, match="points"):
        brute_force_fair_assignment(inst, ["f0", "f1"])
    brute_force_fair_assignment(inst, ["f0", "f1"], max_points=12, max_maps=2**12)
    with pytest.raises(OracleCapError, match="maps"):
        brute_force_fair_assignment(inst, ["f0", "f1"], max_points=12, max_maps=4095)
    many = line_instance(range(3), [0] * 3, range(4), 4, [1], [0])
    with pytest.raises(OracleCapError, match="centers"):
        brute_force_fmlkc(many)
    wide = line_instance(range(3), [0] * 3, range(30), 2, [1], [0])
    with pytest.raises(OracleCapError, match="center sets"):
        brute_force_fmlkc(wide)
    with pytest.raises(ValueError, match="k exceeds"):
        brute_force_fmlkc(line_instance([0], [0], [0], 2, [1], [0]))


def _naive(inst, centers, objective):
    """Straight-line loop over every map, for cross-checking the vectorized oracle."""
    centers = inst.resolve_centers(centers)
    dist = inst.distances_to(centers)
    best, count = None, 0
    for labels in itertools.product(range(len(centers)), repeat=inst.n):
        labels = np.array(labels, dtype=int)
        a = Assignment.from_labels(inst, centers, labels)
        if not check_fairness(inst, a).fair:
            continue
        loads = np.zeros(len(centers))
        np.add.at(loads, labels, dist[np.arange(inst.n), labels])
        value = loads.max() if objective == "max" else loads.sum()
        if best is None or value < best - 1e-12:
            best, count = value, 1
        elif value <= best + 1e-12:
            count += 1
    return best, count


@pytest.mark.parametrize("seed", range(40))
def test_vectorized_matches_naive(seed):
    inst = small_instance(seed, max_n=6)
    centers = [f.id for f in inst.facilities[: inst.k]]
    for fn, objective in ((brute_force_fair_assignment, "max"), (brute_force_fair_kmedian, "sum")):
        res = fn(inst, centers)
        best, count = _naive(inst, centers, objective)
        if best is None:
            assert not res.feasible
        else:
            assert res.cost == pytest.approx(best) and res.count == count
            assert check_fairness(inst, res.assignment).fair


@pytest.mark.parametrize("seed", range(60))
def test_oracle_bracket(seed):
    inst = small_instance(seed)
    centers = [f.id for f in inst.facilities[: inst.k]]
    load = brute_force_fair_assignment(inst, centers)
    total = brute_force_fair_kmedian(inst, centers)
    assert load.feasible == total.feasible
    if load.feasible:
        k = len(centers)
        assert total.cost / k <= load.cost * (1 + 1e-12) + 1e-12
        assert load.cost <= total.cost * (1 + 1e-12) + 1e-12
