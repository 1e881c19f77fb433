import numpy as np
import pytest

from rcasim import assign_targets, plan_trajectories, ula_layout
from rcasim.planner import verify_plan
from rcasim.errors import DomainError, PlanningError
from rcasim.layout import ArrayLayout, random_feasible_xy

from oracles import brute_force_assignment

LAM = 0.04
D_MIN = 0.2 * LAM


def _single(couplers, active=(0.0, 0.0)):
    c = np.asarray(couplers, dtype=float) * LAM
    pts = np.column_stack([c, np.zeros(len(c))])
    return ArrayLayout([[*active, 0.0]], pts, [0] * len(c), LAM, D_MIN)


def test_identity_assignment():
    lay = ula_layout(3, 2, LAM, d_min=D_MIN)
    a, total = assign_targets(lay, lay)
    assert np.array_equal(a, np.arange(6)) and total == 0.0


def test_crossed_pair_swaps():
    init = _single([[-0.5, 0.5], [0.5, 0.5]])
    target = _single([[0.5, 0.6], [-0.5, 0.6]])
    a, total = assign_targets(init, target)
    assert list(a) == [1, 0]
    assert total == pytest.approx(0.2 * LAM, rel=1e-12)


def test_count_mismatch():
    with pytest.raises(DomainError):
        assign_targets(_single([[0.5, 0.5]]), _single([[0.5, 0.5], [-0.5, 0.5]]))


def test_assignment_matches_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        init = _single(rng.uniform(-1, 1, (n, 2)))
        target = _single(rng.uniform(-1, 1, (n, 2)))
        _, total = assign_targets(init, target)
        cost = np.linalg.norm(init.coupler_positions[:, None] - target.coupler_positions[None],
                              axis=-1)
        assert total == pytest.approx(brute_force_assignment(cost)[0], rel=1e-12, abs=1e-15)
        assert total <= np.trace(cost) + 1e-15


def test_assignment_stays_within_rca():
    lay = ula_layout(3, 2, LAM, d_min=D_MIN)
    rng = np.random.default_rng(1)
    target = lay.with_coupler_xy(random_feasible_xy(lay, rng))
    a, _ = assign_targets(lay, target)
    assert np.array_equal(target.coupler_owner[a], lay.coupler_owner)
    assert sorted(a) == list(range(6))


def test_single_coupler_plan():
    init, target = _single([[0.5, 0.0]]), _single([[0.5, 0.8]])
    plan = plan_trajectories([0], init, target, 0.01, LAM)
    assert len(plan.waypoints[0]) == 2
    assert plan.makespan == pytest.approx(0.8 * LAM / 0.01, rel=1e-12)
    assert plan.energy == pytest.approx(0.8 * LAM, rel=1e-12)


def test_parallel_segments_no_delay():
    init = _single([[0.5, -0.5], [-0.5, -0.5]])
    target = _single([[0.5, 0.5], [-0.5, 0.5]])
    plan = plan_trajectories([0, 1], init, target, 0.01, LAM)
    assert np.all(plan.delays == 0)


def test_crossing_segments_delayed_and_verified():
    init = _single([[0.2, 0.6], [0.6, 0.2]])
    target = _single([[1.0, 0.6], [0.6, 1.0]])
    plan = plan_trajectories([0, 1], init, target, 0.01, LAM)
    assert plan.delays[0] == 0 and plan.delays[1] > 0
    assert plan.makespan >= max(np.linalg.norm(target.coupler_positions - init.coupler_positions,
                                               axis=1)) / 0.01
    assert verify_plan(plan, init, LAM / 100) >= D_MIN - 1e-9


def test_unresolvable_conflict():
    # coupler 0 has priority and parks where coupler 1 is waiting
    with pytest.raises(PlanningError):
        plan_trajectories([0, 1], _single([[0.0, 0.5], [0.0, 0.9]]),
                          _single([[0.0, 0.9], [0.0, 0.5]]), 0.01, LAM)


def test_speed_must_be_positive():
    with pytest.raises(DomainError):
        plan_trajectories([0], _single([[0.5, 0]]), _single([[0.5, 0.5]]), 0.0, LAM)


def test_random_plans_pass_dense_verification():
    lay = ula_layout(3, 2, LAM, d_min=D_MIN)
    rng = np.random.default_rng(7)
    emitted = 0
    for _ in range(20):
        a = lay.with_coupler_xy(random_feasible_xy(lay, rng))
        b = lay.with_coupler_xy(random_feasible_xy(lay, rng))
        assignment, total = assign_targets(a, b)
        try:
            plan = plan_trajectories(assignment, a, b, 0.01, LAM)
        except PlanningError:
            continue
        emitted += 1
        assert plan.total_distance == pytest.approx(total, rel=1e-12)
        assert verify_plan(plan, a, LAM / 100) >= D_MIN - 1e-9
        assert np.allclose(plan.positions_at(plan.makespan), b.coupler_positions[assignment])
    assert emitted > 0
