import numpy as np
import pytest

from ctbn_gibbs.trajectory import (ComponentTrajectory, Evidence, EvidenceError, JointTrajectory,
                                   assemble, component_plan, consistent_with, load_evidence,
                                   read_trajectories_csv, write_trajectories_csv)


def path(i=0, T=2.0, x0=0, times=(), states=()):
    return ComponentTrajectory(i, 0.0, T, x0, list(times), list(states))


class TestComponentTrajectory:
    def test_state_at_is_right_continuous(self):
        c = path(times=[0.5, 1.0], states=[2, 1])
        assert [c.state_at(t) for t in (0.0, 0.49, 0.5, 0.99, 1.0, 2.0)] == [0, 0, 2, 2, 1, 1]

    def test_check_rejects_bad_paths(self):
        for bad in (path(times=[1.0, 0.5], states=[1, 0]), path(times=[0.5], states=[0]),
                    path(times=[2.5], states=[1]), path(times=[0.0], states=[1])):
            with pytest.raises(ValueError):
                bad.check(3)
        with pytest.raises(ValueError):
            path(x0=4).check(3)

    def test_equality_and_copy(self):
        j = JointTrajectory([path(0, times=[0.3], states=[1]), path(1)], 2.0)
        k = j.copy()
        assert j == k
        assert j != JointTrajectory([path(0, times=[0.3], states=[2]), path(1)], 2.0)
        assert j.state_at(1.0) == (1, 0)


class TestEvidence:
    def test_validation(self):
        with pytest.raises(EvidenceError):
            Evidence(1.0).add_point(0, 1.5, 0).validate()
        with pytest.raises(EvidenceError):
            Evidence(1.0).add_point(0, 0.5, 3).validate([3])
        with pytest.raises(EvidenceError):
            Evidence(1.0).add_interval(0, 0.2, 0.6, 0).add_interval(0, 0.5, 0.9, 1).validate()
        with pytest.raises(EvidenceError):
            Evidence(1.0).add_interval(0, 0.2, 0.6, 0).add_point(0, 0.4, 1).validate()
        with pytest.raises(EvidenceError):
            Evidence(1.0).add_point(0, 0.4, 0).add_point(0, 0.4, 1).validate()
        with pytest.raises(EvidenceError):
            Evidence(1.0).add_point(2, 0.4, 0).validate([2, 2])
        with pytest.raises(EvidenceError):
            Evidence(0.0).validate()

    def test_touching_intervals_are_allowed(self):
        Evidence(1.0).add_interval(0, 0.0, 0.5, 0).add_interval(0, 0.5, 1.0, 1).validate([2])

    def test_json_round_trip(self, tmp_path):
        ev = Evidence(2.0).add_point(1, 0.5, 2).add_interval(0, 0.1, 0.4, 1)
        p = tmp_path / "ev.json"
        import json
        p.write_text(json.dumps(ev.to_dict()))
        back = load_evidence(p)
        assert back.to_dict() == ev.to_dict()
        assert load_evidence(p, T=3.0).T == 3.0


class TestPlan:
    def test_no_evidence_is_one_free_window(self):
        [p] = component_plan(Evidence(2.0), 0)
        assert (p.kind, p.s, p.t, p.start, p.end) == ("free", 0.0, 2.0, -1, -1)

    def test_points_cut_windows(self):
        ev = Evidence(2.0).add_point(0, 0.0, 1).add_point(0, 0.7, 2).add_point(0, 2.0, 0)
        plan = component_plan(ev, 0)
        assert [(p.s, p.t, p.start, p.end) for p in plan] == [(0.0, 0.7, 1, 2), (0.7, 2.0, 2, 0)]

    def test_intervals_pin_and_bound_windows(self):
        ev = Evidence(2.0).add_interval(0, 0.5, 1.0, 1).add_point(0, 1.5, 2)
        plan = component_plan(ev, 0)
        assert [(p.kind, p.s, p.t) for p in plan] == [
            ("free", 0.0, 0.5), ("pin", 0.5, 1.0), ("free", 1.0, 1.5), ("free", 1.5, 2.0)]
        assert plan[0].end == 1 and plan[2].start == 1 and plan[2].end == 2

    def test_degenerate_interval_is_a_point(self):
        plan = component_plan(Evidence(2.0).add_interval(0, 1.0, 1.0, 1), 0)
        assert [(p.s, p.t, p.end) for p in plan] == [(0.0, 1.0, 1), (1.0, 2.0, -1)]

    def test_point_at_interval_edge_must_match(self):
        ev = Evidence(2.0).add_interval(0, 0.5, 1.0, 1).add_point(0, 1.0, 2)
        with pytest.raises(EvidenceError):
            component_plan(ev, 0)


class TestAssemble:
    def test_joins_parts_and_forced_jumps(self):
        c = assemble(0, 2.0, [(0.0, 0, np.array([0.2]), np.array([1])),
                              (0.5, 2, (), ()),
                              (1.0, 2, np.array([1.5]), np.array([0]))])
        assert c.initial_state == 0
        np.testing.assert_array_equal(c.times, [0.2, 0.5, 1.5])
        np.testing.assert_array_equal(c.states, [1, 2, 0])


def test_consistency_check():
    ev = Evidence(2.0).add_point(0, 1.0, 1).add_interval(0, 1.2, 1.8, 2)
    assert consistent_with(JointTrajectory([path(times=[1.0, 1.1], states=[1, 2])], 2.0), ev)
    # a jump exactly at the observation time may satisfy it from the left
    assert consistent_with(JointTrajectory([path(times=[0.5, 1.0], states=[1, 2])], 2.0), ev)
    assert not consistent_with(JointTrajectory([path(times=[0.5, 1.5], states=[1, 2])], 2.0), ev)


def test_trajectory_csv_round_trip(tmp_path):
    a = JointTrajectory([path(0, times=[0.1, 1.0 / 3.0], states=[1, 2]), path(1, x0=1)], 2.0)
    b = JointTrajectory([path(0, x0=2), path(1, times=[np.pi / 2], states=[0])], 2.0)
    p = tmp_path / "t.csv"
    write_trajectories_csv(p, [(0, 0, a), (1, 3, b)], 2.0, seed=7)
    assert p.read_text().splitlines()[0] == "# T=2.0,seed=7"
    T, got = read_trajectories_csv(p)
    assert T == 2.0 and got == {(0, 0): a, (1, 3): b}
