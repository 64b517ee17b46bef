import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ctbn_gibbs.model import CTBNModel
from ctbn_gibbs.sampler import (GibbsChain, backward_pass, build_timeline, child_transition_scaler,
                                forward_sample, gibbs_sweep, initialize_trajectory,
                                next_state_distribution, reduced_rate_matrix, run_chain,
                                sample_component_trajectory, sample_next_state,
                                sample_transition_time, segment_propagator, survival_cdf_eval)
from ctbn_gibbs.stats import accumulate_flat
from ctbn_gibbs.trajectory import (ComponentTrajectory, Evidence, JointTrajectory,
                                   ZeroProbabilityEvidence, consistent_with)
from oracles import (blanket_scenario, fine_grid_x_message, random_model, random_rate_matrix,
                     two_component_model)

Y_TIMES = [0.31, 0.77, 1.18, 1.64]


def chain3(seed=1):
    return random_model(np.random.default_rng(seed), (3, 4, 2), ((), (0,), (1,)))


def scenario_timeline(x0=0, xT=2):
    model, joint, _ = blanket_scenario(x0=x0, xT=xT)
    tl = build_timeline(0, joint, (0.0, joint.T), model)
    return model, joint, tl, backward_pass(tl, xT)


class TestReducedRateMatrix:
    def test_without_children_it_is_the_cim_row_block(self):
        m = chain3()
        for v in [(0, 2, 1), (2, 3, 0)]:
            np.testing.assert_array_equal(reduced_rate_matrix(m, 2, v), m.cims[2][v[1]])

    def test_two_component_diagonal(self):
        # X <-> Y: off-diagonal is X's own rate, diagonal adds Y's stay rate in each x
        m = two_component_model()
        QX, QY = m.cims
        for y in range(3):
            R = reduced_rate_matrix(m, 0, (None, y))
            for a in range(3):
                for b in range(3):
                    want = QX[y][a, b] + (QY[a][y, y] if a == b else 0.0)
                    assert R[a, b] == want

    def test_row_sums_are_the_child_diagonals(self):
        m = chain3()
        R = reduced_rate_matrix(m, 1, {0: 2, 2: 1})
        np.testing.assert_allclose(R.sum(axis=1), [m.cims[2][a][1, 1] for a in range(4)],
                                   atol=1e-13)
        off = R[~np.eye(4, dtype=bool)]
        assert np.all(off >= 0)

    def test_zero_child_diagonal_gives_a_rate_matrix(self):
        Q0 = random_rate_matrix(np.random.default_rng(0), 2)
        child = np.stack([np.array([[0.0, 0.0], [1.0, -1.0]])] * 2)
        m = CTBNModel((2, 2), ((), (0,)), (Q0[None], child), (np.ones(2) / 2,) * 2)
        np.testing.assert_allclose(reduced_rate_matrix(m, 0, (None, 0)).sum(axis=1), 0.0)

    def test_incomplete_blanket(self):
        with pytest.raises(ValueError):
            reduced_rate_matrix(chain3(), 1, {0: 1})
        with pytest.raises(ValueError):
            reduced_rate_matrix(chain3(), 1, (0, None, None))


class TestTimeline:
    def test_four_blanket_jumps_make_five_segments(self):
        model, joint, tl, _ = scenario_timeline()
        assert tl.n_segments == 5
        np.testing.assert_array_equal(tl.boundaries, [0.0] + Y_TIMES + [2.0])
        np.testing.assert_array_equal(tl.blanket_states[:, 1], [0, 1, 2, 0, 1])

    def test_no_blanket_jumps_is_one_segment(self):
        model, joint, _ = blanket_scenario()
        joint = JointTrajectory([joint[0], ComponentTrajectory(1, 0, 2.0, 1, [], [])], 2.0)
        tl = build_timeline(0, joint, (0.0, 2.0), model)
        assert tl.n_segments == 1
        np.testing.assert_array_equal(tl.reduced[0], reduced_rate_matrix(model, 0, (None, 1)))

    def test_union_of_blanket_jumps_ignores_outsiders(self):
        m = random_model(np.random.default_rng(0), (2, 2, 2, 2), ((), (0,), (1,), (2,)))
        T = 1.0
        comps = [ComponentTrajectory(0, 0, T, 0, [0.5, 0.9], [1, 0]),
                 ComponentTrajectory(1, 0, T, 0, [0.3], [1]),
                 ComponentTrajectory(2, 0, T, 0, [0.1, 0.7], [1, 0]),
                 ComponentTrajectory(3, 0, T, 0, [0.2, 0.4, 0.6], [1, 0, 1])]
        tl = build_timeline(1, JointTrajectory(comps, T), (0.0, T), m)
        np.testing.assert_array_equal(tl.boundaries, [0.0, 0.1, 0.5, 0.7, 0.9, 1.0])

    def test_window_restricts_segments(self):
        model, joint, _ = blanket_scenario()
        tl = build_timeline(0, joint, (0.5, 1.5), model)
        np.testing.assert_array_equal(tl.boundaries, [0.5, 0.77, 1.18, 1.5])
        np.testing.assert_array_equal(tl.blanket_states[:, 1], [1, 2, 0])

    def test_scalers_are_child_jump_rates(self):
        model, joint, tl, _ = scenario_timeline()
        QY = model.cims[1]
        ys = [0, 1, 2, 0, 1]
        for k in range(4):
            want = [QY[a][ys[k], ys[k + 1]] for a in range(3)]
            np.testing.assert_allclose(tl.scalers[k], want, rtol=1e-15)


class TestChildScaler:
    def test_matches_the_child_rate(self):
        m = two_component_model()
        s = child_transition_scaler(m, 0, 1, 0, 2, (None, 0))
        np.testing.assert_array_equal(s, [m.cims[1][a][0, 2] for a in range(3)])
        assert np.all(s >= 0)

    def test_constant_when_child_ignores_the_parent(self):
        Q1 = random_rate_matrix(np.random.default_rng(1), 3)
        m = CTBNModel((2, 3), ((), (0,)), (random_rate_matrix(np.random.default_rng(0), 2)[None],
                                           np.stack([Q1, Q1])), (np.ones(2) / 2, np.ones(3) / 3))
        s = child_transition_scaler(m, 0, 1, 2, 1, (None, 2))
        assert s[0] == s[1] == Q1[2, 1]

    def test_non_child_and_self_loop(self):
        m = chain3()
        with pytest.raises(ValueError):
            child_transition_scaler(m, 0, 2, 0, 1, (0, 0, 0))
        with pytest.raises(ValueError):
            child_transition_scaler(m, 0, 1, 1, 1, (0, 0, 0))


class TestSegmentPropagator:
    def test_zero_length(self):
        R = random_rate_matrix(np.random.default_rng(0), 4)
        np.testing.assert_array_equal(segment_propagator(R, 0.0), np.eye(4))

    def test_rate_matrix_is_stochastic(self):
        R = random_rate_matrix(np.random.default_rng(0), 4)
        np.testing.assert_allclose(segment_propagator(R, 0.8).sum(axis=1), 1.0, atol=1e-12)

    def test_sub_generator_loses_mass(self):
        _, _, tl, _ = scenario_timeline()
        for R in tl.reduced:
            S = segment_propagator(R, 0.4)
            assert np.all(S >= 0) and np.all(S.sum(axis=1) < 1.0)
            np.testing.assert_allclose(S, scipy.linalg.expm(0.4 * R), rtol=1e-12, atol=1e-15)


class TestBackwardPass:
    def test_single_segment_is_the_pinned_column(self):
        model, joint, _ = blanket_scenario()
        joint = JointTrajectory([joint[0], ComponentTrajectory(1, 0, 2.0, 1, [], [])], 2.0)
        tl = build_timeline(0, joint, (0.0, 2.0), model)
        msg = backward_pass(tl, 2)
        col = scipy.linalg.expm(2.0 * tl.reduced[0])[:, 2]
        np.testing.assert_allclose(msg.start_vector / msg.start_vector.max(), col / col.max(),
                                   rtol=1e-12)

    def test_free_end_is_all_ones(self):
        _, _, tl, _ = scenario_timeline()
        msg = backward_pass(tl, None)
        np.testing.assert_array_equal(msg.vectors[-1], np.ones(3))

    def test_matches_fine_grid_joint_chain(self):
        model, joint, tl, msg = scenario_timeline()
        ref = fine_grid_x_message(model, joint, 0, 2, 1e-5)
        got = msg.start_vector / msg.start_vector.max()
        np.testing.assert_allclose(got, ref, rtol=1e-3)

    def test_scales_recover_the_unnormalised_product(self):
        model, joint, tl, msg = scenario_timeline()
        v = np.zeros(3)
        v[2] = 1.0
        for k in range(tl.n_segments - 1, -1, -1):
            if k < tl.n_segments - 1:
                v = tl.scalers[k] * v
            v = scipy.linalg.expm((tl.boundaries[k + 1] - tl.boundaries[k]) * tl.reduced[k]) @ v
        np.testing.assert_allclose(msg.start_vector * np.exp(msg.start_log_scale), v, rtol=1e-10)

    def test_impossible_child_jump_raises(self):
        # the child's 0 -> 1 rate is zero whatever the parent does
        Q0 = random_rate_matrix(np.random.default_rng(0), 2)
        child = np.stack([np.array([[-1.0, 0.0, 1.0], [1.0, -1.0, 0.0], [0.5, 0.5, -1.0]])] * 2)
        m = CTBNModel((2, 3), ((), (0,)), (Q0[None], child), (np.ones(2) / 2, np.ones(3) / 3))
        joint = JointTrajectory([ComponentTrajectory(0, 0, 1.0, 0, [], []),
                                 ComponentTrajectory(1, 0, 1.0, 0, [0.5], [1])], 1.0)
        tl = build_timeline(0, joint, (0.0, 1.0), m)
        with pytest.raises(ZeroProbabilityEvidence):
            backward_pass(tl)


class TestSurvivalCdf:
    def test_zero_at_start(self):
        _, _, tl, msg = scenario_timeline()
        assert survival_cdf_eval(0, 0.0, tl, msg) == 0.0

    def test_forced_exit_reaches_one(self):
        _, _, tl, msg = scenario_timeline(0, 2)
        assert survival_cdf_eval(0, 2.0, tl, msg) == pytest.approx(1.0, abs=1e-9)

    def test_equal_endpoints_may_stay(self):
        _, _, tl, msg = scenario_timeline(1, 1)
        assert survival_cdf_eval(1, 2.0, tl, msg) < 1.0

    def test_matches_direct_formula(self):
        _, _, tl, msg = scenario_timeline(1, 1)
        b, R = tl.boundaries, tl.reduced

        def future(t):
            k = np.searchsorted(b, t, side="right") - 1
            k = min(k, len(R) - 1)
            v = np.zeros(3)
            v[1] = 1.0
            for j in range(len(R) - 1, k, -1):
                v = scipy.linalg.expm((b[j + 1] - b[j]) * R[j]) @ v
                v = tl.scalers[j - 1] * v
            return scipy.linalg.expm((b[k + 1] - t) * R[k]) @ v

        def stay(t):
            k = np.searchsorted(b, t, side="right") - 1
            out = 1.0
            for j in range(k):
                out *= np.exp(R[j][1, 1] * (b[j + 1] - b[j])) * tl.scalers[j][1]
            return out * np.exp(R[k][1, 1] * (t - b[k]))

        f0 = future(0.0)[1]
        for t in (0.2, 0.5, 1.0, 1.7):
            want = 1.0 - stay(t) * future(t)[1] / f0
            assert survival_cdf_eval(1, t, tl, msg) == pytest.approx(want, rel=1e-9, abs=1e-12)

    def test_monotone(self):
        _, _, tl, msg = scenario_timeline(0, 0)
        ts = np.linspace(0, 2.0, 401)
        F = [survival_cdf_eval(0, t, tl, msg) for t in ts]
        assert np.all(np.diff(F) >= -1e-14)
        assert 0.0 <= min(F) and max(F) <= 1.0 + 1e-12


class TestTransitionTime:
    def test_zero_draw_is_the_start(self):
        _, _, tl, msg = scenario_timeline()
        assert sample_transition_time(0.0, 0, tl, msg) == 0.0
        assert sample_transition_time(0.0, 0, tl, msg, t_from=0.5) == 0.5

    def test_no_jump_above_the_end_value(self):
        _, _, tl, msg = scenario_timeline(1, 1)
        FT = survival_cdf_eval(1, 2.0, tl, msg)
        assert sample_transition_time(FT + (1 - FT) / 2, 1, tl, msg) is None

    def test_inverts_the_cdf(self):
        _, _, tl, msg = scenario_timeline()
        for xi in (1e-6, 0.1, 0.5, 0.9, 0.999999):
            tau = sample_transition_time(xi, 0, tl, msg)
            assert survival_cdf_eval(0, tau, tl, msg) == pytest.approx(xi, abs=1e-9)

    def test_bisection_resolution(self):
        _, _, tl, msg = scenario_timeline()
        coarse = sample_transition_time(0.4, 0, tl, msg, L=8)
        fine = sample_transition_time(0.4, 0, tl, msg, L=40)
        seg = np.diff(tl.boundaries).max()
        assert abs(coarse - fine) <= seg * 2.0 ** -8

    def test_monotone_in_the_draw(self):
        _, _, tl, msg = scenario_timeline()
        taus = [sample_transition_time(xi, 0, tl, msg) for xi in np.linspace(0.01, 0.99, 50)]
        assert np.all(np.diff(taus) >= 0)

    def test_from_an_interior_time(self):
        _, _, tl, msg = scenario_timeline()
        tau = sample_transition_time(0.3, 1, tl, msg, t_from=1.0)
        assert tau is None or tau > 1.0
        if tau is not None:
            assert survival_cdf_eval(1, tau, tl, msg, t_from=1.0) == pytest.approx(0.3, abs=1e-9)


class TestNextState:
    def test_matches_direct_formula(self):
        _, _, tl, msg = scenario_timeline()
        tau = 0.9
        k = 2
        fut = scipy.linalg.expm((tl.boundaries[k + 1] - tau) * tl.reduced[k]) @ msg.vectors[k]
        w = tl.reduced[k][0] * fut
        w[0] = 0.0
        np.testing.assert_allclose(next_state_distribution(0, tau, tl, msg), w / w.sum(),
                                   rtol=1e-12, atol=1e-15)

    def test_two_states_always_flip(self):
        m = random_model(np.random.default_rng(0), (2, 2), ((1,), (0,)))
        joint = JointTrajectory([ComponentTrajectory(0, 0, 1.0, 0, [], []),
                                 ComponentTrajectory(1, 0, 1.0, 1, [0.4], [0])], 1.0)
        tl = build_timeline(0, joint, (0.0, 1.0), m)
        msg = backward_pass(tl)
        rng = np.random.default_rng(0)
        np.testing.assert_array_equal(next_state_distribution(1, 0.6, tl, msg), [1.0, 0.0])
        assert all(sample_next_state(0, t, tl, msg, rng) == 1 for t in (0.1, 0.5, 0.9))


class TestComponentSampling:
    def test_observed_component_is_returned_verbatim(self):
        model, joint, ev = blanket_scenario()
        y = sample_component_trajectory(model, 1, joint, ev, np.random.default_rng(0))
        assert y == joint[1]

    def test_endpoints_and_structure(self):
        model, joint, ev = blanket_scenario()
        rng = np.random.default_rng(1)
        for _ in range(200):
            x = sample_component_trajectory(model, 0, joint, ev, rng)
            x.check(3)
            assert x.initial_state == 0 and x.state_at(2.0) == 2
            assert not set(x.times) & set(Y_TIMES)

    def test_pinned_interval_is_respected(self):
        model, joint, ev = blanket_scenario()
        ev.add_interval(0, 0.5, 1.2, 1)
        rng = np.random.default_rng(2)
        for _ in range(50):
            x = sample_component_trajectory(model, 0, joint, ev, rng)
            assert all(x.state_at(t) == 1 for t in np.linspace(0.5, 1.2, 30))
            assert x.state_at(2.0) == 2

    def test_impossible_evidence_raises(self):
        Q = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0]])
        m = CTBNModel((3,), ((),), (Q[None],), (np.ones(3) / 3,))
        ev = Evidence(1.0).add_point(0, 0.0, 2).add_point(0, 1.0, 0)
        joint = JointTrajectory([ComponentTrajectory(0, 0, 1.0, 2, [], [])], 1.0)
        with pytest.raises(ZeroProbabilityEvidence):
            sample_component_trajectory(m, 0, joint, ev, np.random.default_rng(0))


@st.composite
def fixtures(draw):
    """Random two-component model, blanket path and X endpoints."""
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    d = draw(st.integers(2, 4))
    m = random_model(rng, (d, 3), ((1,), (0,)), lo=0.1, hi=3.0)
    T = draw(st.floats(0.2, 3.0))
    n = draw(st.integers(0, 6))
    times = np.sort(rng.uniform(0, T, n))
    ys, y = [], 0
    for _ in range(n):
        y = (y + 1 + int(rng.integers(2))) % 3
        ys.append(y)
    yt = ComponentTrajectory(1, 0.0, T, 0, list(times), ys)
    x0, xT = int(rng.integers(d)), int(rng.integers(d))
    joint = JointTrajectory([ComponentTrajectory(0, 0.0, T, x0, [], []), yt], T)
    return m, joint, x0, xT


@settings(max_examples=40, deadline=None)
@given(fixtures())
def test_cdf_properties(fx):
    m, joint, x0, xT = fx
    tl = build_timeline(0, joint, (0.0, joint.T), m)
    msg = backward_pass(tl, xT)
    ts = np.linspace(0.0, joint.T, 60)
    F = np.array([survival_cdf_eval(x0, t, tl, msg) for t in ts])
    assert F[0] == 0.0
    assert np.all(np.diff(F) >= -1e-12)
    assert F.min() >= 0.0 and F.max() <= 1.0 + 1e-9
    if x0 != xT:
        assert F[-1] == pytest.approx(1.0, abs=1e-9)
    else:
        assert F[-1] < 1.0


@settings(max_examples=25, deadline=None)
@given(fixtures(), st.sampled_from([-5.0, 1.0, 10.0]))
def test_shifting_the_diagonal_changes_nothing(fx, c):
    m, joint, x0, xT = fx
    tl = build_timeline(0, joint, (0.0, joint.T), m)
    msg = backward_pass(tl, xT)
    d = tl.reduced.shape[1]
    tl2 = build_timeline(0, joint, (0.0, joint.T), m)
    tl2.reduced = tl.reduced + c * np.eye(d)[None]
    msg2 = backward_pass(tl2, xT)
    for t in np.linspace(0.0, joint.T, 13):
        assert survival_cdf_eval(x0, t, tl2, msg2) == pytest.approx(
            survival_cdf_eval(x0, t, tl, msg), abs=1e-9)
        if t < joint.T:
            np.testing.assert_allclose(next_state_distribution(x0, t, tl2, msg2),
                                       next_state_distribution(x0, t, tl, msg), atol=1e-9)


class TestInitialization:
    def test_without_evidence(self):
        m = chain3()
        joint = initialize_trajectory(m, Evidence(2.0), np.random.default_rng(0))
        joint.check(m.state_sizes)
        assert joint.T == 2.0 and len(joint) == 3

    def test_evidence_is_honoured(self):
        m = chain3()
        ev = Evidence(2.0).add_point(0, 0.0, 1).add_point(1, 2.0, 3).add_interval(2, 0.5, 1.0, 1)
        for seed in range(20):
            joint = initialize_trajectory(m, ev, np.random.default_rng(seed))
            assert consistent_with(joint, ev)

    def test_seeds_differ(self):
        m = chain3()
        a = initialize_trajectory(m, Evidence(3.0), np.random.default_rng(0))
        b = initialize_trajectory(m, Evidence(3.0), np.random.default_rng(1))
        assert a != b

    def test_retries_other_parent_configurations(self):
        # only parent state 1 lets X reach state 1
        Q0 = random_rate_matrix(np.random.default_rng(0), 2)
        stuck = np.array([[0.0, 0.0], [1.0, -1.0]])
        free = np.array([[-1.0, 1.0], [1.0, -1.0]])
        m = CTBNModel((2, 2), ((), (0,)), (Q0[None], np.stack([stuck, free])),
                      (np.ones(2) / 2,) * 2)
        ev = Evidence(1.0).add_point(1, 0.0, 0).add_point(1, 1.0, 1)
        for seed in range(10):
            joint = initialize_trajectory(m, ev, np.random.default_rng(seed))
            assert consistent_with(joint, ev)


class TestChain:
    def test_no_samples(self):
        assert run_chain(chain3(), Evidence(1.0), 5, 0, 1, np.random.default_rng(0)) == []

    def test_consecutive_sweeps(self):
        m, ev = chain3(), Evidence(1.0).add_point(0, 1.0, 2)
        out = run_chain(m, ev, 0, 4, 1, np.random.default_rng(3))
        chain = GibbsChain(m, ev, np.random.default_rng(3))
        for want in out:
            chain.sweep()
            assert chain.joint == want

    def test_thinning_skips_sweeps(self):
        m, ev = chain3(), Evidence(1.0)
        out = run_chain(m, ev, 2, 3, 3, np.random.default_rng(5))
        chain = GibbsChain(m, ev, np.random.default_rng(5))
        sweeps = [None] + [chain.sweep() or chain.joint for _ in range(11)]
        assert out == [sweeps[5], sweeps[8], sweeps[11]]

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            run_chain(chain3(), Evidence(1.0), -1, 1, 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            run_chain(chain3(), Evidence(1.0), 0, 1, 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            GibbsChain(chain3(), Evidence(1.0), np.random.default_rng(0), order="zigzag")

    def test_fully_observed_sweep_is_identity(self):
        m = chain3()
        joint = forward_sample(m, 2.0, np.random.default_rng(0))
        ev = Evidence(2.0)
        for c in joint.components:
            ev.add_trajectory(c)
        assert gibbs_sweep(m, joint, ev, np.random.default_rng(1)) == joint

    def test_single_component_network(self):
        Q = random_rate_matrix(np.random.default_rng(0), 3)
        m = CTBNModel((3,), ((),), (Q[None],), (np.ones(3) / 3,))
        ev = Evidence(1.0).add_point(0, 0.0, 0).add_point(0, 1.0, 2)
        out = run_chain(m, ev, 3, 5, 1, np.random.default_rng(0))
        assert all(consistent_with(j, ev) for j in out)

    @pytest.mark.parametrize("order", ["systematic", "random"])
    def test_every_sample_satisfies_evidence(self, order):
        m = chain3()
        ev = (Evidence(2.0).add_point(0, 0.0, 0).add_point(2, 2.0, 1)
              .add_point(1, 1.0, 3).add_interval(0, 1.2, 1.6, 2))
        for j in run_chain(m, ev, 5, 30, 1, np.random.default_rng(0), order=order):
            j.check(m.state_sizes)
            assert consistent_with(j, ev)

    def test_random_order_visits_components_in_varying_order(self):
        m = chain3()
        ev = Evidence(1.0)
        a = run_chain(m, ev, 0, 3, 1, np.random.default_rng(4), order="random")
        b = run_chain(m, ev, 0, 3, 1, np.random.default_rng(4), order="systematic")
        assert a != b

    def test_stationarity(self):
        # chains already at stationarity: statistics before and after 100 extra sweeps agree
        m = two_component_model(seed=3)
        ev = Evidence(1.5).add_point(0, 0.0, 0).add_point(0, 1.5, 2)
        n_chains = 150
        before, after = [], []
        for c in range(n_chains):
            chain = GibbsChain(m, ev, np.random.default_rng([11, c]))
            for _ in range(40):
                chain.sweep()
            before.append(np.concatenate(accumulate_flat(m, chain.joint)))
            for _ in range(100):
                chain.sweep()
            after.append(np.concatenate(accumulate_flat(m, chain.joint)))
        before, after = np.array(before), np.array(after)
        se = np.sqrt((before.var(axis=0, ddof=1) + after.var(axis=0, ddof=1)) / n_chains)
        diff = np.abs(before.mean(axis=0) - after.mean(axis=0))
        live = se > 0
        assert np.all(diff[live] <= 4.5 * se[live])
        assert np.all(diff[~live] == 0)


class TestForwardSample:
    def test_structure(self):
        m = chain3()
        j = forward_sample(m, 5.0, np.random.default_rng(0))
        j.check(m.state_sizes)
        assert sum(c.n_transitions for c in j.components) > 0

    def test_fixed_start(self):
        j = forward_sample(chain3(), 1.0, np.random.default_rng(0), x0=(2, 3, 1))
        assert j.state_at(0.0) == (2, 3, 1)

    def test_absorbing_state_stops(self):
        Q = np.array([[-1.0, 1.0], [0.0, 0.0]])
        m = CTBNModel((2,), ((),), (Q[None],), (np.array([1.0, 0.0]),))
        j = forward_sample(m, 100.0, np.random.default_rng(0))
        assert j[0].n_transitions == 1 and j.state_at(100.0) == (1,)
