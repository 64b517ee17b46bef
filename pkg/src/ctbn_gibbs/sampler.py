"""Exact Gibbs sampling of CTBN trajectories.

One Gibbs step redraws the whole path of a single component given the
current paths of its Markov blanket. Given the blanket, the component is a
non-homogeneous Markov chain whose dynamics are constant between blanket
transitions; on each such segment the reduced rate matrix

    R[a, b] = Q_i[u_i][a, b]                              (a != b)
    R[a, a] = Q_i[u_i][a, a] + sum_j Q_j[u_j(a)][x_j, x_j]  (j over children)

carries both the component's own dynamics and the likelihood of the
children staying put. A backward pass builds future likelihoods at segment
boundaries; transitions are then drawn forward one at a time by inverting
the conditional CDF of the next jump time.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import kernels
from .model import CTBNModel
from .trajectory import (ComponentTrajectory, Evidence, EvidenceError, JointPack,
                         JointTrajectory, Piece, ZeroProbabilityEvidence, assemble,
                         component_plan)

BISECTION_STEPS = 40


@dataclass
class SegmentTimeline:
    """Segments of a sampling window for one component.

    ``boundaries`` has K+2 entries (window start, K blanket transition
    times, window end). ``blanket_states[k]`` is the joint state vector on
    segment k; only Markov-blanket entries are meaningful. ``scalers[k]``
    applies at ``boundaries[k+1]`` and is all ones unless a child of the
    component jumps there.
    """

    component: int
    boundaries: np.ndarray
    blanket_states: np.ndarray
    reduced: np.ndarray
    scalers: np.ndarray
    boundary_components: np.ndarray

    @property
    def n_segments(self) -> int:
        return self.reduced.shape[0]

    @property
    def window(self) -> tuple[float, float]:
        return float(self.boundaries[0]), float(self.boundaries[-1])


@dataclass
class BackwardMessages:
    """Future likelihoods at the right end of every segment, max-normalised.

    The true vector at the end of segment k is ``vectors[k] * exp(log_scales[k])``
    up to one global constant.
    """

    vectors: np.ndarray
    log_scales: np.ndarray
    start_vector: np.ndarray
    start_log_scale: float


def _state_vector(model: CTBNModel, i: int, v) -> np.ndarray:
    cur = np.zeros(model.M, dtype=np.int64)
    need = model.blankets[i]
    if isinstance(v, Mapping):
        missing = [j for j in need if j not in v]
        for j, x in v.items():
            cur[j] = x
    else:
        v = list(v)
        if len(v) != model.M:
            raise ValueError(f"blanket assignment needs length {model.M}")
        missing = [j for j in need if v[j] is None]
        for j, x in enumerate(v):
            if x is not None:
                cur[j] = x
    if missing:
        raise ValueError(f"blanket assignment for component {i} lacks components {sorted(missing)}")
    return cur


def reduced_rate_matrix(model: CTBNModel, i: int, v) -> np.ndarray:
    """Reduced rate matrix of component i given blanket states ``v``.

    ``v`` is a full-length state sequence (``None`` allowed off the blanket)
    or a mapping component -> state covering the blanket.
    """
    cur = _state_vector(model, i, v)
    mp = model.pack
    d = model.state_sizes[i]
    out = np.empty((d, d))
    kernels.fill_reduced(i, cur, out, mp.sizes, mp.cim_off, mp.cim_flat, mp.par_ptr,
                         mp.par_idx, mp.par_stride, mp.ch_ptr, mp.ch_idx, mp.ch_stride)
    return out


def child_transition_scaler(model: CTBNModel, i: int, j: int, from_state: int,
                            to_state: int, v) -> np.ndarray:
    """Rate of child j jumping from_state -> to_state as a function of X_i."""
    if j not in model.children[i]:
        raise ValueError(f"component {j} is not a child of {i}; its rate does not depend on X_{i}")
    if from_state == to_state:
        raise ValueError("a transition needs distinct states")
    cur = _state_vector(model, i, v)
    mp = model.pack
    q = int(mp.ch_ptr[i]) + model.children[i].index(j)
    out = np.ones(model.state_sizes[i])
    kernels.child_scaler(i, q, from_state, to_state, cur, out, mp.sizes, mp.cim_off,
                         mp.cim_flat, mp.par_ptr, mp.par_idx, mp.par_stride, mp.ch_idx,
                         mp.ch_stride)
    return out


def segment_propagator(R, dt: float) -> np.ndarray:
    """exp(dt R), clamped at zero; row sums stay <= 1 for sub-generators."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    return kernels.propagator(np.ascontiguousarray(R, dtype=np.float64), float(dt))


def build_timeline(i: int, joint: JointTrajectory, window: tuple[float, float],
                   model: CTBNModel) -> SegmentTimeline:
    """Cut ``window`` at the transitions of i's Markov blanket."""
    s0, s1 = map(float, window)
    if not 0.0 <= s0 <= s1 <= joint.T:
        raise ValueError(f"window {window} outside [0, {joint.T}]")
    jp = JointPack.from_joint(joint)
    bounds, R, scal, seg_states, bnd = kernels.build_timeline(
        i, s0, s1, *model.pack.timeline_args(), *jp.args())
    return SegmentTimeline(i, bounds, seg_states, R, scal, bnd)


def backward_pass(timeline: SegmentTimeline, terminal: int | None = None) -> BackwardMessages:
    """Future likelihood messages; ``terminal`` pins the state at the window end."""
    d = timeline.reduced.shape[1]
    if terminal is None:
        end = np.ones(d)
    else:
        end = np.zeros(d)
        end[terminal] = 1.0
    vecs, logs, v0, l0 = kernels.backward_messages(timeline.boundaries, timeline.reduced,
                                                   timeline.scalers, end)
    if not l0 > -np.inf:
        raise ZeroProbabilityEvidence(
            f"component {timeline.component}: evidence on window {timeline.window} "
            "has zero probability given the blanket paths")
    return BackwardMessages(vecs, logs, v0, float(l0))


def survival_cdf_eval(x0: int, t: float, timeline: SegmentTimeline,
                      messages: BackwardMessages, t_from: float | None = None) -> float:
    """F(t): probability that the component, in state x0 at ``t_from``
    (default: window start), has left x0 by time t."""
    if t_from is None:
        t_from = timeline.window[0]
    return float(kernels.cdf_value(x0, float(t_from), float(t), timeline.boundaries,
                                   timeline.reduced, timeline.scalers, messages.vectors,
                                   messages.log_scales))


def _log_future_from(x0, t_from, timeline, messages):
    return kernels.log_future(x0, float(t_from), timeline.boundaries, timeline.reduced,
                              messages.vectors, messages.log_scales)


def _transition_search(xi, x0, timeline, messages, t_from, L):
    k_from = int(kernels.segment_index(timeline.boundaries, t_from))
    lf0 = _log_future_from(x0, t_from, timeline, messages)
    nseg, d = timeline.n_segments, timeline.reduced.shape[1]
    levels = np.empty((nseg, L + 1, d, d))
    ready = np.zeros(nseg, dtype=np.bool_)
    fut = np.empty(d)
    tau, k, lsh = kernels.find_transition(float(xi), int(x0), float(t_from), k_from, lf0,
                                          timeline.boundaries, timeline.reduced, timeline.scalers,
                                          messages.vectors, messages.log_scales, levels, ready,
                                          int(L), fut)
    return tau, k, fut


def sample_transition_time(xi: float, x0: int, timeline: SegmentTimeline,
                           messages: BackwardMessages, t_from: float | None = None,
                           L: int = BISECTION_STEPS) -> float | None:
    """Inverse-CDF draw of the next jump time; ``None`` when F(end) < xi.

    The segment holding the root is found by scanning forward, then located
    by an L-step bisection (time accuracy 2^-L of the segment length).
    """
    if t_from is None:
        t_from = timeline.window[0]
    if xi <= 0.0:
        return float(t_from)
    tau, _, _ = _transition_search(xi, x0, timeline, messages, t_from, L)
    return None if tau < 0 else float(tau)


def next_state_distribution(x_cur: int, tau: float, timeline: SegmentTimeline,
                            messages: BackwardMessages) -> np.ndarray:
    """P(new state = x | jump out of x_cur at tau), proportional to R[x_cur, x] * future_x(tau)."""
    b = timeline.boundaries
    k = int(kernels.segment_index(b, tau))
    fut = segment_propagator(timeline.reduced[k], b[k + 1] - tau) @ messages.vectors[k]
    w = kernels.next_state_weights(int(x_cur), timeline.reduced[k], fut)
    total = w.sum()
    if not total > 0:
        raise ZeroProbabilityEvidence(f"no admissible jump out of state {x_cur} at t={tau}")
    return w / total


def sample_next_state(x_cur: int, tau: float, timeline: SegmentTimeline,
                      messages: BackwardMessages, rng: np.random.Generator) -> int:
    p = next_state_distribution(x_cur, tau, timeline, messages)
    return int(kernels.draw_categorical(p, rng.random()))


# ---------------------------------------------------------------------------
# whole-component and whole-network sampling


def _raise_status(status, i, piece):
    if status != kernels.STATUS_OK:
        raise ZeroProbabilityEvidence(
            f"component {i}: evidence on window [{piece.s}, {piece.t}] has zero probability "
            "given the current blanket paths")


def _resample(model: CTBNModel, i: int, plan: Sequence[Piece], jp: JointPack,
              rng: np.random.Generator, L: int, T: float) -> ComponentTrajectory:
    mp = model.pack
    parts = []
    init_w = model.initial[i]
    for piece in plan:
        if piece.kind == "pin":
            parts.append((piece.s, piece.state, (), ()))
            continue
        first, times, states, status = kernels.resample_window(
            i, piece.s, piece.t, piece.start, piece.end, init_w, rng, L,
            *mp.timeline_args(), *jp.args())
        _raise_status(status, i, piece)
        parts.append((piece.s, first, times, states))
    return assemble(i, T, parts)


def sample_component_trajectory(model: CTBNModel, i: int, joint: JointTrajectory,
                                evidence: Evidence, rng: np.random.Generator,
                                L: int = BISECTION_STEPS) -> ComponentTrajectory:
    """Draw component i's path given the other paths in ``joint`` and its evidence."""
    return _resample(model, i, component_plan(evidence, i), JointPack.from_joint(joint),
                     rng, L, joint.T)


def _homogeneous_window(Q, piece: Piece, init_w, rng, L):
    d = Q.shape[0]
    if piece.end >= 0:
        terminal = np.zeros(d)
        terminal[piece.end] = 1.0
    else:
        terminal = np.ones(d)
    return kernels.sample_window(np.array([piece.s, piece.t]), np.ascontiguousarray(Q[None]),
                                 np.ones((0, d)), terminal, piece.start, init_w, rng, L)


def initialize_trajectory(model: CTBNModel, evidence: Evidence, rng: np.random.Generator,
                          L: int = BISECTION_STEPS) -> JointTrajectory:
    """Over-dispersed start: each component is sampled against its own evidence
    under the rate matrix of a uniformly drawn parent configuration."""
    evidence.validate(model.state_sizes)
    comps = []
    for i in range(model.M):
        plan = component_plan(evidence, i)
        configs = rng.permutation(model.n_parent_configs(i))
        for u in configs:
            Q = model.cims[i][u]
            parts = []
            for piece in plan:
                if piece.kind == "pin":
                    parts.append((piece.s, piece.state, (), ()))
                    continue
                first, times, states, status = _homogeneous_window(Q, piece, model.initial[i],
                                                                   rng, L)
                if status != kernels.STATUS_OK:
                    break
                parts.append((piece.s, first, times, states))
            else:
                comps.append(assemble(i, evidence.T, parts))
                break
        else:
            raise ZeroProbabilityEvidence(f"evidence on component {i} is unsatisfiable "
                                          "under every parent configuration")
    return JointTrajectory(comps, evidence.T)


class GibbsChain:
    """One Markov chain over joint trajectories.

    Owns its RNG and current path; the model and evidence are shared
    read-only, so independent chains can run in separate workers.
    """

    def __init__(self, model: CTBNModel, evidence: Evidence, rng: np.random.Generator,
                 order: str = "systematic", joint: JointTrajectory | None = None,
                 L: int = BISECTION_STEPS):
        if order not in ("systematic", "random"):
            raise ValueError(f"unknown sweep order {order!r}")
        evidence.validate(model.state_sizes)
        self.model = model
        self.evidence = evidence
        self.rng = rng
        self.order = order
        self.L = L
        self.T = evidence.T
        self.plans = [component_plan(evidence, i) for i in range(model.M)]
        if joint is None:
            joint = initialize_trajectory(model, evidence, rng, L)
        elif joint.T != evidence.T or len(joint) != model.M:
            raise ValueError("initial joint trajectory does not match model/evidence")
        self._comps = list(joint.copy().components)
        self.sweeps = 0

    @property
    def joint(self) -> JointTrajectory:
        return JointTrajectory(list(self._comps), self.T)

    def pack(self) -> JointPack:
        return JointPack.from_joint(self.joint)

    def sweep(self) -> None:
        M = self.model.M
        order = range(M) if self.order == "systematic" else self.rng.permutation(M)
        for i in order:
            i = int(i)
            if all(p.kind == "pin" for p in self.plans[i]) and self.sweeps > 0:
                continue
            jp = self.pack()
            self._comps[i] = _resample(self.model, i, self.plans[i], jp, self.rng, self.L, self.T)
        self.sweeps += 1

    def __iter__(self) -> Iterator[JointTrajectory]:
        while True:
            self.sweep()
            yield self.joint


def gibbs_sweep(model: CTBNModel, joint: JointTrajectory, evidence: Evidence,
                rng: np.random.Generator, order: str = "systematic") -> JointTrajectory:
    """Resample every component once; returns a new joint trajectory."""
    chain = GibbsChain(model, evidence, rng, order=order, joint=joint)
    chain.sweep()
    return chain.joint


def run_chain(model: CTBNModel, evidence: Evidence, burn_in: int, n_samples: int,
              thinning: int, rng: np.random.Generator, order: str = "systematic",
              joint: JointTrajectory | None = None) -> list[JointTrajectory]:
    """Initialise, discard ``burn_in`` sweeps, then keep every ``thinning``-th sweep."""
    if burn_in < 0 or n_samples < 0 or thinning < 1:
        raise ValueError("burn_in and n_samples must be >= 0 and thinning >= 1")
    if n_samples == 0:
        return []
    chain = GibbsChain(model, evidence, rng, order=order, joint=joint)
    for _ in range(burn_in):
        chain.sweep()
    out = []
    while len(out) < n_samples:
        for _ in range(thinning):
            chain.sweep()
        out.append(chain.joint)
    return out


def forward_sample(model: CTBNModel, T: float, rng: np.random.Generator,
                   x0: Sequence[int] | None = None) -> JointTrajectory:
    """Generative simulation of the full CTBN on [0, T] (competing exponentials)."""
    M = model.M
    if x0 is None:
        x0 = [int(rng.choice(model.state_sizes[i], p=model.initial[i])) for i in range(M)]
    cur = np.array(x0, dtype=np.int64)
    init = cur.copy()
    events: list[list[tuple[float, int]]] = [[] for _ in range(M)]
    t = 0.0
    while True:
        exits = np.empty(M)
        rows = []
        for i in range(M):
            u = model.parent_config_index(i, [cur[p] for p in model.parents[i]])
            row = model.cims[i][u, cur[i]]
            rows.append(row)
            exits[i] = -row[cur[i]]
        total = exits.sum()
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t >= T:
            break
        i = int(kernels.draw_categorical(exits, rng.random()))
        w = np.clip(rows[i], 0.0, None)
        w[cur[i]] = 0.0
        b = int(kernels.draw_categorical(w, rng.random()))
        cur[i] = b
        events[i].append((t, b))
    comps = [ComponentTrajectory(i, 0.0, T, init[i], [e[0] for e in events[i]],
                                 [e[1] for e in events[i]]) for i in range(M)]
    return JointTrajectory(comps, T)
