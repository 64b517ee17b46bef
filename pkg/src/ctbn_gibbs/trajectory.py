"""Piecewise-constant sample paths and evidence."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class EvidenceError(ValueError):
    """Evidence is malformed or self-contradictory."""


class ZeroProbabilityEvidence(RuntimeError):
    """The evidence has probability zero given the model (and blanket paths)."""


@dataclass(eq=False)
class ComponentTrajectory:
    """One component's path on [t_start, t_end].

    ``times[k]`` is the k-th transition time and ``states[k]`` the state
    entered there; the state before the first transition is ``initial_state``.
    """

    component: int
    t_start: float
    t_end: float
    initial_state: int
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    states: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.int64)
        self.initial_state = int(self.initial_state)

    @property
    def transitions(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.states.tolist()))

    @property
    def n_transitions(self) -> int:
        return int(self.times.shape[0])

    def state_at(self, t: float) -> int:
        """Right-continuous state at time t."""
        k = int(np.searchsorted(self.times, t, side="right"))
        return self.initial_state if k == 0 else int(self.states[k - 1])

    def check(self, d: int | None = None) -> None:
        t, s = self.times, self.states
        if t.shape != s.shape:
            raise ValueError("times and states differ in length")
        if t.size:
            if np.any(np.diff(t) <= 0):
                raise ValueError("transition times must be strictly increasing")
            if t[0] <= self.t_start or t[-1] >= self.t_end:
                raise ValueError("transition times must lie inside (t_start, t_end)")
            full = np.concatenate([[self.initial_state], s])
            if np.any(full[1:] == full[:-1]):
                raise ValueError("consecutive states must differ")
        if d is not None:
            full = np.concatenate([[self.initial_state], s])
            if np.any(full < 0) or np.any(full >= d):
                raise ValueError("state index out of range")

    def __eq__(self, other):
        if not isinstance(other, ComponentTrajectory):
            return NotImplemented
        return (self.component == other.component and self.t_start == other.t_start
                and self.t_end == other.t_end and self.initial_state == other.initial_state
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.states, other.states))


@dataclass(eq=False)
class JointTrajectory:
    components: list[ComponentTrajectory]
    T: float

    def __post_init__(self):
        for c in self.components:
            if c.t_start != 0.0 or c.t_end != self.T:
                raise ValueError("component trajectories must share bounds [0, T]")

    def __getitem__(self, i) -> ComponentTrajectory:
        return self.components[i]

    def __len__(self):
        return len(self.components)

    def state_at(self, t: float) -> tuple[int, ...]:
        return tuple(c.state_at(t) for c in self.components)

    def check(self, sizes: Sequence[int] | None = None) -> None:
        for k, c in enumerate(self.components):
            c.check(None if sizes is None else sizes[k])

    def __eq__(self, other):
        if not isinstance(other, JointTrajectory):
            return NotImplemented
        return self.T == other.T and all(a == b for a, b in zip(self.components, other.components)) \
            and len(self) == len(other)

    def copy(self) -> "JointTrajectory":
        return JointTrajectory([ComponentTrajectory(c.component, c.t_start, c.t_end,
                                                    c.initial_state, c.times.copy(), c.states.copy())
                                for c in self.components], self.T)


@dataclass(frozen=True)
class JointPack:
    """Flat arrays for a joint trajectory (see ``kernels`` module docstring)."""

    tr_ptr: np.ndarray
    tr_times: np.ndarray
    tr_states: np.ndarray
    init: np.ndarray

    @classmethod
    def from_joint(cls, joint: JointTrajectory) -> "JointPack":
        counts = [c.n_transitions for c in joint.components]
        ptr = np.zeros(len(counts) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(counts)
        times = np.concatenate([c.times for c in joint.components]) if counts else np.zeros(0)
        states = (np.concatenate([c.states for c in joint.components]).astype(np.int64)
                  if counts else np.zeros(0, dtype=np.int64))
        init = np.array([c.initial_state for c in joint.components], dtype=np.int64)
        return cls(ptr, np.ascontiguousarray(times, dtype=np.float64), states, init)

    def args(self):
        return self.tr_ptr, self.tr_times, self.tr_states, self.init


# ---------------------------------------------------------------------------
# evidence


@dataclass
class Evidence:
    """Point observations ``(time, state)`` and closed interval observations
    ``(start, end, state)`` per component, on the horizon [0, T]."""

    T: float
    points: dict[int, list[tuple[float, int]]] = field(default_factory=dict)
    intervals: dict[int, list[tuple[float, float, int]]] = field(default_factory=dict)

    def add_point(self, i: int, t: float, state: int) -> "Evidence":
        self.points.setdefault(int(i), []).append((float(t), int(state)))
        return self

    def add_interval(self, i: int, s: float, t: float, state: int) -> "Evidence":
        self.intervals.setdefault(int(i), []).append((float(s), float(t), int(state)))
        return self

    def add_trajectory(self, traj: ComponentTrajectory) -> "Evidence":
        """Observe a whole component path as consecutive intervals."""
        edges = np.concatenate([[traj.t_start], traj.times, [traj.t_end]])
        full = np.concatenate([[traj.initial_state], traj.states])
        for s, t, x in zip(edges[:-1], edges[1:], full):
            self.add_interval(traj.component, float(s), float(t), int(x))
        return self

    def points_of(self, i):
        return sorted(self.points.get(i, []))

    def intervals_of(self, i):
        return sorted(self.intervals.get(i, []))

    def validate(self, sizes: Sequence[int] | None = None) -> None:
        if not self.T > 0:
            raise EvidenceError("horizon T must be positive")
        comps = set(self.points) | set(self.intervals)
        for i in comps:
            if sizes is not None and not 0 <= i < len(sizes):
                raise EvidenceError(f"evidence on unknown component {i}")
            d = None if sizes is None else sizes[i]
            for t, x in self.points_of(i):
                if not 0 <= t <= self.T:
                    raise EvidenceError(f"point observation at {t} outside [0, {self.T}]")
                if d is not None and not 0 <= x < d:
                    raise EvidenceError(f"state {x} out of range for component {i}")
            ivs = self.intervals_of(i)
            for s, t, x in ivs:
                if not 0 <= s <= t <= self.T:
                    raise EvidenceError(f"interval ({s}, {t}) outside [0, {self.T}]")
                if d is not None and not 0 <= x < d:
                    raise EvidenceError(f"state {x} out of range for component {i}")
            for (s0, t0, _), (s1, _, _) in zip(ivs, ivs[1:]):
                if s1 < t0:
                    raise EvidenceError(f"overlapping intervals on component {i}")
            for t, x in self.points_of(i):
                for s, e, y in ivs:
                    if s < t < e and x != y:
                        raise EvidenceError(f"point ({t}, {x}) contradicts interval ({s}, {e}, {y})")
            seen = {}
            for t, x in self.points_of(i):
                if seen.setdefault(t, x) != x:
                    raise EvidenceError(f"conflicting point observations at {t} on component {i}")

    def observed_state(self, i: int, t: float) -> int | None:
        """State pinned at time t by the evidence, if any."""
        for s, u in self.points_of(i):
            if s == t:
                return u
        for s, e, x in self.intervals_of(i):
            if s <= t <= e:
                return x
        return None

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "points": [{"component": i, "time": t, "state": x}
                       for i in sorted(self.points) for t, x in self.points_of(i)],
            "intervals": [{"component": i, "start": s, "end": e, "state": x}
                          for i in sorted(self.intervals) for s, e, x in self.intervals_of(i)],
        }

    @classmethod
    def from_dict(cls, doc: dict, T: float | None = None) -> "Evidence":
        horizon = T if T is not None else doc.get("T")
        if horizon is None:
            raise EvidenceError("evidence needs a horizon T")
        ev = cls(float(horizon))
        for p in doc.get("points", []):
            ev.add_point(p["component"], p["time"], p["state"])
        for p in doc.get("intervals", []):
            ev.add_interval(p["component"], p["start"], p["end"], p["state"])
        return ev


def load_evidence(path, T: float | None = None) -> Evidence:
    with open(path) as fh:
        return Evidence.from_dict(json.load(fh), T)


@dataclass(frozen=True)
class Piece:
    """Part of [0, T] for one component: pinned to ``state`` or free to sample.

    Free pieces carry ``start``/``end`` observed states (-1 when unobserved).
    """

    kind: str
    s: float
    t: float
    state: int = -1
    start: int = -1
    end: int = -1


def component_plan(evidence: Evidence, i: int) -> list[Piece]:
    """Split [0, T] into pinned intervals and free windows for component i.

    Free windows lie between intervals and are further cut at point
    observations; interval edges act as observed endpoints of the adjacent
    windows. Zero-length windows are dropped.
    """
    T = evidence.T
    ivs = [iv for iv in evidence.intervals_of(i) if iv[1] > iv[0]]
    pts: dict[float, int] = {}
    for t, x in evidence.points_of(i):
        pts[t] = x
    for s, e, x in evidence.intervals_of(i):
        if e == s and pts.setdefault(s, x) != x:
            raise EvidenceError(f"component {i}: conflicting observations at t={s}")
    for t, x in pts.items():
        touching = [y for s, e, y in ivs if s <= t <= e]
        if touching and x not in touching:
            raise EvidenceError(f"component {i}: point ({t}, {x}) contradicts interval evidence")

    pieces: list[Piece] = []

    def add_free(a, b, sa, sb):
        if b <= a:
            return
        cuts = sorted((t, x) for t, x in pts.items() if a < t < b)
        for t, x in cuts:
            pieces.append(Piece("free", a, t, start=sa, end=x))
            a, sa = t, x
        pieces.append(Piece("free", a, b, start=sa, end=sb))

    prev_end, prev_state = 0.0, pts.get(0.0, -1)
    for s, e, x in ivs:
        add_free(prev_end, s, prev_state, x)
        pieces.append(Piece("pin", s, e, state=x))
        prev_end, prev_state = e, x
    add_free(prev_end, T, prev_state, pts.get(T, -1))
    return pieces


def assemble(i: int, T: float, parts: Iterable[tuple[float, int, np.ndarray, np.ndarray]]
             ) -> ComponentTrajectory:
    """Join consecutive (start_time, start_state, times, states) parts into a path."""
    times, states = [], []
    cur = None
    init = None
    for s, x0, ts, xs in parts:
        if cur is None:
            init = cur = int(x0)
        elif int(x0) != cur:
            times.append(np.array([s]))
            states.append(np.array([x0], dtype=np.int64))
            cur = int(x0)
        if len(ts):
            times.append(np.asarray(ts, dtype=np.float64))
            states.append(np.asarray(xs, dtype=np.int64))
            cur = int(xs[-1])
    t = np.concatenate(times) if times else np.zeros(0)
    x = np.concatenate(states) if states else np.zeros(0, dtype=np.int64)
    return ComponentTrajectory(i, 0.0, T, init, t, x)


def consistent_with(joint: JointTrajectory, evidence: Evidence) -> bool:
    """True when every observation holds on the path."""
    for i in set(evidence.points) | set(evidence.intervals):
        c = joint[i]
        for t, x in evidence.points_of(i):
            if _left_state(c, t) != x and c.state_at(t) != x:
                return False
        for s, e, x in evidence.intervals_of(i):
            if np.any((c.times > s) & (c.times < e)):
                return False
            if c.state_at((s + e) / 2) != x:
                return False
    return True


def _left_state(c: ComponentTrajectory, t: float) -> int:
    k = int(np.searchsorted(c.times, t, side="left"))
    return c.initial_state if k == 0 else int(c.states[k - 1])


# ---------------------------------------------------------------------------
# CSV dump


def write_trajectories_csv(path, samples: Sequence[tuple[int, int, JointTrajectory]],
                           T: float, seed) -> None:
    """Rows ``chain,sample,component,time,new_state``; time 0 rows give the
    initial states. The first line records T and the seed."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# T={T!r},seed={seed}\n")
        w = csv.writer(fh)
        w.writerow(["chain", "sample", "component", "time", "new_state"])
        for chain, k, joint in samples:
            for c in joint.components:
                w.writerow([chain, k, c.component, repr(0.0), c.initial_state])
                for t, x in zip(c.times.tolist(), c.states.tolist()):
                    w.writerow([chain, k, c.component, repr(t), x])


def read_trajectories_csv(path) -> tuple[float, dict[tuple[int, int], JointTrajectory]]:
    with open(path) as fh:
        header = fh.readline().lstrip("#").strip()
        meta = dict(kv.split("=", 1) for kv in header.split(","))
        T = float(meta["T"])
        rows = list(csv.DictReader(fh))
    grouped: dict[tuple[int, int], dict[int, list]] = {}
    for r in rows:
        key = (int(r["chain"]), int(r["sample"]))
        grouped.setdefault(key, {}).setdefault(int(r["component"]), []).append(
            (float(r["time"]), int(r["new_state"])))
    out = {}
    for key, comps in grouped.items():
        trajs = []
        for i in sorted(comps):
            ev = comps[i]
            trajs.append(ComponentTrajectory(i, 0.0, T, ev[0][1], [t for t, _ in ev[1:]],
                                             [x for _, x in ev[1:]]))
        out[key] = JointTrajectory(trajs, T)
    return T, out
