"""Sufficient statistics of CTBN trajectories and the relative-error metric."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .model import CTBNModel
from .trajectory import JointPack, JointTrajectory

DEFAULT_THRESHOLD = 0.05


@dataclass
class SufficientStats:
    """``residence[i]`` has shape (n_parent_configs, d_i); ``transitions[i]``
    has shape (n_parent_configs, d_i, d_i) with a zero diagonal."""

    residence: list[np.ndarray]
    transitions: list[np.ndarray]

    @classmethod
    def from_flat(cls, model: CTBNModel, res: np.ndarray, trn: np.ndarray) -> "SufficientStats":
        p = model.pack
        residence, transitions = [], []
        for i, d in enumerate(model.state_sizes):
            n = model.n_parent_configs(i)
            residence.append(np.array(res[p.res_off[i]:p.res_off[i + 1]]).reshape(n, d))
            transitions.append(np.array(trn[p.tr_off[i]:p.tr_off[i + 1]]).reshape(n, d, d))
        return cls(residence, transitions)

    @classmethod
    def zeros(cls, model: CTBNModel) -> "SufficientStats":
        p = model.pack
        return cls.from_flat(model, np.zeros(p.res_off[-1]), np.zeros(p.tr_off[-1]))

    @property
    def M(self) -> int:
        return len(self.residence)

    def flatten(self, components: Sequence[int] | None = None) -> np.ndarray:
        """Residence entries then transition entries, component by component."""
        comps = range(self.M) if components is None else components
        parts = [self.residence[i].ravel() for i in comps]
        parts += [self.transitions[i].ravel() for i in comps]
        return np.concatenate(parts) if parts else np.zeros(0)

    def same_shape(self, other: "SufficientStats") -> bool:
        return (self.M == other.M
                and all(a.shape == b.shape for a, b in zip(self.residence, other.residence))
                and all(a.shape == b.shape for a, b in zip(self.transitions, other.transitions)))

    def map(self, fn) -> "SufficientStats":
        return SufficientStats([fn(r) for r in self.residence], [fn(t) for t in self.transitions])

    def allclose(self, other: "SufficientStats", atol=0.0, rtol=1e-9) -> bool:
        return self.same_shape(other) and np.allclose(self.flatten(), other.flatten(),
                                                      atol=atol, rtol=rtol)


def accumulate_flat(model: CTBNModel, joint: JointTrajectory) -> tuple[np.ndarray, np.ndarray]:
    p = model.pack
    jp = JointPack.from_joint(joint)
    return kernels.accumulate(float(joint.T), p.sizes, p.res_off, p.tr_off, p.par_ptr,
                              p.par_idx, p.par_stride, *jp.args())


def accumulate_stats(model: CTBNModel, joint: JointTrajectory) -> SufficientStats:
    """Realised residence times and transition counts of one joint trajectory.

    A transition of component i is charged to the parent configuration in
    force just before it (left limit), also when a parent jumps at the same
    instant.
    """
    if len(joint) != model.M:
        raise ValueError("trajectory and model disagree on the number of components")
    return SufficientStats.from_flat(model, *accumulate_flat(model, joint))


def mean_stats(samples: Iterable[SufficientStats]) -> SufficientStats:
    samples = list(samples)
    if not samples:
        raise ValueError("mean of an empty list of statistics")
    first = samples[0]
    if not all(first.same_shape(s) for s in samples[1:]):
        raise ValueError("statistics have different shapes")
    n = len(samples)
    res = [sum(s.residence[i] for s in samples) / n for i in range(first.M)]
    trn = [sum(s.transitions[i] for s in samples) / n for i in range(first.M)]
    return SufficientStats(res, trn)


def average_relative_error(est: SufficientStats, truth: SufficientStats,
                           threshold: float = DEFAULT_THRESHOLD,
                           components: Sequence[int] | None = None) -> float:
    """Mean of |est - truth| / truth over entries with truth > threshold."""
    if not est.same_shape(truth):
        raise ValueError("statistics have different shapes")
    e = est.flatten(components)
    t = truth.flatten(components)
    if not np.all(np.isfinite(t)):
        raise ValueError("truth has non-finite entries")
    sel = t > threshold
    if not sel.any():
        raise ValueError(f"no statistics exceed the threshold {threshold}")
    return float(np.mean(np.abs(e[sel] - t[sel]) / t[sel]))


def log_likelihood(model: CTBNModel, stats: SufficientStats) -> float:
    """Log-density of a path summarised by ``stats`` (initial-state term excluded)."""
    total = 0.0
    for i, c in enumerate(model.cims):
        res, trn = stats.residence[i], stats.transitions[i]
        total += float(np.sum(res * np.diagonal(c, axis1=1, axis2=2)))
        used = trn > 0
        if np.any(used & (c <= 0)):
            return -np.inf
        total += float(np.sum(trn[used] * np.log(c[used])))
    return total


def write_stats_csv(path, stats: SufficientStats, header: Sequence[str] = ()) -> None:
    """Rows ``component,parent_state_index,state_a,state_b,value``; state_b is
    blank for residence times. ``header`` lines are written first, prefixed by '#'.
    ``path`` may also be an open text stream."""
    if hasattr(path, "write"):
        _write_stats(path, stats, header)
        return
    with open(path, "w", newline="") as fh:
        _write_stats(fh, stats, header)


def _write_stats(fh, stats, header):
    for line in header:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["component", "parent_state_index", "state_a", "state_b", "value"])
    for i in range(stats.M):
        res, trn = stats.residence[i], stats.transitions[i]
        for u in range(res.shape[0]):
            for a in range(res.shape[1]):
                w.writerow([i, u, a, "", repr(float(res[u, a]))])
            for a in range(res.shape[1]):
                for b in range(res.shape[1]):
                    if a != b:
                        w.writerow([i, u, a, b, repr(float(trn[u, a, b]))])


def read_stats_csv(path, model: CTBNModel) -> SufficientStats:
    out = SufficientStats.zeros(model)
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for r in rows:
            i, u, a = int(r["component"]), int(r["parent_state_index"]), int(r["state_a"])
            if r["state_b"] == "":
                out.residence[i][u, a] = float(r["value"])
            else:
                out.transitions[i][u, a, int(r["state_b"])] = float(r["value"])
    return out
