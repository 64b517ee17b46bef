"""Brute-force inference on the amalgamated joint state space.

Only usable for small networks (joint state space capped, 4096 by default).
These routines are the reference the sampler is validated against.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.sparse.linalg import expm_multiply

from . import kernels
from .linalg import _as_square, matrix_exponential
from .model import DEFAULT_STATE_CAP, CTBNModel, joint_diagonal, joint_states, transition_pairs
from .stats import SufficientStats
from .trajectory import Evidence, ZeroProbabilityEvidence

DEFAULT_GRID = 2000
_ROUND_EPS = 1e-9


# ---------------------------------------------------------------------------
# Markov bridge


@dataclass(frozen=True)
class BridgeQuery:
    """Bridge of a CTMC with generator ``Q`` from joint state a0 at time 0 to aT at T."""

    Q: np.ndarray
    a0: int
    aT: int
    T: float
    t: float

    def __post_init__(self):
        Q = _as_square(self.Q, "Q")
        object.__setattr__(self, "Q", Q)
        n = Q.shape[0]
        if not (0 <= self.a0 < n and 0 <= self.aT < n):
            raise ValueError("endpoint state out of range")
        if not 0.0 <= self.t <= self.T:
            raise ValueError(f"query time {self.t} outside [0, {self.T}]")


def bridge_marginal(q: BridgeQuery) -> np.ndarray:
    """P(X(t) = a | X(0) = a0, X(T) = aT) for every joint state a."""
    Z = matrix_exponential(q.Q, q.T)[q.a0, q.aT]
    if not Z > 0:
        raise ZeroProbabilityEvidence(f"bridge {q.a0} -> {q.aT} over T={q.T} has probability 0")
    fwd = matrix_exponential(q.Q, q.t)[q.a0, :]
    bwd = matrix_exponential(q.Q, q.T - q.t)[:, q.aT]
    return np.clip(fwd * bwd / Z, 0.0, None)


# ---------------------------------------------------------------------------
# events on the joint state space


@dataclass(frozen=True)
class PointEvent:
    """X(t) in ``allowed`` (``right=True`` means the right limit X(t+))."""

    t: float
    allowed: np.ndarray
    right: bool = False


@dataclass(frozen=True)
class IntervalEvent:
    """X stays inside ``allowed`` on (s, t]."""

    s: float
    t: float
    allowed: np.ndarray


def state_mask(model: CTBNModel, assignment: dict[int, int | Sequence[int]]) -> np.ndarray:
    """Boolean mask over joint states: component i takes one of ``assignment[i]``."""
    states = joint_states(model)
    mask = np.ones(len(states), dtype=bool)
    for i, x in assignment.items():
        mask &= np.isin(states[:, i], np.atleast_1d(x))
    return mask


def _event_times(event):
    for e in event:
        if isinstance(e, PointEvent):
            yield e.t
        else:
            if e.s > e.t:
                raise ValueError(f"interval ({e.s}, {e.t}] is reversed")
            yield e.s
            yield e.t


def _step_masks(n: int, h: float, event) -> tuple[np.ndarray, np.ndarray]:
    """Per-step masks of the h-coarsened event (deduplicated)."""
    times = list(_event_times(event))
    last = max([int(np.ceil(t / h - _ROUND_EPS)) for t in times], default=0)
    steps = np.ones((last + 1, n), dtype=bool)
    for e in event:
        allowed = np.asarray(e.allowed, dtype=bool)
        if isinstance(e, PointEvent):
            k = int(np.ceil(e.t / h - _ROUND_EPS)) if e.right else int(np.floor(e.t / h + _ROUND_EPS))
            steps[k] &= allowed
        else:
            lo = int(np.ceil(e.s / h - _ROUND_EPS))
            hi = int(np.floor(e.t / h + _ROUND_EPS))
            if lo <= hi:
                steps[lo:hi + 1] &= allowed
    uniq, ids = np.unique(steps, axis=0, return_inverse=True)
    return uniq.astype(np.float64), ids.ravel().astype(np.int64)


def coarsened_step_matrix(Q, h: float) -> np.ndarray:
    """One-step matrix I + hQ of the h-coarsened chain."""
    Q = _as_square(Q, "Q")
    if h < 0:
        raise ValueError("h must be nonnegative")
    exits = -np.diag(Q)
    if h > 0 and np.any(exits > 0) and not h < 1.0 / exits.max():
        raise ValueError(f"h={h} too large: need h < {1.0 / exits.max()} for a valid step matrix")
    P = h * Q
    np.fill_diagonal(P, 0.0)
    if np.any(P < 0):
        raise ValueError("Q has negative off-diagonal rates")
    P[np.diag_indices_from(P)] = 1.0 - P.sum(axis=1)
    return P


def event_probability_coarsened(Q, h: float, p0, event) -> float:
    """Probability of the h-coarsened event under the discrete chain I + hQ."""
    P = coarsened_step_matrix(Q, h)
    if h <= 0:
        raise ValueError("h must be positive")
    p0 = np.asarray(p0, dtype=np.float64)
    masks, ids = _step_masks(P.shape[0], h, event)
    logp, _ = kernels.masked_forward(P, p0, masks, ids)
    return float(np.exp(logp))


def conditional_probability_coarsened(Q, h: float, p0, event, given) -> float:
    """Pr_h(event | given) under the h-coarsened chain."""
    den = event_probability_coarsened(Q, h, p0, given)
    if not den > 0:
        raise ZeroProbabilityEvidence("conditioning event has probability 0")
    return event_probability_coarsened(Q, h, p0, list(event) + list(given)) / den


def coarsened_backward(Q, h: float, event, horizon: float) -> tuple[np.ndarray, float]:
    """Likelihood of the coarsened event after step 0, as a function of X(0).

    Returns a max-normalised vector and its log scale.
    """
    P = coarsened_step_matrix(Q, h)
    n = P.shape[0]
    event = list(event) + [PointEvent(horizon, np.ones(n, dtype=bool))]
    masks, ids = _step_masks(n, h, event)
    v, ls = kernels.masked_backward(P, np.ones(n), masks, ids)
    return v, float(ls)


def _masked_generator(Q, allowed):
    G = Q * np.outer(allowed, allowed)
    G[np.diag_indices_from(G)] = np.diag(Q)
    return G


def event_probability(Q, p0, event) -> float:
    """Exact probability of a conjunction of point/interval events."""
    Q = _as_square(Q, "Q")
    n = Q.shape[0]
    p = np.asarray(p0, dtype=np.float64).copy()
    event = list(event)
    times = sorted(set(_event_times(event)) | {0.0})
    for k, b in enumerate(times):
        for e in event:
            if isinstance(e, PointEvent) and e.t == b:
                p *= e.allowed
            elif isinstance(e, IntervalEvent) and e.s <= b <= e.t:
                p *= e.allowed
        if k + 1 < len(times):
            allowed = np.ones(n, dtype=bool)
            for e in event:
                if isinstance(e, IntervalEvent) and e.s <= b and times[k + 1] <= e.t:
                    allowed &= np.asarray(e.allowed, dtype=bool)
            p = matrix_exponential(_masked_generator(Q, allowed), times[k + 1] - b).T @ p
            p[p < 0] = 0.0
    return float(p.sum())


def conditional_probability(Q, p0, event, given) -> float:
    den = event_probability(Q, p0, given)
    if not den > 0:
        raise ZeroProbabilityEvidence("conditioning event has probability 0")
    return event_probability(Q, p0, list(event) + list(given)) / den


# ---------------------------------------------------------------------------
# expected sufficient statistics


@dataclass
class _Breakpoint:
    t: float
    left: np.ndarray
    right: np.ndarray
    jumps: list = field(default_factory=list)


def _joint_initial(model: CTBNModel) -> np.ndarray:
    p = np.ones(1)
    for v in model.initial:
        p = np.outer(p, v).ravel()
    return p


def _breakpoints(model: CTBNModel, evidence: Evidence, states: np.ndarray) -> list[_Breakpoint]:
    T = evidence.T
    times = {0.0, T}
    for i in range(model.M):
        times.update(t for t, _ in evidence.points_of(i))
        for s, e, _ in evidence.intervals_of(i):
            times.update((s, e))
    out = []
    n = len(states)
    for b in sorted(times):
        left = np.ones(n, dtype=bool)
        right = np.ones(n, dtype=bool)
        jumps = []
        for i in range(model.M):
            col = states[:, i]
            for t, x in evidence.points_of(i):
                if t == b:
                    left &= col == x
                    right &= col == x
            ends = {x for s, e, x in evidence.intervals_of(i) if s < b <= e}
            starts = {x for s, e, x in evidence.intervals_of(i) if s <= b < e}
            for x in ends:
                left &= col == x
            for x in starts:
                right &= col == x
            if len(ends) == 1 and len(starts) == 1 and ends != starts:
                jumps.append((i, ends.pop(), starts.pop()))
        if len(jumps) > 1:
            raise ZeroProbabilityEvidence(f"evidence forces simultaneous transitions at t={b}")
        if not jumps:
            left &= right
            right = left
        out.append(_Breakpoint(b, left, right, jumps))
    return out


def _simpson_steps(length: float, T: float, grid_n: int) -> int:
    n = int(round(grid_n * length / T))
    n += n % 2
    return max(n, 2)


def exact_sufficient_stats(model: CTBNModel, evidence: Evidence, grid_n: int = DEFAULT_GRID,
                           cap: int = DEFAULT_STATE_CAP) -> SufficientStats:
    """Posterior expected residence times and transition counts.

    Forward and backward factors are propagated with sparse exponential
    actions on the joint space and integrated with composite Simpson's rule.
    Interval evidence restricts the generator; touching intervals with
    different states force a transition at the shared edge, whose unit count
    is split across parent configurations by its posterior weight.
    An unobserved start uses the model's initial distribution.
    """
    evidence.validate(model.state_sizes)
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    T = evidence.T
    tp = transition_pairs(model, cap)
    states = joint_states(model)
    n = len(states)
    pk = model.pack
    Qoff = sp.csr_matrix((tp.rates, (tp.rows, tp.cols)), shape=(n, n))
    diag = joint_diagonal(model)
    bps = _breakpoints(model, evidence, states)

    def generator(allowed):
        D = sp.diags(allowed.astype(np.float64))
        return (D @ Qoff @ D + sp.diags(diag)).tocsr()

    def jump_matrix(i, x1, x2):
        return (tp.component == i) & (tp.from_state == x1) & (tp.to_state == x2)

    # forward pass
    segs = []
    alpha = _joint_initial(model) * bps[0].right
    if not alpha.sum() > 0:
        raise ZeroProbabilityEvidence("evidence at t=0 has probability 0")
    alpha = alpha / alpha.sum()
    for k in range(len(bps) - 1):
        b0, b1 = bps[k].t, bps[k + 1].t
        allowed = np.ones(n, dtype=bool)
        for i in range(model.M):
            for s0, e0, x in evidence.intervals_of(i):
                if s0 <= b0 and b1 <= e0:
                    allowed &= states[:, i] == x
        G = generator(allowed)
        steps = _simpson_steps(b1 - b0, T, grid_n)
        A = expm_multiply(G.T, alpha, start=0.0, stop=b1 - b0, num=steps + 1, endpoint=True)
        A = np.clip(A, 0.0, None)
        segs.append((b0, b1, G, A))
        nxt = bps[k + 1]
        end = A[-1] * nxt.left
        if nxt.jumps:
            i, x1, x2 = nxt.jumps[0]
            sel = jump_matrix(i, x1, x2)
            moved = np.zeros(n)
            np.add.at(moved, tp.cols[sel], end[tp.rows[sel]] * tp.rates[sel])
            end = moved * nxt.right
        s = end.sum()
        if not s > 0:
            raise ZeroProbabilityEvidence(f"evidence up to t={b1} has probability 0")
        alpha = end / s

    # backward pass, accumulating as we go
    res = np.zeros(pk.res_off[-1])
    trn = np.zeros(pk.tr_off[-1])
    res_idx = [pk.res_off[i] + (states[:, list(model.parents[i])] @ model.parent_strides(i)
                                if model.parents[i] else 0) * model.state_sizes[i] + states[:, i]
               for i in range(model.M)]
    d_of = np.asarray(model.state_sizes)[tp.component]
    tr_idx = pk.tr_off[tp.component] + (tp.parent_config * d_of + tp.from_state) * d_of + tp.to_state
    beta = bps[-1].left.astype(np.float64)
    for k in range(len(segs) - 1, -1, -1):
        b0, b1, G, A = segs[k]
        steps = A.shape[0] - 1
        B = expm_multiply(G, beta, start=0.0, stop=b1 - b0, num=steps + 1, endpoint=True)[::-1]
        B = np.clip(B, 0.0, None)
        Z = np.einsum("tx,tx->t", A, B)
        if not np.all(Z > 0):
            raise ZeroProbabilityEvidence("evidence has probability 0")
        grid = np.linspace(b0, b1, steps + 1)
        occ = simpson(A * B / Z[:, None], x=grid, axis=0)
        for i in range(model.M):
            res += np.bincount(res_idx[i], weights=occ, minlength=res.size)
        Aw = A / Z[:, None]
        vals = np.empty(tp.rows.size)
        chunk = max(1, 2_000_000 // (steps + 1))
        for c in range(0, tp.rows.size, chunk):
            r, cl = tp.rows[c:c + chunk], tp.cols[c:c + chunk]
            vals[c:c + chunk] = simpson(Aw[:, r] * B[:, cl], x=grid, axis=0)
        trn += np.bincount(tr_idx, weights=vals * tp.rates, minlength=trn.size)
        beta_start = B[0]
        here = bps[k]
        if k == 0:
            break
        prev_end = segs[k - 1][3][-1] * here.left
        if here.jumps:
            i, x1, x2 = here.jumps[0]
            sel = jump_matrix(i, x1, x2)
            right = beta_start * here.right
            w = prev_end[tp.rows[sel]] * tp.rates[sel] * right[tp.cols[sel]]
            if not w.sum() > 0:
                raise ZeroProbabilityEvidence(f"forced transition at t={here.t} has probability 0")
            trn += np.bincount(tr_idx[sel], weights=w / w.sum(), minlength=trn.size)
            beta = np.zeros(n)
            np.add.at(beta, tp.rows[sel], tp.rates[sel] * right[tp.cols[sel]])
            beta *= here.left
        else:
            beta = beta_start * here.left
        m = beta.max()
        if not m > 0:
            raise ZeroProbabilityEvidence(f"evidence after t={here.t} has probability 0")
        beta = beta / m
    return SufficientStats.from_flat(model, res, trn)
