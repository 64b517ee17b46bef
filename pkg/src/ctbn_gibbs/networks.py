"""Benchmark networks and evidence sets for the convergence experiments."""
from __future__ import annotations

import numpy as np

from .model import CTBNModel
from .sampler import forward_sample
from .trajectory import Evidence

LOOP_RATE = 2.0
OFF_LOOP_RATE = 0.05
FOLLOW_RATE = 5.0
NON_FOLLOW_RATE = 0.2
PERTURB = 0.05

# states of the last-time observation in e1, cycled for longer chains
E1_END = (0, 1, 3, 0, 1)


def _with_diagonal(Q: np.ndarray) -> np.ndarray:
    Q = Q.copy()
    np.fill_diagonal(Q, 0.0)
    Q[np.diag_indices_from(Q)] = -Q.sum(axis=1)
    return Q


def _loop_edges(d: int) -> list[tuple[int, int]]:
    if d == 5:
        return [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)]
    return [(a, (a + 1) % d) for a in range(d)] if d > 1 else []


def root_rates(d: int, loop_rate=LOOP_RATE, off_loop_rate=OFF_LOOP_RATE) -> np.ndarray:
    """Rate matrix that cycles s0->s1->s2->s0 and s0->s3->s4->s0 (a single cycle if d != 5)."""
    Q = np.full((d, d), off_loop_rate)
    for a, b in _loop_edges(d):
        Q[a, b] = loop_rate
    return _with_diagonal(Q)


def follower_rates(d: int, d_parent: int, follow_rate=FOLLOW_RATE,
                   non_follow_rate=NON_FOLLOW_RATE) -> np.ndarray:
    """Conditional rates (d_parent, d, d): jumping to b is fast when the parent is in b."""
    cims = np.full((d_parent, d, d), non_follow_rate)
    for c in range(min(d, d_parent)):
        cims[c, :, c] = follow_rate
    return np.stack([_with_diagonal(Q) for Q in cims])


def _perturb(cims: np.ndarray, rng: np.random.Generator, perturb: float) -> np.ndarray:
    noise = 1.0 + perturb * rng.uniform(-1.0, 1.0, size=cims.shape)
    return np.stack([_with_diagonal(Q) for Q in cims * noise])


def generate_chain_network(N: int, d: int = 5, perturb: float = PERTURB, seed: int = 0,
                           loop_rate: float = LOOP_RATE, off_loop_rate: float = OFF_LOOP_RATE,
                           follow_rate: float = FOLLOW_RATE,
                           non_follow_rate: float = NON_FOLLOW_RATE) -> CTBNModel:
    """Chain X_0 -> X_1 -> ... -> X_{N-1}; X_0 cycles, every other X_i tracks its parent."""
    if N < 1 or d < 2:
        raise ValueError("need N >= 1 components with d >= 2 states")
    if perturb < 0 or perturb >= 1:
        raise ValueError("perturb must be in [0, 1)")
    rates = (loop_rate, off_loop_rate, follow_rate, non_follow_rate)
    if min(rates) < 0:
        raise ValueError("rates must be nonnegative")
    rng = np.random.default_rng(seed)
    cims = [_perturb(root_rates(d, loop_rate, off_loop_rate)[None], rng, perturb)]
    for _ in range(1, N):
        cims.append(_perturb(follower_rates(d, d, follow_rate, non_follow_rate), rng, perturb))
    parents = [()] + [(i - 1,) for i in range(1, N)]
    initial = [np.full(d, 1.0 / d)] * N
    return CTBNModel(tuple([d] * N), tuple(parents), tuple(cims), tuple(initial))


def halving_chain_network(N: int = 4, d: int = 5, base_rate: float = 4.0, ratio: float = 0.5,
                          perturb: float = PERTURB, seed: int = 0) -> CTBNModel:
    """Chain network whose component i leaves every state at rate base_rate * ratio**i.

    Transition targets keep the chain's loop/follow preferences, so the
    expected number of transitions of X_i on [0, T] is exactly
    base_rate * ratio**i * T whatever the parents do.
    """
    if base_rate <= 0 or ratio <= 0:
        raise ValueError("base_rate and ratio must be positive")
    net = generate_chain_network(N, d, perturb, seed)
    cims = []
    for i, c in enumerate(net.cims):
        off = c.copy()
        for Q in off:
            np.fill_diagonal(Q, 0.0)
        off *= (base_rate * ratio ** i) / off.sum(axis=2, keepdims=True)
        cims.append(np.stack([_with_diagonal(Q) for Q in off]))
    return net.replace_cims(cims)


def sharpen(model: CTBNModel, alpha: float) -> CTBNModel:
    """Replace each row's jump profile by its alpha-power renormalisation.

    Off-diagonal (a, b) becomes |q_aa| * q_ab^alpha / sum_{c != a} q_ac^alpha;
    diagonals are kept, so exit rates do not change.
    """
    if not alpha >= 0:
        raise ValueError("alpha must be nonnegative")
    cims = []
    for c in model.cims:
        new = np.array(c)
        d = c.shape[1]
        for u in range(c.shape[0]):
            for a in range(d):
                off = np.delete(c[u, a], a)
                if alpha == 0 and np.any(off == 0):
                    raise ValueError("alpha = 0 with a zero rate is ambiguous (0**0)")
                w = off ** alpha
                total = w.sum()
                if not total > 0:
                    continue
                new[u, a, np.arange(d) != a] = abs(c[u, a, a]) * w / total
        cims.append(new)
    return model.replace_cims(cims)


def make_evidence(name: str, model: CTBNModel, T: float = 3.0,
                  rng: np.random.Generator | None = None) -> Evidence:
    """Evidence sets e1..e5 on a chain network.

    e1: all components in s0 at 0, pattern (s0, s1, s3, s0, s1) at T.
    e2: all in s0 at 0 plus the whole path of X_4 from a forward sample.
    e3: all in s0 at 0 and at T.  e4: all in s0 at 0.
    e5: e1 plus X_0 held at s0 over the whole horizon.
    """
    if name not in ("e1", "e2", "e3", "e4", "e5"):
        raise ValueError(f"unknown evidence set {name!r}")
    M = model.M
    ev = Evidence(float(T))
    for i in range(M):
        ev.add_point(i, 0.0, 0)
    end = [E1_END[i % len(E1_END)] % model.state_sizes[i] for i in range(M)]
    if name in ("e1", "e5"):
        for i in range(M):
            ev.add_point(i, T, end[i])
    if name == "e5":
        ev.add_interval(0, 0.0, T, 0)
    if name == "e3":
        for i in range(M):
            ev.add_point(i, T, 0)
    if name == "e2":
        if rng is None:
            raise ValueError("e2 needs a random generator for the forward sample")
        observed = min(4, M - 1)
        path = forward_sample(model, T, rng, x0=[0] * M)
        ev.add_trajectory(path[observed])
    ev.validate(model.state_sizes)
    return ev
