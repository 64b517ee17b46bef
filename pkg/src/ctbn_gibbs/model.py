"""Continuous-time Bayesian network models.

A model holds, for each component ``i``, its cardinality ``d_i``, an ordered
parent list and one ``d_i x d_i`` conditional rate matrix per parent
configuration. Parent configurations are indexed row-major over the declared
parent order (the last parent varies fastest).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-12
DEFAULT_STATE_CAP = 4096


class ModelValidationError(ValueError):
    """Raised when a model violates its structural or numeric invariants."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid model:\n" + "\n".join(str(v) for v in report.violations))


class StateSpaceTooLarge(ValueError):
    pass


class ModelFormatError(ValueError):
    """A model document that cannot be turned into a CTBNModel at all."""


@dataclass(frozen=True)
class Violation:
    kind: str
    component: int
    parent_config: int | None = None
    row: int | None = None
    col: int | None = None
    detail: str = ""

    def __str__(self):
        where = [f"i={self.component}"]
        if self.parent_config is not None:
            where.append(f"u={self.parent_config}")
        if self.row is not None:
            where.append(f"a={self.row}")
        if self.col is not None:
            where.append(f"b={self.col}")
        return f"{self.kind} ({', '.join(where)}) {self.detail}".rstrip()


@dataclass(frozen=True)
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class ModelPack:
    """Flat integer/float arrays describing a model, consumed by the kernels."""

    sizes: np.ndarray
    cim_off: np.ndarray
    cim_flat: np.ndarray
    par_ptr: np.ndarray
    par_idx: np.ndarray
    par_stride: np.ndarray
    ch_ptr: np.ndarray
    ch_idx: np.ndarray
    ch_stride: np.ndarray
    mb_ptr: np.ndarray
    mb_idx: np.ndarray
    res_off: np.ndarray
    tr_off: np.ndarray

    def timeline_args(self):
        return (self.sizes, self.cim_off, self.cim_flat, self.par_ptr, self.par_idx,
                self.par_stride, self.ch_ptr, self.ch_idx, self.ch_stride,
                self.mb_ptr, self.mb_idx)


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CTBNModel:
    """Immutable CTBN: component cardinalities, parents, rate tables, initial law.

    ``cims[i]`` has shape ``(n_parent_configs(i), d_i, d_i)``; ``initial[i]``
    is a probability vector over the states of component ``i`` (product-form
    initial distribution).
    """

    state_sizes: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    cims: tuple[np.ndarray, ...]
    initial: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = tuple(int(d) for d in self.state_sizes)
        parents = tuple(tuple(int(p) for p in ps) for ps in self.parents)
        object.__setattr__(self, "state_sizes", sizes)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "cims", tuple(_readonly(c) for c in self.cims))
        object.__setattr__(self, "initial", tuple(_readonly(p) for p in self.initial))
        M = len(sizes)
        if len(parents) != M or len(self.cims) != M or len(self.initial) != M:
            raise ValueError("state_sizes, parents, cims and initial must have equal length")
        for i in range(M):
            if sizes[i] < 1:
                raise ValueError(f"component {i} has no states")
            for p in parents[i]:
                if not 0 <= p < M:
                    raise ValueError(f"component {i} has out-of-range parent {p}")
            expected = (self.n_parent_configs(i), sizes[i], sizes[i])
            if self.cims[i].shape != expected:
                raise ValueError(f"cims[{i}] has shape {self.cims[i].shape}, expected {expected}")
            if self.initial[i].shape != (sizes[i],):
                raise ValueError(f"initial[{i}] has shape {self.initial[i].shape}")

    @property
    def M(self) -> int:
        return len(self.state_sizes)

    def n_parent_configs(self, i: int) -> int:
        return int(np.prod([self.state_sizes[p] for p in self.parents[i]], dtype=np.int64))

    def parent_strides(self, i: int) -> np.ndarray:
        sizes = [self.state_sizes[p] for p in self.parents[i]]
        strides = np.ones(len(sizes), dtype=np.int64)
        for k in range(len(sizes) - 2, -1, -1):
            strides[k] = strides[k + 1] * sizes[k + 1]
        return strides

    def parent_config_index(self, i: int, parent_states: Sequence[int]) -> int:
        return int(np.dot(self.parent_strides(i), np.asarray(parent_states, dtype=np.int64)))

    def parent_config_states(self, i: int, u: int) -> tuple[int, ...]:
        sizes = [self.state_sizes[p] for p in self.parents[i]]
        if not sizes:
            return ()
        return tuple(int(s) for s in np.unravel_index(u, sizes))

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids = [[] for _ in range(self.M)]
        for j, ps in enumerate(self.parents):
            for p in ps:
                kids[p].append(j)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def blankets(self) -> tuple[frozenset, ...]:
        out = []
        for i in range(self.M):
            mb = set(self.parents[i]) | set(self.children[i])
            for j in self.children[i]:
                mb |= set(self.parents[j])
            mb.discard(i)
            out.append(frozenset(mb))
        return tuple(out)

    @property
    def n_joint_states(self) -> int:
        return int(np.prod(self.state_sizes, dtype=np.int64))

    @cached_property
    def pack(self) -> ModelPack:
        M = self.M
        sizes = np.asarray(self.state_sizes, dtype=np.int64)
        cim_off = np.zeros(M, dtype=np.int64)
        off = 0
        for i in range(M):
            cim_off[i] = off
            off += self.cims[i].size
        cim_flat = np.concatenate([c.ravel() for c in self.cims]) if M else np.zeros(0)
        par_ptr = np.zeros(M + 1, dtype=np.int64)
        par_idx, par_stride = [], []
        for i in range(M):
            par_idx.extend(self.parents[i])
            par_stride.extend(self.parent_strides(i).tolist())
            par_ptr[i + 1] = len(par_idx)
        ch_ptr = np.zeros(M + 1, dtype=np.int64)
        ch_idx, ch_stride = [], []
        for i in range(M):
            for j in self.children[i]:
                ch_idx.append(j)
                ch_stride.append(int(self.parent_strides(j)[self.parents[j].index(i)]))
            ch_ptr[i + 1] = len(ch_idx)
        mb_ptr = np.zeros(M + 1, dtype=np.int64)
        mb_idx = []
        for i in range(M):
            mb_idx.extend(sorted(self.blankets[i]))
            mb_ptr[i + 1] = len(mb_idx)
        res_off = np.zeros(M + 1, dtype=np.int64)
        tr_off = np.zeros(M + 1, dtype=np.int64)
        for i in range(M):
            n = self.n_parent_configs(i)
            res_off[i + 1] = res_off[i] + n * sizes[i]
            tr_off[i + 1] = tr_off[i] + n * sizes[i] * sizes[i]
        as_int = lambda x: np.asarray(x, dtype=np.int64)
        return ModelPack(sizes, cim_off, np.ascontiguousarray(cim_flat, dtype=np.float64),
                         par_ptr, as_int(par_idx), as_int(par_stride),
                         ch_ptr, as_int(ch_idx), as_int(ch_stride),
                         mb_ptr, as_int(mb_idx), res_off, tr_off)

    def replace_cims(self, cims) -> "CTBNModel":
        return CTBNModel(self.state_sizes, self.parents, tuple(cims), self.initial)

    def replace_initial(self, initial) -> "CTBNModel":
        return CTBNModel(self.state_sizes, self.parents, self.cims, tuple(initial))


def validate_model(model: CTBNModel, tol: float = ROW_SUM_TOL) -> ValidationReport:
    """Check every invariant; never raises, returns the list of violations."""
    out = []
    for i in range(model.M):
        ps = model.parents[i]
        if i in ps:
            out.append(Violation("self-parent", i))
        if len(set(ps)) != len(ps):
            out.append(Violation("duplicate-parent", i))
        cim = model.cims[i]
        d = model.state_sizes[i]
        for u in range(cim.shape[0]):
            Q = cim[u]
            if not np.all(np.isfinite(Q)):
                out.append(Violation("non-finite-rate", i, u))
                continue
            for a in range(d):
                for b in range(d):
                    if a != b and Q[a, b] < 0:
                        out.append(Violation("negative-rate", i, u, a, b, f"q={Q[a, b]:g}"))
                s = Q[a].sum()
                if abs(s) > tol:
                    out.append(Violation("row-sum", i, u, a, detail=f"sum={s:g}"))
        p0 = model.initial[i]
        if not np.all(np.isfinite(p0)) or np.any(p0 < 0):
            out.append(Violation("initial-negative", i))
        elif abs(p0.sum() - 1.0) > tol:
            out.append(Violation("initial-sum", i, detail=f"sum={p0.sum():g}"))
    return ValidationReport(out)


def check_model(model: CTBNModel) -> CTBNModel:
    report = validate_model(model)
    if not report.ok:
        raise ModelValidationError(report)
    return model


def _check_component(model: CTBNModel, i: int):
    if not 0 <= i < model.M:
        raise IndexError(f"component {i} out of range for a {model.M}-component model")


def parent_projection(model: CTBNModel, i: int, a: Sequence[int]) -> tuple[int, ...]:
    """Sub-assignment of the joint state ``a`` on the parents of ``i``."""
    _check_component(model, i)
    return tuple(int(a[p]) for p in model.parents[i])


def markov_blanket(model: CTBNModel, i: int) -> set[int]:
    """Parents, children and the children's other parents of ``i``."""
    _check_component(model, i)
    return set(model.blankets[i])


def joint_states(model: CTBNModel) -> np.ndarray:
    """All joint assignments, shape (prod d_i, M), in row-major order."""
    grids = np.indices(model.state_sizes).reshape(model.M, -1)
    return grids.T.copy()


def joint_index(model: CTBNModel, a: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(int(x) for x in a), model.state_sizes))


@dataclass(frozen=True)
class TransitionPairs:
    """Off-diagonal joint transitions: joint rows/cols, rate, and which
    (component, parent configuration, from, to) each one belongs to."""

    rows: np.ndarray
    cols: np.ndarray
    rates: np.ndarray
    component: np.ndarray
    parent_config: np.ndarray
    from_state: np.ndarray
    to_state: np.ndarray


def transition_pairs(model: CTBNModel, cap: int = DEFAULT_STATE_CAP) -> TransitionPairs:
    """Enumerate single-component joint transitions (zero rates included)."""
    S = model.n_joint_states
    if S > cap:
        raise StateSpaceTooLarge(f"joint state space {S} exceeds cap {cap}")
    states = joint_states(model)
    rows = np.arange(S)
    sizes = np.asarray(model.state_sizes)
    place = np.ones(model.M, dtype=np.int64)
    for k in range(model.M - 2, -1, -1):
        place[k] = place[k + 1] * sizes[k + 1]
    parts = []
    for i in range(model.M):
        ps = list(model.parents[i])
        u = states[:, ps] @ model.parent_strides(i) if ps else np.zeros(S, dtype=np.int64)
        a = states[:, i]
        for b in range(sizes[i]):
            sel = a != b
            r = rows[sel]
            parts.append((r, r + (b - a[sel]) * place[i], model.cims[i][u[sel], a[sel], b],
                          np.full(r.size, i), u[sel], a[sel], np.full(r.size, b)))
    cat = [np.concatenate([p[k] for p in parts]) if parts else np.zeros(0, np.int64)
           for k in range(7)]
    ints = [c.astype(np.int64) for c in cat]
    return TransitionPairs(ints[0], ints[1], cat[2].astype(np.float64), *ints[3:])


def amalgamate(model: CTBNModel, cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
    """Joint rate matrix over the product state space (row-major joint index)."""
    tp = transition_pairs(model, cap)
    S = model.n_joint_states
    Q = np.zeros((S, S))
    Q[tp.rows, tp.cols] = tp.rates
    Q[np.diag_indices(S)] = joint_diagonal(model)
    return Q


def joint_diagonal(model: CTBNModel) -> np.ndarray:
    """Diagonal of the joint rate matrix: sum of each component's own diagonal rate."""
    states = joint_states(model)
    diag = np.zeros(len(states))
    for i in range(model.M):
        ps = list(model.parents[i])
        u = states[:, ps] @ model.parent_strides(i) if ps else np.zeros(len(states), dtype=np.int64)
        diag += model.cims[i][u, states[:, i], states[:, i]]
    return diag


# ---------------------------------------------------------------------------
# file format


def model_to_dict(model: CTBNModel) -> dict:
    return {
        "state_sizes": list(model.state_sizes),
        "parents": [list(p) for p in model.parents],
        "cims": [c.tolist() for c in model.cims],
        "initial": [p.tolist() for p in model.initial],
    }


def model_from_dict(doc: dict) -> CTBNModel:
    sizes = [int(d) for d in doc["state_sizes"]]
    parents = [list(p) for p in doc.get("parents", [[] for _ in sizes])]
    cims = [np.asarray(c, dtype=float).reshape(-1, d, d) for c, d in zip(doc["cims"], sizes)]
    if "initial" in doc:
        initial = [np.asarray(p, dtype=float) for p in doc["initial"]]
    else:
        initial = [np.full(d, 1.0 / d) for d in sizes]
    return CTBNModel(tuple(sizes), tuple(tuple(p) for p in parents), tuple(cims), tuple(initial))


def load_model(path, validate: bool = True) -> CTBNModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    try:
        model = model_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model ({exc!r})") from exc
    return check_model(model) if validate else model


def save_model(model: CTBNModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))
