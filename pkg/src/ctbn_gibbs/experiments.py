"""Convergence experiments: error curves against exact or long-run statistics.

Every experiment is driven by a JSON config and writes one CSV. Chains get
independent RNG streams spawned from the config seed and are merged in
chain-index order, so a config and seed determine the output exactly
(wall-clock columns aside).
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .exact import DEFAULT_GRID, exact_sufficient_stats
from .model import DEFAULT_STATE_CAP, CTBNModel, load_model
from .networks import generate_chain_network, halving_chain_network, make_evidence, sharpen
from .sampler import GibbsChain
from .stats import (DEFAULT_THRESHOLD, SufficientStats, accumulate_flat, average_relative_error,
                    log_likelihood)
from .trajectory import Evidence, load_evidence


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    network: dict = field(default_factory=lambda: {"generator": "chain", "N": 5})
    evidence: Any = "e1"
    T: float = 3.0
    chains: int = 20
    burn_in: list = field(default_factory=lambda: [0, 10, 100])
    samples: list = field(default_factory=lambda: [10, 100, 1000])
    thinning: int = 1
    seed: int = 0
    output: str = "experiment.csv"
    grid: int = DEFAULT_GRID
    cap: int = DEFAULT_STATE_CAP
    threshold: float = DEFAULT_THRESHOLD
    components: list | None = None
    order: str = "systematic"
    workers: int = 1
    reference_sweeps: int = 10_000
    reference_chains: int = 10
    reference_samples: int = 10
    reference_spacing: int = 1000
    evidence_sets: list = field(default_factory=lambda: ["e1", "e2", "e3", "e4", "e5"])
    alphas: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    sizes: list = field(default_factory=lambda: [5, 10, 20])
    iterations: int = 50

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigError("T must be positive")
        for name in ("chains", "thinning", "grid", "reference_chains", "reference_samples",
                     "reference_spacing", "iterations", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        self.burn_in = sorted({int(b) for b in np.atleast_1d(self.burn_in)})
        self.samples = sorted({int(n) for n in np.atleast_1d(self.samples)})
        if not self.burn_in or min(self.burn_in) < 0:
            raise ConfigError("burn_in must be a nonempty list of nonnegative sweep counts")
        if not self.samples or min(self.samples) < 1:
            raise ConfigError("samples must be a nonempty list of positive counts")
        if self.order not in ("systematic", "random"):
            raise ConfigError("order must be 'systematic' or 'random'")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)


# ---------------------------------------------------------------------------
# building blocks


def build_network(spec: dict, base_dir: Path | None = None) -> CTBNModel:
    spec = dict(spec)
    if "file" in spec:
        path = Path(spec["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_model(path)
    kind = spec.pop("generator", "chain")
    try:
        if kind == "chain":
            return generate_chain_network(**spec)
        if kind == "halving":
            return halving_chain_network(**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for generator {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown network generator {kind!r}")


def build_evidence(spec, model: CTBNModel, T: float, seed: int,
                   base_dir: Path | None = None) -> Evidence:
    if isinstance(spec, str):
        spec = {"name": spec}
    if "file" in spec:
        path = Path(spec["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_evidence(path, T)
    rng = np.random.default_rng(spec.get("seed", seed))
    return make_evidence(spec["name"], model, T, rng)


def chain_seeds(seed: int, n: int, stream: int = 0) -> list[np.random.SeedSequence]:
    """Independent per-chain seed sequences; ``stream`` separates uses of one seed."""
    return np.random.SeedSequence([int(seed), int(stream)]).spawn(n)


def _per_chain_counts(n: int, chains: int) -> np.ndarray:
    """Samples drawn from each chain when n samples are spread over the chains."""
    return n // chains + (np.arange(chains) < n % chains)


@dataclass
class ChainTask:
    model: CTBNModel
    evidence: Evidence
    seed: np.random.SeedSequence
    burn_in: Sequence[int]
    checkpoints: Sequence[int]
    thinning: int
    order: str = "systematic"


def _run_task(task: ChainTask) -> dict:
    """Prefix sums of sampled statistics for every (burn-in, per-chain count)."""
    rng = np.random.default_rng(task.seed)
    chain = GibbsChain(task.model, task.evidence, rng, order=task.order)
    k_max = max(task.checkpoints, default=0)
    if k_max == 0:
        return {b: {0: (0.0, 0.0)} for b in task.burn_in}
    wanted = set(task.checkpoints)
    sums = {b: None for b in task.burn_in}
    ll = {b: 0.0 for b in task.burn_in}
    counts = {b: 0 for b in task.burn_in}
    out = {b: {0: (0.0, 0.0)} for b in task.burn_in}
    last = max(task.burn_in) + task.thinning * k_max
    for s in range(1, last + 1):
        chain.sweep()
        due = [b for b in task.burn_in
               if s > b and (s - b) % task.thinning == 0 and counts[b] < k_max]
        if not due:
            continue
        res, trn = accumulate_flat(task.model, chain.joint)
        flat = np.concatenate([res, trn])
        st = None
        for b in due:
            sums[b] = flat.copy() if sums[b] is None else sums[b] + flat
            if st is None:
                st = SufficientStats.from_flat(task.model, res, trn)
                lik = log_likelihood(task.model, st)
            ll[b] += lik
            counts[b] += 1
            if counts[b] in wanted:
                out[b][counts[b]] = (sums[b].copy(), ll[b])
    return out


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class ErrorCurve:
    """Estimated statistics for every (burn-in, total sample count)."""

    estimates: dict
    log_likelihood: dict


def sample_curves(model: CTBNModel, evidence: Evidence, chains: int, burn_in: Sequence[int],
                  samples: Sequence[int], thinning: int, seed: int, order: str = "systematic",
                  workers: int = 1, stream: int = 0) -> ErrorCurve:
    """Run ``chains`` chains once and read off estimates for every burn-in and n.

    The n samples for a given burn-in are spread over the chains as evenly
    as possible (lower chain indices take the remainder); each chain
    contributes its first samples after the burn-in.
    """
    per_chain = {n: _per_chain_counts(n, chains) for n in samples}
    checkpoints = sorted({int(k) for ks in per_chain.values() for k in ks} - {0})
    tasks = [ChainTask(model, evidence, s, list(burn_in), checkpoints, thinning, order)
             for s in chain_seeds(seed, chains, stream)]
    results = _map(_run_task, tasks, workers)
    p = model.pack
    n_res = int(p.res_off[-1])
    estimates, lls = {}, {}
    for b in burn_in:
        for n in samples:
            total, ll = 0.0, 0.0
            for c, k in enumerate(per_chain[n]):
                s, l = results[c][b][int(k)]
                total = total + s
                ll += l
            flat = np.asarray(total) / n
            estimates[(b, n)] = SufficientStats.from_flat(model, flat[:n_res], flat[n_res:])
            lls[(b, n)] = ll / n
    return ErrorCurve(estimates, lls)


def reference_stats(model: CTBNModel, evidence: Evidence, cfg: ExperimentConfig
                    ) -> tuple[SufficientStats, str]:
    """Exact statistics when the joint space fits under the cap, else a long run."""
    if model.n_joint_states <= cfg.cap:
        return (exact_sufficient_stats(model, evidence, grid_n=cfg.grid, cap=cfg.cap),
                f"truth=exact grid={cfg.grid}")
    n = cfg.reference_chains * cfg.reference_samples
    curve = sample_curves(model, evidence, cfg.reference_chains,
                          [max(0, cfg.reference_sweeps - cfg.reference_spacing)], [n],
                          cfg.reference_spacing, cfg.seed, cfg.order, cfg.workers, stream=1)
    est = next(iter(curve.estimates.values()))
    return est, (f"truth=reference chains={cfg.reference_chains} sweeps={cfg.reference_sweeps} "
                 f"samples_per_chain={cfg.reference_samples} spacing={cfg.reference_spacing}")


def _write_csv(path, header: Sequence[str], columns: Sequence[str], rows) -> None:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _err(est, truth, cfg, components=None):
    comps = cfg.components if components is None else components
    return average_relative_error(est, truth, cfg.threshold, comps)


# ---------------------------------------------------------------------------
# experiments


def error_vs_samples(cfg: ExperimentConfig, base_dir: Path | None = None) -> list[tuple]:
    model = build_network(cfg.network, base_dir)
    ev = build_evidence(cfg.evidence, model, cfg.T, cfg.seed, base_dir)
    truth, how = reference_stats(model, ev, cfg)
    curve = sample_curves(model, ev, cfg.chains, cfg.burn_in, cfg.samples, cfg.thinning,
                          cfg.seed, cfg.order, cfg.workers)
    rows = [(b, n, _err(curve.estimates[(b, n)], truth, cfg))
            for b in cfg.burn_in for n in cfg.samples]
    _write_csv(cfg.output, ["experiment=error-vs-samples", how, f"seed={cfg.seed}",
                            f"chains={cfg.chains} thinning={cfg.thinning}"],
               ["burn_in", "n_samples", "relative_error"], rows)
    return rows


def error_vs_burnin(cfg: ExperimentConfig, base_dir: Path | None = None) -> list[tuple]:
    model = build_network(cfg.network, base_dir)
    n = max(cfg.samples)
    rows, header = [], ["experiment=error-vs-burnin", f"seed={cfg.seed}",
                        f"chains={cfg.chains} thinning={cfg.thinning} n_samples={n}"]
    for name in cfg.evidence_sets:
        ev = build_evidence(name, model, cfg.T, cfg.seed, base_dir)
        truth, how = reference_stats(model, ev, cfg)
        header.append(f"{name}: {how}")
        curve = sample_curves(model, ev, cfg.chains, cfg.burn_in, [n], cfg.thinning, cfg.seed,
                              cfg.order, cfg.workers)
        label = name if isinstance(name, str) else json.dumps(name, sort_keys=True)
        for b in cfg.burn_in:
            rows.append((label, b, _err(curve.estimates[(b, n)], truth, cfg),
                         curve.log_likelihood[(b, n)]))
    _write_csv(cfg.output, header, ["evidence", "burn_in", "relative_error", "log_likelihood"],
               rows)
    return rows


def sharpness(cfg: ExperimentConfig, base_dir: Path | None = None) -> list[tuple]:
    base = build_network(cfg.network, base_dir)
    n = max(cfg.samples)
    rows, header = [], ["experiment=sharpness", f"seed={cfg.seed}",
                        f"chains={cfg.chains} thinning={cfg.thinning} n_samples={n}"]
    for alpha in cfg.alphas:
        model = sharpen(base, float(alpha))
        ev = build_evidence(cfg.evidence, model, cfg.T, cfg.seed, base_dir)
        truth, how = reference_stats(model, ev, cfg)
        header.append(f"alpha={alpha}: {how}")
        curve = sample_curves(model, ev, cfg.chains, cfg.burn_in, [n], cfg.thinning, cfg.seed,
                              cfg.order, cfg.workers)
        rows += [(float(alpha), b, _err(curve.estimates[(b, n)], truth, cfg))
                 for b in cfg.burn_in]
    _write_csv(cfg.output, header, ["alpha", "burn_in", "relative_error"], rows)
    return rows


def scaling(cfg: ExperimentConfig, base_dir: Path | None = None) -> list[tuple]:
    """Error on the first five components for chains of increasing length.

    The seconds_per_sweep column is wall-clock time and is not deterministic.
    """
    n = max(cfg.samples)
    rows, header = [], ["experiment=scaling", f"seed={cfg.seed}",
                        f"chains={cfg.chains} thinning={cfg.thinning} n_samples={n}",
                        "seconds_per_sweep is wall-clock and varies between runs"]
    for N in cfg.sizes:
        spec = dict(cfg.network)
        spec["N"] = int(N)
        model = build_network(spec, base_dir)
        ev = build_evidence(cfg.evidence, model, cfg.T, cfg.seed, base_dir)
        truth, how = reference_stats(model, ev, cfg)
        header.append(f"N={N}: {how}")
        comps = list(range(min(5, model.M))) if cfg.components is None else cfg.components
        t0 = time.perf_counter()
        curve = sample_curves(model, ev, cfg.chains, cfg.burn_in, [n], cfg.thinning, cfg.seed,
                              cfg.order, cfg.workers)
        sweeps = cfg.chains * (max(cfg.burn_in) + cfg.thinning * math.ceil(n / cfg.chains))
        per_sweep = (time.perf_counter() - t0) / sweeps
        rows += [(int(N), b, _err(curve.estimates[(b, n)], truth, cfg, comps), per_sweep)
                 for b in cfg.burn_in]
    _write_csv(cfg.output, header, ["N", "burn_in", "relative_error", "seconds_per_sweep"], rows)
    return rows


def blanket_intervals(model: CTBNModel, joint) -> np.ndarray:
    """Number of segments the Markov blanket cuts each component's horizon into."""
    out = np.empty(model.M, dtype=np.int64)
    for i in range(model.M):
        times = set()
        for j in model.blankets[i]:
            times.update(joint[j].times.tolist())
        out[i] = len(times) + 1
    return out


def timescale_traces(model: CTBNModel, evidence: Evidence, chains: int, iterations: int,
                     seed: int, order: str = "systematic") -> tuple[np.ndarray, np.ndarray]:
    """Mean transitions and mean blanket intervals per component after each sweep.

    Both arrays have shape (iterations + 1, M); row 0 describes the initial paths.
    """
    trans = np.zeros((iterations + 1, model.M))
    ivals = np.zeros((iterations + 1, model.M))
    for s in chain_seeds(seed, chains):
        chain = GibbsChain(model, evidence, np.random.default_rng(s), order=order)
        for it in range(iterations + 1):
            if it:
                chain.sweep()
            joint = chain.joint
            trans[it] += [c.n_transitions for c in joint.components]
            ivals[it] += blanket_intervals(model, joint)
    return trans / chains, ivals / chains


def timescale(cfg: ExperimentConfig, base_dir: Path | None = None) -> list[tuple]:
    spec = dict(cfg.network)
    spec.setdefault("generator", "halving")
    model = build_network(spec, base_dir)
    ev = build_evidence(cfg.evidence, model, cfg.T, cfg.seed, base_dir)
    trans, ivals = timescale_traces(model, ev, cfg.chains, cfg.iterations, cfg.seed, cfg.order)
    exit_rates = [float(-np.diagonal(c, axis1=1, axis2=2).mean()) for c in model.cims]
    rows = [(it, i, trans[it, i], ivals[it, i], exit_rates[i] * cfg.T)
            for it in range(cfg.iterations + 1) for i in range(model.M)]
    _write_csv(cfg.output, ["experiment=timescale", f"seed={cfg.seed}", f"chains={cfg.chains}",
                            "expected_transitions = mean exit rate * T (exact for uniform exit rates)"],
               ["iteration", "component", "mean_transitions", "mean_blanket_intervals",
                "expected_transitions"], rows)
    return rows


EXPERIMENTS = {
    "error-vs-samples": error_vs_samples,
    "error-vs-burnin": error_vs_burnin,
    "sharpness": sharpness,
    "scaling": scaling,
    "timescale": timescale,
}


def run_experiment(name: str, cfg: ExperimentConfig, base_dir: Path | None = None):
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    return fn(cfg, base_dir)
