"""Command-line entry point: ``ctbn validate|sample|exact|experiment``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .exact import DEFAULT_GRID, exact_sufficient_stats
from .experiments import (EXPERIMENTS, ConfigError, ExperimentConfig, _map, chain_seeds,
                          run_experiment)
from .model import (DEFAULT_STATE_CAP, ModelFormatError, ModelValidationError, StateSpaceTooLarge, load_model,
                    validate_model)
from .sampler import run_chain
from .stats import accumulate_stats, mean_stats, write_stats_csv
from .trajectory import (EvidenceError, ZeroProbabilityEvidence, load_evidence,
                         write_trajectories_csv)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_ZERO_PROBABILITY = 3


def _cmd_validate(args) -> int:
    model = load_model(args.model, validate=False)
    report = validate_model(model)
    if report.ok:
        print(f"{args.model}: ok ({model.M} components, {model.n_joint_states} joint states)")
        return EXIT_OK
    for v in report.violations:
        print(f"{args.model}: {v}")
    return EXIT_INVALID


def _sample_one(job):
    model, evidence, seed, burn_in, n, thin, order = job
    return run_chain(model, evidence, burn_in, n, thin, np.random.default_rng(seed), order)


def _cmd_sample(args) -> int:
    model = load_model(args.model)
    evidence = load_evidence(args.evidence, args.T)
    evidence.validate(model.state_sizes)
    jobs = [(model, evidence, s, args.burnin, args.samples, args.thin, args.order)
            for s in chain_seeds(args.seed, args.chains)]
    runs = _map(_sample_one, jobs, args.workers)
    rows = [(c, k, joint) for c, run in enumerate(runs) for k, joint in enumerate(run)]
    write_trajectories_csv(args.out, rows, evidence.T, args.seed)
    if args.stats:
        est = mean_stats(accumulate_stats(model, j) for _, _, j in rows)
        write_stats_csv(args.stats, est, [f"estimate=gibbs chains={args.chains} "
                                          f"burn_in={args.burnin} samples={args.samples} "
                                          f"thinning={args.thin} seed={args.seed}"])
    print(f"wrote {len(rows)} trajectories to {args.out}")
    return EXIT_OK


def _cmd_exact(args) -> int:
    model = load_model(args.model)
    evidence = load_evidence(args.evidence, args.T)
    stats = exact_sufficient_stats(model, evidence, grid_n=args.grid, cap=args.cap)
    out = args.out if args.out else sys.stdout
    write_stats_csv(out, stats, [f"estimate=exact grid={args.grid} T={evidence.T}"])
    return EXIT_OK


def _cmd_experiment(args) -> int:
    cfg_path = Path(args.config)
    cfg = ExperimentConfig.load(cfg_path)
    if args.output:
        cfg.output = args.output
    elif not Path(cfg.output).is_absolute():
        cfg.output = str(cfg_path.parent / cfg.output)
    run_experiment(args.name, cfg, cfg_path.parent)
    print(f"wrote {cfg.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctbn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("model")
    v.set_defaults(func=_cmd_validate)

    s = sub.add_parser("sample", help="run Gibbs chains and dump trajectories")
    s.add_argument("model")
    s.add_argument("evidence")
    s.add_argument("--T", type=float, default=None, help="horizon (default: from evidence file)")
    s.add_argument("--chains", type=int, default=1)
    s.add_argument("--burnin", type=int, default=100)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--thin", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--order", choices=("systematic", "random"), default="systematic")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True, help="trajectory CSV")
    s.add_argument("--stats", help="also write mean sufficient statistics to this CSV")
    s.set_defaults(func=_cmd_sample)

    e = sub.add_parser("exact", help="exact expected sufficient statistics")
    e.add_argument("model")
    e.add_argument("evidence")
    e.add_argument("--T", type=float, default=None)
    e.add_argument("--grid", type=int, default=DEFAULT_GRID)
    e.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP)
    e.add_argument("--out", help="stats CSV (default: stdout)")
    e.set_defaults(func=_cmd_exact)

    x = sub.add_parser("experiment", help="run a convergence experiment")
    x.add_argument("name", choices=sorted(EXPERIMENTS))
    x.add_argument("--config", required=True)
    x.add_argument("--output", help="override the config's output path")
    x.set_defaults(func=_cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("chains", "samples", "thin", "workers", "grid"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            print(f"ctbn: --{name} must be positive", file=sys.stderr)
            return EXIT_ERROR
    if getattr(args, "burnin", 0) < 0:
        print("ctbn: --burnin must be nonnegative", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except ModelValidationError as exc:
        print(f"ctbn: invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ModelFormatError, EvidenceError, ConfigError, StateSpaceTooLarge) as exc:
        print(f"ctbn: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ZeroProbabilityEvidence as exc:
        print(f"ctbn: zero-probability evidence: {exc}", file=sys.stderr)
        return EXIT_ZERO_PROBABILITY
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"ctbn: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
