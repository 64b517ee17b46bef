"""Compare the numba kernels with the plain-numpy fallback.

Each backend runs in its own interpreter because the switch is read at
import time. Compilation is excluded: every workload is warmed up once
before timing.

    python3 benchmarks/bench_kernels.py [--sweeps 20] [--draws 200]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
import ctbn_gibbs
from ctbn_gibbs.networks import generate_chain_network, make_evidence
from ctbn_gibbs.sampler import GibbsChain, sample_component_trajectory
from ctbn_gibbs.stats import accumulate_flat

sweeps, draws = int(sys.argv[1]), int(sys.argv[2])
model = generate_chain_network(5, seed=0)
ev = make_evidence("e1", model, T=3.0)


def timed(fn, n):
    fn()
    t0 = time.perf_counter()
    for _ in range(n):
        fn()
    return (time.perf_counter() - t0) / n


chain = GibbsChain(model, ev, np.random.default_rng(0))
for _ in range(20):
    chain.sweep()
joint = chain.joint
rng = np.random.default_rng(1)
out = {
    "jit": ctbn_gibbs.JIT_ENABLED,
    "gibbs sweep (5 x 5-state chain)": timed(chain.sweep, sweeps),
    "one-component resample": timed(
        lambda: sample_component_trajectory(model, 2, joint, ev, rng), draws),
    "sufficient statistics": timed(lambda: accumulate_flat(model, joint), draws),
}
print(json.dumps(out))
"""


def run(disable_jit, sweeps, draws):
    env = dict(os.environ)
    env.pop("CTBN_GIBBS_DISABLE_JIT", None)
    if disable_jit:
        env["CTBN_GIBBS_DISABLE_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKLOAD, str(sweeps), str(draws)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--draws", type=int, default=200)
    args = ap.parse_args(argv)
    jit = run(False, args.sweeps, args.draws)
    plain = run(True, args.sweeps, args.draws)
    if not jit["jit"]:
        print("warning: numba unavailable, both runs used the fallback")
    print(f"{'workload':34s} {'numba':>12s} {'numpy':>12s} {'speedup':>8s}")
    for key in jit:
        if key == "jit":
            continue
        a, b = jit[key], plain[key]
        print(f"{key:34s} {a * 1e3:10.3f}ms {b * 1e3:10.3f}ms {b / a:7.1f}x")


if __name__ == "__main__":
    main()
