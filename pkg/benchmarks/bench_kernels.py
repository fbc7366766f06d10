"""Time the compiled kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read once
at import time.  Usage: ``python benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKLOAD = r"""
import json, sys, time
import numpy as np
from edgemargin import USE_NUMBA, generators, kernels, numerics, robustness
from edgemargin.dynamics import simulate

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
graphs = [generators.random_graph(rng, kind, n_range=(6, 12), m_max=30) for kind in generators.KINDS * 3]
ctxs = [robustness.analyze(g) for g in graphs]
mats = [rng.normal(size=(24, 24)) for _ in range(10)]

def warm():
    sys_ = robustness.build_uncertain_system(ctxs[0].fac, 0)
    robustness.gain_margin(sys_)
    simulate(graphs[0], np.arange(graphs[0].n, dtype=float), t_end=0.1, ctx=ctxs[0])
    numerics.eigenvalues(mats[0])

def best(fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

def eig():
    for a in mats:
        numerics.eigenvalues(a)

def margins():
    for g, ctx in zip(graphs, ctxs):
        robustness.gain_margin(robustness.build_uncertain_system(ctx.fac, g.m - 1))

def sims():
    for g, ctx in zip(graphs[:6], ctxs[:6]):
        simulate(g, np.arange(g.n, dtype=float), t_end=20.0, ctx=ctx)

t0 = time.perf_counter()
warm()
warmup = time.perf_counter() - t0
print(json.dumps({"numba": USE_NUMBA, "warmup": warmup, "eigenvalues": best(eig),
                  "gain_margin": best(margins), "simulate": best(sims)}))
"""


def run_backend(flag, repeat):
    env = dict(os.environ, EDGEMARGIN_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    t0 = time.perf_counter()
    fast = run_backend("1", args.repeat)
    slow = run_backend("0", args.repeat)
    print(f"{'kernel':<14}{'numba [s]':>12}{'numpy [s]':>12}{'ratio':>9}")
    for key in ("eigenvalues", "gain_margin", "simulate"):
        print(f"{key:<14}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>9.1f}")
    print(f"{'warm-up':<14}{fast['warmup']:>12.4f}{slow['warmup']:>12.4f}")
    print(f"total wall time {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
