"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from dronenet import _pykernels
from dronenet.generators import random_instance
from dronenet.model import Design
from dronenet.queueing import service_moments
from dronenet.simulator import drone_bases, poisson_requests

try:
    from dronenet import _ckernels
except ImportError:
    _ckernels = None


def search_inputs(seed):
    inst = random_instance(seed, 11, 4, 8, 4, r=4500.0)
    mom = service_moments(inst)
    K = [inst.M] * inst.n_bases
    opts = [list(Ji) for Ji in inst.J]
    ptr = np.cumsum([0] + [len(o) for o in opts]).astype(np.int64)
    idx = np.array([j for o in opts for j in o], dtype=np.int64)
    cap = np.array([inst.steady_cap(k) for k in K])
    return (ptr, idx, inst.lam, mom.s_ij_mean, mom.s_ij_second, inst.d / inst.v,
            np.array(K, dtype=np.int64), cap, 10**9)


def sim_inputs(seed, horizon):
    inst = random_instance(seed, 30, 6, 8, 4, load_per_drone=0.6)
    design = Design.from_counts([2, 2, 2, 2, 0, 0], [0] * 30, 2)
    reqs = poisson_requests(inst, horizon, seed)
    homes = drone_bases(design)
    base = np.array([b.location.ecef for b in inst.bases])[homes]
    dist = np.sqrt(((reqs.ecef[:, None, :] - base[None]) ** 2).sum(axis=2))
    dist = np.ascontiguousarray(np.where(dist <= inst.r, dist, np.inf))
    return (reqs.time, dist, reqs.xi, 10.0, 10.0, inst.v, inst.beta), len(reqs)


def best_of(fn, args, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--horizon", type=float, default=60 * 86400.0)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the Python backend is available")
        return
    cases = [("search_assignments", _pykernels.search_assignments, _ckernels.search_assignments, search_inputs(7))]
    sargs, n = sim_inputs(3, args.horizon)
    cases.append((f"simulate_core ({n} requests)", _pykernels.simulate_core, _ckernels.simulate_core, sargs))
    print(f"{'kernel':<36} {'python s':>10} {'cython s':>10} {'speedup':>8}  same")
    for name, py, cy, inputs in cases:
        tp, op = best_of(py, inputs, args.repeat)
        tc, oc = best_of(cy, inputs, args.repeat)
        same = all(np.array_equal(np.asarray(a), np.asarray(b)) for a, b in zip(op, oc))
        print(f"{name:<36} {tp:>10.4f} {tc:>10.4f} {tp / tc:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
