"""Compare the compiled and pure-Python simplex kernels.

Workloads: the per-draw demand-bound LPs of the three-budget pricing
example, and random dense LPs. Both backends must return identical
solutions; the script reports wall time per solve.

    python3 benchmarks/bench_simplex.py --draws 2000 --random 300
"""
import argparse
import time

import numpy as np

from pidecision.lp import LinearProgram, available_backends, solve
from pidecision.posterior import MultinomialPosterior, sample_dirichlet
from pidecision.pricing import _bound_lps, load_demand
from pidecision.checks import DATA


def pricing_lps(draws, seed):
    problem = load_demand(DATA / "three_budget_demand.json")
    post = [MultinomialPosterior(problem.counts[b]) for b in problem.model.observed]
    P = sample_dirichlet(post, draws, seed).draws
    out = []
    for d, f in problem.functionals.items():
        eq, c_lo, c_hi = _bound_lps(problem.model, f, d)
        for p in P:
            rhs = np.append(p, 1.0)
            out.append(LinearProgram(c_lo, eq, rhs, "min"))
            out.append(LinearProgram(c_hi, eq, rhs, "max"))
    return out


def random_lps(count, seed, m=12, n=40):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        A = rng.uniform(-1, 1, (m, n))
        x = rng.uniform(0, 1, n) * (rng.random(n) < 0.4)
        out.append(LinearProgram(rng.uniform(0, 1, n), A, A @ x))
    return out


def run(lps, backend):
    t0 = time.perf_counter()
    sols = [solve(lp, backend=backend) for lp in lps]
    return time.perf_counter() - t0, sols


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=2000)
    ap.add_argument("--random", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    for label, lps in [("pricing", pricing_lps(args.draws, args.seed)),
                       ("random 12x40", random_lps(args.random, args.seed))]:
        times, sols = {}, {}
        for b in backends:
            times[b], sols[b] = run(lps, b)
        same = all(
            s.status == r.status and np.array_equal(s.point, r.point, equal_nan=True)
            for b in backends for s, r in zip(sols[b], sols[backends[0]])
        )
        row = "  ".join(f"{b}: {1e6 * times[b] / len(lps):8.1f} us/solve" for b in backends)
        speedup = ""
        if "compiled" in times and "python" in times:
            speedup = f"  speedup x{times['python'] / times['compiled']:.2f}"
        print(f"{label:>13} ({len(lps)} LPs)  {row}{speedup}  identical={same}")


if __name__ == "__main__":
    main()
