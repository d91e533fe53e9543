"""Compare the compiled run loops with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--reps N]

Each case times the same replications (identical streams) on both backends
and checks that they select the same alternatives.
"""

import argparse
import time

import numpy as np

from bizsel import HAVE_COMPILED
from bizsel.biz_core import BizParams
from bizsel.continuous import BrownianOracleConfig
from bizsel.harness import estimate_oracle_pcs, estimate_pcs
from bizsel.problem import ProblemFamily


def discrete_cases():
    fam = ProblemFamily.slippage([1.0] * 10)
    yield "k=10 known, delta=0.5", lambda b, n: estimate_pcs(
        fam.at(0.5), BizParams(k=10, p_star=0.9, delta=0.5, variances=fam.variances), n, 1, backend=b)

    fam5 = ProblemFamily.slippage(list(np.linspace(1.0, 0.25, 5)))
    yield "k=5 known, delta=0.1", lambda b, n: estimate_pcs(
        fam5.at(0.1), BizParams(k=5, p_star=0.9, delta=0.1, variances=fam5.variances), n, 2, backend=b)

    yield "k=10 unknown n0=15, delta=0.5", lambda b, n: estimate_pcs(
        fam.at(0.5), BizParams(k=10, p_star=0.9, delta=0.5, n0=15), n, 3, backend=b)

    cfg = BrownianOracleConfig((0.0, 0.0, 1.0), dt=1e-3)
    yield "oracle k=3, dt=1e-3", lambda b, n: estimate_oracle_pcs(cfg, n, 4, backend=b)


def timed(fn):
    t0 = time.perf_counter()
    res = fn()
    return time.perf_counter() - t0, res


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()
    if not HAVE_COMPILED:
        raise SystemExit("compiled kernels are not built; reinstall with Cython available")
    print(f"{'case':34s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}  pcs")
    for name, run in discrete_cases():
        tp, rp = timed(lambda: run("python", args.reps))
        tc, rc = timed(lambda: run("compiled", args.reps))
        if rp != rc:
            raise SystemExit(f"{name}: backends disagree: {rp} vs {rc}")
        print(f"{name:34s} {tp:10.3f} {tc:11.3f} {tp / tc:7.1f}x  {rc.pcs:.3f}")


if __name__ == "__main__":
    main()
