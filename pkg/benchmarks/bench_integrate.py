"""Time the compiled and pure-Python integration kernels on the same workloads.

    python3 benchmarks/bench_integrate.py [--repeat 3] [--t-final 200]

Both backends integrate identical systems from identical starts; the script
reports the best wall time per workload and the speedup, and checks that the
final states agree to within the integration tolerance.
"""

import argparse
import time

import numpy as np

from qpstab import kernels
from qpstab.model import from_lotka_volterra, validate_system


def workloads(seed):
    rng = np.random.default_rng(seed)
    pp = from_lotka_volterra([1.0, -1.0], [[0.0, -1.0], [1.0, 0.0]])
    skew = validate_system([2.0, -2.0], [[0.0, -1.0, -1.0], [1.0, 0.0, 1.0]],
                           [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    n, m = 6, 8
    B = rng.uniform(-1.0, 1.0, (m, n))
    K = rng.standard_normal((n, n))
    A = ((K - K.T) - np.eye(n)) @ B.T
    xstar = np.exp(rng.uniform(-0.5, 0.5, n))
    wide = validate_system(-A @ np.exp(B @ np.log(xstar)), A, B)
    return [
        ("predator-prey n=2", pp, np.array([2.0, 1.0])),
        ("skew QP n=2 m=3", skew, np.array([1.5, 0.8])),
        ("dissipative QP n=6 m=8", wide, xstar * np.exp(rng.uniform(-1, 1, n))),
    ]


def time_backend(name, sys, x0, t_final, repeat):
    best = np.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = kernels.dopri5_log(sys.lam, sys.A, sys.B, np.log(x0), t_final,
                                    1e-9, 1e-12, 0.0, 10_000_000, backend=name)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--t-final", type=float, default=200.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    if "compiled" not in names:
        print("compiled extension not available; timing the Python kernel only")
    header = f"{'workload':<26}{'steps':>8}" + "".join(f"{n + ' [s]':>16}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}{'|dx| end':>12}"
    print(header)
    for label, sys, x0 in workloads(args.seed):
        times = {}
        finals = {}
        steps = 0
        for name in names:
            times[name], res = time_backend(name, sys, x0, args.t_final, args.repeat)
            finals[name] = np.exp(res[1][-1])
            steps = res[4]
        row = f"{label:<26}{steps:>8}" + "".join(f"{times[n]:>16.4f}" for n in names)
        if len(names) == 2:
            diff = np.max(np.abs(finals["compiled"] - finals["python"]))
            row += f"{times['python'] / times['compiled']:>9.0f}x{diff:>12.1e}"
        print(row)


if __name__ == "__main__":
    main()
