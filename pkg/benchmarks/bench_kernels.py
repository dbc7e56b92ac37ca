"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--size small|large]
"""

import argparse
import timeit

import numpy as np

from robustalloc import kernels

SIZES = {
    "small": {"scenarios": 2_000, "agents": 3, "grid": (12, 12, 12), "lp": (20, 40)},
    "large": {"scenarios": 200_000, "agents": 4, "grid": (30, 30, 30), "lp": (60, 120)},
}


def fam_case(rng, cfg):
    scen = rng.uniform(0.0, 10.0, size=(cfg["scenarios"], cfg["agents"]))
    costs = rng.uniform(0.5, 2.0, size=cfg["agents"])
    return lambda k: k.tabulate_fam(scen, costs, 0, 4.0, True, 1e-12)


def extrema_case(rng, cfg):
    shape = cfg["grid"]
    size = int(np.prod(shape))
    a, b = rng.uniform(size=size), rng.uniform(size=size)
    return lambda k: [k.line_extrema(a, b, shape, axis) for axis in range(len(shape))]


def simplex_case(rng, cfg):
    m, n = cfg["lp"]
    A = rng.uniform(0.1, 2.0, size=(m, n))
    T0 = np.zeros((m + 1, n + m + 1))
    T0[:m, :n] = A
    T0[:m, n : n + m] = np.eye(m)
    T0[:m, -1] = rng.uniform(1.0, 5.0, size=m)
    T0[m, :n] = -rng.uniform(0.0, 1.0, size=n)
    b0 = np.arange(n, n + m, dtype=np.intp)

    def run(k):
        T, basis = T0.copy(), b0.copy()
        return k.simplex(T, basis, n + m, k.BLAND, 10_000, 1e-9, 1e-7)

    return run


CASES = {"tabulate_fam": fam_case, "line_extrema": extrema_case, "simplex": simplex_case}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", choices=sorted(SIZES), default="small")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    found = kernels.backends()
    if "cython" not in found:
        print("compiled extension not built; timing the numpy fallback only")
    cfg = SIZES[args.size]
    print(f"{'kernel':<14}" + "".join(f"{name:>14}" for name in found) + ("     speed-up" if len(found) > 1 else ""))
    for name, build in CASES.items():
        fn = build(np.random.default_rng(args.seed), cfg)
        best = {}
        for backend, mod in found.items():
            fn(mod)  # warm-up
            best[backend] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{name:<14}" + "".join(f"{best[b] * 1e3:>12.2f}ms" for b in found)
        if len(found) > 1:
            row += f"{best['python'] / best['cython']:>12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
