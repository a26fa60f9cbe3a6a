"""Compare the compiled and pure-Python quadrature kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints wall time per call for each kernel and backend, plus the largest
absolute disagreement between the two backends.
"""

import argparse
import timeit

import numpy as np

from ordermask._kernels import _quad_py

try:
    from ordermask._kernels import _quad
except ImportError:
    _quad = None


def cases(rng):
    yield "order_prob L=2", "order_prob", ([1.0, 2.0], 1e-8)
    yield "order_prob L=3", "order_prob", (rng.uniform(0.5, 2.0, 3).tolist(), 1e-8)
    yield "order_prob L=4", "order_prob", (rng.uniform(0.5, 2.0, 4).tolist(), 1e-8)
    w = rng.uniform(0.5, 2.0, 6)
    yield "subset_weight L=6", "subset_weight", (w[0], w[1:3].tolist(), w[3:].tolist(), 0.0, 1e-10)
    w = rng.uniform(0.05, 4.0, 12)
    yield "subset_weight L=12", "subset_weight", (w[0], w[1:6].tolist(), w[6:].tolist(), 1e-4, 1e-10)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = {"python": _quad_py}
    if _quad is not None:
        backends["cython"] = _quad
    else:
        print("compiled kernels not built; timing the fallback only")

    print(f"{'case':<22}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}{'max |diff|':>13}")
    for label, name, call_args in cases(np.random.default_rng(args.seed)):
        times, values = {}, {}
        for b, mod in backends.items():
            fn = getattr(mod, name)
            values[b] = fn(*call_args)
            n = 1
            while timeit.timeit(lambda: fn(*call_args), number=n) < 0.2 and n < 10_000:
                n *= 2
            times[b] = min(timeit.repeat(lambda: fn(*call_args), number=n, repeat=args.repeat)) / n
        row = f"{label:<22}" + "".join(f"{times[b] * 1e6:>12.1f}us" for b in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x{abs(values['python'] - values['cython']):>13.2e}"
        print(row)


if __name__ == "__main__":
    main()
