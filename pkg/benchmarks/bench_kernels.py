"""Compare the compiled and pure-Python causal kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each row reports the best-of-``repeat`` time for both backends and the
largest absolute difference between their results.
"""
import argparse
import json
import timeit

import numpy as np

from semipert import _kernels_py

try:
    from semipert import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

CASES = [(64, 1), (256, 2), (512, 4), (256, 16), (128, 32)]  # (steps m, block size)


def _bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def run(repeat=5, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for m, d in CASES:
        K = rng.standard_normal((m, d, d)) / (m * d)
        K[0] = 0.0
        U = rng.standard_normal((m, d, 1))
        ops = {
            "causal_convolve": (K, U),
            "convolve_kernels": (K, K),
            "causal_inverse_kernels": (K,),
        }
        for name, args in ops.items():
            py = getattr(_kernels_py, name)
            row = {"op": name, "m": m, "block": d, "python_s": _bench(py, args, repeat)}
            if _compiled is not None:
                cy = getattr(_compiled, name)
                row["compiled_s"] = _bench(cy, args, repeat)
                row["speedup"] = row["python_s"] / row["compiled_s"]
                row["max_abs_diff"] = float(np.abs(np.asarray(cy(*args)) - py(*args)).max())
            rows.append(row)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write the rows as JSON")
    args = ap.parse_args()
    rows = run(args.repeat)
    if _compiled is None:
        print("compiled backend not built; timing the python backend only")
    print(f"{'op':24s} {'m':>5s} {'block':>5s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s} {'diff':>9s}")
    for r in rows:
        cy = r.get("compiled_s")
        print(f"{r['op']:24s} {r['m']:5d} {r['block']:5d} {1e3 * r['python_s']:12.3f} "
              f"{'' if cy is None else f'{1e3 * cy:14.3f}':>14s} {r.get('speedup', float('nan')):8.2f} "
              f"{r.get('max_abs_diff', float('nan')):9.1e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
