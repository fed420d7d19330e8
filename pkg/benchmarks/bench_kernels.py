"""Compare the numba and numpy element kernels on representative batch sizes.

Run with ``python3 benchmarks/bench_kernels.py``.  The first numba call is
excluded from timing (compilation).
"""
import argparse
import timeit

import numpy as np

from rmplate import _kernels as K


def _cases(nc):
    rng = np.random.default_rng(0)
    # (label, n basis functions, quadrature points, components)
    for label, n, nq, k in (("P2 scalar", 6, 12, 1), ("P4 gradient", 15, 33, 2), ("RT2 vector", 8, 16, 2)):
        F = rng.standard_normal((nc, n, nq, k))
        G = rng.standard_normal((nc, n + 3, nq, k))
        w = rng.random((nc, nq))
        c = rng.standard_normal((nc, n))
        yield label, F, G, w, c


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K._HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    print(f"{'kernel':<12} {'case':<12} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for label, F, G, w, c in _cases(args.cells):
        pairs = (
            ("gram", lambda: K.gram_numpy(F, w), lambda: K.gram_numba(F, w)),
            ("cross_gram", lambda: K.cross_gram_numpy(F, G, w), lambda: K.cross_gram_numba(F, G, w)),
            ("contract", lambda: K.contract_numpy(F, c), lambda: K.contract_numba(F, c)),
        )
        for name, f_np, f_nb in pairs:
            diff = np.max(np.abs(f_np() - f_nb()))
            t_np, t_nb = _best(f_np, args.repeat), _best(f_nb, args.repeat)
            print(f"{name:<12} {label:<12} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f} {diff:10.1e}")


if __name__ == "__main__":
    main()
