"""Compare the compiled and pure-Python kernels on whole BRW runs.

    python benchmarks/bench_step.py [--repeat 5]

Both backends draw identical random numbers, so the script also checks that
the runs agree digest for digest before reporting timings.
"""
import argparse
import time

from brwmartin import _backend
from brwmartin.brw import run
from brwmartin.chains import DriftedLine, Lattice3D, RegularTree
from brwmartin.offspring import binomial, table

CASES = [
    ("tree d=3, 20 gens", RegularTree(3), table({0: 0.25, 2: 0.75}), 20, None),
    ("tree d=3, lumped K=2, 30 gens", RegularTree(3), table({0: 0.25, 2: 0.75}), 30, 2),
    ("line p=0.9, 30 gens", DriftedLine(0.9), table({1: 0.8, 2: 0.2}), 30, None),
    ("lattice, 8 gens", Lattice3D(), binomial(4, 0.5), 8, None),
]


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=20, help="replicas per case")
    args = ap.parse_args(argv)
    names = _backend.available()
    print(f"backends: {names}")
    print(f"{'case':34s}" + "".join(f"{n:>12s}" for n in names) + "     speedup")
    for label, chain, mu, n, res in CASES:
        times, digests = {}, {}
        for name in names:
            def go():
                return [run(chain, mu, n, rng=s, resolution=res, backend=name).digest()
                        for s in range(args.seeds)]
            times[name], digests[name] = best_of(go, args.repeat)
        if len(set(map(tuple, digests.values()))) != 1:
            raise SystemExit(f"backends disagree on {label}")
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:34s}" + "".join(f"{times[n]:11.3f}s" for n in names) + f"{speed:11.1f}x")


if __name__ == "__main__":
    main()
