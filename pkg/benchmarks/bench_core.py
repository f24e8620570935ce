"""Compare the compiled kernels with the pure-Python fallbacks.

    python3 benchmarks/bench_core.py [--repeat 5]

Times the TDMA golden search, one SCA solve and a full AF polyblock solve on
each backend, and checks that both give the same answer.
"""
import argparse
import time

from mecrelay import _backend
from mecrelay.af import XBar, sca_solve, solve_af_polyblock
from mecrelay.scenario import default_scenario
from mecrelay.tdma import solve_tdma


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--polyblock", action="store_true", help="also time a full AF solve (the Python side takes minutes)")
    args = ap.parse_args()
    if not _backend.compiled_available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    sc = default_scenario(seed=0, N=5)
    cases = {
        "tdma golden search (N=5)": (lambda: solve_tdma(sc.task, sc.channels, sc.params), lambda s: s.total_energy),
        "sca solve (N=5, d=5e4)": (lambda: sca_solve(5e4, sc.channels, sc.task, sc.params), lambda r: r[0]),
    }
    if args.polyblock:
        cases["af polyblock (N=5)"] = (
            lambda: solve_af_polyblock(sc.task, sc.channels, sc.params, xbar=XBar(sc.channels, sc.task, sc.params)),
            lambda s: s.objective)

    print(f"{'kernel':<28}{'python':>12}{'compiled':>12}{'speedup':>10}{'|diff|':>12}")
    for name, (fn, value) in cases.items():
        res = {}
        for backend in ("python", "compiled"):
            with _backend.using(backend):
                reps = 1 if backend == "python" and "polyblock" in name else args.repeat
                res[backend] = best_of(fn, reps)
        tp, op = res["python"]
        tc, oc = res["compiled"]
        print(f"{name:<28}{tp * 1e3:>10.3f}ms{tc * 1e3:>10.3f}ms{tp / tc:>9.1f}x{abs(value(op) - value(oc)):>12.2e}")


if __name__ == "__main__":
    main()
