"""Compiled vs pure-Python kernels on the two hot loops.

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

from conley_transit import _kernels
from conley_transit.conley import parse_model
from conley_transit.slowfast import Family1D, integrate_extended
from conley_transit.transition import ThetaShift, _build_problem, _pairs_for_scope, _scan


def wide_model():
    """Sinks on both sides with no connections: 2^16 candidates to scan."""
    s0 = {f"{k}@0": {"0": 1} for k in range(1, 5)}
    s1 = {f"{k}@1": {"0": 1} for k in range(1, 5)}
    return parse_model({"slice0": {"conley_index": s0}, "slice1": {"conley_index": s1}})


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    model = wide_model()
    prob = _build_problem(model, _pairs_for_scope(model, None, "finest"), ThetaShift.identity(), 40)
    fam = Family1D.pitchfork()
    cases = {
        f"scan_block ({prob.nfree} free bits)": lambda b: _scan(prob, 1 << 20, 1, b),
        "rk4_poly (2e6 steps)": lambda b: integrate_extended(fam, 1e-3, (1e-6, 0.999), 2000.0, backend=b),
    }
    backends = _kernels.available()
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases.items():
        times = [best_of(lambda: fn(b), args.repeat) for b in backends]
        row = f"{name:<28}" + "".join(f"{t:>11.3f}s" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
