"""Compare the compiled and pure-Python simulator kernels.

Runs the exact workload the scale scenario puts on the kernel (one 64-bit
draw per device pair per interval) against both backends, checks that they
produce identical event lists, and prints throughput.

    python3 benchmarks/bench_kernels.py [--devices 100] [--intervals 500] [--repeat 3]
"""

from __future__ import annotations

import argparse
import importlib
import time

from cct.sim.encounters import pair_threshold


def _load_backends():
    backends = {}
    for name in ("_kernels_py", "_kernels_cy"):
        try:
            backends[name] = importlib.import_module(f"cct.{name}")
        except ImportError:
            print(f"{name}: not available (skipped)")
    return backends


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--devices", type=int, default=100)
    parser.add_argument("--intervals", type=int, default=500)
    parser.add_argument("--rate", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    n_pairs = args.devices * (args.devices - 1) // 2
    threshold = pair_threshold(args.rate, args.devices)
    draws = args.intervals * n_pairs
    print(
        f"workload: {args.devices} devices, {args.intervals} intervals "
        f"-> {draws:,} draws, threshold {threshold:#x}"
    )

    results = {}
    for name, module in _load_backends().items():
        best = float("inf")
        events = None
        for _ in range(args.repeat):
            start = time.perf_counter()
            events = module.poisson_pair_events(
                args.seed, args.intervals, n_pairs, threshold
            )
            best = min(best, time.perf_counter() - start)
        results[name] = (best, events)
        print(
            f"{name}: {best * 1e3:8.1f} ms "
            f"({draws / best / 1e6:7.2f} Mdraws/s), {len(events)} events"
        )

    if len(results) == 2:
        (t_py, ev_py), (t_cy, ev_cy) = (
            results["_kernels_py"],
            results["_kernels_cy"],
        )
        if ev_py != ev_cy:
            print("MISMATCH: backends disagree")
            return 1
        print(f"backends agree; compiled speedup: {t_py / t_cy:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
