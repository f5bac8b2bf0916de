"""Compare the compiled and pure-Python simulation kernels.

    python3 benchmarks/bench_kernel.py [--packets N] [--repeat K] [--p P]

Both backends run the same (setting, p, seed) so the reports must agree
exactly; the script checks that before printing timings.
"""

import argparse
import sys
import time

from tcprate.core_path import TABLE1
from tcprate.simulator import COMPILED_AVAILABLE, run_simulation


def best_of(repeat, **kwargs):
    best, rep = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        rep = run_simulation(**kwargs)
        best = min(best, time.perf_counter() - t0)
    return best, rep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--packets", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--p", type=float, default=0.01)
    ap.add_argument("--setting", default="2M-R100-W12", choices=list(TABLE1))
    args = ap.parse_args(argv)
    if not COMPILED_AVAILABLE:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        return 1

    kw = dict(path=TABLE1[args.setting], p=args.p, n_packets=args.packets, seed=1)
    t_c, rep_c = best_of(args.repeat, backend="compiled", **kw)
    t_p, rep_p = best_of(args.repeat, backend="pure", **kw)
    a, b = rep_c.as_dict(), rep_p.as_dict()
    a.pop("backend"), b.pop("backend")
    if a != b:
        print("backends disagree")
        return 1

    print(f"{args.setting} p={args.p:g} packets={args.packets:,} best of {args.repeat}")
    print(f"{'backend':<10}{'seconds':>10}{'packets/s':>14}")
    for name, t in (("compiled", t_c), ("pure", t_p)):
        print(f"{name:<10}{t:>10.3f}{args.packets / t:>14,.0f}")
    print(f"speed-up {t_p / t_c:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
