"""Time the hot kernels under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--scale 1.0] [--repeats 3] [--json out.json]

Each kernel is called once to trigger compilation, then timed ``repeats``
times; the best wall time is reported. Sample means are printed as a
sanity check that both backends simulate the same law.
"""
import argparse
import json
import platform
import time

import numpy as np

from udocrp._backend import HAVE_NUMBA
from udocrp.chains import RateSpec, absorption_law
from udocrp.kernels import besq as kb
from udocrp.kernels import birth_death as kbd
from udocrp.kernels import compositions as kc

SEED = 12345


def _cases(scale):
    def n(k):
        return max(1, int(k * scale))

    alpha, t_end, cut = 0.5, 2 * 50 ** 1.5, 8000.0
    law = absorption_law(RateSpec.qalpha(alpha), 32, t_end + cut, int(t_end + cut), points=2000)

    def absorption(backend, g):
        return kbd.absorption_times((1.0, -alpha, 0.0, 1.0), 1, n(200_000), g, horizon=1e4,
                                    backend=backend)

    def states(backend, g):
        return kbd.states_at((1.0, 0.5, 0.5, 1.0), 20, np.array([5.0, 20.0]), n(100_000), g,
                             backend=backend)[:, -1]

    def levy(backend, g):
        return kbd.levy_endpoints(alpha, t_end, n(5_000), 32, law.log_grid, law.cdf, cut, g,
                                  backend=backend)

    def euler(backend, g):
        vals, _ = kb.euler_maruyama(1.0, 1.0, 1e-3, 1000, n(20_000), kb.REFLECT,
                                    np.array([1000], dtype=np.int64), g, backend=backend)
        return vals[:, 0]

    def up_down(backend, g):
        size, width = n(200_000), 12
        parts = np.zeros((size, width), dtype=np.int64)
        parts[:, 0] = 1
        k = np.ones(size, dtype=np.int64)
        for _ in range(9):
            kc.up_step(parts, k, 0.5, 0.5, g, backend)
        kc.down_step(parts, k, g, backend)
        return k.astype(float)

    return {
        "absorption_times": absorption,
        "states_at": states,
        "levy_endpoints": levy,
        "euler_maruyama": euler,
        "composition_steps": up_down,
    }


def bench(fn, backend, repeats):
    fn(backend, np.random.default_rng(0))  # compile / warm caches
    best = np.inf
    out = None
    for r in range(repeats):
        g = np.random.default_rng(SEED + r)
        t0 = time.perf_counter()
        out = fn(backend, g)
        best = min(best, time.perf_counter() - t0)
    fin = out[np.isfinite(out)]
    return best, float(np.median(fin)) if fin.size else float("nan")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every problem size")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args()

    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    rows = []
    print(f"{'kernel':20s} " + " ".join(f"{b + ' s':>10s}" for b in backends) + f" {'speedup':>8s}  median")
    for name, fn in _cases(args.scale).items():
        res = {b: bench(fn, b, args.repeats) for b in backends}
        speed = res["numpy"][0] / res["numba"][0] if "numba" in res else float("nan")
        meds = " / ".join(f"{res[b][1]:.4g}" for b in backends)
        print(f"{name:20s} " + " ".join(f"{res[b][0]:10.4f}" for b in backends) + f" {speed:8.1f}x  {meds}")
        rows.append({"kernel": name, **{f"{b}_seconds": res[b][0] for b in backends},
                     **{f"{b}_median": res[b][1] for b in backends}, "speedup": speed})
    if args.json:
        meta = {"python": platform.python_version(), "numpy": np.__version__, "scale": args.scale,
                "repeats": args.repeats}
        with open(args.json, "w") as fh:
            json.dump({"metadata": meta, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
