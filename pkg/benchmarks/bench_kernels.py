"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Micro timings call both backends directly. ``--end-to-end`` also times one
Wine trial in a subprocess per backend, since model code binds the active
backend at import.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from anml import _kernels

TRIAL_SNIPPET = """
import time
from anml.harness import recipes
from anml.harness.experiment import run_trial
cfg = recipes.get("table6", trials=1)
point, resolved = cfg.points()[0]
t0 = time.perf_counter()
run_trial(resolved, point, 0)
print(time.perf_counter() - t0)
"""


def _adam_case(n_params: int, steps: int):
    rng = np.random.default_rng(0)
    grads = rng.standard_normal((steps, n_params))

    def run(mod):
        theta, m, v = np.zeros(n_params), np.zeros(n_params), np.zeros(n_params)
        for t in range(steps):
            mod.adam_update(theta, grads[t], m, v, 1e-3, 0.9, 0.999, 1e-8, t + 1)
        return theta

    return run


def _knn_case(n: int, k: int):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((n, 32))
    sq = (x * x).sum(1)
    dist = np.ascontiguousarray(np.maximum(sq[:, None] + sq[None, :] - 2 * x @ x.T, 0.0))

    def run(mod):
        return mod.knn_row_sums(dist, k)

    return run


def _best(fn, repeat: int) -> float:
    fn()  # warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def micro(repeat: int) -> list[tuple[str, float, float]]:
    if _kernels.compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    cases = [
        ("adam_update 1.2k params x 500 steps", _adam_case(1200, 500)),
        ("adam_update 20k params x 200 steps", _adam_case(20000, 200)),
        ("knn_row_sums n=124 k=85", _knn_case(124, 85)),
        ("knn_row_sums n=1000 k=698", _knn_case(1000, 698)),
    ]
    rows = []
    for name, run in cases:
        np.testing.assert_allclose(run(_kernels.compiled), run(_kernels.fallback), rtol=1e-10, atol=1e-12)
        rows.append((name, _best(lambda: run(_kernels.compiled), repeat),
                     _best(lambda: run(_kernels.fallback), repeat)))
    return rows


def end_to_end() -> tuple[float, float]:
    times = []
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("ANML_PURE_PYTHON", None)
        if pure:
            env["ANML_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", TRIAL_SNIPPET], env=env, check=True, capture_output=True,
                             text=True)
        times.append(float(out.stdout.strip().splitlines()[-1]))
    return times[0], times[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)

    print(f"{'case':<40}{'cython ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, fast, slow in micro(args.repeat):
        print(f"{name:<40}{1e3 * fast:>12.2f}{1e3 * slow:>12.2f}{slow / fast:>9.1f}x")
    if args.end_to_end:
        fast, slow = end_to_end()
        print(f"{'one table6 trial (all methods)':<40}{1e3 * fast:>12.0f}{1e3 * slow:>12.0f}{slow / fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
