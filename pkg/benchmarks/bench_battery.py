"""Benchmark: compiled simulation kernel vs the pure Python fallback.

Run as: python3 benchmarks/bench_battery.py [steps]
"""

import sys
import time

import numpy as np

from battcal import _pysim
from battcal.battery import BatteryConfig, PERFECT_PARAMS

try:
    from battcal import _fastsim
except ImportError:
    _fastsim = None


def bench(kernel, currents, config, params):
    n = currents.shape[0]
    states = np.zeros((n + 1, 7))
    voltages = np.zeros(n + 1)
    q_n = config.x_n0 * params.q_max
    q_p = params.q_max - q_n
    states[0] = [config.v_s * q_p, q_p - config.v_s * q_p,
                 q_n - config.v_s * q_n, config.v_s * q_n, 0.0, 0.0, 0.0]
    t0 = time.perf_counter()
    last, eod = kernel.simulate_into(currents, states, voltages,
                                     params.q_max, params.r_o,
                                     *config.kernel_args(), config.v_eod)
    elapsed = time.perf_counter() - t0
    return elapsed, last, states[:last + 1], voltages[:last + 1]


def main():
    steps = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    config = BatteryConfig(v_eod=0.0)  # no cutoff: time the full loop
    rng = np.random.default_rng(0)
    currents = np.repeat(rng.uniform(1.0, 3.0, size=steps // 500 + 1),
                         500)[:steps].astype(np.float64)
    currents = np.ascontiguousarray(currents)

    t_py, last_py, s_py, v_py = bench(_pysim, currents, config, PERFECT_PARAMS)
    print(f"python backend: {steps} steps in {t_py:.3f}s "
          f"({1e6 * t_py / steps:.2f} us/step)")

    if _fastsim is None:
        print("cython backend: not built")
        return

    t_cy, last_cy, s_cy, v_cy = bench(_fastsim, currents, config,
                                      PERFECT_PARAMS)
    print(f"cython backend: {steps} steps in {t_cy:.3f}s "
          f"({1e6 * t_cy / steps:.2f} us/step)")
    print(f"speedup: {t_py / t_cy:.1f}x")
    same = (last_py == last_cy and np.array_equal(s_py, s_cy)
            and np.array_equal(v_py, v_cy))
    print(f"bit-identical results: {same}")


if __name__ == "__main__":
    main()
