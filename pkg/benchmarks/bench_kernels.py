"""Time the compiled kernels against the pure-Python fallback.

Each workload runs through the public API with the kernel set patched in,
so the numbers include the same wrapper overhead users see. Outputs from
both backends are compared as a sanity check.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import time
from contextlib import ExitStack
from unittest import mock

import numpy as np

from opmdrive import _backend, _core_py
from opmdrive.dynamics import VehicleParameters, VehicleState, step_array
from opmdrive.opm import OPM1
from opmdrive.path import build_path, rounded_rectangle_waypoints, straight_waypoints
from opmdrive.planner import BoundaryConditions, curvature_speed_cap, dp_oracle_plan, plan_velocity

try:
    from opmdrive import _core
except ImportError:  # extension not built
    _core = None

KERNELS = ("forward_backward", "dp_sweep", "rk4_step", "bicycle_deriv")


def use(module):
    stack = ExitStack()
    for name in KERNELS:
        stack.enter_context(mock.patch.object(_backend, name, getattr(module, name)))
    return stack


def workloads():
    lap = build_path(rounded_rectangle_waypoints(), closed=True)
    line = build_path(straight_waypoints(100.0, 2.0), ds=2.0)
    caps = curvature_speed_cap(lap, OPM1, 30.0)
    seg = np.diff(lap.s)
    params = VehicleParameters()

    def fb():
        return np.asarray(_backend.forward_backward(caps, seg, 0.0, 0.0, OPM1.ax_pos, -OPM1.ax_neg))

    def dp():
        return dp_oracle_plan(line, OPM1, BoundaryConditions(), a_grid=0.05).v

    def rk4():
        s = VehicleState(vx=10.0).to_array()
        for _ in range(5000):
            s = step_array(s, 0.05, 0.2, params, 0.01)
        return s

    def plan():
        return plan_velocity(lap, OPM1, BoundaryConditions()).v

    return {"forward_backward (lap)": fb, "dp_sweep (100 m oracle)": dp, "rk4_step x5000": rk4, "plan_velocity (lap)": plan}


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not importable; only the fallback can be timed")
    backends = [("python", _core_py)] + ([("cython", _core)] if _core is not None else [])

    print(f"{'workload':28s} " + " ".join(f"{name:>10s}" for name, _ in backends) + "   speedup  max|diff|")
    for label, fn in workloads().items():
        results = []
        for _, module in backends:
            with use(module):
                results.append(best_of(fn, args.repeat))
        cols = " ".join(f"{t * 1e3:9.1f}ms" for t, _ in results)
        if len(results) == 2:
            speed = results[0][0] / results[1][0]
            diff = float(np.max(np.abs(np.asarray(results[0][1]) - np.asarray(results[1][1]))))
            print(f"{label:28s} {cols}  {speed:7.1f}x  {diff:.2e}")
        else:
            print(f"{label:28s} {cols}")


if __name__ == "__main__":
    main()
