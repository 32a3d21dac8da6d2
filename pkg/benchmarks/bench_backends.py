"""Compare the numpy and numba kernel backends.

Reports first-call (compile or cache load) cost, steady-state per-call kernel
times on solver-sized inputs, and full solve wall time per bundled scenario.

    python benchmarks/bench_backends.py [--repeat 20] [--scenarios planar_hol panda_hol]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mmtraj import kernels
from mmtraj.admm import Problem, SolverConfig, initial_state, solve
from mmtraj.scenario import bundled_scenario


def _kernel_inputs(scenario):
    problem = Problem.from_scenario(scenario)
    state = initial_state(problem, scenario)
    rng = np.random.default_rng(0)
    q, n = problem.q, problem.n
    ch = problem.chain
    xb = state.base_xy(problem.base_basis)
    lam_f1 = rng.normal(size=(q, 3)) * 1e-2
    lam_f2 = rng.normal(size=(q, 3 * n)) * 1e-2
    lam_v = rng.normal(size=(q, n)) * 1e-2
    lam_w = rng.normal(size=(q, n)) * 1e-2
    args = {
        "solve_linkpoints": (problem.A0, problem.Ac, problem.As, problem.t, ch.tool_offset,
                             ch.mount_rotation, ch.mount_offset, state.v_theta, state.w_theta,
                             state.v_phi, state.w_phi, xb, problem.x_d, lam_f1, lam_f2, 1.0, 1.0),
        "solve_trig_theta": (problem.A0, problem.Ac, problem.As, problem.t, state.linkpoints,
                             np.cos(state.theta), np.sin(state.theta), lam_f2, lam_v, lam_w, 1.0, 1.0),
        "forward_kinematics": (problem.A0, problem.Ac, problem.As, problem.t, ch.tool_offset, state.theta),
    }
    return args


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(scenario, repeat):
    inputs = _kernel_inputs(scenario)
    rows = []
    for name, args in inputs.items():
        timings = {}
        for be in ("numpy", "numba"):
            fn = getattr(kernels.get_backend(be), name)
            t0 = time.perf_counter()
            ref = fn(*args)
            first = time.perf_counter() - t0
            timings[be] = (first, _time(fn, args, repeat), ref)
        a, b = timings["numpy"][2], timings["numba"][2]
        a = np.concatenate([np.ravel(x) for x in a]) if isinstance(a, tuple) else np.ravel(a)
        b = np.concatenate([np.ravel(x) for x in b]) if isinstance(b, tuple) else np.ravel(b)
        rows.append((name, timings["numpy"][0], timings["numpy"][1], timings["numba"][0],
                     timings["numba"][1], float(np.abs(a - b).max())))
    return rows


def bench_solves(scenario, repeat):
    out = {}
    for label, cfg in (("numpy", SolverConfig(backend="numpy")),
                       ("numba", SolverConfig(backend="numba")),
                       ("numba-parallel", SolverConfig(backend="numba", parallel=True))):
        solve(scenario, cfg)  # warm-up
        times = []
        for _ in range(repeat):
            res = solve(scenario, cfg)
            times.append(res.wall_time)
        out[label] = (min(times), res.iterations)
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--solve-repeat", type=int, default=3)
    parser.add_argument("--scenarios", nargs="+",
                        default=["planar_hol", "planar_nonhol", "panda_hol", "panda_nonhol"])
    args = parser.parse_args(argv)
    for name in args.scenarios:
        scenario = bundled_scenario(name)
        print(f"\n{name} (q={scenario.q}, n={scenario.n})")
        print(f"  {'kernel':20s} {'numpy 1st':>10s} {'numpy':>10s} {'numba 1st':>10s} {'numba':>10s} {'speedup':>8s} {'max diff':>9s}")
        for kname, np_first, np_best, nb_first, nb_best, diff in bench_kernels(scenario, args.repeat):
            print(f"  {kname:20s} {np_first * 1e3:8.2f}ms {np_best * 1e3:8.3f}ms {nb_first * 1e3:8.2f}ms "
                  f"{nb_best * 1e3:8.3f}ms {np_best / nb_best:7.1f}x {diff:9.1e}")
        for label, (wall, iters) in bench_solves(scenario, args.solve_repeat).items():
            print(f"  solve[{label}]: {wall:.3f} s for {iters} iterations ({wall / iters * 1e3:.2f} ms/iter)")


if __name__ == "__main__":
    main()
