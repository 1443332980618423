"""Compiled vs pure-Python DP45 kernel on the instantaneous-frame generator.

    python benchmarks/bench_integrator.py                # synthetic 4-level generator
    python benchmarks/bench_integrator.py --preset cshunt_1q --t-f 50
"""
import argparse
import time

import numpy as np

from geoanneal import dynamics as dyn


def synthetic(levels, t_f, points=100, seed=0):
    rng = np.random.default_rng(seed)
    s = np.linspace(0, 1, points)
    E = np.cumsum(1 + rng.uniform(size=(points, levels)), axis=1) * (1 + 0.3 * np.cos(4 * s))[:, None]
    K = rng.normal(size=(levels, levels))
    G = np.array([1j * (K - K.T) * np.exp(-((x - 0.6) / 0.1) ** 2) for x in s])
    return dyn.SplineGenerator(s, E, G, t_f)


def preset(name, t_f):
    from geoanneal.pipeline import build_static, cjj_pair_system, cshunt_system
    system = cshunt_system() if name == "cshunt_1q" else cjj_pair_system()
    static = build_static(system, keep_states=False)
    return dyn.SplineGenerator(static.s, static.energies, static.G, t_f)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", choices=["cshunt_1q", "cjj_2q"])
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--t-f", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if not dyn.COMPILED_AVAILABLE:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    gen = preset(args.preset, args.t_f) if args.preset else synthetic(args.levels, args.t_f)
    psi0 = dyn.ground_state(gen.n)
    s_out = np.linspace(0, 1, 101)
    run = {b: (lambda b=b: dyn.propagate(gen, psi0, s_out, backend=b)) for b in ("python", "compiled")}
    t_py, a = best_of(run["python"], 1)
    t_c, b = best_of(run["compiled"], args.repeat)
    label = args.preset or f"synthetic N={args.levels}"
    print(f"generator      {label}, t_f = {args.t_f:g}")
    print(f"steps          {a.info['nsteps']} accepted, {a.info['nreject']} rejected")
    print(f"python         {t_py:8.4f} s")
    print(f"compiled       {t_c:8.4f} s")
    print(f"speed-up       {t_py / t_c:8.1f}x")
    print(f"max |dpsi|     {np.abs(a.states - b.states).max():.2e}")


if __name__ == "__main__":
    main()
