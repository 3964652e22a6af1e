"""Compare the numba kernels with the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--events 20000]

Each backend runs in its own interpreter because the switch is read at import
time (FALLINGBALLS_DISABLE_NUMBA=1 selects the fallback).
"""
import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import numpy as np
from fallingballs import MassVector, sample_state, simulate, lyapunov_spectrum
from fallingballs._accel import USE_NUMBA

events = int(sys.argv[1])
out = {"numba": USE_NUMBA}
for n in (2, 3, 5):
    m = MassVector(tuple(range(n, 0, -1)))
    x = sample_state(m, np.random.default_rng(0))
    simulate(x, m, max_collisions=10)          # warm-up / compile
    lyapunov_spectrum(x, m, 10)
    t = time.perf_counter()
    traj = simulate(x, m, max_collisions=events)
    t_sim = time.perf_counter() - t
    t = time.perf_counter()
    rep = lyapunov_spectrum(x, m, events)
    t_lyap = time.perf_counter() - t
    out[n] = {"simulate_s": t_sim, "lyapunov_s": t_lyap,
              "final_q": traj.final.q.tolist(), "top": rep.top}
print(json.dumps(out))
"""


def run(events, disable):
    env = dict(os.environ)
    env["FALLINGBALLS_DISABLE_NUMBA"] = "1" if disable else "0"
    res = subprocess.run([sys.executable, "-c", CHILD, str(events)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--events", type=int, default=20000)
    args = ap.parse_args()
    t0 = time.perf_counter()
    fast = run(args.events, disable=False)
    slow = run(args.events, disable=True)
    print(f"{args.events} events per run (wall {time.perf_counter() - t0:.1f}s)")
    print(f"{'n':>3} {'kernel':>10} {'numba s':>10} {'numpy s':>10} {'speedup':>9}  same result")
    for n in ("2", "3", "5"):
        a, b = fast[n], slow[n]
        same = a["final_q"] == b["final_q"] and a["top"] == b["top"]
        for key, name in (("simulate_s", "simulate"), ("lyapunov_s", "lyapunov")):
            print(f"{n:>3} {name:>10} {a[key]:10.4f} {b[key]:10.4f} {b[key] / a[key]:9.1f}  {same}")


if __name__ == "__main__":
    main()
