"""Quick self-checks against the brute-force oracles, used by ``fallingballs verify``."""
from __future__ import annotations

import numpy as np

from . import oracle
from .dynamics import MassVector, moderate_masses, next_event, sample_state, simulate
from .sufficiency import SymbolicSequence, is_sufficient
from .tangent import (
    TangentVector,
    ball_derivative,
    floor_derivative,
    push_frame,
    q_form,
    symplectic_matrix,
)


def check_event_times(rng, count=300):
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 5))
        masses = moderate_masses(n, rng)
        x = sample_state(masses, rng)
        dt, pair = next_event(x, masses)
        dt_ref, pair_ref = oracle.bisect_collision_time(x, masses)
        if pair != pair_ref:
            return False, f"label mismatch {pair} vs {pair_ref}"
        worst = max(worst, abs(dt - dt_ref) / max(1.0, dt_ref))
    return worst <= 1e-9, f"max rel diff {worst:.2e}"


def random_derivative(rng, masses):
    n = masses.n
    i = int(rng.integers(0, n))
    if i == 0:
        return floor_derivative(float(rng.uniform(0.05, 3.0)), masses)
    return ball_derivative(i, float(rng.uniform(0.05, 3.0)), masses)


def check_symplectic(rng, count=200):
    worst = 0.0
    for _ in range(count):
        masses = moderate_masses(int(rng.integers(2, 6)), rng)
        d = random_derivative(rng, masses).matrix()
        j = symplectic_matrix(masses.n)
        worst = max(worst, np.abs(d.T @ j @ d - j).max())
    return worst <= 1e-10, f"max |D^T J D - J| {worst:.2e}"


def check_q_increments(rng, count=500):
    worst = 0.0
    for _ in range(count):
        masses = moderate_masses(int(rng.integers(2, 6)), rng)
        n = masses.n
        d = random_derivative(rng, masses)
        dh = rng.normal(size=n)
        dh -= dh.mean()
        tv = TangentVector(dh, rng.normal(size=n))
        got = q_form(d(tv)) - q_form(tv)
        if d.kind == "floor":
            want = d.shear * dh[0] ** 2
        else:
            j = d.index - 1
            want = d.alpha * (tv.dv[j] - tv.dv[j + 1]) ** 2
        worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    return worst <= 1e-12, f"max rel diff {worst:.2e}"


def check_finite_differences(rng, count=10, length=5):
    worst = 0.0
    masses = MassVector((2, 1))
    done = 0
    while done < count:
        x = sample_state(masses, rng)
        traj = simulate(x, masses, max_collisions=length)
        dh = rng.normal(size=2)
        dh -= dh.mean()
        u = np.concatenate([dh, rng.normal(size=2)])
        tv = TangentVector.from_array(u / np.linalg.norm(u))
        try:
            fd = oracle.finite_difference_cocycle(x, masses, traj.events, tv)
        except oracle.SequenceChanged:
            continue
        pf = push_frame([tv], traj.events, masses)[0]
        err = np.linalg.norm(fd.as_array() - pf.as_array()) / np.linalg.norm(pf.as_array())
        worst = max(worst, err)
        done += 1
    return worst <= 1e-5, f"max rel err {worst:.2e} over {count} segments of {length}"


def check_ghosts(rng, events=2000):
    masses = MassVector((1, 1, 1))
    x = sample_state(masses, rng)
    traj = simulate(x, masses, max_collisions=events, record_states=True)
    t_end = float(traj.times[-1]) + 1e-9
    ghosts = oracle.ghost_trajectory(x, masses, t_end)
    k = min(len(ghosts.times), events)
    if not np.array_equal(ghosts.labels[:k], traj.labels[:k]):
        return False, "label sequences differ"
    dt = np.abs(ghosts.times[:k] - traj.times[:k]).max()
    dq = max(np.abs(ghosts.positions(traj.times[j]) - traj.states[j, :3]).max()
             for j in range(0, k, 7))
    return max(dt, dq) <= 1e-9, f"max time diff {dt:.2e}, position diff {dq:.2e}"


def check_golden():
    m = MassVector.parse("2/1,1/1")
    cases = [("1-2,0-1", True), ("0-1,1-2", True), ("1-2", False), ("1-2,1-2", False)]
    for text, want in cases:
        if is_sufficient(SymbolicSequence.parse(text, n=2), m) != want:
            return False, f"{text} expected {want}"
    return True, f"{len(cases)} cases"


def run_suites(out, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    suites = [
        ("event times vs bisection", lambda: check_event_times(rng)),
        ("symplectic derivatives", lambda: check_symplectic(rng)),
        ("Q_1 increments", lambda: check_q_increments(rng)),
        ("cocycle vs finite differences", lambda: check_finite_differences(rng)),
        ("equal-mass ghosts", lambda: check_ghosts(rng)),
        ("golden sufficiency cases", check_golden),
    ]
    all_ok = True
    for name, fn in suites:
        try:
            ok, detail = fn()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        out.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
    return all_ok
