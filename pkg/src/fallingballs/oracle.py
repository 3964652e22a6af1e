"""Brute-force references for the test suite and ``verify``.

Nothing here calls into :mod:`fallingballs.kernels` or the tangent formulas;
collision times come from scanning and bisecting the gap functions, collisions
are resolved from momentum and energy conservation, and the equal-mass system
is integrated as independent bouncing particles.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .dynamics import MassVector, PhaseState
from .errors import BudgetExceeded, DomainError, NoEvent, SequenceChanged
from .sufficiency import Classification, SymbolicSequence, classify_sequence, collision_graph
from .tangent import TangentVector


@dataclass(frozen=True)
class OracleConfig:
    bisection_tol: float = 1e-13
    fd_epsilon: float = 1e-7
    enum_max_len: int = 6
    ghost_tol: float = 1e-9
    scan_steps: int = 64

    def __post_init__(self):
        if min(self.bisection_tol, self.fd_epsilon, self.enum_max_len, self.ghost_tol) <= 0:
            raise DomainError("oracle settings must be positive")


DEFAULT_ORACLE = OracleConfig()


# -- collision times by scan + bisection ------------------------------------

def _gap(q, v, k, t):
    """Gap function k at time t: k = 0 is ball 1 above the floor, k >= 1 pair (k, k+1)."""
    if k == 0:
        return q[0] + v[0] * t - 0.5 * t * t
    return (q[k] - q[k - 1]) + (v[k] - v[k - 1]) * t


def _gap_rate(q, v, k, t):
    if k == 0:
        return v[0] - t
    return v[k] - v[k - 1]


def _first_crossing(q, v, cfg: OracleConfig, polish: bool):
    n = len(q)
    # every trajectory reaches the floor before this bound
    bound = 2.0 * (abs(v[0]) + math.sqrt(2.0 * max(q[0], 0.0))) + 1e-12
    step = bound / cfg.scan_steps
    a = 0.0
    for j in range(1, cfg.scan_steps + 2):
        b = j * step
        hits = [k for k in range(n) if _gap(q, v, k, b) < 0.0]
        if hits:
            best = None
            for k in hits:
                lo, hi = a, b
                if _gap(q, v, k, lo) < 0.0:
                    lo_root = lo
                else:
                    while hi - lo > cfg.bisection_tol:
                        mid = 0.5 * (lo + hi)
                        if mid == lo or mid == hi:
                            break
                        if _gap(q, v, k, mid) < 0.0:
                            hi = mid
                        else:
                            lo = mid
                    lo_root = 0.5 * (lo + hi)
                    if polish:
                        for _ in range(3):
                            rate = _gap_rate(q, v, k, lo_root)
                            if rate == 0.0:
                                break
                            lo_root -= _gap(q, v, k, lo_root) / rate
                if best is None or lo_root < best[0]:
                    best = (lo_root, k)
            return best
        a = b
    raise NoEvent("no gap function changed sign within the floor bound")


def bisect_collision_time(state: PhaseState, masses: MassVector,
                          cfg: OracleConfig = DEFAULT_ORACLE):
    """First collision ``(dt, (i, i+1))`` found by scanning the gaps and bisecting."""
    dt, k = _first_crossing(list(state.q), list(state.v), cfg, polish=False)
    return dt, (k, k + 1)


def _collide(q, v, m, k):
    if k == 0:
        v[0] = -v[0]
        q[0] = 0.0
        return
    a, b = k - 1, k
    ma, mb = m[a], m[b]
    va, vb = v[a], v[b]
    v[a] = ((ma - mb) * va + 2.0 * mb * vb) / (ma + mb)
    v[b] = ((mb - ma) * vb + 2.0 * ma * va) / (ma + mb)
    q[b] = q[a]


def _drift(q, v, dt):
    for i in range(len(q)):
        q[i] += v[i] * dt - 0.5 * dt * dt
        v[i] -= dt


def flow(state: PhaseState, masses: MassVector, until: float, cfg: OracleConfig = DEFAULT_ORACLE):
    """Reference flow to elapsed time ``until``; returns (q, v, [(t, label), ...])."""
    q, v = list(state.q), list(state.v)
    m = [float(x) for x in masses.values]
    t = 0.0
    log = []
    while True:
        dt, k = _first_crossing(q, v, cfg, polish=True)
        if t + dt > until:
            _drift(q, v, until - t)
            return np.array(q), np.array(v), log
        _drift(q, v, dt)
        t += dt
        _collide(q, v, m, k)
        log.append((t, k))


def flow_events(state: PhaseState, masses: MassVector, count: int, cfg: OracleConfig = DEFAULT_ORACLE):
    """Reference event times and labels for the first ``count`` collisions."""
    q, v = list(state.q), list(state.v)
    m = [float(x) for x in masses.values]
    t = 0.0
    log = []
    for _ in range(count):
        dt, k = _first_crossing(q, v, cfg, polish=True)
        _drift(q, v, dt)
        t += dt
        _collide(q, v, m, k)
        log.append((t, k))
    return log


# -- finite-difference tangent map ------------------------------------------

def finite_difference_cocycle(x0: PhaseState, masses: MassVector, events, u: TangentVector,
                              eps: Optional[float] = None, cfg: OracleConfig = DEFAULT_ORACLE):
    """One-sided difference (S^T(x0 + eps w) - S^T(x0)) / eps in (dh, dv) coordinates.

    ``w`` is ``u`` converted to (dq, dv) at x0. T is halfway between the last of
    ``events`` and the next collision, so both runs sit in free flight there.
    """
    eps = cfg.fd_epsilon if eps is None else eps
    n_ev = len(events)
    ref = flow_events(x0, masses, n_ev + 1, cfg)
    t_prev = ref[n_ev - 1][0] if n_ev else 0.0
    horizon = 0.5 * (t_prev + ref[n_ev][0])
    labels = [k for _, k in ref[:n_ev]]
    if [e.sigma for e in events] != labels:
        raise SequenceChanged("reference flow disagrees with the given events")
    m = np.array([float(x) for x in masses.values])
    dq = (u.dh - m * x0.v * u.dv) / m
    pert = PhaseState(x0.q + eps * dq, x0.v + eps * u.dv, x0.t)
    qb, vb, log_b = flow(x0, masses, horizon, cfg)
    qp, vp, log_p = flow(pert, masses, horizon, cfg)
    if [k for _, k in log_p] != [k for _, k in log_b]:
        raise SequenceChanged(f"perturbed run realised {[k for _, k in log_p]}, base {labels}")
    d_q = (qp - qb) / eps
    d_v = (vp - vb) / eps
    return TangentVector(m * d_q + m * vb * d_v, d_v, check=False)


# -- equal-mass ghosts ------------------------------------------------------

class Ghosts:
    """Independent particles under q'' = -1 bouncing off q = 0, in closed form."""

    def __init__(self, state: PhaseState):
        self.q0 = np.array(state.q, dtype=float)
        self.v0 = np.array(state.v, dtype=float)
        self.t0 = float(state.t)
        self.speed = np.sqrt(self.v0 ** 2 + 2.0 * self.q0)
        # first floor hit, cancellation-free for downward starts
        with np.errstate(divide="ignore", invalid="ignore"):
            self.hit = np.where(self.v0 >= 0, self.v0 + self.speed,
                                2.0 * self.q0 / (self.speed - self.v0))

    def _phase(self, t):
        tau = np.asarray(t, dtype=float) - self.t0
        before = tau < self.hit
        s = np.where(before, tau, np.mod(tau - self.hit, 2.0 * self.speed))
        return before, s

    def positions(self, t) -> np.ndarray:
        before, s = self._phase(t)
        return np.where(before, self.q0 + self.v0 * s - 0.5 * s * s,
                        self.speed * s - 0.5 * s * s)

    def velocities(self, t) -> np.ndarray:
        before, s = self._phase(t)
        return np.where(before, self.v0 - s, self.speed - s)

    def bounce_times(self, g: int, t_end: float) -> np.ndarray:
        span = t_end - self.t0
        if span < self.hit[g]:
            return np.empty(0)
        k = np.arange(0, int((span - self.hit[g]) // (2 * self.speed[g])) + 1)
        return self.t0 + self.hit[g] + 2.0 * self.speed[g] * k

    def crossings(self, a: int, b: int, t_end: float) -> np.ndarray:
        """Times in (t0, t_end] where ghosts a and b pass each other.

        Between bounces both ghosts are parabolas with the same curvature, so
        their difference is linear on every piece.
        """
        cuts = np.unique(np.concatenate([[self.t0], self.bounce_times(a, t_end),
                                         self.bounce_times(b, t_end), [t_end]]))
        out = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi <= lo:
                continue
            mid = 0.5 * (lo + hi)
            pa = self.positions(mid)
            va = self.velocities(mid)
            d = pa[a] - pa[b]
            r = va[a] - va[b]
            if r == 0.0:
                continue
            root = mid - d / r
            if lo < root <= hi:
                out.append(root)
        return np.array(out)


@dataclass
class GhostLog:
    times: np.ndarray
    labels: np.ndarray
    ghosts: Ghosts

    def positions(self, t) -> np.ndarray:
        return np.sort(self.ghosts.positions(t))


def ghost_trajectory(state: PhaseState, masses: MassVector, t_end: float) -> GhostLog:
    """Event log of the relabelled free particles up to elapsed time ``t_end``.

    Floor events are ghost bounces (label 0); a crossing of two ghosts at sorted
    slots i, i+1 has label i.
    """
    vals = set(float(x) for x in masses.values)
    if len(vals) != 1:
        raise DomainError("ghost picture needs equal masses")
    g = Ghosts(state)
    stop = state.t + t_end
    n = state.n
    times, labels = [], []
    for a in range(n):
        bt = g.bounce_times(a, stop)
        times.extend(bt)
        labels.extend([0] * len(bt))
    for a, b in itertools.combinations(range(n), 2):
        for tc in g.crossings(a, b, stop):
            pos = g.positions(tc)
            low = min(pos[a], pos[b])
            rank = int(np.sum(pos < low - 1e-12 * max(1.0, abs(low)))) + 1
            times.append(tc)
            labels.append(rank)
    order = np.argsort(times, kind="stable")
    return GhostLog(np.asarray(times)[order], np.asarray(labels, dtype=int)[order], g)


# -- exhaustive small sequences ---------------------------------------------

def enumerate_sequences(n: int, max_len: int, trials: int = 4, seed=0) -> List[tuple]:
    """Classify every sequence of length <= max_len whose ball pairs all occur.

    Returns ``[(SymbolicSequence, Classification), ...]`` in length-then-lexicographic order.
    """
    if n > 4 or max_len > 8:
        raise BudgetExceeded(f"n={n}, max_len={max_len} exceeds n <= 4, max_len <= 8")
    rows = []
    for length in range(0, max_len + 1):
        for labels in itertools.product(range(n), repeat=length):
            seq = SymbolicSequence(labels, n)
            if not collision_graph(seq).balls_connected:
                continue
            rows.append((seq, classify_sequence(seq, trials=trials, seed=seed)))
    return rows
