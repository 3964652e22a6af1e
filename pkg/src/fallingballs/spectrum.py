"""Lyapunov spectra and cone diagnostics along simulated trajectories."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import optimize

from . import kernels
from .dynamics import (
    DEFAULT_TOL,
    CollisionEvent,
    MassVector,
    PhaseState,
    Tolerances,
    raise_status,
    simulate,
)
from .sufficiency import (
    NeutralSpaceTracker,
    SymbolicSequence,
    collision_graph,
    neutral_space,
    neutral_velocity_space,
)
from .tangent import cocycle_matrix, reduced_matrix

log = logging.getLogger(__name__)

ANGLE_TOL = 1e-3


@dataclass
class SpectrumReport:
    """Full 2n-dimensional spectrum, sorted descending, per unit flow time.

    ``constraint_idx`` are the two entries attributed to the flow direction and
    to the energy-transverse direction; dropping them leaves ``reduced``.
    """

    exponents: np.ndarray
    constraint_idx: tuple
    total_time: float
    collisions: int
    renorm_count: int
    stderr: np.ndarray
    block_exponents: np.ndarray
    identification: str = "angle"
    status: str = "ok"

    @property
    def n(self) -> int:
        return len(self.exponents) // 2

    @property
    def reduced(self) -> np.ndarray:
        keep = [k for k in range(len(self.exponents)) if k not in self.constraint_idx]
        return self.exponents[keep]

    @property
    def per_collision(self) -> np.ndarray:
        return self.exponents * self.total_time / max(self.collisions, 1)

    @property
    def pairing_residual(self) -> float:
        e = self.exponents
        return float(np.max(np.abs(e + e[::-1])))

    @property
    def top(self) -> float:
        return float(self.exponents[0])


def _identify(frame: np.ndarray, n: int):
    """Column indices of the flow direction and the direction leaving {sum dh = 0}."""
    flow = np.concatenate([np.zeros(n), np.ones(n)]) / np.sqrt(n)
    normal = np.concatenate([np.ones(n), np.zeros(n)]) / np.sqrt(n)
    k_flow = k_energy = None
    for k in range(1, 2 * n + 1):
        q = frame[:, :k]
        if k_flow is None and np.linalg.norm(flow - q @ (q.T @ flow)) < ANGLE_TOL:
            k_flow = k - 1
        if k_energy is None and np.linalg.norm(q.T @ normal) > ANGLE_TOL:
            k_energy = k - 1
    return k_flow, k_energy


def lyapunov_spectrum(x0: PhaseState, masses: MassVector, n_collisions: int,
                      renorm_every: int = 1, seed: int = 0, n_blocks: int = 10,
                      tol: Tolerances = DEFAULT_TOL) -> SpectrumReport:
    """QR estimate of the 2n exponents of the (dh, dv) cocycle along the orbit of x0."""
    n = masses.n
    rng = np.random.default_rng(seed)
    frame, _ = np.linalg.qr(rng.normal(size=(2 * n, 2 * n)))
    frame = np.ascontiguousarray(frame)
    q, v = x0.q.copy(), x0.v.copy()
    status, done, t, logs, blogs, btimes, renorms = kernels.lyapunov_run(
        q, v, masses.values, frame, int(n_collisions), int(renorm_every), int(n_blocks),
        tol.sing, tol.graze, tol.ord)
    raw = logs / t if t > 0 else np.zeros(2 * n)
    order = np.argsort(-raw, kind="stable")
    exps = raw[order]
    if len(btimes) >= 2:
        d_logs = np.diff(np.vstack([np.zeros(2 * n), blogs]), axis=0)
        d_t = np.diff(np.concatenate([[0.0], btimes]))
        blocks = (d_logs / d_t[:, None])[:, order]
        stderr = blocks.std(axis=0, ddof=1) / np.sqrt(len(btimes))
    else:
        blocks = np.empty((0, 2 * n))
        stderr = np.full(2 * n, np.nan)
    k_flow, k_energy = _identify(frame, n)
    rank = {int(c): r for r, c in enumerate(order)}
    how = "angle"
    if k_flow is None or k_energy is None or k_flow == k_energy:
        idx = (n - 1, n)
        how = "middle"
    else:
        idx = tuple(sorted((rank[k_flow], rank[k_energy])))
    report = SpectrumReport(exps, idx, float(t), int(done), int(renorms), stderr, blocks, how,
                            kernels.STATUS_NAMES[status])
    raise_status(status, f"after {done} collisions", report)
    return report


@dataclass
class ConeCheck:
    strict: bool
    neutral_dim_h: Optional[int]
    neutral_dim_v: int
    sequence: SymbolicSequence
    reason: str = ""


def strict_invariance_check(x0: PhaseState, masses: MassVector, T_events: int,
                            tol: Tolerances = DEFAULT_TOL) -> ConeCheck:
    """Is C_1 mapped strictly inside itself over the first T_events collisions of x0?"""
    traj = simulate(x0, masses, max_collisions=T_events, tol=tol) if T_events > 0 else None
    seq = SymbolicSequence(tuple(traj.sequence) if traj is not None else (), masses.n)
    return cone_check_sequence(seq, masses)


def cone_check_sequence(seq: SymbolicSequence, masses: MassVector) -> ConeCheck:
    dim_v = neutral_velocity_space(seq)
    if not collision_graph(seq).balls_connected:
        return ConeCheck(False, None, dim_v, seq, "ball collisions do not connect all balls")
    rep = neutral_space(seq, masses)
    strict = dim_v == 0 and rep.sufficient
    reason = "" if strict else f"neutral space of dimension {rep.dimension}"
    return ConeCheck(strict, rep.dimension, dim_v, seq, reason)


def sufficiency_onset(x0: PhaseState, masses: MassVector, max_events: int,
                      tol: Tolerances = DEFAULT_TOL) -> Optional[int]:
    """Smallest k such that the first k collisions form a sufficient segment.

    Returns ``None`` when no prefix of ``max_events`` collisions is sufficient.
    """
    traj = simulate(x0, masses, max_collisions=max_events, tol=tol)
    tracker = NeutralSpaceTracker(masses)
    for k, s in enumerate(traj.sequence, start=1):
        tracker.push(s)
        if tracker.connected and tracker.dimension == 0:
            return k
    return None


# -- periodic orbits for n = 2 ----------------------------------------------

@dataclass
class PeriodicOrbit:
    section: tuple
    period: int
    events: list
    sequence: tuple
    residual: float
    monodromy: np.ndarray
    reduced_eigenvalues: np.ndarray
    determinant: float

    @property
    def max_unit_deviation(self) -> float:
        return float(np.max(np.abs(np.abs(self.reduced_eigenvalues) - 1.0)))

    @property
    def stable(self) -> bool:
        return self.max_unit_deviation <= 1e-6


@dataclass
class OrbitReport:
    masses: MassVector
    orbits: List[PeriodicOrbit] = field(default_factory=list)
    evaluations: int = 0
    candidates: int = 0

    @property
    def found(self) -> bool:
        return bool(self.orbits)

    def best(self) -> Optional[PeriodicOrbit]:
        if not self.orbits:
            return None
        return min(self.orbits, key=lambda o: (o.max_unit_deviation, o.period))


class _ReturnMap:
    """Map between floor collisions for n = 2, on section coordinates (s, theta).

    s = v_1 just after the bounce; theta = v_2 / sqrt(2 e_2) with e_2 the
    remaining energy of ball 2 per unit mass, so theta lies in (-1, 1).
    """

    def __init__(self, masses: MassVector, tol: Tolerances):
        self.masses = MassVector(tuple(float(x) for x in masses.values), ordered=False)
        self.m = self.masses.values
        self.tol = tol
        self.s_max = np.sqrt(2.0 / self.m[0])
        self.calls = 0

    def state(self, x):
        s, th = x
        e2 = (1.0 - 0.5 * self.m[0] * s * s) / self.m[1]
        if not (0.0 < s < self.s_max) or not (-1.0 < th < 1.0) or e2 <= 0:
            return None
        v2 = th * np.sqrt(2.0 * e2)
        q2 = e2 - 0.5 * v2 * v2
        return np.array([0.0, q2]), np.array([s, v2])

    def coords(self, q, v):
        e2 = (1.0 - 0.5 * self.m[0] * v[0] * v[0]) / self.m[1]
        return np.array([v[0], v[1] / np.sqrt(2.0 * e2)])

    def run(self, x, period, max_events=400):
        """Follow x until the period-th floor bounce; return (image, labels, rhos) or None."""
        self.calls += 1
        st = self.state(x)
        if st is None:
            return None
        q, v = st
        out = kernels.run_events(q, v, self.m, 0.0, max_events, np.inf, self.tol.sing,
                                 self.tol.graze, self.tol.ord, 0, 0.0, 0, True)
        t, done, status, times, labels, rhos, _, states, _ = out
        floors = np.flatnonzero(labels == 0)
        if len(floors) < period:
            return None
        k = floors[period - 1]
        row = states[k]
        return self.coords(row[:2], row[2:]), labels[:k + 1], rhos[:k + 1], times[:k + 1]

    def residual(self, x, period):
        r = self.run(x, period)
        if r is None:
            return None
        return r[0] - np.asarray(x)


def stable_orbit_probe(masses: MassVector, periods=(1, 2, 3), grid: int = 40,
                       refine: int = 8, tol: Tolerances = DEFAULT_TOL,
                       xtol: float = 1e-10) -> OrbitReport:
    """Search periodic orbits of the n = 2 floor-return map and report monodromy spectra.

    For every period the whole grid is scanned and the ``refine`` best grid
    points are polished (Nelder-Mead, then a quasi-Newton root solve). Orbits
    are accepted at a section residual below ``xtol``.
    """
    if masses.n != 2:
        raise ValueError("stable_orbit_probe is for n = 2")
    pmap = _ReturnMap(masses, tol)
    report = OrbitReport(masses)
    ss = np.linspace(0.0, pmap.s_max, grid + 2)[1:-1]
    ths = np.linspace(-1.0, 1.0, grid + 2)[1:-1]
    for period in periods:
        scored = []
        for s, th in itertools.product(ss, ths):
            r = pmap.residual((s, th), period)
            if r is not None:
                scored.append((float(np.linalg.norm(r)), (s, th)))
        scored.sort()
        for _, x0 in scored[:refine]:
            report.candidates += 1
            orbit = _polish(pmap, np.array(x0), period, xtol)
            if orbit is None:
                continue
            if any(_same_orbit(orbit, o) for o in report.orbits):
                continue
            report.orbits.append(orbit)
    report.evaluations = pmap.calls
    if not report.found:
        log.info("no periodic orbit located for masses %s", masses.format())
    return report


def _polish(pmap, x0, period, xtol):
    def obj(x):
        r = pmap.residual(x, period)
        return 1e6 if r is None else float(r @ r)

    res = optimize.minimize(obj, x0, method="Nelder-Mead",
                            options={"xatol": 1e-13, "fatol": 1e-26, "maxiter": 2000})
    x = res.x

    def fun(x):
        r = pmap.residual(x, period)
        return np.full(2, 1e3) if r is None else r

    try:
        sol = optimize.root(fun, x, method="hybr", options={"xtol": 1e-14})
        if np.linalg.norm(fun(sol.x)) < np.linalg.norm(fun(x)):
            x = sol.x
    except (ValueError, FloatingPointError):
        pass
    r = pmap.residual(x, period)
    if r is None or np.linalg.norm(r) > xtol:
        return None
    # ball 1 resting on the floor is a degenerate limit, not an orbit
    if x[0] < 1e-6 * pmap.s_max:
        return None
    image, labels, rhos, times = pmap.run(x, period)
    if not np.any(labels > 0):
        return None
    for p in range(1, period):
        if period % p == 0:
            rp = pmap.residual(x, p)
            if rp is not None and np.linalg.norm(rp) < 1e-6:
                return None
    events = [CollisionEvent(float(t), int(s), float(rho)) for t, s, rho in zip(times, labels, rhos)]
    full = cocycle_matrix(events, pmap.masses)
    eig = np.linalg.eigvals(reduced_matrix(full))
    return PeriodicOrbit(tuple(float(a) for a in x), period, events, tuple(int(s) for s in labels),
                         float(np.linalg.norm(r)), full, eig, float(np.linalg.det(full)))


def _same_orbit(a: PeriodicOrbit, b: PeriodicOrbit) -> bool:
    """Same period and same multiset of impact speeds (covers cyclic shifts)."""
    if a.period != b.period or len(a.events) != len(b.events):
        return False
    ra = sorted(e.rho for e in a.events)
    rb = sorted(e.rho for e in b.events)
    return bool(np.allclose(ra, rb, atol=1e-6))
