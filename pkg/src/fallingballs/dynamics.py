"""Event-driven propagation of n balls falling on a half line.

Units have gravity a = -1 and the flow is studied on H = 1, where
``H = sum(m_i q_i + m_i v_i**2 / 2)``. Ball collisions are elastic; ball 1
also bounces elastically off the floor at q = 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import (
    AccumulationSuspected,
    DegenerateFrame,
    DomainError,
    GrazingSingularity,
    NoEvent,
    OrderViolation,
    Singularity,
)

log = logging.getLogger(__name__)

Number = Union[float, Fraction]
Label = Union[int, tuple]


@dataclass(frozen=True)
class Tolerances:
    sing: float = 1e-11
    graze: float = 1e-11
    ord: float = 1e-9
    energy: float = 1e-9
    acc_count: int = 1000
    acc_window: float = 1e-6


DEFAULT_TOL = Tolerances()


def _number(x) -> Number:
    if isinstance(x, (Fraction, int, str)):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    raise TypeError(f"mass must be a real number, got {x!r}")


@dataclass(frozen=True)
class MassVector:
    """Ordered masses m_1 >= m_2 >= ... >= m_n > 0.

    Values given as ``int``, ``str`` or ``Fraction`` are kept exact. ``ordered``
    may be switched off for experiments with a heavier upper ball.
    """

    m: tuple
    strict: bool = False
    ordered: bool = True

    def __post_init__(self):
        vals = tuple(_number(x) for x in self.m)
        object.__setattr__(self, "m", vals)
        if len(vals) < 2:
            raise DomainError("need at least two balls")
        if any(x <= 0 for x in vals):
            raise DomainError(f"masses must be positive: {vals}")
        if self.ordered:
            for a, b in zip(vals, vals[1:]):
                if a < b or (self.strict and a == b):
                    kind = "strictly decreasing" if self.strict else "non-increasing"
                    raise DomainError(f"masses must be {kind}: {vals}")

    @classmethod
    def parse(cls, text: str, **kw) -> "MassVector":
        """Parse ``"2/1,1/1"`` or ``"2,1"`` (exact) or ``"2.0,1.5"`` (decimal, exact)."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return cls(tuple(Fraction(p) for p in parts), **kw)

    def __len__(self):
        return len(self.m)

    def __iter__(self):
        return iter(self.m)

    def __getitem__(self, i):
        return self.m[i]

    @property
    def n(self) -> int:
        return len(self.m)

    @cached_property
    def values(self) -> np.ndarray:
        a = np.array([float(x) for x in self.m])
        a.setflags(write=False)
        return a

    @cached_property
    def exact(self) -> tuple:
        """The masses as exact rationals (floats are converted without rounding)."""
        return tuple(Fraction(x) for x in self.m)

    def gamma(self, i: int) -> Number:
        """gamma_i = (m_i - m_{i+1}) / (m_i + m_{i+1}) for the 1-based pair (i, i+1)."""
        a, b = self.m[i - 1], self.m[i]
        return (a - b) / (a + b)

    def alpha_factor(self, i: int) -> Number:
        """2 m_i m_{i+1} (m_i - m_{i+1}) / (m_i + m_{i+1})**2; alpha_i is this times rho."""
        a, b = self.m[i - 1], self.m[i]
        return 2 * a * b * (a - b) / ((a + b) * (a + b))

    def format(self) -> str:
        return ",".join(format_number(x) for x in self.m)


def format_number(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhaseState:
    q: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen(self.q))
        object.__setattr__(self, "v", _frozen(self.v))
        if self.q.shape != self.v.shape or self.q.ndim != 1:
            raise DomainError("q and v must be 1-d of equal length")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def momenta(self, masses: MassVector) -> np.ndarray:
        return masses.values * self.v

    def is_ordered(self, eps: float = DEFAULT_TOL.ord) -> bool:
        return bool(kernels.ordered(np.asarray(self.q), eps))

    def reversed(self) -> "PhaseState":
        return PhaseState(self.q, -self.v, self.t)

    def __repr__(self):
        return f"PhaseState(q={self.q.tolist()}, v={self.v.tolist()}, t={self.t!r})"


@dataclass(frozen=True)
class CollisionEvent:
    """A resolved collision. ``sigma`` is the label: 0 for the floor, i for pair (i, i+1)."""

    t: float
    sigma: int
    rho: float

    @property
    def pair(self) -> tuple:
        return (self.sigma, self.sigma + 1)

    @property
    def is_floor(self) -> bool:
        return self.sigma == 0


def label_of(sigma: Label) -> int:
    if isinstance(sigma, tuple):
        i, j = sigma
        if j != i + 1:
            raise DomainError(f"collision label must be (i, i+1), got {sigma}")
        return int(i)
    return int(sigma)


def energy(state: PhaseState, masses: MassVector) -> float:
    q, v, m = state.q, state.v, masses.values
    return float(np.sum(m * q + 0.5 * m * v * v))


def on_energy_surface(state: PhaseState, masses: MassVector, tol: float = DEFAULT_TOL.energy) -> bool:
    return abs(energy(state, masses) - 1.0) <= tol


def next_event(state: PhaseState, masses: MassVector, tol: Tolerances = DEFAULT_TOL):
    """Time to the next collision and its label, as ``(dt, (i, i+1))``."""
    dt, label, status = kernels.next_event(np.asarray(state.q), np.asarray(state.v), tol.sing)
    if status == kernels.NO_EVENT:
        raise NoEvent(f"no collision candidate from {state}")
    if status == kernels.SINGULAR:
        raise Singularity(f"multiple collision at dt={dt!r} from {state}")
    return float(dt), (int(label), int(label) + 1)


def advance(state: PhaseState, dt: float, tol: Tolerances = DEFAULT_TOL) -> PhaseState:
    if dt < 0:
        raise DomainError("dt must be non-negative")
    q = state.q.copy()
    v = state.v.copy()
    kernels.advance(q, v, float(dt))
    if not kernels.ordered(q, tol.ord):
        raise OrderViolation(f"positions out of order after dt={dt!r}: {q.tolist()}")
    return PhaseState(q, v, state.t + dt)


def apply_collision(state: PhaseState, sigma: Label, masses: MassVector,
                    tol: Tolerances = DEFAULT_TOL):
    """Resolve the collision ``sigma`` at the current instant; return ``(state, event)``."""
    label = label_of(sigma)
    q = state.q.copy()
    v = state.v.copy()
    if label == 0:
        if abs(q[0]) > tol.ord:
            raise DomainError(f"ball 1 is not at the floor (q1={q[0]!r})")
    else:
        if not 1 <= label < state.n:
            raise DomainError(f"no ball pair {label}")
        if abs(q[label] - q[label - 1]) > tol.ord:
            raise DomainError(f"balls {label} and {label + 1} are not in contact")
    rho, status = kernels.collide(q, v, masses.values, label, tol.graze)
    if status == kernels.GRAZING:
        raise GrazingSingularity(f"approach speed {rho!r} below {tol.graze} for label {label}")
    new = PhaseState(q, v, state.t)
    return new, CollisionEvent(state.t, label, float(rho))


@dataclass(eq=False)
class Trajectory:
    """Result of :func:`simulate`. Unpacks as ``final, events``."""

    initial: PhaseState
    final: PhaseState
    masses: MassVector
    times: np.ndarray
    labels: np.ndarray
    rhos: np.ndarray
    energies: np.ndarray
    states: Optional[np.ndarray] = None
    renorm_factors: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.labels)

    def __iter__(self) -> Iterator:
        yield self.final
        yield self.events

    @cached_property
    def events(self) -> list:
        return [CollisionEvent(float(t), int(s), float(r))
                for t, s, r in zip(self.times, self.labels, self.rhos)]

    @property
    def sequence(self) -> list:
        return [int(s) for s in self.labels]

    def state_after(self, k: int) -> PhaseState:
        """State right after the k-th event (1-based); needs ``record_states``."""
        if self.states is None:
            raise ValueError("trajectory was run without record_states")
        if k == 0:
            return self.initial
        n = self.initial.n
        row = self.states[k - 1]
        return PhaseState(row[:n], row[n:], float(self.times[k - 1]))

    def head(self, k: int) -> "Trajectory":
        states = None if self.states is None else self.states[:k]
        final = self.state_after(k) if self.states is not None else self.final
        return replace(self, final=final, times=self.times[:k], labels=self.labels[:k],
                       rhos=self.rhos[:k], energies=self.energies[:k], states=states)


_ERRORS = {
    kernels.NO_EVENT: NoEvent,
    kernels.SINGULAR: Singularity,
    kernels.GRAZING: GrazingSingularity,
    kernels.ORDER: OrderViolation,
    kernels.ACCUMULATION: AccumulationSuspected,
    kernels.DEGENERATE: DegenerateFrame,
}


def raise_status(status: int, message: str, partial=None):
    if status != kernels.OK:
        raise _ERRORS[status](f"{kernels.STATUS_NAMES[status]}: {message}", partial)


def simulate(state: PhaseState, masses: MassVector, max_collisions: Optional[int] = None,
             max_time: Optional[float] = None, tol: Tolerances = DEFAULT_TOL,
             renormalize_every: int = 0, record_states: bool = False) -> Trajectory:
    """Run the event loop until ``max_collisions`` events or ``max_time`` elapsed.

    With ``max_time`` the final state is advanced to exactly ``state.t + max_time``.
    ``renormalize_every=k`` rescales velocities back to H = 1 every k events.
    Failures raise a :class:`SimulationError` whose ``partial`` is the trajectory so far.
    """
    if max_collisions is None and max_time is None:
        raise ValueError("give max_collisions or max_time")
    if masses.n != state.n:
        raise DomainError("state and masses disagree on n")
    n_max = np.iinfo(np.int64).max if max_collisions is None else int(max_collisions)
    t_max = np.inf if max_time is None else float(max_time)
    q = state.q.copy()
    v = state.v.copy()
    out = kernels.run_events(q, v, masses.values, float(state.t), n_max, t_max,
                             tol.sing, tol.graze, tol.ord, int(tol.acc_count),
                             float(tol.acc_window), int(renormalize_every), bool(record_states))
    t, done, status, times, labels, rhos, hs, states, factors = out
    for k, f in enumerate(factors):
        log.debug("renormalised velocities after %d events by %r", (k + 1) * renormalize_every, f)
    traj = Trajectory(state, PhaseState(q, v, t), masses, times, labels, rhos, hs,
                      states if record_states else None, factors)
    raise_status(status, f"after {done} events at t={t!r}", traj)
    return traj


def sample_state(masses: MassVector, rng: np.random.Generator) -> PhaseState:
    """Random state on H = 1.

    Exponential floor height and gaps, Gaussian velocities, then the scaling
    (q, v) -> (lam q, sqrt(lam) v), which multiplies H by lam, puts it on H = 1.
    This is a sampling convention, not the Liouville measure.
    """
    n = masses.n
    q = np.cumsum(rng.exponential(1.0, size=n))
    v = rng.normal(size=n)
    m = masses.values
    h = float(np.sum(m * q + 0.5 * m * v * v))
    lam = 1.0 / h
    return PhaseState(q * lam, v * np.sqrt(lam), 0.0)


def random_masses(n: int, rng: np.random.Generator, max_int: int = 10_000,
                  strict: bool = True) -> MassVector:
    """Random exact rational masses p/q with 1 <= p, q <= max_int, strictly decreasing."""
    while True:
        vals = {Fraction(int(rng.integers(1, max_int + 1)), int(rng.integers(1, max_int + 1)))
                for _ in range(n)}
        if len(vals) == n:
            return MassVector(tuple(sorted(vals, reverse=True)), strict=strict)


def moderate_masses(n: int, rng: np.random.Generator, low: float = 1.0, high: float = 4.0,
                    denominator: int = 1000) -> MassVector:
    """Strictly decreasing rational masses k/denominator in [low, high]; for simulations."""
    while True:
        ks = set(int(k) for k in rng.integers(int(low * denominator), int(high * denominator) + 1, size=n))
        if len(ks) == n:
            return MassVector(tuple(Fraction(k, denominator) for k in sorted(ks, reverse=True)),
                              strict=True)
