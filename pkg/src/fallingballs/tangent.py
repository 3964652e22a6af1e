"""Derivative cocycle of the flow in (dh, dv) coordinates.

``dh_i = m_i dq_i + m_i v_i dv_i``. Between collisions the derivative is the
identity in these coordinates, so the cocycle over a segment is the ordered
product of per-collision maps. Everything here works on float arrays and on
object arrays of :class:`fractions.Fraction` alike.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Sequence

import numpy as np

from .dynamics import CollisionEvent, MassVector
from .errors import DomainError, ReductionError


def _array(x) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype == object or any(isinstance(e, Fraction) for e in a.ravel()):
        return np.array(list(a.ravel()), dtype=object).reshape(a.shape)
    return a.astype(float)


@dataclass(frozen=True, eq=False)
class TangentVector:
    dh: np.ndarray
    dv: np.ndarray
    check: bool = True

    def __post_init__(self):
        dh, dv = _array(self.dh), _array(self.dv)
        object.__setattr__(self, "dh", dh)
        object.__setattr__(self, "dv", dv)
        if dh.shape != dv.shape:
            raise DomainError("dh and dv must have the same length")
        if self.check:
            scale = max(max(abs(x) for x in dh), max(abs(x) for x in dv), 1e-300)
            if abs(sum(dh)) > 1e-12 * scale:
                raise ReductionError(f"sum(dh) = {sum(dh)!r} is not zero")

    @classmethod
    def from_configuration(cls, dq, dv, masses: MassVector, v) -> "TangentVector":
        m = np.asarray(masses.values if _array(dq).dtype != object else masses.exact)
        dq, dv, v = _array(dq), _array(dv), _array(v)
        return cls(m * dq + m * v * dv, dv, check=False)

    def dq(self, masses: MassVector, v) -> np.ndarray:
        m = masses.values if self.dh.dtype != object else np.array(masses.exact, dtype=object)
        return (self.dh - m * _array(v) * self.dv) / m

    def dp(self, masses: MassVector) -> np.ndarray:
        m = masses.values if self.dv.dtype != object else np.array(masses.exact, dtype=object)
        return m * self.dv

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.dh, self.dv])

    @classmethod
    def from_array(cls, a, check: bool = False) -> "TangentVector":
        a = _array(a)
        n = a.shape[0] // 2
        return cls(a[:n], a[n:], check=check)

    def reduction_drift(self) -> tuple:
        """(sum dh, sum dv): the energy-surface and section constraints."""
        return sum(self.dh), sum(self.dv)


def q_form(tv: TangentVector):
    """Q_1 = sum_i dh_i dv_i."""
    return sum(a * b for a, b in zip(tv.dh, tv.dv))


def symplectic_form(u: TangentVector, w: TangentVector):
    """omega(u, w) = sum_i (dh_i(u) dv_i(w) - dv_i(u) dh_i(w))."""
    return sum(a * d - b * c for a, b, c, d in zip(u.dh, u.dv, w.dh, w.dv))


def symplectic_matrix(n: int) -> np.ndarray:
    """J with omega(u, w) = u^T J w in the (dh, dv) ordering."""
    z = np.zeros((n, n))
    e = np.eye(n)
    return np.block([[z, e], [-e, z]])


@dataclass(frozen=True)
class CollisionDerivative:
    """Structured per-collision map.

    ball ``i``: (dh, dv) -> (R_i^T [dh + S_i dv], R_i dv);
    floor: dv_1 -> dv_1 + shear * dh_1 with ``shear = 2 / (m_1 v_1^+)``.
    """

    kind: str
    n: int
    index: int = 0
    gamma: object = 0
    alpha: object = 0
    shear: object = 0

    def apply(self, dh, dv):
        dh = _array(dh).copy()
        dv = _array(dv).copy()
        if self.kind == "floor":
            dv[0] = dv[0] + self.shear * dh[0]
            return dh, dv
        j = self.index - 1
        g, a = self.gamma, self.alpha
        hi, hk, vi, vk = dh[j], dh[j + 1], dv[j], dv[j + 1]
        s = a * (vi - vk)
        hi, hk = hi + s, hk - s
        dh[j] = g * hi + (1 + g) * hk
        dh[j + 1] = (1 - g) * hi - g * hk
        dv[j] = g * vi + (1 - g) * vk
        dv[j + 1] = (1 + g) * vi - g * vk
        return dh, dv

    def __call__(self, tv: TangentVector) -> TangentVector:
        dh, dv = self.apply(tv.dh, tv.dv)
        return TangentVector(dh, dv, check=False)

    def velocity_block(self) -> np.ndarray:
        """R_i (identity for the floor)."""
        exact = isinstance(self.gamma, Fraction) or isinstance(self.shear, Fraction)
        r = _eye(self.n, exact)
        if self.kind == "ball":
            j, g = self.index - 1, self.gamma
            r[j, j], r[j, j + 1] = g, 1 - g
            r[j + 1, j], r[j + 1, j + 1] = 1 + g, -g
        return r

    def matrix(self) -> np.ndarray:
        """Dense 2n x 2n matrix acting on the stacked (dh, dv) column."""
        exact = isinstance(self.gamma, Fraction) or isinstance(self.shear, Fraction)
        n = self.n
        cols = []
        for k in range(2 * n):
            e = _zeros(2 * n, exact)
            e[k] = 1
            dh, dv = self.apply(e[:n], e[n:])
            cols.append(np.concatenate([dh, dv]))
        return np.stack(cols, axis=1)


def _zeros(k, exact):
    if exact:
        return np.array([Fraction(0)] * k, dtype=object)
    return np.zeros(k)


def _eye(n, exact):
    if exact:
        r = np.array([[Fraction(int(i == j)) for j in range(n)] for i in range(n)], dtype=object)
        return r
    return np.eye(n)


def ball_derivative(i: int, rho, masses: MassVector) -> CollisionDerivative:
    """Derivative at a collision of balls i and i+1 (1-based) with approach speed rho."""
    if not 1 <= i < masses.n:
        raise DomainError(f"no ball pair ({i}, {i + 1}) for n={masses.n}")
    if rho <= 0:
        raise DomainError(f"ball collision needs rho > 0, got {rho!r}")
    if isinstance(rho, Fraction):
        a, b = masses.exact[i - 1], masses.exact[i]
    else:
        a, b = float(masses.m[i - 1]), float(masses.m[i])
    gamma = (a - b) / (a + b)
    alpha = 2 * a * b * (a - b) / ((a + b) * (a + b)) * rho
    return CollisionDerivative("ball", masses.n, index=i, gamma=gamma, alpha=alpha)


def floor_derivative(v1_plus, masses: MassVector) -> CollisionDerivative:
    if v1_plus <= 0:
        raise DomainError(f"floor collision needs v1+ > 0, got {v1_plus!r}")
    m1 = masses.exact[0] if isinstance(v1_plus, Fraction) else float(masses.m[0])
    return CollisionDerivative("floor", masses.n, shear=2 / (m1 * v1_plus))


def derivative_for(event: CollisionEvent, masses: MassVector) -> CollisionDerivative:
    if event.sigma == 0:
        return floor_derivative(event.rho, masses)
    return ball_derivative(event.sigma, event.rho, masses)


def push_frame(frame: Sequence[TangentVector], events: Iterable[CollisionEvent],
               masses: MassVector) -> List[TangentVector]:
    """Map each vector through the collision derivatives of ``events`` in order."""
    derivs = [derivative_for(e, masses) for e in events]
    out = []
    for tv in frame:
        dh, dv = tv.dh, tv.dv
        for d in derivs:
            dh, dv = d.apply(dh, dv)
        out.append(TangentVector(dh, dv, check=False))
    return out


def q_history(tv: TangentVector, events: Iterable[CollisionEvent], masses: MassVector) -> list:
    """Q_1 before the first event and after each event."""
    qs = [q_form(tv)]
    for e in events:
        tv = derivative_for(e, masses)(tv)
        qs.append(q_form(tv))
    return qs


def cocycle_matrix(events: Iterable[CollisionEvent], masses: MassVector) -> np.ndarray:
    """Dense product D_N ... D_1 (float)."""
    m = np.eye(2 * masses.n)
    for e in events:
        m = derivative_for(e, masses).matrix() @ m
    return m


def reduced_matrix(full: np.ndarray) -> np.ndarray:
    """Action of a cocycle on {sum dh = 0} modulo the flow direction (0, 1, ..., 1).

    Represented on the section {sum dh = 0, sum dv = 0} with an orthonormal basis.
    """
    n = full.shape[0] // 2
    c = np.eye(n) - np.ones((n, n)) / n
    u, _, _ = np.linalg.svd(c)
    b1 = u[:, : n - 1]
    z = np.zeros((n, n - 1))
    basis = np.block([[b1, z], [z, b1]])
    proj = np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), c]])
    return basis.T @ proj @ full @ basis
