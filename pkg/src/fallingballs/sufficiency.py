"""Symbolic collision sequences and their neutral spaces, over exact rationals.

A sequence is a list of labels: ``0`` for a floor collision, ``i`` for the ball
pair ``(i, i+1)``. For a sequence whose ball collisions connect all n balls,
the neutral space is

    {dh : sum(dh) = 0,  first row of (R*_{i_k} ... R*_{i_1}) . dh = 0 for every floor event k}

with R* = R^T and R_0 = I. The sequence is sufficient for the masses when this
space is {0}. No floating point enters any rank decision in this module.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import MassVector, random_masses
from .errors import DomainError, PreconditionViolated


@dataclass(frozen=True)
class SymbolicSequence:
    sigmas: tuple
    n: int

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(int(s) for s in self.sigmas))
        if self.n < 2:
            raise DomainError("need n >= 2")
        for s in self.sigmas:
            if not 0 <= s <= self.n - 1:
                raise DomainError(f"label {s} out of range for n={self.n}")

    def __len__(self):
        return len(self.sigmas)

    def __iter__(self):
        return iter(self.sigmas)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return SymbolicSequence(self.sigmas[k], self.n)
        return self.sigmas[k]

    @classmethod
    def parse(cls, text: str, n: Optional[int] = None) -> "SymbolicSequence":
        """Parse ``"0-1,1-2,0-1"``; n defaults to the largest ball index seen (at least 2)."""
        labels = []
        for tok in text.replace(" ", "").split(","):
            if not tok:
                continue
            try:
                a, b = (int(x) for x in tok.split("-"))
            except ValueError:
                raise DomainError(f"bad collision token {tok!r}") from None
            if b != a + 1:
                raise DomainError(f"collision {tok!r} is not of the form i-(i+1)")
            labels.append(a)
        if n is None:
            n = max([s + 1 for s in labels] + [2])
        return cls(tuple(labels), n)

    def format(self) -> str:
        return ",".join(f"{s}-{s + 1}" for s in self.sigmas)

    def insert(self, position: int, label: int) -> "SymbolicSequence":
        s = list(self.sigmas)
        s.insert(position, label)
        return SymbolicSequence(tuple(s), self.n)


@dataclass(frozen=True)
class ExtendedSequence:
    """Labels together with impact data rho_k > 0."""

    entries: tuple
    n: int

    def __post_init__(self):
        ents = tuple((int(s), r) for s, r in self.entries)
        object.__setattr__(self, "entries", ents)
        for s, r in ents:
            if r <= 0:
                raise DomainError(f"rho must be positive, got {r!r}")
        SymbolicSequence(tuple(s for s, _ in ents), self.n)

    @classmethod
    def from_events(cls, events, n: int) -> "ExtendedSequence":
        return cls(tuple((e.sigma, e.rho) for e in events), n)

    @property
    def symbolic(self) -> SymbolicSequence:
        return SymbolicSequence(tuple(s for s, _ in self.entries), self.n)

    def insert(self, position: int, sigma: int, rho) -> "ExtendedSequence":
        e = list(self.entries)
        e.insert(position, (sigma, rho))
        return ExtendedSequence(tuple(e), self.n)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class CollisionGraph:
    edges: frozenset
    n: int

    @property
    def balls_connected(self) -> bool:
        """Restriction to vertices {1..n} connected, i.e. every pair (i, i+1) occurs."""
        return all(frozenset((i, i + 1)) in self.edges for i in range(1, self.n))

    @property
    def has_floor(self) -> bool:
        return frozenset((0, 1)) in self.edges


def collision_graph(seq: SymbolicSequence) -> CollisionGraph:
    return CollisionGraph(frozenset(frozenset((s, s + 1)) for s in seq), seq.n)


def _components(seq: SymbolicSequence) -> int:
    parent = list(range(seq.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for s in set(seq.sigmas):
        if s > 0:
            parent[find(s - 1)] = find(s)
    return len({find(a) for a in range(seq.n)})


def is_admissible(seq: SymbolicSequence) -> bool:
    """Necessary condition for the flow to realise ``seq``.

    After a collision of pair (i, i+1) the two balls separate at a constant
    relative speed, so the pair can only meet again once ball i or ball i+1
    has hit something else, i.e. label i-1 or i+1 occurs in between.
    """
    last = {}
    for k, s in enumerate(seq):
        if s > 0:
            prev = last.get(s)
            if prev is not None and not any(x in (s - 1, s + 1) for x in seq.sigmas[prev + 1:k]):
                return False
            last[s] = k
    return True


def neutral_velocity_space(seq: SymbolicSequence) -> int:
    """Dimension of the neutral (0, dv) vectors: dv constant on ball components, sum 0."""
    return _components(seq) - 1


# -- exact linear algebra ---------------------------------------------------

def rref(rows: Sequence[Sequence[Fraction]], ncols: int):
    """Reduced row echelon form; returns (rows, pivot columns)."""
    a = [[Fraction(x) for x in r] for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((k for k in range(r, len(a)) if a[k][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for k in range(len(a)):
            if k != r and a[k][c] != 0:
                f = a[k][c]
                a[k] = [x - f * y for x, y in zip(a[k], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    return a[:r], pivots


def nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> List[tuple]:
    red, pivots = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * ncols
        x[f] = Fraction(1)
        for row, p in zip(red, pivots):
            x[p] = -row[f]
        basis.append(tuple(x))
    return basis


def _apply_rstar(rows, label, gamma):
    """Left-multiply the n x n matrix ``rows`` by R*_label = R_label^T in place."""
    j = label - 1
    g = gamma
    a, b = rows[j], rows[j + 1]
    rows[j] = [g * x + (1 + g) * y for x, y in zip(a, b)]
    rows[j + 1] = [(1 - g) * x - g * y for x, y in zip(a, b)]


def floor_equations(seq: SymbolicSequence, masses: MassVector) -> List[tuple]:
    """One row Pi_1 R*_{i_k} ... R*_{i_1} per floor collision k."""
    n = seq.n
    m = masses.exact
    gam = [None] + [(m[i - 1] - m[i]) / (m[i - 1] + m[i]) for i in range(1, n)]
    prod = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    eqs = []
    for s in seq:
        if s == 0:
            eqs.append(tuple(prod[0]))
        else:
            _apply_rstar(prod, s, gam[s])
    return eqs


@dataclass(frozen=True)
class NeutralSpaceReport:
    dimension: int
    basis: tuple
    sufficient: bool
    n_equations: int = 0

    def __post_init__(self):
        assert self.sufficient == (self.dimension == 0)


def _check_masses(seq, masses):
    if masses.n != seq.n:
        raise DomainError(f"sequence has n={seq.n} but {masses.n} masses given")


def neutral_space(seq: SymbolicSequence, masses: MassVector) -> NeutralSpaceReport:
    _check_masses(seq, masses)
    if not collision_graph(seq).balls_connected:
        raise PreconditionViolated(
            f"ball collisions of {seq.format() or '<empty>'} do not connect all {seq.n} balls")
    eqs = floor_equations(seq, masses)
    rows = [tuple(Fraction(1) for _ in range(seq.n))] + eqs
    basis = nullspace(rows, seq.n)
    return NeutralSpaceReport(len(basis), tuple(basis), not basis, len(eqs))


def is_sufficient(seq: SymbolicSequence, masses: MassVector) -> bool:
    return neutral_space(seq, masses).sufficient


class NeutralSpaceTracker:
    """Incremental neutral space along a growing sequence.

    Keeps the running product of R* and a kernel basis that is cut down by each
    floor equation, so long prefixes cost O(n^2) exact operations per event.
    """

    def __init__(self, masses: MassVector):
        self.n = n = masses.n
        m = masses.exact
        self._gam = [None] + [(m[i - 1] - m[i]) / (m[i - 1] + m[i]) for i in range(1, n)]
        self._prod = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        # basis of {sum dh = 0}
        self.basis = [tuple(Fraction(1) if k == j else Fraction(-1) if k == n - 1 else Fraction(0)
                            for k in range(n)) for j in range(n - 1)]
        self._parent = list(range(n))
        self.events = 0

    def _find(self, a):
        while self._parent[a] != a:
            self._parent[a] = self._parent[self._parent[a]]
            a = self._parent[a]
        return a

    def push(self, label: int):
        self.events += 1
        if label != 0:
            _apply_rstar(self._prod, label, self._gam[label])
            self._parent[self._find(label - 1)] = self._find(label)
            return
        row = self._prod[0]
        coef = [sum(r * x for r, x in zip(row, b)) for b in self.basis]
        p = next((k for k, c in enumerate(coef) if c != 0), None)
        if p is None:
            return
        bp, cp = self.basis[p], coef[p]
        new = []
        for k, (b, c) in enumerate(zip(self.basis, coef)):
            if k == p:
                continue
            f = c / cp
            new.append(tuple(x - f * y for x, y in zip(b, bp)))
        self.basis = new

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def components(self) -> int:
        return len({self._find(a) for a in range(self.n)})

    @property
    def connected(self) -> bool:
        return self.components == 1


# -- dichotomy --------------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    """``verdict`` is "D1" (sufficient for almost every mass vector) or "D2"."""

    verdict: str
    certified: bool
    witness: Optional[MassVector] = None
    trials: int = 0
    reason: str = ""


def classify_sequence(seq: SymbolicSequence, trials: int = 8, seed=0,
                      max_int: int = 10_000) -> Classification:
    """D1 if some random exact mass vector makes ``seq`` sufficient.

    One exact sufficient point certifies D1 because the exceptional set is a
    proper algebraic subset. Otherwise D2 is presumed, except for the structural
    cases (no floor collision, or a missing ball pair) which are certified.
    """
    graph = collision_graph(seq)
    if not graph.has_floor:
        return Classification("D2", True, reason="no floor collision: no equations")
    if not graph.balls_connected:
        return Classification("D2", True, reason="a ball pair never collides")
    rng = np.random.default_rng(seed)
    for k in range(1, trials + 1):
        masses = random_masses(seq.n, rng, max_int=max_int)
        if is_sufficient(seq, masses):
            return Classification("D1", True, masses, k)
    return Classification("D2", False, trials=trials, reason=f"insufficient at {trials} mass vectors")


# -- monotonicity harnesses -------------------------------------------------

def cmp_check(seq: ExtendedSequence, insertion: Tuple[int, int, object], masses: MassVector) -> bool:
    """Insert ``(position, sigma, rho)`` into a sufficient extended sequence; still sufficient?"""
    if not is_sufficient(seq.symbolic, masses):
        raise PreconditionViolated("cmp_check needs a sufficient sequence")
    pos, sigma, rho = insertion
    return is_sufficient(seq.insert(pos, sigma, rho).symbolic, masses)


def subsequence_monotonicity_check(seq: SymbolicSequence, mask: Sequence[bool],
                                   masses: MassVector) -> bool:
    """If the masked subsequence is sufficient, check the whole sequence is."""
    if len(mask) != len(seq):
        raise DomainError("mask length differs from sequence length")
    sub = SymbolicSequence(tuple(s for s, keep in zip(seq, mask) if keep), seq.n)
    if not is_sufficient(sub, masses):
        raise PreconditionViolated("masked subsequence is not sufficient")
    return is_sufficient(seq, masses)
