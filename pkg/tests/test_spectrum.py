from fractions import Fraction

import numpy as np
import pytest

from fallingballs.dynamics import MassVector, moderate_masses, sample_state, simulate
from fallingballs.spectrum import (
    cone_check_sequence,
    lyapunov_spectrum,
    stable_orbit_probe,
    strict_invariance_check,
    sufficiency_onset,
)
from fallingballs.sufficiency import SymbolicSequence
from fallingballs.tangent import TangentVector, push_frame, q_form


def test_spectrum_shape_and_pairing():
    m = MassVector((2, 1))
    rep = lyapunov_spectrum(sample_state(m, np.random.default_rng(0)), m, 50_000)
    assert rep.exponents.shape == (4,)
    assert np.all(np.diff(rep.exponents) <= 0)
    assert rep.top > 0.5
    assert rep.pairing_residual < 1e-2
    assert rep.identification == "angle"
    assert rep.reduced.shape == (2,)
    assert rep.per_collision[0] == pytest.approx(rep.top * rep.total_time / rep.collisions)


def test_equal_masses_have_zero_exponents():
    m = MassVector((1, 1))
    rep = lyapunov_spectrum(sample_state(m, np.random.default_rng(1)), m, 100_000)
    assert np.abs(rep.exponents).max() < 1e-2


def test_renorm_stride_does_not_change_estimate():
    m = MassVector((3, 2, 1))
    x = sample_state(m, np.random.default_rng(2))
    a = lyapunov_spectrum(x, m, 20_000, renorm_every=1)
    b = lyapunov_spectrum(x, m, 20_000, renorm_every=5)
    np.testing.assert_allclose(a.exponents, b.exponents, atol=1e-8)


def test_seed_stability():
    m = MassVector((2, 1))
    reps = [lyapunov_spectrum(sample_state(m, np.random.default_rng(s)), m, 100_000, seed=s)
            for s in range(4)]
    tops = np.array([r.top for r in reps])
    se = np.array([r.stderr[0] for r in reps])
    for i in range(len(tops)):
        for j in range(i):
            assert abs(tops[i] - tops[j]) <= 3 * np.hypot(se[i], se[j])


# -- cone checks ------------------------------------------------------------

def test_strict_check_on_sufficient_segment():
    m = MassVector((2, 1))
    x = sample_state(m, np.random.default_rng(0))
    res = strict_invariance_check(x, m, 30)
    assert res.strict and res.neutral_dim_h == 0 and res.neutral_dim_v == 0


def test_segment_without_floor():
    m = MassVector((Fraction(3), Fraction(2), Fraction(1)))
    res = cone_check_sequence(SymbolicSequence((1, 2, 1), 3), m)
    assert not res.strict and res.neutral_dim_h == 2


def test_empty_segment():
    m = MassVector((2, 1))
    res = strict_invariance_check(sample_state(m, np.random.default_rng(0)), m, 0)
    assert not res.strict


def test_strict_segment_increases_q_on_cone_boundary():
    m = MassVector((3, 2, 1))
    x = sample_state(m, np.random.default_rng(3))
    traj = simulate(x, m, max_collisions=60)
    assert strict_invariance_check(x, m, 60).strict
    rng = np.random.default_rng(4)
    for _ in range(20):
        # Q = 0 boundary: pure dh vectors and pure dv vectors
        dh = rng.normal(size=3)
        dh -= dh.mean()
        for t in (TangentVector(dh, np.zeros(3)), TangentVector(np.zeros(3), rng.normal(size=3))):
            out = push_frame([t], traj.events, m)[0]
            assert q_form(out) > 1e-12


# -- onset ------------------------------------------------------------------

def test_onset_n2_soon_after_both_types():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = moderate_masses(2, rng)
        x = sample_state(m, rng)
        k = sufficiency_onset(x, m, 1000)
        labels = simulate(x, m, max_collisions=1000).sequence
        both = max(labels.index(0), labels.index(1)) + 1
        assert k is not None and k <= both + 2


def test_onset_equal_masses_after_all_ghosts_land():
    m = MassVector((1, 1, 1))
    x = sample_state(m, np.random.default_rng(6))
    k = sufficiency_onset(x, m, 5000)
    traj = simulate(x, m, max_collisions=5000)
    slots, seen = [0, 1, 2], set()
    for j, s in enumerate(traj.sequence, start=1):
        if s == 0:
            seen.add(slots[0])
        else:
            slots[s - 1], slots[s] = slots[s], slots[s - 1]
        if len(seen) == 3:
            break
    assert k is not None and k <= j


def test_onset_none_when_budget_too_small():
    m = MassVector((3, 2, 1))
    assert sufficiency_onset(sample_state(m, np.random.default_rng(0)), m, 1) is None


# -- periodic orbits --------------------------------------------------------

def test_stable_orbit_light_ball_below():
    rep = stable_orbit_probe(MassVector((1, 2), ordered=False))
    assert rep.found
    best = rep.best()
    assert best.stable
    assert best.max_unit_deviation <= 1e-6
    assert best.determinant == pytest.approx(1.0, abs=1e-10)
    assert best.residual <= 1e-9


def test_heavy_ball_below_orbits_are_hyperbolic():
    rep = stable_orbit_probe(MassVector((2, 1)))
    for orbit in rep.orbits:
        assert orbit.max_unit_deviation > 1e-3
        assert orbit.determinant == pytest.approx(1.0, abs=1e-8)


def test_probe_wants_two_balls():
    with pytest.raises(ValueError):
        stable_orbit_probe(MassVector((3, 2, 1)))
