import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fallingballs import oracle
from fallingballs.dynamics import (
    MassVector,
    PhaseState,
    Tolerances,
    advance,
    apply_collision,
    energy,
    moderate_masses,
    next_event,
    sample_state,
    simulate,
)
from fallingballs.errors import (
    AccumulationSuspected,
    DomainError,
    GrazingSingularity,
    OrderViolation,
    Singularity,
)


def st_(q, v, t=0.0):
    return PhaseState(q, v, t)


# -- energy -----------------------------------------------------------------

@pytest.mark.parametrize("m,q,v,want", [
    ((1, 1), (0, 1), (0, 0), 1.0),
    ((1, 1), (0, 0), (1, 1), 1.0),
    ((3, 2, 1), (0.1, 0.2, 0.3), (0, 0, 0), 1.0),
])
def test_energy_examples(m, q, v, want):
    assert energy(st_(q, v), MassVector(m)) == pytest.approx(want, abs=1e-15)


# -- next_event / advance ---------------------------------------------------

def test_next_event_ball_first():
    dt, sigma = next_event(st_((1, 2), (2, 0)), MassVector((2, 1)))
    assert sigma == (1, 2)
    assert dt == pytest.approx(0.5, abs=1e-15)


def test_next_event_floor_when_parallel():
    dt, sigma = next_event(st_((1, 2), (1, 1)), MassVector((1, 1)))
    assert sigma == (0, 1)
    assert dt == pytest.approx(1 + math.sqrt(3), rel=1e-15)


@pytest.mark.parametrize("c", [0.1, 1.0, 3.0])
def test_next_event_up_down_flight(c):
    dt, sigma = next_event(st_((0, 1), (c, c)), MassVector((1, 1)))
    assert sigma == (0, 1)
    assert dt == pytest.approx(2 * c, rel=1e-14)


def test_floor_time_no_cancellation():
    # tiny height, falling: the naive formula loses all digits
    q1, v1 = 1e-14, -1.0
    dt, _ = next_event(st_((q1, 5.0), (v1, v1)), MassVector((1, 1)))
    exact = 2 * q1 / (math.sqrt(v1 * v1 + 2 * q1) - v1)
    assert dt == pytest.approx(exact, rel=1e-12)


def test_simultaneous_events_are_singular():
    # pair (1,2) and (2,3) meet at the same instant
    x = st_((1.0, 2.0, 3.0), (1.0, 0.0, -1.0))
    with pytest.raises(Singularity):
        next_event(x, MassVector((3, 2, 1)))


def test_advance_examples():
    y = advance(st_((0, 1), (1, 1)), 1.0)
    np.testing.assert_allclose(y.q, (0.5, 1.5))
    np.testing.assert_allclose(y.v, (0, 0))
    assert y.t == 1.0
    x = st_((0.2, 0.7), (0.3, -0.1), 4.0)
    y = advance(x, 0.0)
    assert np.array_equal(y.q, x.q) and np.array_equal(y.v, x.v) and y.t == x.t
    y = advance(st_((1, 2), (2, 0)), 0.5)
    np.testing.assert_allclose(y.q, (1.875, 1.875))
    np.testing.assert_allclose(y.v, (1.5, -0.5))


def test_advance_past_collision_is_order_violation():
    with pytest.raises(OrderViolation):
        advance(st_((1, 2), (2, 0)), 0.7)


def test_advance_rejects_negative_dt():
    with pytest.raises(DomainError):
        advance(st_((1, 2), (2, 0)), -0.1)


# -- collisions -------------------------------------------------------------

def test_equal_mass_swap():
    y, ev = apply_collision(st_((0.5, 0.5), (1, -1)), (1, 2), MassVector((1, 1)))
    np.testing.assert_allclose(y.v, (-1, 1))
    assert ev.rho == pytest.approx(2.0)


def test_unequal_collision_example():
    m = MassVector((3, 1))
    y, ev = apply_collision(st_((0.5, 0.5), (1, -1)), (1, 2), m)
    np.testing.assert_allclose(y.v, (0, 2), atol=1e-15)
    assert float(np.dot(m.values, y.v)) == pytest.approx(2.0)
    assert float(0.5 * np.dot(m.values, y.v ** 2)) == pytest.approx(2.0)
    assert ev.sigma == 1 and ev.rho == pytest.approx(2.0)


def test_floor_reflection():
    y, ev = apply_collision(st_((0.0, 1.0), (-2, 0)), (0, 1), MassVector((1, 1)))
    assert y.v[0] == 2.0 and ev.rho == 2.0 and ev.is_floor


def test_grazing_collision_rejected():
    with pytest.raises(GrazingSingularity):
        apply_collision(st_((0.5, 0.5), (1e-13, 0.0)), (1, 2), MassVector((2, 1)))


def test_collision_requires_contact():
    with pytest.raises(DomainError):
        apply_collision(st_((0.1, 0.5), (1, -1)), (1, 2), MassVector((2, 1)))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-5, 5), st.floats(-5, 5))
def test_momentum_energy_and_involution(m1, m2, va, vb):
    if va - vb < 1e-3:
        va, vb = vb + 1.0, va
    m = MassVector((m1, m2), ordered=False)
    x = st_((0.5, 0.5), (va, vb))
    y, _ = apply_collision(x, (1, 2), m)
    p0, p1 = m1 * va + m2 * vb, m1 * y.v[0] + m2 * y.v[1]
    assert abs(p1 - p0) <= 1e-12 * max(1.0, abs(m1 * va) + abs(m2 * vb))
    k0 = m1 * va ** 2 + m2 * vb ** 2
    assert abs(m1 * y.v[0] ** 2 + m2 * y.v[1] ** 2 - k0) <= 1e-12 * max(1.0, k0)
    # R_i^2 = I on velocities
    g = (m1 - m2) / (m1 + m2)
    r = np.array([[g, 1 - g], [1 + g, -g]])
    np.testing.assert_allclose(r @ (r @ np.array([va, vb])), (va, vb), atol=1e-14 * (1 + abs(va) + abs(vb)))


# -- masses -----------------------------------------------------------------

def test_mass_vector_parsing_and_validation():
    m = MassVector.parse("2/1,1/1")
    assert m.n == 2 and m.format() == "2/1,1/1"
    with pytest.raises(DomainError):
        MassVector((1, 2))
    with pytest.raises(DomainError):
        MassVector((1, 1), strict=True)
    with pytest.raises(DomainError):
        MassVector((1,))
    assert MassVector((1, 2), ordered=False).n == 2


# -- simulate ---------------------------------------------------------------

def test_zero_collisions_returns_input():
    m = MassVector((2, 1))
    x = sample_state(m, np.random.default_rng(0))
    final, events = simulate(x, m, max_collisions=0)
    assert events == []
    assert np.array_equal(final.q, x.q) and np.array_equal(final.v, x.v)


def test_max_time_lands_exactly():
    m = MassVector((2, 1))
    x = sample_state(m, np.random.default_rng(3))
    traj = simulate(x, m, max_time=7.5)
    assert traj.final.t == pytest.approx(7.5, abs=1e-12)
    assert np.all(traj.times <= 7.5)


def test_equal_mass_alternation():
    m = MassVector((1, 1))
    # q=(0, 0.5) with v on H=1: 0.5 + (v1^2 + v2^2)/2 = 1
    x = st_((0.0, 0.5), (1.0, 0.0))
    traj = simulate(x, m, max_collisions=40)
    ghosts = oracle.ghost_trajectory(x, m, float(traj.times[-1]) + 1e-9)
    assert list(ghosts.labels[:40]) == traj.sequence


def test_energy_over_1e4_collisions():
    m = MassVector((2, 1))
    x = sample_state(m, np.random.default_rng(11))
    traj = simulate(x, m, max_collisions=10_000)
    assert np.abs(traj.energies - 1.0).max() <= 1e-9


def test_ordering_after_every_event():
    m = MassVector((3, 2, 1.5, 1))
    x = sample_state(m, np.random.default_rng(5))
    traj = simulate(x, m, max_collisions=5000, record_states=True)
    q = traj.states[:, :4]
    assert (q[:, 0] >= -1e-9).all()
    assert (np.diff(q, axis=1) >= -1e-9).all()


def test_event_log_replays_step_by_step():
    m = MassVector((3, 2, 1))
    x = sample_state(m, np.random.default_rng(2))
    traj = simulate(x, m, max_collisions=200)
    y = x
    for ev in traj.events:
        dt, sigma = next_event(y, m)
        assert sigma[0] == ev.sigma
        y = advance(y, dt)
        y, e2 = apply_collision(y, sigma, m)
        assert y.t == pytest.approx(ev.t, rel=1e-12)
        assert e2.rho == pytest.approx(ev.rho, rel=1e-9)
    np.testing.assert_allclose(y.q, traj.final.q, atol=1e-9)


def test_time_reversal_reproduces_labels():
    m = MassVector((3, 2, 1))
    x = sample_state(m, np.random.default_rng(8))
    traj = simulate(x, m, max_collisions=30, record_states=True)
    # start from just after the last event, reversed
    dt_next, _ = next_event(traj.final, m)
    mid = advance(traj.final, 0.5 * dt_next)
    back = simulate(mid.reversed(), m, max_collisions=30)
    assert back.sequence == traj.sequence[::-1]


def test_renormalisation_logs_factors():
    m = MassVector((2, 1))
    x = sample_state(m, np.random.default_rng(0))
    traj = simulate(x, m, max_collisions=3000, renormalize_every=1000)
    assert len(traj.renorm_factors) == 3
    assert np.all(np.abs(traj.renorm_factors - 1) < 1e-10)


def test_accumulation_guard():
    m = MassVector((2, 1))
    x = sample_state(m, np.random.default_rng(0))
    tight = Tolerances(acc_count=5, acc_window=10.0)
    with pytest.raises(AccumulationSuspected) as err:
        simulate(x, m, max_collisions=100, tol=tight)
    assert len(err.value.partial) >= 5


def test_samples_sit_on_energy_surface():
    rng = np.random.default_rng(4)
    for n in (2, 3, 5):
        m = moderate_masses(n, rng)
        x = sample_state(m, rng)
        assert energy(x, m) == pytest.approx(1.0, abs=1e-14)
        assert x.is_ordered()


def test_next_event_matches_bisection_oracle():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        m = moderate_masses(int(rng.integers(2, 5)), rng)
        x = sample_state(m, rng)
        dt, sigma = next_event(x, m)
        ref_dt, ref_sigma = oracle.bisect_collision_time(x, m)
        assert sigma == ref_sigma
        assert abs(dt - ref_dt) <= 10 * oracle.DEFAULT_ORACLE.bisection_tol * max(1.0, dt)
