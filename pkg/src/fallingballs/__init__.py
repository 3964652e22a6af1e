"""Falling balls: event-driven simulation, tangent cocycle, cone sufficiency and Lyapunov spectra."""
from .dynamics import (
    DEFAULT_TOL,
    CollisionEvent,
    MassVector,
    PhaseState,
    Tolerances,
    Trajectory,
    advance,
    apply_collision,
    energy,
    next_event,
    random_masses,
    sample_state,
    simulate,
)
from .errors import *  # noqa: F401,F403
from .spectrum import (
    lyapunov_spectrum,
    stable_orbit_probe,
    strict_invariance_check,
    sufficiency_onset,
)
from .sufficiency import (
    ExtendedSequence,
    SymbolicSequence,
    classify_sequence,
    cmp_check,
    collision_graph,
    is_sufficient,
    neutral_space,
    neutral_velocity_space,
    subsequence_monotonicity_check,
)
from .tangent import (
    TangentVector,
    ball_derivative,
    floor_derivative,
    push_frame,
    q_form,
    symplectic_form,
)

__version__ = "0.1.0"
