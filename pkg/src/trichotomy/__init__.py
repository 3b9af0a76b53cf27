"""Certified fate classification for the damped focusing oscillator

    u'' + gamma*u' + u = u^3

and its field analogue on flat tori.  Solutions either blow up in finite
time, decay to zero, or (at critical parameter values only) converge to one
of the saddle equilibria at +-1; this package integrates, certifies the
fate with checkable phase-plane witnesses, brackets the critical parameters
by bisection, and runs the matching wave-field experiments.
"""

from .classify import (
    Fate,
    FateKind,
    classify_fate,
    exponential_rate_estimate,
    fate_csv_header,
    fate_csv_row,
    velocity_profile_difference,
)
from .critical import (
    Bracket,
    find_gamma0_N2,
    find_gamma0_gamma1_N3,
    find_U1,
    decay_velocity_floor,
    upper_seed_velocity,
)
from .duffing import (
    CRITICAL_LEVEL,
    Damping,
    Region,
    State,
    classify_region,
    energy,
    static_energy,
    threshold_solution,
    velocity_on_energy_shell,
)
from .engine import (
    BlowupReport,
    Event,
    EventKind,
    IntegratorOptions,
    NumericalCertificationError,
    Trajectory,
    detect_blowup,
    energy_identity_residual,
    integrate,
    scaled_budget,
)

from . import kg

__version__ = "0.1.0"

__all__ = [
    "CRITICAL_LEVEL",
    "State",
    "Damping",
    "Region",
    "energy",
    "static_energy",
    "classify_region",
    "threshold_solution",
    "velocity_on_energy_shell",
    "IntegratorOptions",
    "Trajectory",
    "Event",
    "EventKind",
    "integrate",
    "energy_identity_residual",
    "detect_blowup",
    "BlowupReport",
    "NumericalCertificationError",
    "scaled_budget",
    "FateKind",
    "Fate",
    "classify_fate",
    "exponential_rate_estimate",
    "velocity_profile_difference",
    "fate_csv_header",
    "fate_csv_row",
    "Bracket",
    "find_gamma0_N2",
    "find_gamma0_gamma1_N3",
    "find_U1",
    "decay_velocity_floor",
    "upper_seed_velocity",
    "kg",
    "__version__",
]
