"""Long-time fate classification with certificates.

A fate is only reported together with the reason it is known:

* membership in one of the invariant sublevel components at t = 0
  (``KPlus`` ⇒ decay to the origin, ``KMinus`` ⇒ finite-time blow-up);
* conserved energy above the critical level at zero damping ⇒ blow-up;
* the closed-form critical-shell orbits at zero damping ⇒ convergence to a
  saddle, or blow-up, depending on the side of the well;
* an ``EnteredKPlus`` / ``EnteredKMinus`` certificate produced by marching a
  positively damped trajectory until its energy drops through 1/4;
* the blow-up threshold together with an outward-region membership check.

Anything else is reported ``Undetermined`` (budget exhausted), never
guessed.  Note one deliberate convention: data in the inner well are labeled
``DecayZero`` for every damping including γ = 0, where orbits stay bounded
but do not decay; basin maps must be γ-independent on the sublevel set and
this label encodes "globally bounded, inner well" there.

The marching itself runs in the compiled kernel (:mod:`trichotomy._kernel`);
:func:`trichotomy.engine.integrate` reproduces the same certificates through
scipy events when a full trajectory is wanted, and the test suite checks the
two routes agree.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernel
from .duffing import (
    CRITICAL_LEVEL,
    Region,
    State,
    classify_region,
    damping_value,
    energy,
)
from .engine import EventKind, IntegratorOptions, Trajectory, integrate

__all__ = [
    "FateKind",
    "Fate",
    "classify_fate",
    "exponential_rate_estimate",
    "velocity_profile_difference",
    "fate_csv_header",
    "fate_csv_row",
]


class FateKind(enum.Enum):
    BlowUp = "BlowUp"
    DecayZero = "DecayZero"
    ConvergePlus = "ConvergePlus"
    ConvergeMinus = "ConvergeMinus"
    Undetermined = "Undetermined"


@dataclass(frozen=True)
class Fate:
    """A fate kind plus its certificate.

    ``certificate`` names the event or argument that fired; ``time`` is the
    certification instant (0 for instant region certificates, the time spent
    for ``Undetermined``); ``witness`` is the state at that instant.
    """

    kind: FateKind
    certificate: str
    time: float
    witness: State


_SWAP = {
    FateKind.ConvergePlus: FateKind.ConvergeMinus,
    FateKind.ConvergeMinus: FateKind.ConvergePlus,
}


def _mirrored(fate: Fate) -> Fate:
    return Fate(
        _SWAP.get(fate.kind, fate.kind),
        fate.certificate + " (mirrored)",
        fate.time,
        fate.witness.mirrored(),
    )


def classify_fate(s0: State | tuple[float, float], gamma, opts: IntegratorOptions | None = None) -> Fate:
    """Classify the long-time fate of the trajectory from ``s0``.

    Returns a :class:`Fate`; the kind is ``Undetermined`` when no
    certificate fires within the ``opts.t_max`` budget (for positive damping
    that essentially only happens within a bracket width of a critical
    damping value).
    """
    opts = opts or IntegratorOptions()
    if not isinstance(s0, State):
        s0 = State(*map(float, s0))
    g = damping_value(gamma)

    region = classify_region(s0)

    if region is Region.EquilibriumZero:
        return Fate(FateKind.DecayZero, "equilibrium", 0.0, s0)
    if region is Region.EquilibriumPlus:
        return Fate(FateKind.ConvergePlus, "equilibrium", 0.0, s0)
    if region is Region.EquilibriumMinus:
        return Fate(FateKind.ConvergeMinus, "equilibrium", 0.0, s0)

    if region is Region.KPlus:
        return Fate(FateKind.DecayZero, "region KPlus", 0.0, s0)
    if region is Region.KMinus:
        return Fate(FateKind.BlowUp, "region KMinus", 0.0, s0)

    if region is Region.NBoundaryCurve:
        # v = 0 with u != +-1: the exact static energy sits strictly below
        # the critical level even when its rounded value does not, so this
        # is inner/outer sublevel membership decided by |u| alone.
        if abs(s0.u) < 1.0:
            return Fate(FateKind.DecayZero, "region KPlus (rounded boundary)", 0.0, s0)
        return Fate(FateKind.BlowUp, "region KMinus (rounded boundary)", 0.0, s0)

    e0 = energy(s0)

    if abs(e0 - CRITICAL_LEVEL) <= opts.shell_atol:
        return _classify_on_shell(s0, g)

    # E strictly above the critical level from here on
    if g == 0.0:
        return Fate(FateKind.BlowUp, "conserved energy above critical level", 0.0, s0)

    budget = opts.t_max
    code, t, u, v = _kernel.march_to_certificate(
        s0.u, s0.v, g, opts.rel_tol, opts.abs_tol, budget, opts.blowup_threshold
    )
    witness = State(float(u), float(v))
    if code == _kernel.CODE_ENTERED_KPLUS:
        return Fate(FateKind.DecayZero, "EnteredKPlus", float(t), witness)
    if code == _kernel.CODE_ENTERED_KMINUS:
        return Fate(FateKind.BlowUp, "EnteredKMinus", float(t), witness)
    if code == _kernel.CODE_BLOWUP_THRESHOLD:
        if energy(witness) < CRITICAL_LEVEL or witness.u * witness.v > 0.0:
            # outer sublevel component, or outward-moving far band (itself
            # or its mirror image lies in the u >= 1, v > 0 band)
            return Fate(FateKind.BlowUp, "BlowupThreshold", float(t), witness)
        return Fate(FateKind.Undetermined, "threshold reached inward-moving", float(t), witness)
    if code == _kernel.CODE_BUDGET:
        return Fate(FateKind.Undetermined, "budget exhausted", float(t), witness)
    return Fate(FateKind.Undetermined, "step-size underflow", float(t), witness)


def _classify_on_shell(s0: State, g: float) -> Fate:
    """Fates for data on the critical level E = 1/4 (within tolerance).

    At γ = 0 the shell carries the closed-form saddle connections; with
    damping the orbit leaves the shell instantly into the sublevel set, on
    the side of the well where it already sits.
    """
    if s0.v < 0.0:
        return _mirrored(_classify_on_shell(s0.mirrored(), g))
    # v > 0 here (v = 0 on the shell happens only at the saddles)
    if g == 0.0:
        if -1.0 < s0.u < 1.0:
            return Fate(FateKind.ConvergePlus, "critical shell closed form", 0.0, s0)
        if s0.u > 1.0:
            return Fate(FateKind.BlowUp, "critical shell closed form", 0.0, s0)
        return Fate(FateKind.ConvergeMinus, "critical shell closed form", 0.0, s0)
    if -1.0 < s0.u < 1.0:
        return Fate(FateKind.DecayZero, "critical shell entry into KPlus", 0.0, s0)
    if abs(s0.u) > 1.0:
        return Fate(FateKind.BlowUp, "critical shell entry into KMinus", 0.0, s0)
    # |u| exactly 1 with tiny v: damping drains it to the side it moves toward
    if s0.u * s0.v > 0.0:
        return Fate(FateKind.BlowUp, "critical shell entry into KMinus", 0.0, s0)
    return Fate(FateKind.DecayZero, "critical shell entry into KPlus", 0.0, s0)


# ---------------------------------------------------------------------------


def exponential_rate_estimate(traj: Trajectory, target: State | tuple[float, float]) -> float:
    """Decay rate toward ``target`` fitted on the trajectory tail.

    Takes the maximal trailing run of samples within distance 0.1 of the
    target and returns minus the least-squares slope of log distance against
    time (positive for convergence).  Diagnostic only; no certificate is
    attached.  Returns +inf when the tail sits exactly on the target
    (equilibrium trajectories have no finite rate).
    """
    if not isinstance(target, State):
        target = State(*map(float, target))
    du = traj.u - target.u
    dv = traj.v - target.v
    dist = np.hypot(du, dv)
    inside = dist <= 0.1
    if not inside[-1]:
        raise ValueError("trajectory does not end within 0.1 of the target")
    start = int(np.nonzero(~inside)[0][-1]) + 1 if not inside.all() else 0
    tail_t = traj.t[start:]
    tail_d = dist[start:]
    if np.any(tail_d == 0.0):
        return math.inf
    if tail_t.size < 5:
        raise ValueError("tail too short for a rate fit (need >= 5 samples)")
    slope = np.polyfit(tail_t, np.log(tail_d), 1)[0]
    return float(-slope)


def velocity_profile_difference(
    s0: State | tuple[float, float],
    gamma_low,
    gamma_high,
    opts: IntegratorOptions | None = None,
    n_points: int = 100,
    x_max: float = 10.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise gap between velocity profiles at two dampings.

    Both trajectories start from the same ``s0`` with v > 0 and are followed
    while u increases (stopping at the first velocity sign change, the
    position cap ``x_max``, or the budget).  Each increasing span is
    interpolated monotonically (PCHIP) as a function v(u), and the difference

        phi(x) = v_low(x) - v_high(x)

    is evaluated at ``n_points`` interior points of the common span.  Less
    damping dissipates less on the way, so phi > 0 strictly past the shared
    initial point.

    The monotonicity statement permits cutting the increasing spans anywhere,
    and past a blow-up the solver's accepted steps grow too sparse in u for
    interpolation to resolve the gap, so the span is truncated at u = x_max.

    Returns ``(x, phi)``.
    """
    from scipy.interpolate import PchipInterpolator

    if not isinstance(s0, State):
        s0 = State(*map(float, s0))
    if s0.v <= 0.0:
        raise ValueError("velocity profiles need initial v > 0")
    g1 = damping_value(gamma_low)
    g2 = damping_value(gamma_high)
    if not g1 < g2:
        raise ValueError(f"need gamma_low < gamma_high, got {g1} >= {g2}")
    x_max = float(x_max)
    if not s0.u < x_max:
        raise ValueError(f"x_max must exceed u0, got x_max={x_max} with u0={s0.u}")
    opts = opts or IntegratorOptions()
    run_cap = min(opts.blowup_threshold, max(x_max, abs(s0.u)) + 0.5)
    if run_cap > 2.0 and run_cap < opts.blowup_threshold:
        run_opts = replace(opts, blowup_threshold=run_cap)
    else:
        run_opts = opts

    profiles = []
    for g in (g1, g2):
        traj = integrate(s0, g, run_opts, stop_events=(EventKind.VelocitySignChange,))
        keep = (traj.v > 0.0) & (traj.u <= x_max)
        us = traj.u[keep]
        vs = traj.v[keep]
        # longest strictly increasing prefix; a decaying tail can hover near
        # the origin with v > 0 at rounding scale without ever crossing
        dec = np.flatnonzero(np.diff(us) <= 0.0)
        if dec.size:
            us, vs = us[: dec[0] + 1], vs[: dec[0] + 1]
        if us.size < 4:
            raise ValueError(
                f"increasing span too short at gamma={g} to interpolate a profile"
            )
        profiles.append(PchipInterpolator(us, vs))
    right = min(p.x[-1] for p in profiles)
    left = s0.u
    if not right > left:
        raise ValueError("profiles share no increasing span past the initial point")
    x = left + (right - left) * np.arange(1, n_points + 1) / (n_points + 1)
    phi = profiles[0](x) - profiles[1](x)
    return x, phi


# ---------------------------------------------------------------------------


def fate_csv_header() -> str:
    return "u0,u1,gamma,kind,cert_time,witness_u,witness_v"


def fate_csv_row(s0: State, gamma, fate: Fate) -> str:
    g = damping_value(gamma)
    return (
        f"{s0.u:.17g},{s0.v:.17g},{g:.17g},{fate.kind.value},"
        f"{fate.time:.17g},{fate.witness.u:.17g},{fate.witness.v:.17g}"
    )
