"""Phase-plane primitives for the damped focusing Duffing oscillator

    ü + γ u̇ + u = u³ ,        γ ≥ 0 ,

written as the first-order system u̇ = v, v̇ = u³ − u − γ v.  Everything in
this module is exact phase-plane bookkeeping; no integration happens here.

The organizing quantity is the oscillator energy

    E(u, v) = u²/2 − u⁴/4 + v²/2 ,

conserved when γ = 0 and non-increasing otherwise.  Its critical level
E = 1/4 carries the saddle equilibria (±1, 0) and separates two regimes:

* ``{E < 1/4}`` splits along |u| = 1 into an inner well ``KPlus`` (bounded
  dynamics, decay to the origin under positive damping) and an outer region
  ``KMinus`` (finite-time blow-up).  Both components are forward invariant.
* ``{E ≥ 1/4}`` is transient for γ > 0.  Its upper half v > 0 is banded by
  u = ±1 into ``N1`` (u ≥ 1), ``N2`` (−1 ≤ u < 1) and ``N3`` (u < −1); the
  lower half v < 0 is the mirror image ``NMirror`` under (u, v) ↦ (−u, −v).

The classification of long-time behaviour by these regions is the business
of :mod:`trichotomy.classify`; here we only name where a state sits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

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
]

#: Energy of the saddle equilibria (±1, 0); the separatrix level.
CRITICAL_LEVEL: float = 0.25

_SQRT2: float = math.sqrt(2.0)


@dataclass(frozen=True)
class State:
    """A phase-plane point (u, v) with v = u̇.

    Both components must be finite; infinities and NaNs are rejected at
    construction so that downstream certificates never see them.
    """

    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError(f"state components must be finite, got ({self.u}, {self.v})")

    def mirrored(self) -> "State":
        """The image under the symmetry (u, v) ↦ (−u, −v) of the flow."""
        return State(-self.u, -self.v)

    def as_tuple(self) -> tuple[float, float]:
        return (self.u, self.v)


@dataclass(frozen=True)
class Damping:
    """Non-negative damping coefficient γ."""

    gamma: float

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma < 0.0:
            raise ValueError(f"damping must be finite and >= 0, got {self.gamma}")


def damping_value(gamma) -> float:
    """Coerce ``float | Damping`` to a validated plain float."""
    if isinstance(gamma, Damping):
        return gamma.gamma
    return Damping(float(gamma)).gamma


class Region(enum.Enum):
    """Labels of the phase-plane partition.

    The three equilibria get their own labels.  ``NBoundaryCurve`` marks
    states with v = 0 whose rounded energy lands on or above the critical
    level even though u ≠ ±1; in exact arithmetic that set is just the two
    saddles, so the label only ever appears for floating-point boundary
    states within a few ulp of them.
    """

    KPlus = "KPlus"
    KMinus = "KMinus"
    N1 = "N1"
    N2 = "N2"
    N3 = "N3"
    NMirror = "NMirror"
    NBoundaryCurve = "NBoundaryCurve"
    EquilibriumPlus = "EquilibriumPlus"
    EquilibriumMinus = "EquilibriumMinus"
    EquilibriumZero = "EquilibriumZero"


def energy(state: State | tuple[float, float]) -> float:
    """Oscillator energy E(u, v) = u²/2 − u⁴/4 + v²/2."""
    u, v = _components(state)
    return 0.5 * u * u - 0.25 * u * u * u * u + 0.5 * v * v


def static_energy(u: float) -> float:
    """Potential part J(u) = u²/2 − u⁴/4, i.e. the energy of (u, 0).

    J attains its maximum value 1/4 exactly at u = ±1, so E = J + v²/2
    can only reach the critical level on {v = 0} at the saddles.
    """
    u = float(u)
    if not math.isfinite(u):
        raise ValueError(f"u must be finite, got {u}")
    return 0.5 * u * u - 0.25 * u * u * u * u


def classify_region(state: State | tuple[float, float]) -> Region:
    """Assign the unique partition label of a finite phase-plane state.

    Decision order: equilibria first, then the sublevel set E < 1/4 by the
    sign of |u| − 1, then E ≥ 1/4 by the sign of v.  The case E < 1/4 with
    |u| = 1 cannot occur (E(±1, v) = 1/4 + v²/2), so the split is total.
    """
    u, v = _components(state)
    if v == 0.0:
        if u == 0.0:
            return Region.EquilibriumZero
        if u == 1.0:
            return Region.EquilibriumPlus
        if u == -1.0:
            return Region.EquilibriumMinus
    e = energy((u, v))
    if e < CRITICAL_LEVEL:
        return Region.KPlus if abs(u) < 1.0 else Region.KMinus
    if v > 0.0:
        if u >= 1.0:
            return Region.N1
        if u >= -1.0:
            return Region.N2
        return Region.N3
    if v < 0.0:
        return Region.NMirror
    return Region.NBoundaryCurve


def threshold_solution(u0: float, t):
    """Closed-form orbit on the critical shell E = 1/4 at zero damping.

    For u0 ∈ (−1, 1) and upward velocity v = (1 − u²)/√2 the undamped
    oscillator reduces to the first-order equation u̇ = (1 − u²)/√2, solved
    by

        u(t) = 1 − 2 (1 − u0) e^{−t√2} / (1 + u0 + (1 − u0) e^{−t√2}).

    The orbit increases strictly from u0 toward 1, never reaching it: this
    is the heteroclinic connection that ends at the saddle (1, 0).

    Parameters
    ----------
    u0 : float
        Initial position, strictly inside (−1, 1).
    t : float or array_like
        Evaluation time(s); any finite real values are accepted.

    Returns
    -------
    float or ndarray
        u(t), same shape as ``t``.
    """
    u0 = float(u0)
    if not (-1.0 < u0 < 1.0):
        raise ValueError(f"threshold solution requires u0 in (-1, 1), got {u0}")
    import numpy as np

    tt = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(tt)):
        raise ValueError("evaluation times must be finite")
    s = np.exp(-tt * _SQRT2)
    out = 1.0 - 2.0 * (1.0 - u0) * s / (1.0 + u0 + (1.0 - u0) * s)
    if np.isscalar(t) or tt.ndim == 0:
        return float(out)
    return out


def velocity_on_energy_shell(e0: float, u: float) -> float:
    """Upward velocity v ≥ 0 with E(u, v) = e0, i.e. √(2 e0 − u² + u⁴/2).

    Raises ``ValueError`` when the radicand is negative, meaning no real
    velocity puts (u, ·) on that energy level.
    """
    e0 = float(e0)
    u = float(u)
    if not (math.isfinite(e0) and math.isfinite(u)):
        raise ValueError("shell energy and position must be finite")
    radicand = 2.0 * e0 - u * u + 0.5 * u * u * u * u
    if radicand < 0.0:
        raise ValueError(
            f"no real velocity on shell E={e0} at u={u} (radicand {radicand})"
        )
    return math.sqrt(radicand)


def _components(state) -> tuple[float, float]:
    if isinstance(state, State):
        return state.u, state.v
    u, v = state
    u = float(u)
    v = float(v)
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ValueError(f"state components must be finite, got ({u}, {v})")
    return u, v
