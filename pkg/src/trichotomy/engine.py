"""Adaptive integration of the damped Duffing system with event bookkeeping.

The integrator is an embedded Runge-Kutta 5(4) pair with dense output
(scipy's ``RK45``), run on the augmented system

    u̇ = v ,   v̇ = u³ − u − γ v ,   Ḋ = γ v² ,

so the dissipation ledger D(t) = γ ∫₀ᵗ v² is error-controlled alongside the
state.  The exact energy identity E(t) = E(0) − D(t) then becomes a testable
residual, see :func:`energy_identity_residual`.

Events are located on the dense output and root-polished by scipy to well
below 1e-10 in time.  Recorded kinds:

* ``CrossedEnergyQuarter``: E drops through the critical level 1/4; the
  companion ``EnteredKPlus`` / ``EnteredKMinus`` event at the same instant
  records which component of the sublevel set was entered (|u| < 1 or > 1).
* ``BlowupThreshold``: |u| reaches ``blowup_threshold``; always terminal.
* ``VelocitySignChange``: v crosses zero.

Backward runs (``t_end < 0``) are supported for reversibility checks and
record no events.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .duffing import CRITICAL_LEVEL, Region, State, classify_region, damping_value, energy

__all__ = [
    "EventKind",
    "Event",
    "IntegratorOptions",
    "Trajectory",
    "BlowupReport",
    "NumericalCertificationError",
    "integrate",
    "energy_identity_residual",
    "detect_blowup",
]


class NumericalCertificationError(RuntimeError):
    """A numerical procedure could not certify its result.

    Raised by searches and probes when retries at tighter tolerance still
    fail to produce a certified outcome.  The CLI maps this (and any other
    integration breakdown) to exit code 3.
    """


class EventKind(enum.Enum):
    EnteredKPlus = "EnteredKPlus"
    EnteredKMinus = "EnteredKMinus"
    CrossedEnergyQuarter = "CrossedEnergyQuarter"
    BlowupThreshold = "BlowupThreshold"
    VelocitySignChange = "VelocitySignChange"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and budgets shared by the integration and fate machinery.

    ``shell_atol`` is the event-tolerance hook used to decide whether an
    initial energy sits on the critical level 1/4: floating-point data
    meant to lie on the shell (e.g. v = 1/√2) typically lands a few 1e-17
    away from it.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    t_max: float = 200.0
    blowup_threshold: float = 1e6
    max_step: float = math.inf
    shell_atol: float = 1e-12

    def __post_init__(self):
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0.0):
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if not (math.isfinite(self.abs_tol) and self.abs_tol > 0.0):
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if not (math.isfinite(self.t_max) and self.t_max > 0.0):
            raise ValueError(f"t_max must be positive and finite, got {self.t_max}")
        if not (self.blowup_threshold > 2.0):
            raise ValueError(
                f"blowup_threshold must exceed 2, got {self.blowup_threshold}"
            )
        if not (self.max_step > 0.0):
            raise ValueError(f"max_step must be positive, got {self.max_step}")
        if not (math.isfinite(self.shell_atol) and self.shell_atol >= 0.0):
            raise ValueError(f"shell_atol must be >= 0, got {self.shell_atol}")


_CSV_HEADER = "t,u,v,E,dissipation"


@dataclass
class Trajectory:
    """Sampled solution of the augmented system, with events and ledger.

    ``status`` is one of ``"completed"`` (ran to the requested end time),
    ``"event"`` (stopped at a requested terminal event), ``"blowup"``
    (stopped at the blow-up threshold) or ``"failed"`` (step-size underflow
    or non-finite values; the samples up to the failure point are kept and
    ``message`` says what happened).
    """

    gamma: float
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dissipation: np.ndarray
    events: tuple[Event, ...]
    status: str
    message: str
    options: IntegratorOptions
    _dense: object = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.t, self.u, self.v, self.dissipation):
            arr.setflags(write=False)

    # -- sample accessors ------------------------------------------------

    @property
    def n_samples(self) -> int:
        return self.t.size

    @property
    def initial_state(self) -> State:
        return State(float(self.u[0]), float(self.v[0]))

    @property
    def final_state(self) -> State:
        return State(float(self.u[-1]), float(self.v[-1]))

    def energies(self) -> np.ndarray:
        return 0.5 * self.u**2 - 0.25 * self.u**4 + 0.5 * self.v**2

    def sample_dense(self, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate (u, v, D) on arbitrary times via the dense interpolant."""
        if self._dense is None:
            raise ValueError("trajectory carries no dense output")
        times = np.asarray(times, dtype=float)
        y = self._dense(times)
        return y[0], y[1], y[2]

    def state_at(self, time: float) -> State:
        uu, vv, _ = self.sample_dense(time)
        return State(float(uu), float(vv))

    def has_event(self, kind: EventKind) -> bool:
        return any(ev.kind is kind for ev in self.events)

    def first_event(self, kind: EventKind) -> Event | None:
        for ev in self.events:
            if ev.kind is kind:
                return ev
        return None

    # -- export ----------------------------------------------------------

    def to_csv(self, path_or_buf) -> None:
        """Write samples as CSV rows ``t,u,v,E,dissipation``.

        Floats carry 17 significant digits so the file round-trips the
        binary values exactly.
        """
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            buf = open(path_or_buf, "w", newline="\n")
            close = True
        else:
            buf = path_or_buf
        try:
            buf.write(_CSV_HEADER + "\n")
            e = self.energies()
            for i in range(self.t.size):
                buf.write(
                    f"{self.t[i]:.17g},{self.u[i]:.17g},{self.v[i]:.17g},"
                    f"{e[i]:.17g},{self.dissipation[i]:.17g}\n"
                )
        finally:
            if close:
                buf.close()

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def _rhs(t, y, gamma):
    u, v = y[0], y[1]
    return (v, u * u * u - u - gamma * v, gamma * v * v)


def integrate(
    s0: State | tuple[float, float],
    gamma,
    opts: IntegratorOptions | None = None,
    *,
    t_end: float | None = None,
    stop_events: Sequence[EventKind] = (),
) -> Trajectory:
    """Integrate from ``s0`` until ``t_end`` (default ``opts.t_max``).

    ``stop_events`` selects event kinds that terminate the run; the blow-up
    threshold is always terminal.  Equilibrium initial data short-circuit to
    a constant two-sample trajectory (the velocity-sign event would
    otherwise fire on every step of an identically-zero v).
    """
    opts = opts or IntegratorOptions()
    g = damping_value(gamma)
    if not isinstance(s0, State):
        s0 = State(*map(float, s0))
    if t_end is None:
        t_end = opts.t_max
    if t_end == 0.0 or not math.isfinite(t_end):
        raise ValueError(f"t_end must be finite and nonzero, got {t_end}")
    stop = frozenset(stop_events)

    if abs(s0.u) >= opts.blowup_threshold:
        raise ValueError("initial state already beyond the blow-up threshold")

    if s0.v == 0.0 and s0.u in (-1.0, 0.0, 1.0):
        ts = np.array([0.0, t_end])
        us = np.array([s0.u, s0.u])
        vs = np.zeros(2)
        ds = np.zeros(2)
        return Trajectory(g, ts, us, vs, ds, (), "completed", "equilibrium", opts)

    backward = t_end < 0.0

    events = []
    kinds: list[EventKind | None] = []

    def ev_quarter(t, y, _g):
        return 0.5 * y[0] ** 2 - 0.25 * y[0] ** 4 + 0.5 * y[1] ** 2 - CRITICAL_LEVEL

    def ev_blowup(t, y, _g):
        return abs(y[0]) - opts.blowup_threshold

    def ev_vsign(t, y, _g):
        return y[1]

    if not backward:
        ev_quarter.direction = -1.0
        ev_quarter.terminal = bool(
            stop
            & {
                EventKind.CrossedEnergyQuarter,
                EventKind.EnteredKPlus,
                EventKind.EnteredKMinus,
            }
        )
        ev_blowup.terminal = True
        ev_vsign.direction = 0.0
        ev_vsign.terminal = EventKind.VelocitySignChange in stop
        events = [ev_quarter, ev_blowup, ev_vsign]
        kinds = [None, EventKind.BlowupThreshold, EventKind.VelocitySignChange]
    else:
        ev_blowup.terminal = True
        events = [ev_blowup]
        kinds = [EventKind.BlowupThreshold]

    res = solve_ivp(
        _rhs,
        (0.0, t_end),
        (s0.u, s0.v, 0.0),
        method="RK45",
        rtol=opts.rel_tol,
        atol=opts.abs_tol,
        max_step=opts.max_step,
        dense_output=True,
        events=events,
        args=(g,),
    )

    recorded: list[Event] = []
    if not backward:
        for tq in res.t_events[0]:
            recorded.append(Event(float(tq), EventKind.CrossedEnergyQuarter))
            uq = float(res.sol(tq)[0])
            entered = EventKind.EnteredKPlus if abs(uq) < 1.0 else EventKind.EnteredKMinus
            recorded.append(Event(float(tq), entered))
        for idx in (1, 2):
            for te in res.t_events[idx]:
                recorded.append(Event(float(te), kinds[idx]))
    else:
        for te in res.t_events[0]:
            recorded.append(Event(float(te), EventKind.BlowupThreshold))
    recorded.sort(key=lambda ev: ev.t)

    if res.status == -1:
        status, message = "failed", res.message
    elif res.status == 1:
        blew = any(ev.kind is EventKind.BlowupThreshold for ev in recorded)
        status = "blowup" if blew else "event"
        message = res.message
    else:
        status, message = "completed", res.message

    return Trajectory(
        g,
        res.t,
        res.y[0],
        res.y[1],
        res.y[2],
        tuple(recorded),
        status,
        message,
        opts,
        _dense=res.sol,
    )


def energy_identity_residual(traj: Trajectory, gamma=None) -> float:
    """Max over samples of |E(t) − E(0) + D(t)|, the dissipation-ledger defect.

    The identity E(t) = E(0) − γ∫v² holds exactly for the flow; the residual
    measures how well the discrete ledger tracks it.  When ``gamma`` is
    given it must match the trajectory's damping.
    """
    if gamma is not None and damping_value(gamma) != traj.gamma:
        raise ValueError(
            f"gamma mismatch: trajectory has {traj.gamma}, got {damping_value(gamma)}"
        )
    e = traj.energies()
    return float(np.max(np.abs(e - e[0] + traj.dissipation)))


#: Amplitude floor (squared gap above 1) for the sustained-growth certificate.
BLOWUP_WINDOW_DELTA: float = 1e-3
#: Length in time units of the trailing window checked for sustained growth.
BLOWUP_WINDOW_SPAN: float = 5.0
#: Samples must exceed this amplitude to enter the blow-up rate fit.
_FIT_AMPLITUDE: float = 100.0
_FIT_COUNT: int = 20


@dataclass(frozen=True)
class BlowupReport:
    """Outcome of :func:`detect_blowup`.

    ``t_est`` is the least-squares blow-up time (NaN when the trajectory
    stopped before developing a large-amplitude tail to fit).  ``certified``
    means the divergence is backed by invariant-region arguments rather
    than just by large numbers: the trajectory entered the outer sublevel
    component, or held u² ≥ 1 + δ on the trailing window.
    """

    t_est: float
    certified: bool
    fit_points: int


def detect_blowup(traj: Trajectory) -> BlowupReport:
    """Estimate the blow-up time of a diverging trajectory and certify it.

    Requires a ``BlowupThreshold`` or ``EnteredKMinus`` event.  The estimate
    fits 1/u against t over the last ``_FIT_COUNT`` samples with |u| above
    ``_FIT_AMPLITUDE``; a simple pole u ≈ C/(t* − t) makes that fit linear
    with root t*.
    """
    if not (traj.has_event(EventKind.BlowupThreshold) or traj.has_event(EventKind.EnteredKMinus)):
        raise ValueError(
            "detect_blowup needs a trajectory with a BlowupThreshold or "
            "EnteredKMinus event"
        )

    certified = traj.has_event(EventKind.EnteredKMinus)
    if not certified and classify_region(traj.initial_state) is Region.KMinus:
        certified = True
    if not certified:
        t_lo = max(traj.t[0], traj.t[-1] - BLOWUP_WINDOW_SPAN)
        window = traj.t >= t_lo
        certified = bool(np.all(traj.u[window] ** 2 >= 1.0 + BLOWUP_WINDOW_DELTA))

    sign = 1.0 if traj.u[-1] >= 0.0 else -1.0
    big = sign * traj.u >= _FIT_AMPLITUDE
    idx = np.nonzero(big)[0]
    if idx.size < 3:
        return BlowupReport(math.nan, certified, int(idx.size))
    idx = idx[-_FIT_COUNT:]
    ts = traj.t[idx]
    inv = 1.0 / (sign * traj.u[idx])
    # fit inv = a - b t; the pole sits at t* = a/b
    coeffs = np.polyfit(ts, inv, 1)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    if slope >= 0.0:
        return BlowupReport(math.nan, certified, int(idx.size))
    t_est = -intercept / slope
    return BlowupReport(float(t_est), certified, int(idx.size))


def scaled_budget(opts: IntegratorOptions, width0: float, width: float) -> IntegratorOptions:
    """Grow the time budget logarithmically as a bisection bracket narrows.

    Near a critical damping the escape from the saddle slows like
    log(1/width), so the fate-resolution budget follows
    t_max + 50·log10(width0/width).
    """
    if width <= 0.0 or width0 <= 0.0 or width >= width0:
        return opts
    return replace(opts, t_max=opts.t_max + 50.0 * math.log10(width0 / width))
