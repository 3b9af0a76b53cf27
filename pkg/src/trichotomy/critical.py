"""Certified bisection for critical damping and critical velocity thresholds.

Three searches, all built on the same certified-probe bisection: every probe
classification must end in a certificate (never ``Undetermined``); a probe
that fails is retried once at 10x tighter tolerance and a longer budget, and
the search aborts with a diagnostic if that still fails.  Budgets grow
logarithmically as brackets narrow, since trajectories near a critical
damping linger at a saddle for a time ~ log(1/width).

* :func:`find_gamma0_N2`: data in the upper band with −1 ≤ u < 1 blow up
  for small damping and decay for large damping; the search brackets the
  single transition γ0.
* :func:`find_gamma0_gamma1_N3`: data left of the well (u < −1, v > 0)
  show two transitions: blow-up through the far side for γ < γ0, decay in
  between, and blow-up on the near side for γ > γ1.  Probes are told apart
  by the sign of the blow-up witness, so both brackets come from one scan.
* :func:`find_U1`: along the ray (−1, u1), u1 > 0, a single velocity
  threshold U1 separates decay (below) from blow-up (above) at fixed γ > 0.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, replace

from .classify import Fate, FateKind, classify_fate
from .duffing import CRITICAL_LEVEL, Region, State, classify_region, damping_value, energy
from .engine import IntegratorOptions, NumericalCertificationError, scaled_budget

__all__ = [
    "Bracket",
    "find_gamma0_N2",
    "find_gamma0_gamma1_N3",
    "find_U1",
    "decay_velocity_floor",
    "upper_seed_velocity",
    "search_csv_header",
    "search_csv_row",
]

#: Relative margin applied to analytic bracket seeds.
SEED_MARGIN: float = 1e-3

_COMPARISON_CONSTANT: float = 2.0 / (3.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class Bracket:
    """A certified enclosure [lo, hi] of a threshold parameter.

    Both endpoint fates are certificate-backed.  ``probes`` counts the
    classifications spent producing the bracket.
    """

    lo: float
    hi: float
    lo_fate: FateKind
    hi_fate: FateKind
    width_target: float
    probes: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if not (self.width_target > 0.0):
            raise ValueError(f"width_target must be positive, got {self.width_target}")
        if FateKind.Undetermined in (self.lo_fate, self.hi_fate):
            raise ValueError("bracket endpoints must carry certified fates")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


class _ProbeCounter:
    def __init__(self, s0: State, opts: IntegratorOptions, width0: float):
        self.s0 = s0
        self.opts = opts
        self.width0 = width0
        self.count = 0

    def __call__(self, gamma: float, width_now: float, s0: State | None = None) -> Fate:
        s = s0 if s0 is not None else self.s0
        base = scaled_budget(self.opts, self.width0, width_now)
        self.count += 1
        fate = classify_fate(s, gamma, base)
        if fate.kind is FateKind.Undetermined:
            retry = replace(
                base,
                rel_tol=base.rel_tol / 10.0,
                abs_tol=base.abs_tol / 10.0,
                t_max=base.t_max * 2.0,
            )
            self.count += 1
            fate = classify_fate(s, gamma, retry)
        if fate.kind is FateKind.Undetermined:
            raise NumericalCertificationError(
                f"probe at state ({s.u}, {s.v}), gamma={gamma} stayed undetermined "
                f"after retry (certificate: {fate.certificate}, t={fate.time}); "
                "widen t_max or loosen the width target"
            )
        return fate


def _on_critical_shell(s0: State, opts: IntegratorOptions) -> bool:
    return abs(energy(s0) - CRITICAL_LEVEL) <= opts.shell_atol


def find_gamma0_N2(
    s0: State | tuple[float, float],
    width: float = 1e-8,
    opts: IntegratorOptions | None = None,
) -> Bracket:
    """Bracket the critical damping γ0 for upper-band data with −1 ≤ u < 1.

    The transition is enclosed to ``width`` with a certified blow-up at the
    lower end and a certified decay at the upper end.  The initial upper
    seed max(u1/(1−u0), u1) bounds every blow-up damping for such data, so
    its slightly inflated value must certify decay.

    Data whose energy sits on the critical level (within tolerance) admit no
    search: any positive damping decays, and γ = 0 converges to the saddle.
    The returned degenerate bracket is pinned at zero with those two fates.
    """
    if not isinstance(s0, State):
        s0 = State(*map(float, s0))
    opts = opts or IntegratorOptions()
    if width <= 0.0 or not math.isfinite(width):
        raise ValueError(f"width must be positive and finite, got {width}")
    region = classify_region(s0)
    if region is not Region.N2:
        raise ValueError(f"find_gamma0_N2 needs data in N2, got {region.value}")

    if _on_critical_shell(s0, opts):
        return Bracket(0.0, width, FateKind.ConvergePlus, FateKind.DecayZero, width, probes=0)

    hi = max(s0.v / (1.0 - s0.u), s0.v) * (1.0 + SEED_MARGIN)
    probe = _ProbeCounter(s0, opts, width0=hi)

    lo_fate = probe(0.0, hi).kind
    if lo_fate is not FateKind.BlowUp:
        raise NumericalCertificationError(
            f"expected blow-up at gamma=0 for ({s0.u}, {s0.v}), got {lo_fate.value}"
        )
    hi_fate = probe(hi, hi).kind
    if hi_fate is not FateKind.DecayZero:
        raise NumericalCertificationError(
            f"upper seed gamma={hi} did not certify decay for ({s0.u}, {s0.v}); "
            f"got {hi_fate.value}"
        )

    lo = 0.0
    width0 = hi - lo
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        kind = probe(mid, hi - lo).kind
        if kind is FateKind.BlowUp:
            lo = mid
        elif kind is FateKind.DecayZero:
            hi = mid
        else:
            raise NumericalCertificationError(
                f"probe at gamma={mid} returned {kind.value}; the bisection landed "
                "on the threshold orbit itself"
            )
    return Bracket(lo, hi, FateKind.BlowUp, FateKind.DecayZero, width, probes=probe.count)


def find_gamma0_gamma1_N3(
    s0: State | tuple[float, float],
    width: float = 1e-8,
    opts: IntegratorOptions | None = None,
) -> tuple[Bracket, Bracket]:
    """Bracket both damping transitions for data left of the well (N3).

    Returns ``(bracket_gamma0, bracket_gamma1)``, disjoint, each of width at
    most ``width``.  Blow-up probes below γ0 escape through the far side of
    the well (witness u > 0) while probes above γ1 fall out on the near side
    (witness u < 0); bisection on that sign pins the decay window even
    before any decay probe has been seen.

    Critical-level data (within tolerance) admit no window at all: γ = 0
    converges to the near saddle and every positive damping blows up.  Two
    identical degenerate zero-pinned brackets encode that.
    """
    if not isinstance(s0, State):
        s0 = State(*map(float, s0))
    opts = opts or IntegratorOptions()
    if width <= 0.0 or not math.isfinite(width):
        raise ValueError(f"width must be positive and finite, got {width}")
    region = classify_region(s0)
    if region is not Region.N3:
        raise ValueError(f"find_gamma0_gamma1_N3 needs data in N3, got {region.value}")

    if _on_critical_shell(s0, opts):
        degenerate = Bracket(
            0.0, width, FateKind.ConvergeMinus, FateKind.BlowUp, width, probes=0
        )
        return degenerate, degenerate

    hi_seed = s0.v / (-1.0 - s0.u) * (1.0 + SEED_MARGIN)
    probe = _ProbeCounter(s0, opts, width0=hi_seed)

    def side(gamma: float, width_now: float) -> tuple[int, FateKind]:
        """-1/+1 for the blow-up escape side, 0 for decay."""
        if gamma == 0.0:
            fate = probe(0.0, width_now)
            if fate.kind is not FateKind.BlowUp:
                raise NumericalCertificationError(
                    f"expected blow-up at gamma=0, got {fate.kind.value}"
                )
            return 1, fate.kind  # zero damping escapes through the far side
        fate = probe(gamma, width_now)
        if fate.kind is FateKind.BlowUp:
            return (1, fate.kind) if fate.witness.u > 0.0 else (-1, fate.kind)
        if fate.kind is FateKind.DecayZero:
            return 0, fate.kind
        raise NumericalCertificationError(
            f"probe at gamma={gamma} returned {fate.kind.value}; the bisection "
            "landed on a threshold orbit"
        )

    s_lo, _ = side(0.0, hi_seed)
    hi = hi_seed
    s_hi, _ = side(hi, hi_seed)
    doublings = 0
    while s_hi != -1:
        hi *= 2.0
        doublings += 1
        if doublings > 20:
            raise NumericalCertificationError(
                "no near-side blow-up found while doubling the upper seed"
            )
        s_hi, _ = side(hi, hi_seed)

    # phase 1: bisect on escape side until a decay probe splits the interval
    last_plus = 0.0
    last_minus = hi
    gamma_decay = None
    while last_minus - last_plus > width:
        mid = 0.5 * (last_plus + last_minus)
        s_mid, _ = side(mid, last_minus - last_plus)
        if s_mid == 0:
            gamma_decay = mid
            break
        if s_mid == 1:
            last_plus = mid
        else:
            last_minus = mid
    if gamma_decay is None:
        raise NumericalCertificationError(
            f"no decay window wider than {width} between the two blow-up regimes "
            f"of ({s0.u}, {s0.v}); refine width or check the data"
        )
    phase1 = probe.count

    # phase 2a: far-side blow-up | decay around gamma0
    lo, hi0 = last_plus, gamma_decay
    while hi0 - lo > width:
        mid = 0.5 * (lo + hi0)
        s_mid, _ = side(mid, hi0 - lo)
        if s_mid == 1:
            lo = mid
        elif s_mid == 0:
            hi0 = mid
        else:
            raise NumericalCertificationError(
                f"near-side blow-up at gamma={mid} inside the gamma0 bracket"
            )
    bracket0 = Bracket(
        lo, hi0, FateKind.BlowUp, FateKind.DecayZero, width, probes=probe.count
    )

    # phase 2b: decay | near-side blow-up around gamma1
    lo1, hi1 = gamma_decay, last_minus
    count_before = probe.count
    while hi1 - lo1 > width:
        mid = 0.5 * (lo1 + hi1)
        s_mid, _ = side(mid, hi1 - lo1)
        if s_mid == 0:
            lo1 = mid
        elif s_mid == -1:
            hi1 = mid
        else:
            raise NumericalCertificationError(
                f"far-side blow-up at gamma={mid} inside the gamma1 bracket"
            )
    bracket1 = Bracket(
        lo1,
        hi1,
        FateKind.DecayZero,
        FateKind.BlowUp,
        width,
        probes=phase1 + (probe.count - count_before),
    )
    return bracket0, bracket1


def decay_velocity_floor(gamma: float) -> float:
    """Certified decay floor for the launch velocity at u = −1.

    Solutions started at (−1, u1) that ever escape to u = 0 with energy
    still above the critical level need u1 of at least γ/4 (γ ≤ 1/√2) or
    1/(4√2) (larger γ); anything below that floor must decay.  The seed
    used by :func:`find_U1` is the conservative combination
    min(γ,1)·min(1/4, 1/(4√2·max(γ,1))), which never exceeds the floor.
    """
    g = damping_value(gamma)
    if g <= 0.0:
        raise ValueError("velocity floor needs gamma > 0")
    if g <= 1.0 / math.sqrt(2.0):
        return g / 4.0
    return 1.0 / (4.0 * math.sqrt(2.0))


def upper_seed_velocity(gamma: float) -> float:
    """Launch velocity at u = −1 guaranteed to blow up (doubling cap).

    Comes from an explicit comparison argument: with c = 2/(3√3), any
    u1 ≥ 4γ + (2c/γ)(ln 2 − 1/2) carries the orbit past the far saddle with
    velocity to spare.  Used only as a sanity cap for the doubling phase.
    """
    g = damping_value(gamma)
    if g <= 0.0:
        raise ValueError("upper seed needs gamma > 0")
    return 4.0 * g + (2.0 * _COMPARISON_CONSTANT / g) * (math.log(2.0) - 0.5)


def find_U1(
    gamma,
    width: float = 1e-8,
    opts: IntegratorOptions | None = None,
) -> Bracket:
    """Bracket the critical launch velocity U1 on the ray (−1, u1), γ fixed.

    Below U1 the orbit decays to the origin, above it blows up; the bracket
    encloses the transition to ``width``.  The lower seed is the certified
    decay floor (see :func:`decay_velocity_floor`), scaled in by a small
    margin; the upper seed doubles from there until a blow-up certificate
    appears, capped by four times :func:`upper_seed_velocity`.
    """
    g = damping_value(gamma)
    if g <= 0.0:
        raise ValueError(f"find_U1 needs gamma > 0, got {g}")
    opts = opts or IntegratorOptions()
    if width <= 0.0 or not math.isfinite(width):
        raise ValueError(f"width must be positive and finite, got {width}")

    lo = (
        min(g, 1.0)
        * min(0.25, 1.0 / (4.0 * math.sqrt(2.0) * max(g, 1.0)))
        * (1.0 - SEED_MARGIN)
    )
    cap = 4.0 * upper_seed_velocity(g)
    probe = _ProbeCounter(State(-1.0, lo), opts, width0=cap)

    fate = probe(g, cap, s0=State(-1.0, lo))
    if fate.kind is not FateKind.DecayZero:
        raise NumericalCertificationError(
            f"decay floor u1={lo} at gamma={g} did not certify decay "
            f"(got {fate.kind.value})"
        )
    hi = 2.0 * lo
    while True:
        kind = probe(g, cap, s0=State(-1.0, hi)).kind
        if kind is FateKind.BlowUp:
            break
        if kind is not FateKind.DecayZero:
            raise NumericalCertificationError(
                f"probe at u1={hi} returned {kind.value} while doubling"
            )
        lo = hi
        hi *= 2.0
        if hi > cap:
            raise NumericalCertificationError(
                f"no blow-up found below the doubling cap u1={cap} at gamma={g}"
            )

    width0 = hi - lo
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        kind = probe(g, hi - lo, s0=State(-1.0, mid)).kind
        if kind is FateKind.DecayZero:
            lo = mid
        elif kind is FateKind.BlowUp:
            hi = mid
        else:
            raise NumericalCertificationError(
                f"probe at u1={mid} returned {kind.value}; the bisection landed "
                "on the threshold orbit"
            )
    return Bracket(lo, hi, FateKind.DecayZero, FateKind.BlowUp, width, probes=probe.count)


# ---------------------------------------------------------------------------


def search_csv_header() -> str:
    return "u0,u1,target,lo,hi,midpoint,probes,wall_time"


def search_csv_row(
    s0: State | None, target: str, bracket: Bracket, wall_time: float
) -> str:
    """One CSV row for a finished search.

    For velocity searches (target ``U1``) the varied coordinate is u1, so
    the row carries u0 = −1 and NaN in the u1 column.
    """
    u0 = s0.u if s0 is not None else -1.0
    u1 = s0.v if s0 is not None else math.nan
    return (
        f"{u0:.17g},{u1:.17g},{target},{bracket.lo:.17g},{bracket.hi:.17g},"
        f"{bracket.midpoint:.17g},{bracket.probes},{wall_time:.6g}"
    )


def timed_search(fn, *args, **kwargs):
    """Run a search and return (result, wall_time_seconds)."""
    t0 = _time.perf_counter()
    out = fn(*args, **kwargs)
    return out, _time.perf_counter() - t0
