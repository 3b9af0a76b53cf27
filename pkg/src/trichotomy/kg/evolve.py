"""Pseudospectral time stepping and fate experiments for the field equation.

    u_tt - lap(u) + gamma*u_t + u = u^3      on the flat torus

Method of lines: the Laplacian acts diagonally in Fourier space, the cubic
term is evaluated pointwise and dealiased by the 2/3 rule, and the system
marches with classical RK4 at the fixed step

    dt = cfl / sqrt(1 + k2_max)

which resolves the fastest linear oscillation.  A dissipation ledger
integrates gamma*||u_t||_L2^2 alongside the state so the energy identity
can be audited after the fact.  Blow-up is flagged when the H1 norm of u
passes blowup_factor * sqrt(V).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..classify import FateKind
from ..duffing import damping_value
from .grid import Field, KGState, TorusGrid
from .variational import K_functional, kg_energy

__all__ = [
    "KGOptions",
    "KGTrajectory",
    "KGFate",
    "kg_integrate",
    "kg_fate_experiment",
    "continuity_probe",
]


@dataclass(frozen=True)
class KGOptions:
    """Stepper controls.

    cfl scales the fixed step against the fastest resolved frequency;
    blowup_factor sets the H1 escape threshold in units of sqrt(volume);
    seed feeds the random perturbations of the probing helpers.
    """

    cfl: float = 0.2
    t_max: float = 20.0
    blowup_factor: float = 1e4
    dealias: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (self.t_max > 0.0 and math.isfinite(self.t_max)):
            raise ValueError(f"t_max must be positive and finite, got {self.t_max}")
        if not (self.blowup_factor > 1.0):
            raise ValueError(f"blowup_factor must exceed 1, got {self.blowup_factor}")


class _Stepper:
    """RK4 stepper on raw value arrays, spectral derivatives via rfftn."""

    def __init__(self, grid: TorusGrid, gamma: float, dealias: bool):
        self.grid = grid
        self.gamma = gamma
        self.dealias = dealias
        n, d, L = grid.n, grid.dim, grid.length
        axes = [np.fft.fftfreq(n, d=1.0 / n)] * (d - 1) + [np.fft.rfftfreq(n, d=1.0 / n)]
        scale = 2.0 * math.pi / L
        rshape = (n,) * (d - 1) + (n // 2 + 1,)
        k2 = np.zeros(rshape)
        keep = np.ones(rshape, dtype=bool)
        cut = n // 3
        for axis, idx in enumerate(axes):
            expand = [None] * d
            expand[axis] = slice(None)
            k2 = k2 + (scale * idx[tuple(expand)]) ** 2
            keep = keep & (np.abs(idx[tuple(expand)]) <= cut)
        self.k2r = k2
        self.keep = keep
        self.weight = grid.quad_weight
        self.axes = tuple(range(d))

    def rhs(self, u: np.ndarray, v: np.ndarray):
        uhat = np.fft.rfftn(u)
        if self.dealias:
            cubic_hat = np.fft.rfftn(u * u * u) * self.keep
            acc = np.fft.irfftn(cubic_hat - self.k2r * uhat, s=self.grid.shape, axes=self.axes)
        else:
            acc = np.fft.irfftn(-self.k2r * uhat, s=self.grid.shape, axes=self.axes) + u * u * u
        return v, acc - u - self.gamma * v

    def diss_rate(self, v: np.ndarray) -> float:
        return self.gamma * self.weight * float(np.sum(v * v))

    def step(self, u, v, diss, dt):
        k1u, k1v = self.rhs(u, v)
        k1d = self.diss_rate(v)
        half = 0.5 * dt
        k2u, k2v = self.rhs(u + half * k1u, v + half * k1v)
        k2d = self.diss_rate(v + half * k1v)
        k3u, k3v = self.rhs(u + half * k2u, v + half * k2v)
        k3d = self.diss_rate(v + half * k2v)
        k4u, k4v = self.rhs(u + dt * k3u, v + dt * k3v)
        k4d = self.diss_rate(v + dt * k3v)
        sixth = dt / 6.0
        u1 = u + sixth * (k1u + 2.0 * (k2u + k3u) + k4u)
        v1 = v + sixth * (k1v + 2.0 * (k2v + k3v) + k4v)
        d1 = diss + sixth * (k1d + 2.0 * (k2d + k3d) + k4d)
        return u1, v1, d1


def _spectral_summary(grid: TorusGrid, u: np.ndarray, v: np.ndarray):
    """(E, K, h1norm, mean_u, mean_v) from raw arrays, one full transform."""
    coeffs = np.fft.fftn(u)
    npts = grid.n**grid.dim
    grad = grid.quad_weight / npts * float(np.sum(grid.k2 * (coeffs.real**2 + coeffs.imag**2)))
    l2 = grid.quad_weight * float(np.sum(u * u))
    u2 = u * u
    l4 = grid.quad_weight * float(np.sum(u2 * u2))
    l2v = grid.quad_weight * float(np.sum(v * v))
    h1 = grad + l2
    energy = 0.5 * h1 - 0.25 * l4 + 0.5 * l2v
    return energy, h1 - l4, math.sqrt(h1), float(u.mean()), float(v.mean())


@dataclass(frozen=True)
class KGTrajectory:
    """Per-step scalar summaries of one field integration."""

    gamma: float
    dt: float
    t: np.ndarray
    energy: np.ndarray
    k_form: np.ndarray
    h1norm: np.ndarray
    dissipation: np.ndarray
    mean_u: np.ndarray
    mean_v: np.ndarray
    final_state: KGState
    status: str
    message: str
    options: KGOptions

    def __post_init__(self):
        for arr in (self.t, self.energy, self.k_form, self.h1norm,
                    self.dissipation, self.mean_u, self.mean_v):
            arr.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return len(self.t)

    def energy_identity_residual(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0] + self.dissipation)))

    def to_csv_string(self) -> str:
        lines = ["t,E_KG,K,H1norm,dissipation"]
        for i in range(self.n_samples):
            lines.append(
                f"{self.t[i]:.17g},{self.energy[i]:.17g},{self.k_form[i]:.17g},"
                f"{self.h1norm[i]:.17g},{self.dissipation[i]:.17g}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self, path_or_buf):
        text = self.to_csv_string()
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="\n") as fh:
                fh.write(text)


def kg_integrate(
    s0: KGState,
    gamma,
    opts: KGOptions | None = None,
    t_end: float | None = None,
    observer=None,
) -> KGTrajectory:
    """March the damped field equation with fixed-step RK4.

    ``observer(t, u_values, v_values)``, when given, is called at every
    accepted step with read-write copies disallowed (the arrays are the
    live state; treat them as read-only).

    Status is "completed", "blowup" (H1 threshold passed, integration
    stopped at that sample), or "failed" (non-finite values, typically a
    blow-up marched past the representable range).
    """
    g = damping_value(gamma)
    opts = opts or KGOptions()
    horizon = opts.t_max if t_end is None else float(t_end)
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise ValueError(f"integration horizon must be positive and finite, got {horizon}")
    grid = s0.grid
    stepper = _Stepper(grid, g, opts.dealias)
    dt_cap = opts.cfl / math.sqrt(1.0 + grid.k2_max)
    n_steps = max(1, math.ceil(horizon / dt_cap))
    dt = horizon / n_steps
    threshold = opts.blowup_factor * math.sqrt(grid.volume)

    u = np.array(s0.u.values, dtype=float)
    v = np.array(s0.v.values, dtype=float)
    diss = 0.0
    rows = []
    e0, k0, h10, mu0, mv0 = _spectral_summary(grid, u, v)
    rows.append((0.0, e0, k0, h10, diss, mu0, mv0))
    if observer is not None:
        observer(0.0, u, v)
    status, message = "completed", ""
    last_finite = (u, v)
    for i in range(1, n_steps + 1):
        u, v, diss = stepper.step(u, v, diss, dt)
        t = i * dt
        if not (np.isfinite(u).all() and np.isfinite(v).all() and math.isfinite(diss)):
            status = "failed"
            message = f"non-finite state at t={t:.6g}"
            break
        last_finite = (u, v)
        e, k, h1, mu, mv = _spectral_summary(grid, u, v)
        rows.append((t, e, k, h1, diss, mu, mv))
        if observer is not None:
            observer(t, u, v)
        if h1 >= threshold:
            status = "blowup"
            message = f"H1 norm {h1:.6g} passed threshold {threshold:.6g} at t={t:.6g}"
            break

    cols = np.array(rows, dtype=float).T
    final = KGState(Field(grid, last_finite[0]), Field(grid, last_finite[1]))
    return KGTrajectory(
        gamma=g,
        dt=dt,
        t=cols[0],
        energy=cols[1],
        k_form=cols[2],
        h1norm=cols[3],
        dissipation=cols[4],
        mean_u=cols[5],
        mean_v=cols[6],
        final_state=final,
        status=status,
        message=message,
        options=opts,
    )


@dataclass(frozen=True)
class KGFate:
    """Certified outcome of one field experiment."""

    kind: FateKind
    certificate: str
    time: float
    energy: float


def _as_field_pair(grid: TorusGrid, perturbation):
    if perturbation is None:
        z = Field.zero(grid)
        return z, z
    if isinstance(perturbation, KGState):
        return perturbation.u, perturbation.v
    pu, pv = perturbation
    return pu, pv


def _certify_one(state: KGState, gamma: float, opts: KGOptions, d_ref: float,
                 sustain: float) -> KGFate:
    e0 = kg_energy(state)
    k0 = K_functional(state.u)
    if e0 < 0.0:
        return KGFate(FateKind.BlowUp, "initial energy below zero", 0.0, e0)
    if e0 < d_ref and k0 < 0.0:
        return KGFate(
            FateKind.BlowUp, "initial data in the sub-threshold negative-K set", 0.0, e0
        )
    traj = kg_integrate(state, gamma, opts)
    below = traj.energy < 0.0
    if below.any():
        i = int(np.argmax(below))
        return KGFate(
            FateKind.BlowUp,
            "dissipated energy crossed zero",
            float(traj.t[i]),
            float(traj.energy[i]),
        )
    good = (traj.energy < d_ref) & (traj.k_form >= 0.0)
    span = max(1, round(sustain / traj.dt))
    run_start = None
    run_len = 0
    for i, ok in enumerate(good):
        if ok:
            if run_start is None:
                run_start = i
            run_len += 1
            if run_len >= span + 1:
                return KGFate(
                    FateKind.DecayZero,
                    "entered the sub-threshold positive-K set",
                    float(traj.t[run_start]),
                    float(traj.energy[run_start]),
                )
        else:
            run_start, run_len = None, 0
    if traj.status in ("blowup", "failed"):
        return KGFate(
            FateKind.BlowUp,
            "H1 norm passed the blow-up threshold",
            float(traj.t[-1]),
            float(traj.energy[-1]),
        )
    return KGFate(
        FateKind.Undetermined, "budget exhausted", float(traj.t[-1]), float(traj.energy[-1])
    )


def kg_fate_experiment(
    base: KGState,
    perturbation,
    gamma,
    opts: KGOptions | None = None,
    d_ref: float | None = None,
    sustain: float = 1.0,
    scaling_cap: float = 1024.0,
) -> tuple:
    """Certified fate of base + perturbation, with a robustness margin.

    Certificates: blow-up when the energy ledger goes negative (that set is
    invariant and below-zero energy forces escape), or immediately when the
    initial data sit below d_ref with K < 0; decay when the state spends
    ``sustain`` time units inside {E < d_ref, K >= 0}.  d_ref defaults to
    0.99 times the ground-state level computed on the spot; pass a cached
    value to avoid that cost.

    The margin is the distance, in the H1 x L2 product norm, from the given
    perturbation to the largest rescaling of it (powers of two up to
    ``scaling_cap``) that keeps the same certified fate.  Zero perturbation
    has margin 0 by convention.

    Returns (KGFate, margin).
    """
    g = damping_value(gamma)
    opts = opts or KGOptions()
    grid = base.grid
    pu, pv = _as_field_pair(grid, perturbation)
    if pu.grid != grid or pv.grid != grid:
        raise ValueError("perturbation lives on a different grid")
    if d_ref is None:
        from .variational import ground_state_search

        d_ref = 0.99 * ground_state_search(grid).d
    if not (d_ref > 0.0):
        raise ValueError(f"d_ref must be positive, got {d_ref}")

    fate = _certify_one(base.shifted(pu, pv), g, opts, d_ref, sustain)
    norm = math.sqrt(pu.h1_sq + pv.l2_sq)
    if norm == 0.0 or fate.kind is FateKind.Undetermined:
        return fate, 0.0
    last_same = 1.0
    c = 2.0
    while c <= scaling_cap:
        probe = _certify_one(base.shifted(c * pu, c * pv), g, opts, d_ref, sustain)
        if probe.kind is not fate.kind:
            break
        last_same = c
        c *= 2.0
    return fate, (last_same - 1.0) * norm


def continuity_probe(
    s0: KGState,
    delta: float,
    t_end: float,
    gamma,
    opts: KGOptions | None = None,
) -> float:
    """Lipschitz ratio sup_t ||difference(t)|| / delta for one random probe.

    The probe direction is a fixed random smooth pair (seeded from the
    options) scaled to H1 x L2 norm delta; both solutions march with the
    same fixed step and the difference norm is tracked at every step.
    Raises when the base solution leaves the resolvable range before
    ``t_end``: the ratio is only meaningful inside the existence window.
    """
    g = damping_value(gamma)
    opts = opts or KGOptions()
    if delta < 0.0 or not math.isfinite(delta):
        raise ValueError(f"delta must be nonnegative and finite, got {delta}")
    if delta == 0.0:
        return 0.0
    if not (t_end > 0.0 and math.isfinite(t_end)):
        raise ValueError(f"t_end must be positive and finite, got {t_end}")
    grid = s0.grid
    rng = np.random.default_rng(opts.seed)
    du = Field.random_smooth(grid, rng)
    dv = Field.random_smooth(grid, rng)
    joint = math.sqrt(du.h1_sq + dv.l2_sq)
    scale = delta / joint
    stepper = _Stepper(grid, g, opts.dealias)
    dt_cap = opts.cfl / math.sqrt(1.0 + grid.k2_max)
    n_steps = max(1, math.ceil(t_end / dt_cap))
    dt = t_end / n_steps
    threshold = opts.blowup_factor * math.sqrt(grid.volume)

    ua = np.array(s0.u.values)
    va = np.array(s0.v.values)
    ub = ua + scale * du.values
    vb = va + scale * dv.values
    da = db = 0.0

    def diff_norm(u1, v1, u2, v2):
        f = Field(grid, u1 - u2)
        dv2 = v1 - v2
        return math.sqrt(f.h1_sq + grid.quad_weight * float(np.sum(dv2 * dv2)))

    sup = diff_norm(ua, va, ub, vb)
    for i in range(1, n_steps + 1):
        ua, va, da = stepper.step(ua, va, da, dt)
        ub, vb, db = stepper.step(ub, vb, db, dt)
        if not (np.isfinite(ua).all() and np.isfinite(va).all()):
            raise ValueError(
                f"base solution left the resolvable range at t={i * dt:.6g}; "
                "the ratio is only defined inside its existence window"
            )
        base_field = Field(grid, ua)
        if base_field.h1_norm >= threshold:
            raise ValueError(
                f"base solution passed the blow-up threshold at t={i * dt:.6g}"
            )
        if not (np.isfinite(ub).all() and np.isfinite(vb).all()):
            return math.inf
        sup = max(sup, diff_norm(ua, va, ub, vb))
    return sup / delta
