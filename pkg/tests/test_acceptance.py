"""Acceptance gate: one test per shipping criterion, run in order.

Each test funnels through :func:`_report`, which records a PASS/FAIL line
(echoed in the terminal summary by the conftest hook) and then asserts, so a
red criterion is visible both as a failed test and in the final table.
"""

import math
import time

import numpy as np
import pytest

from trichotomy import (
    FateKind,
    IntegratorOptions,
    State,
    classify_fate,
    classify_region,
    detect_blowup,
    energy,
    energy_identity_residual,
    find_U1,
    find_gamma0_N2,
    find_gamma0_gamma1_N3,
    integrate,
    static_energy,
    threshold_solution,
    velocity_profile_difference,
)
from trichotomy.cli import BasinJob, run_basin
from trichotomy.duffing import Region
from trichotomy.kg import (
    Field,
    KGOptions,
    KGState,
    K_functional,
    kg_fate_experiment,
    kg_integrate,
    symmetry_breaking_witness,
)

ACCEPTANCE_RESULTS: dict = {}


def _report(num: int, ok: bool, detail: str):
    ACCEPTANCE_RESULTS[num] = (bool(ok), detail)
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {num:02d}: {detail}"


# fates certified without integration have time 0; the sampled trajectories
# here are bounded, so energy residuals test the ledger, not the certificates
def _bounded_state(rng) -> State:
    u = rng.uniform(-0.9, 0.9)
    room = 2.0 * (0.25 - static_energy(u))
    v = rng.uniform(-1.0, 1.0) * 0.98 * math.sqrt(room)
    return State(u, v)


def test_criterion_01_closed_form_match():
    opts = IntegratorOptions(rel_tol=1e-13, abs_tol=1e-14)
    t0 = time.perf_counter()
    traj = integrate(State(0.0, math.sqrt(0.5)), 0.0, opts, t_end=10.0)
    wall = time.perf_counter() - t0
    ts = np.linspace(0.0, 10.0, 2001)
    u_num, _, _ = traj.sample_dense(ts)
    sup = float(np.max(np.abs(u_num - threshold_solution(0.0, ts))))
    _report(1, sup <= 1e-8 and wall < 0.1, f"sup error {sup:.3g}, wall {wall:.3g}s")


def test_criterion_02_energy_identity():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        s0 = _bounded_state(rng)
        gamma = rng.uniform(0.0, 2.0)
        traj = integrate(s0, gamma, t_end=10.0)
        worst = max(worst, energy_identity_residual(traj))
    worst_cons = 0.0
    for _ in range(5):
        s0 = _bounded_state(rng)
        traj = integrate(s0, 0.0, t_end=50.0)
        e = traj.energies()
        worst_cons = max(worst_cons, float(np.max(np.abs(e - e[0]))))
    _report(
        2,
        worst <= 1e-8 and worst_cons <= 1e-9,
        f"worst ledger residual {worst:.3g}, worst conservation drift {worst_cons:.3g}",
    )


def test_criterion_03_region_fates_at_scale():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(10_000):
        u = rng.choice([-1.0, 1.0]) * rng.uniform(1.0005, 3.0)
        room = 2.0 * (0.25 - static_energy(u))
        v = rng.uniform(-1.0, 1.0) * 0.999 * math.sqrt(room)
        gamma = rng.uniform(1e-3, 2.0)
        if classify_fate(State(u, v), gamma).kind is not FateKind.BlowUp:
            bad += 1
    for _ in range(10_000):
        u = rng.uniform(-0.9995, 0.9995)
        room = 2.0 * (0.25 - static_energy(u))
        v = rng.uniform(-1.0, 1.0) * 0.999 * math.sqrt(room)
        gamma = rng.uniform(1e-3, 2.0)
        if classify_fate(State(u, v), gamma).kind is not FateKind.DecayZero:
            bad += 1
    wall = time.perf_counter() - t0
    _report(3, bad == 0 and wall < 60.0, f"{bad} misclassified of 20000, wall {wall:.3g}s")


def test_criterion_04_damping_step_functions():
    kinds = [classify_fate(State(0.0, 1.0), g).kind for g in np.linspace(0.0, 1.5, 200)]
    flips = [
        (kinds[i - 1].value, kinds[i].value)
        for i in range(1, 200)
        if kinds[i] is not kinds[i - 1]
    ]
    upper_ok = (
        flips == [("BlowUp", "DecayZero")]
        and FateKind.Undetermined not in kinds
    )
    b = find_gamma0_N2(State(0.0, 1.0), width=1e-6)
    upper_ok = upper_ok and 0.0 <= b.lo < b.hi <= 1.0 and b.width <= 1e-6

    kinds3 = [
        classify_fate(State(-1.5, 2.0), g).kind for g in np.linspace(0.0, 4.0, 200)
    ]
    flips3 = [
        (kinds3[i - 1].value, kinds3[i].value)
        for i in range(1, 200)
        if kinds3[i] is not kinds3[i - 1]
    ]
    b0, b1 = find_gamma0_gamma1_N3(State(-1.5, 2.0), width=1e-6)
    left_ok = (
        flips3 == [("BlowUp", "DecayZero"), ("DecayZero", "BlowUp")]
        and FateKind.Undetermined not in kinds3
        and b0.hi < b1.lo
        and max(b0.width, b1.width) <= 1e-6
    )
    _report(
        4,
        upper_ok and left_ok,
        f"upper band: 1 flip, gamma0 in [{b.lo:.8f}, {b.hi:.8f}]; "
        f"left band: 2 flips, gamma0 mid {b0.midpoint:.6f} < gamma1 mid {b1.midpoint:.6f}",
    )


def test_criterion_05_near_critical_shadowing():
    b = find_gamma0_N2(State(0.0, 1.0), width=1e-8)
    traj = integrate(State(0.0, 1.0), b.midpoint, t_end=30.0)
    ts = np.linspace(0.0, 30.0, 30001)
    u, v, _ = traj.sample_dense(ts)
    dist = float(np.min(np.hypot(u - 1.0, v)))
    _report(
        5,
        b.width <= 1e-8 and dist <= 0.05,
        f"bracket width {b.width:.3g}, closest approach to the saddle {dist:.3g}",
    )


def test_criterion_06_decay_floors():
    cases = [(0.1, 0.99 * 0.1 / 4.0), (0.5, 0.99 * 0.5 / 4.0)]
    cases += [(g, 0.99 / (4.0 * math.sqrt(2.0))) for g in (1.0, 2.0)]
    bad = [
        (g, u1)
        for g, u1 in cases
        if classify_fate(State(-1.0, u1), g).kind is not FateKind.DecayZero
    ]
    _report(6, not bad, f"floor launches decaying: {len(cases) - len(bad)}/{len(cases)}")


def test_criterion_07_velocity_profile_ordering():
    rng = np.random.default_rng(0)
    checked = 0
    min_phi = math.inf
    for _ in range(50):
        s0 = State(rng.uniform(-2.0, 2.0), rng.uniform(0.1, 2.5))
        g1 = rng.uniform(0.0, 2.0)
        g2 = g1 + rng.uniform(0.05, 1.5)
        _, phi = velocity_profile_difference(s0, g1, g2)
        checked += phi.size
        min_phi = min(min_phi, float(np.min(phi)))
    _report(
        7,
        min_phi > 0.0,
        f"min profile gap {min_phi:.3g} over {checked} interior points, 50 pairs",
    )


BLOWUP_SEEDS = [
    (2.0, 0.0, 0.0), (0.0, 0.9, 0.0), (-1.5, 0.0, 0.0), (1.2, -0.1, 0.3),
    (-1.3, 0.2, 1.0), (2.5, 1.0, 0.5), (-2.0, -0.5, 0.2), (1.05, 0.0, 2.0),
    (-1.1, 0.0, 0.7), (3.0, -2.0, 1.5), (0.0, 1.2, 0.1), (0.5, 1.5, 0.1),
    (-0.5, 2.0, 0.1), (0.0, -1.5, 0.1), (1.0, 1.0, 0.2), (-1.0, -1.0, 0.2),
    (0.8, 2.5, 0.3), (-0.3, 3.0, 0.4), (2.0, 2.0, 0.1), (-2.5, 0.5, 0.05),
]


def test_criterion_08_blowup_rate_bound():
    uncertified = 0
    worst = math.inf
    for u0, v0, gamma in BLOWUP_SEEDS:
        traj = integrate(State(u0, v0), gamma)
        report = detect_blowup(traj)
        if not report.certified:
            uncertified += 1
            continue
        mask = (np.abs(traj.u) >= 100.0) & (traj.t < report.t_est)
        products = np.abs(traj.u[mask]) * (report.t_est - traj.t[mask])
        worst = min(worst, float(np.min(products)))
    _report(
        8,
        uncertified == 0 and worst >= 0.9,
        f"20/20 certified, min trailing rate product {worst:.6f}",
    )


def _region_masks(job):
    regions = [
        [classify_region(State(float(u), float(v))) for u in job.u_values]
        for v in job.v_values
    ]
    in_k = [
        [r in (Region.KPlus, Region.KMinus) for r in row] for row in regions
    ]
    in_n2 = [[r is Region.N2 for r in row] for row in regions]
    return in_k, in_n2


def test_criterion_09_basin_maps(basin_maps):
    maps, wall = basin_maps
    job = maps[0.0].job
    in_k, in_n2 = _region_masks(job)

    k_stable = True
    undetermined = 0
    for row in range(job.ny):
        for col in range(job.nx):
            kinds = {maps[g].fate_at(row, col).kind for g in (0.0, 0.5, 2.0)}
            undetermined += sum(
                1 for g in (0.0, 0.5, 2.0)
                if maps[g].fate_at(row, col).kind is FateKind.Undetermined
            )
            if in_k[row][col] and len(kinds) != 1:
                k_stable = False

    # conservative sweep: everything strictly above the critical level escapes
    conservative_ok = True
    for row, v in enumerate(job.v_values):
        for col, u in enumerate(job.u_values):
            if energy(State(float(u), float(v))) > 0.25 + 1e-9:
                if maps[0.0].fate_at(row, col).kind is not FateKind.BlowUp:
                    conservative_ok = False

    fractions = {}
    for g in (0.0, 0.5, 2.0):
        blow = total = 0
        for row in range(job.ny):
            for col in range(job.nx):
                if in_n2[row][col]:
                    total += 1
                    blow += maps[g].fate_at(row, col).kind is FateKind.BlowUp
        fractions[g] = blow / total
    monotone = fractions[0.0] >= fractions[0.5] >= fractions[2.0]
    strict = fractions[0.0] > fractions[2.0]

    _report(
        9,
        k_stable and conservative_ok and monotone and strict
        and undetermined == 0 and wall < 300.0,
        f"K pixels stable, escape fractions in the upper band "
        f"{fractions[0.0]:.3f}/{fractions[0.5]:.3f}/{fractions[2.0]:.3f}, "
        f"{undetermined} undetermined, wall {wall:.1f}s",
    )


def test_criterion_10_constant_data_reduction(l8_grid):
    opts = IntegratorOptions(rel_tol=1e-12, abs_tol=1e-13)
    planar = integrate(State(0.4, 0.3), 0.25, opts, t_end=20.0)
    traj = kg_integrate(KGState.constant(l8_grid, 0.4, 0.3), 0.25, KGOptions(t_max=20.0))
    u_ref, v_ref, _ = planar.sample_dense(traj.t)
    sup = max(
        float(np.max(np.abs(traj.mean_u - u_ref))),
        float(np.max(np.abs(traj.mean_v - v_ref))),
    )
    _report(10, traj.status == "completed" and sup <= 1e-6, f"mode-0 deviation {sup:.3g}")


def test_criterion_11_variational_certificates(l8_grid, ground_l8):
    h, j_value = symmetry_breaking_witness(l8_grid)
    k_val = abs(K_functional(Field.constant(l8_grid, 1.0) + h))
    quarter = l8_grid.volume / 4.0
    ok = (
        k_val <= 1e-10
        and j_value < quarter
        and ground_l8.d <= j_value
        and ground_l8.residual <= 1e-6
        and ground_l8.converged
    )
    _report(
        11,
        ok,
        f"|K(1+h)| = {k_val:.3g}, d = {ground_l8.d:.6f} <= J(1+h) = {j_value:.6f} "
        f"< {quarter}, stationarity residual {ground_l8.residual:.3g}",
    )


def test_criterion_12_field_dichotomy(l8_grid, ground_l8, u1_bracket_g1):
    u1_star = u1_bracket_g1.midpoint
    raw = Field.from_function(
        l8_grid, lambda x: np.cos(2.0 * math.pi * x / l8_grid.length)
    )
    pert = raw * (1e-3 / raw.h1_norm)
    zero = Field.zero(l8_grid)
    opts = KGOptions(t_max=20.0)
    d_ref = 0.99 * ground_l8.d

    outcomes = []
    for launch, expected in ((0.5 * u1_star, FateKind.DecayZero),
                             (2.0 * u1_star, FateKind.BlowUp)):
        for sign in (1.0, -1.0):
            fate, margin = kg_fate_experiment(
                KGState.constant(l8_grid, -1.0, launch),
                (sign * pert, zero),
                1.0,
                opts,
                d_ref=d_ref,
                scaling_cap=4.0,
            )
            negative_witness = expected is not FateKind.BlowUp or fate.energy < 0.0
            outcomes.append(fate.kind is expected and margin > 0.0 and negative_witness)
    _report(
        12,
        all(outcomes),
        f"U1 = {u1_star:.4f}: half-speed launches decay, double-speed launches "
        f"blow up with a negative-energy witness, both perturbation signs",
    )


def test_criterion_13_thread_count_determinism(basin_maps):
    maps, _ = basin_maps
    identical = True
    for gamma in (0.0, 0.5, 2.0):
        ref = maps[gamma]
        job = BasinJob(
            ref.job.u_min, ref.job.u_max, ref.job.v_min, ref.job.v_max,
            ref.job.nx, ref.job.ny, gamma, ref.job.options, threads=1,
        )
        redo = run_basin(job)
        if redo.csv_text != ref.csv_text or redo.pgm_bytes != ref.pgm_bytes:
            identical = False
    _report(13, identical, "three maps byte-identical at one and two workers")
