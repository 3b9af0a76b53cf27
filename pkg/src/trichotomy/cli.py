"""Command-line front end.

Subcommands map one to one onto library operations: single trajectories,
single fate rows, basin-of-attraction sweeps, critical-parameter searches,
and the field-equation experiments.  Global flags may also come from a
line-oriented ``key = value`` config file; precedence is built-in defaults,
then the file, then explicit flags.

Exit codes: 0 success, 2 usage or domain error, 3 numerical failure
(step underflow, unresolved search, undetermined fate).
"""

from __future__ import annotations

import argparse
import math
import multiprocessing
import sys
from dataclasses import dataclass

import numpy as np

from .classify import FateKind, classify_fate, fate_csv_header, fate_csv_row
from .critical import find_gamma0_N2, find_gamma0_gamma1_N3, find_U1, search_csv_header, search_csv_row, timed_search
from .duffing import Region, State, classify_region
from .engine import IntegratorOptions, NumericalCertificationError, integrate
from .kg import (
    Field,
    K_functional,
    KGOptions,
    KGState,
    TorusGrid,
    ground_state_search,
    kg_fate_experiment,
    kg_integrate,
    symmetry_breaking_witness,
    write_field,
)

__all__ = ["main", "BasinJob", "run_basin", "FATE_PIXEL"]

#: 8-bit PGM encoding of fates.
FATE_PIXEL = {
    FateKind.BlowUp: 0,
    FateKind.DecayZero: 255,
    FateKind.ConvergePlus: 200,
    FateKind.ConvergeMinus: 100,
    FateKind.Undetermined: 128,
}

DEFAULTS = {
    "rel_tol": 1e-10,
    "abs_tol": 1e-12,
    "t_max": 200.0,
    "seed": 0,
    "threads": 1,
}


# --------------------------------------------------------------------------
# basin sweep


@dataclass(frozen=True)
class BasinJob:
    """One rectangular sweep of the phase plane."""

    u_min: float
    u_max: float
    v_min: float
    v_max: float
    nx: int
    ny: int
    gamma: float
    options: IntegratorOptions
    threads: int = 1
    out_csv: str | None = None
    out_pgm: str | None = None

    def __post_init__(self):
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ValueError("window needs u_min < u_max and v_min < v_max")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("resolution must be at least 1x1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @property
    def u_values(self) -> np.ndarray:
        return np.linspace(self.u_min, self.u_max, self.nx)

    @property
    def v_values(self) -> np.ndarray:
        """Row coordinates, top of the image first (largest v)."""
        return np.linspace(self.v_max, self.v_min, self.ny)


def _basin_row_worker(task):
    v, us, gamma, opts = task
    return [classify_fate(State(u, v), gamma, opts) for u in us]


@dataclass(frozen=True)
class BasinResult:
    job: BasinJob
    fates: tuple
    csv_text: str
    pgm_bytes: bytes

    def fate_at(self, row: int, col: int):
        return self.fates[row][col]

    def counts(self) -> dict:
        out: dict = {}
        for row in self.fates:
            for f in row:
                out[f.kind] = out.get(f.kind, 0) + 1
        return out


def run_basin(job: BasinJob) -> BasinResult:
    """Classify every pixel and assemble CSV plus PGM, deterministically.

    Pixels are independent, so rows may be farmed out to worker processes;
    results are assembled in pixel order (top row first, u ascending), which
    makes the outputs identical regardless of worker count.
    """
    us = tuple(float(u) for u in job.u_values)
    tasks = [(float(v), us, job.gamma, job.options) for v in job.v_values]
    if job.threads > 1 and job.ny > 1:
        # warm the compiled marcher once before forking
        classify_fate(State(0.0, 1.0), 2.0, job.options)
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=job.threads) as pool:
            rows = pool.map(_basin_row_worker, tasks)
    else:
        rows = [_basin_row_worker(t) for t in tasks]

    lines = [fate_csv_header()]
    pixels = bytearray()
    for v, row in zip(job.v_values, rows):
        for u, fate in zip(us, row):
            lines.append(fate_csv_row(State(u, float(v)), job.gamma, fate))
            pixels.append(FATE_PIXEL[fate.kind])
    csv_text = "\n".join(lines) + "\n"
    pgm = b"P5\n%d %d\n255\n" % (job.nx, job.ny) + bytes(pixels)

    if job.out_csv:
        with open(job.out_csv, "w", newline="\n") as fh:
            fh.write(csv_text)
    if job.out_pgm:
        with open(job.out_pgm, "wb") as fh:
            fh.write(pgm)
    return BasinResult(job, tuple(tuple(r) for r in rows), csv_text, pgm)


# --------------------------------------------------------------------------
# plumbing


def _read_config(path: str) -> dict:
    mapping = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {s!r}")
            key, _, value = s.partition("=")
            mapping[key.strip().replace("-", "_")] = value.strip()
    return mapping


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def _merge_config(args: argparse.Namespace):
    if getattr(args, "config", None):
        mapping = _read_config(args.config)
        known = vars(args)
        for key, raw in mapping.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if known[key] is None:
                setattr(args, key, _coerce(raw))
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None and key in vars(args):
            setattr(args, key, value)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ValueError(f"missing required option(s): {flags}")


def _integrator_options(args) -> IntegratorOptions:
    return IntegratorOptions(
        rel_tol=args.rel_tol, abs_tol=args.abs_tol, t_max=args.t_max
    )


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _make_grid(args) -> TorusGrid:
    _require(args, "dim", "n", "length")
    return TorusGrid(int(args.dim), int(args.n), float(args.length))


def _kg_options(args) -> KGOptions:
    kw = {}
    if args.t_max is not None:
        kw["t_max"] = args.t_max
    if getattr(args, "cfl", None) is not None:
        kw["cfl"] = args.cfl
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    return KGOptions(**kw)


# --------------------------------------------------------------------------
# subcommand bodies


def _cmd_simulate(args) -> int:
    _require(args, "u0", "u1", "gamma")
    traj = integrate(State(args.u0, args.u1), args.gamma, _integrator_options(args))
    _emit(traj.to_csv_string(), args.out)
    if traj.status == "failed":
        print(f"integration failed: {traj.message}", file=sys.stderr)
        return 3
    return 0


def _cmd_classify(args) -> int:
    _require(args, "u0", "u1", "gamma")
    s0 = State(args.u0, args.u1)
    fate = classify_fate(s0, args.gamma, _integrator_options(args))
    _emit(fate_csv_header() + "\n" + fate_csv_row(s0, args.gamma, fate) + "\n", args.out)
    return 3 if fate.kind is FateKind.Undetermined else 0


def _cmd_basin(args) -> int:
    _require(args, "u_min", "u_max", "v_min", "v_max", "nx", "ny", "gamma")
    job = BasinJob(
        u_min=args.u_min,
        u_max=args.u_max,
        v_min=args.v_min,
        v_max=args.v_max,
        nx=int(args.nx),
        ny=int(args.ny),
        gamma=args.gamma,
        options=_integrator_options(args),
        threads=int(args.threads),
        out_csv=args.out_csv,
        out_pgm=args.out_pgm,
    )
    result = run_basin(job)
    if not job.out_csv and not job.out_pgm:
        _emit(result.csv_text, args.out)
    counts = result.counts()
    summary = ", ".join(f"{k.value}={n}" for k, n in sorted(counts.items(), key=lambda p: p[0].value))
    print(f"basin {job.nx}x{job.ny} gamma={job.gamma}: {summary}", file=sys.stderr)
    return 0


def _cmd_critical_gamma(args) -> int:
    _require(args, "u0", "u1")
    width = args.width if args.width is not None else 1e-8
    s0 = State(args.u0, args.u1)
    opts = _integrator_options(args)
    region = classify_region(s0)
    lines = [search_csv_header()]
    if region is Region.N2:
        bracket, wall = timed_search(find_gamma0_N2, s0, width, opts)
        lines.append(search_csv_row(s0, "gamma0", bracket, wall))
    elif region is Region.N3:
        (b0, b1), wall = timed_search(find_gamma0_gamma1_N3, s0, width, opts)
        lines.append(search_csv_row(s0, "gamma0", b0, wall))
        lines.append(search_csv_row(s0, "gamma1", b1, wall))
    else:
        raise ValueError(
            f"critical-gamma needs data in the upper outside-the-well bands, got {region.value}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_critical_u1(args) -> int:
    _require(args, "gamma")
    width = args.width if args.width is not None else 1e-8
    bracket, wall = timed_search(find_U1, args.gamma, width, _integrator_options(args))
    text = search_csv_header() + "\n" + search_csv_row(None, "U1", bracket, wall) + "\n"
    _emit(text, args.out)
    return 0


def _cmd_kg_run(args) -> int:
    _require(args, "u0", "u1", "gamma")
    grid = _make_grid(args)
    traj = kg_integrate(KGState.constant(grid, args.u0, args.u1), args.gamma, _kg_options(args))
    _emit(traj.to_csv_string(), args.out)
    if args.save_u:
        write_field(args.save_u, traj.final_state.u)
    if args.save_v:
        write_field(args.save_v, traj.final_state.v)
    if traj.status == "failed":
        print(f"integration failed: {traj.message}", file=sys.stderr)
        return 3
    print(f"status: {traj.status} {traj.message}".rstrip(), file=sys.stderr)
    return 0


def _cmd_kg_ground(args) -> int:
    grid = _make_grid(args)
    result = ground_state_search(
        grid,
        n_seeds=int(args.seeds) if args.seeds is not None else 16,
        max_iter=int(args.max_iter) if args.max_iter is not None else 5000,
        seed=int(args.seed),
    )
    quarter = grid.volume / 4.0
    print(
        f"d = {result.d:.12g} (constant level {quarter:.12g}), "
        f"residual = {result.residual:.3g}, converged = {result.converged}, "
        f"iterations = {result.iterations}"
    )
    if args.out:
        write_field(args.out, result.q)
    return 0 if result.converged else 3


def _cmd_kg_witness(args) -> int:
    grid = _make_grid(args)
    beta = args.beta if args.beta is not None else 0.1
    h, j_value = symmetry_breaking_witness(grid, beta)
    one_plus_h = Field.constant(grid, 1.0) + h
    print(
        f"J(1+h) = {j_value:.12g}, constant level = {grid.volume / 4.0:.12g}, "
        f"K(1+h) = {K_functional(one_plus_h):.3g}"
    )
    if args.out:
        write_field(args.out, h)
    return 0


def _cmd_kg_fate(args) -> int:
    _require(args, "u0", "u1", "gamma")
    grid = _make_grid(args)
    base = KGState.constant(grid, args.u0, args.u1)
    eps = args.eps if args.eps is not None else 0.0
    if eps > 0.0:
        mode = int(args.mode) if args.mode is not None else 1
        raw = Field.from_function(
            grid, lambda *xs: np.cos(2.0 * math.pi * mode * xs[0] / grid.length)
        )
        pert = (raw * (eps / raw.h1_norm), Field.zero(grid))
    else:
        pert = None
    fate, margin = kg_fate_experiment(
        base, pert, args.gamma, _kg_options(args), d_ref=args.d_ref
    )
    _emit(
        "kind,certificate,time,energy,margin\n"
        f"{fate.kind.value},{fate.certificate},{fate.time:.17g},"
        f"{fate.energy:.17g},{margin:.17g}\n",
        args.out,
    )
    return 3 if fate.kind is FateKind.Undetermined else 0


# --------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)
    p.add_argument("--abs-tol", dest="abs_tol", type=float, default=None)
    p.add_argument("--t-max", dest="t_max", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--config", default=None, help="key = value settings file")


def _add_state(p: argparse.ArgumentParser):
    p.add_argument("--u0", type=float, default=None)
    p.add_argument("--u1", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)


def _add_grid(p: argparse.ArgumentParser):
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--L", dest="length", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trichotomy",
        description="Certified fates for the damped focusing oscillator and its field analogue.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one trajectory to CSV")
    _add_state(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("classify", help="one certified fate row")
    _add_state(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("basin", help="phase-plane sweep to CSV and PGM")
    p.add_argument("--u-min", dest="u_min", type=float, default=None)
    p.add_argument("--u-max", dest="u_max", type=float, default=None)
    p.add_argument("--v-min", dest="v_min", type=float, default=None)
    p.add_argument("--v-max", dest="v_max", type=float, default=None)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--out-csv", dest="out_csv", default=None)
    p.add_argument("--out-pgm", dest="out_pgm", default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_basin)

    p = sub.add_parser("critical-gamma", help="bracket damping transitions")
    _add_state(p)
    p.add_argument("--width", type=float, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_critical_gamma)

    p = sub.add_parser("critical-u1", help="bracket the launch-velocity threshold")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--width", type=float, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_critical_u1)

    p = sub.add_parser("kg-run", help="field integration from constant data")
    _add_grid(p)
    _add_state(p)
    p.add_argument("--cfl", type=float, default=None)
    p.add_argument("--save-u", dest="save_u", default=None, help="final u snapshot path")
    p.add_argument("--save-v", dest="save_v", default=None, help="final v snapshot path")
    _add_common(p)
    p.set_defaults(fn=_cmd_kg_run)

    p = sub.add_parser("kg-ground", help="ground-state search on a torus")
    _add_grid(p)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_kg_ground)

    p = sub.add_parser("kg-witness", help="two-mode witness with K(1+h) = 0")
    _add_grid(p)
    p.add_argument("--beta", type=float, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_kg_witness)

    p = sub.add_parser("kg-fate", help="certified fate of perturbed constant data")
    _add_grid(p)
    _add_state(p)
    p.add_argument("--eps", type=float, default=None, help="perturbation norm")
    p.add_argument("--mode", type=int, default=None, help="cosine mode index")
    p.add_argument("--d-ref", dest="d_ref", type=float, default=None)
    _add_common(p)
    p.set_defaults(fn=_cmd_kg_fate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalCertificationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
