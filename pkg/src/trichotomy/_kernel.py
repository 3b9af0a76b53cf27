"""Compiled fate-marching kernel.

A minimal Dormand-Prince 5(4) stepper on the bare (u, v) system, used by the
fate classifier and the basin/bisection sweeps where per-call scipy overhead
would dominate.  It marches until the energy drops through the critical
level 1/4 (localized on a cubic Hermite interpolant), until |u| reaches the
blow-up threshold, or until the budget runs out.  No dissipation ledger and
no dense output are kept here; callers wanting a full trajectory use
:func:`trichotomy.engine.integrate`.

Return codes:
    0  energy crossed 1/4 with |u| < 1 at the crossing (entered inner well)
    1  energy crossed 1/4 with |u| > 1 (entered outer component)
    2  |u| reached the blow-up threshold before any crossing
    3  time budget exhausted
    4  step-size underflow / non-finite values
"""

from __future__ import annotations

import numpy as np
from numba import njit

CODE_ENTERED_KPLUS = 0
CODE_ENTERED_KMINUS = 1
CODE_BLOWUP_THRESHOLD = 2
CODE_BUDGET = 3
CODE_UNDERFLOW = 4

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# error weights: 5th minus embedded 4th order (k7 = f at the step end, FSAL)
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

_QUARTER = 0.25


@njit(cache=True)
def _fu(u, v):
    return v


@njit(cache=True)
def _fv(u, v, g):
    return u * u * u - u - g * v


@njit(cache=True)
def _energy(u, v):
    return 0.5 * u * u - 0.25 * u * u * u * u + 0.5 * v * v


@njit(cache=True)
def _hermite(y0, d0, y1, d1, h, s):
    # cubic Hermite on [0, 1], derivatives scaled by the step h
    s2 = s * s
    s3 = s2 * s
    return (
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
    )


@njit(cache=True)
def march_to_certificate(u0, v0, gamma, rtol, atol, t_max, blowup_thr):
    """March until a region certificate, threshold, budget end, or failure.

    Returns (code, t, u, v) with the state at the certificate instant (for
    codes 0-2 localized on the step's Hermite interpolant) or at the last
    accepted sample (codes 3-4).
    """
    t = 0.0
    u = u0
    v = v0
    fu = _fu(u, v)
    fv = _fv(u, v, gamma)

    if _energy(u, v) <= _QUARTER:
        # defensive: callers route sub-critical data through region logic
        code = CODE_ENTERED_KPLUS if np.abs(u) < 1.0 else CODE_ENTERED_KMINUS
        return code, 0.0, u, v

    # initial step from the local velocity scale
    scale = (np.sqrt(u * u + v * v) + 1.0) / (np.sqrt(fu * fu + fv * fv) + 1.0)
    h = 0.01 * scale
    if h > t_max:
        h = t_max

    while t < t_max:
        if h > t_max - t:
            h = t_max - t
        if h < 1e-13 * (1.0 + np.abs(t)):
            return CODE_UNDERFLOW, t, u, v

        k1u, k1v = fu, fv

        uu = u + h * _A21 * k1u
        vv = v + h * _A21 * k1v
        k2u = _fu(uu, vv)
        k2v = _fv(uu, vv, gamma)

        uu = u + h * (_A31 * k1u + _A32 * k2u)
        vv = v + h * (_A31 * k1v + _A32 * k2v)
        k3u = _fu(uu, vv)
        k3v = _fv(uu, vv, gamma)

        uu = u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u)
        vv = v + h * (_A41 * k1v + _A42 * k2v + _A43 * k3v)
        k4u = _fu(uu, vv)
        k4v = _fv(uu, vv, gamma)

        uu = u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u)
        vv = v + h * (_A51 * k1v + _A52 * k2v + _A53 * k3v + _A54 * k4v)
        k5u = _fu(uu, vv)
        k5v = _fv(uu, vv, gamma)

        uu = u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u)
        vv = v + h * (_A61 * k1v + _A62 * k2v + _A63 * k3v + _A64 * k4v + _A65 * k5v)
        k6u = _fu(uu, vv)
        k6v = _fv(uu, vv, gamma)

        u1 = u + h * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u + _B6 * k6u)
        v1 = v + h * (_B1 * k1v + _B3 * k3v + _B4 * k4v + _B5 * k5v + _B6 * k6v)
        k7u = _fu(u1, v1)
        k7v = _fv(u1, v1, gamma)

        erru = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
        errv = h * (_E1 * k1v + _E3 * k3v + _E4 * k4v + _E5 * k5v + _E6 * k6v + _E7 * k7v)
        su = atol + rtol * max(np.abs(u), np.abs(u1))
        sv = atol + rtol * max(np.abs(v), np.abs(v1))
        err = np.sqrt(0.5 * ((erru / su) ** 2 + (errv / sv) ** 2))

        if not np.isfinite(err):
            h *= 0.25
            continue
        if err > 1.0:
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            h *= fac
            continue

        # accepted; look for certificates inside the step
        e1 = _energy(u1, v1)
        if e1 <= _QUARTER:
            lo, hi = 0.0, 1.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                um = _hermite(u, k1u, u1, k7u, h, mid)
                vm = _hermite(v, k1v, v1, k7v, h, mid)
                if _energy(um, vm) > _QUARTER:
                    lo = mid
                else:
                    hi = mid
            um = _hermite(u, k1u, u1, k7u, h, hi)
            vm = _hermite(v, k1v, v1, k7v, h, hi)
            code = CODE_ENTERED_KPLUS if np.abs(um) < 1.0 else CODE_ENTERED_KMINUS
            return code, t + hi * h, um, vm

        if np.abs(u1) >= blowup_thr:
            lo, hi = 0.0, 1.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                um = _hermite(u, k1u, u1, k7u, h, mid)
                if np.abs(um) < blowup_thr:
                    lo = mid
                else:
                    hi = mid
            um = _hermite(u, k1u, u1, k7u, h, hi)
            vm = _hermite(v, k1v, v1, k7v, h, hi)
            return CODE_BLOWUP_THRESHOLD, t + hi * h, um, vm

        t += h
        u, v = u1, v1
        fu, fv = k7u, k7v

        if err == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * err ** -0.2
            if fac > 5.0:
                fac = 5.0
            elif fac < 0.2:
                fac = 0.2
        h *= fac

    return CODE_BUDGET, t, u, v
