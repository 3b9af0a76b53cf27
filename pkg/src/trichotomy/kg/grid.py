"""Flat-torus grids, real spectral fields, and position-velocity pairs.

The torus [0, L)^d is sampled on n uniform points per axis, n a power of
two, so Laplacian eigenfunctions are exact Fourier modes and the first
nonzero eigenvalue is (2*pi/L)**2 in closed form.  L2 and L4 norms use the
uniform quadrature weight (L/n)^d; gradient seminorms are evaluated by
Parseval on the unnormalized DFT, exact for trigonometric polynomials the
grid resolves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["TorusGrid", "Field", "KGState"]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the d-torus of side length per axis ``length``."""

    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3, got {self.dim}")
        n = self.n
        if not isinstance(n, int) or n < 4 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 4, got {n!r}")
        L = self.length
        if not (isinstance(L, (int, float)) and math.isfinite(L) and L > 0):
            raise ValueError(f"length must be positive and finite, got {L!r}")
        object.__setattr__(self, "length", float(L))

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def quad_weight(self) -> float:
        """Uniform quadrature weight (L/n)^d."""
        return self.spacing**self.dim

    @property
    def lambda1(self) -> float:
        """First nonzero Laplacian eigenvalue, (2*pi/L)**2 exactly."""
        return (2.0 * math.pi / self.length) ** 2

    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def coordinate(self, axis: int) -> np.ndarray:
        """Coordinate array along one axis, broadcast to the full grid shape."""
        x = self.axis_coordinates()
        expand = [None] * self.dim
        expand[axis] = slice(None)
        return np.broadcast_to(x[tuple(expand)], self.shape)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 multiplier array in the full (fftn) layout."""
        k1 = 2.0 * math.pi * np.fft.fftfreq(self.n, d=self.spacing)
        out = np.zeros(self.shape)
        for axis in range(self.dim):
            expand = [None] * self.dim
            expand[axis] = slice(None)
            out = out + k1[tuple(expand)] ** 2
        out.flags.writeable = False
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the 2/3 rule (|index| <= n//3 per axis)."""
        idx = np.rint(np.fft.fftfreq(self.n, d=1.0 / self.n)).astype(int)
        keep1 = np.abs(idx) <= self.n // 3
        out = np.ones(self.shape, dtype=bool)
        for axis in range(self.dim):
            expand = [None] * self.dim
            expand[axis] = slice(None)
            out = out & keep1[tuple(expand)]
        out.flags.writeable = False
        return out

    @property
    def k2_max(self) -> float:
        """Largest |k|^2 the grid carries, dim * ((2*pi/L) * (n/2))**2."""
        return self.dim * ((2.0 * math.pi / self.length) * (self.n / 2)) ** 2


class Field:
    """Real scalar field on a :class:`TorusGrid` with cached spectrum.

    Values are stored read-only; the Fourier coefficients (unnormalized
    fftn convention) are computed once on demand, so values and spectrum
    agree by construction.  Arithmetic returns new fields on the same grid.
    """

    __slots__ = ("grid", "values", "_coeffs")

    def __init__(self, grid: TorusGrid, values):
        vals = np.asarray(values, dtype=float)
        if vals.shape != grid.shape:
            vals = np.broadcast_to(vals, grid.shape).copy()
        if not np.isfinite(vals).all():
            raise ValueError("field values must be finite")
        vals = np.ascontiguousarray(vals)
        vals.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_coeffs", None)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    # constructors -------------------------------------------------------

    @classmethod
    def zero(cls, grid: TorusGrid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "Field":
        coords = [grid.coordinate(a) for a in range(grid.dim)]
        return cls(grid, np.asarray(fn(*coords), dtype=float))

    @classmethod
    def from_coefficients(cls, grid: TorusGrid, coeffs) -> "Field":
        vals = np.fft.ifftn(np.asarray(coeffs, dtype=complex)).real
        return cls(grid, vals)

    @classmethod
    def random_smooth(cls, grid: TorusGrid, rng: np.random.Generator, decay: float = 2.0) -> "Field":
        """Random field with spectrum damped by (1 + |k|^2)^-decay, unit H1 norm."""
        white = rng.standard_normal(grid.shape)
        coeffs = np.fft.fftn(white) / (1.0 + grid.k2) ** decay
        field = cls.from_coefficients(grid, coeffs)
        norm = math.sqrt(field.h1_sq)
        if norm == 0.0:
            raise RuntimeError("degenerate random field")
        return field * (1.0 / norm)

    # spectrum and norms -------------------------------------------------

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            c = np.fft.fftn(self.values)
            c.flags.writeable = False
            object.__setattr__(self, "_coeffs", c)
        return self._coeffs

    @property
    def l2_sq(self) -> float:
        return self.grid.quad_weight * float(np.sum(self.values * self.values))

    @property
    def l4_pow4(self) -> float:
        v2 = self.values * self.values
        return self.grid.quad_weight * float(np.sum(v2 * v2))

    @property
    def grad_sq(self) -> float:
        """Integral of |grad u|^2 via Parseval."""
        g = self.grid
        scale = g.quad_weight / g.n**g.dim
        return scale * float(np.sum(g.k2 * (self.coeffs.real**2 + self.coeffs.imag**2)))

    @property
    def h1_sq(self) -> float:
        return self.grad_sq + self.l2_sq

    @property
    def h1_norm(self) -> float:
        return math.sqrt(self.h1_sq)

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def laplacian(self) -> "Field":
        return Field.from_coefficients(self.grid, -self.grid.k2 * self.coeffs)

    def spectral_consistency(self) -> float:
        """Relative defect between stored values and the inverse transform."""
        back = np.fft.ifftn(self.coeffs).real
        scale = float(np.max(np.abs(self.values))) or 1.0
        return float(np.max(np.abs(back - self.values))) / scale

    def conjugate_symmetry_defect(self) -> float:
        """Max deviation of the spectrum from Hermitian symmetry, relative."""
        c = self.coeffs
        flipped = c
        for axis in range(self.grid.dim):
            flipped = np.roll(np.flip(flipped, axis=axis), 1, axis=axis)
        scale = float(np.max(np.abs(c))) or 1.0
        return float(np.max(np.abs(c - np.conj(flipped)))) / scale

    # arithmetic ---------------------------------------------------------

    def _check_grid(self, other: "Field"):
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check_grid(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check_grid(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def __repr__(self):
        g = self.grid
        return f"Field(dim={g.dim}, n={g.n}, L={g.length}, h1={self.h1_norm:.6g})"


@dataclass(frozen=True)
class KGState:
    """Position-velocity pair (u, du/dt) of fields on one grid."""

    u: Field
    v: Field

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("state components live on different grids")

    @property
    def grid(self) -> TorusGrid:
        return self.u.grid

    def shifted(self, du: Field, dv: Field) -> "KGState":
        return KGState(self.u + du, self.v + dv)

    @classmethod
    def constant(cls, grid: TorusGrid, u0: float, u1: float) -> "KGState":
        return cls(Field.constant(grid, u0), Field.constant(grid, u1))
