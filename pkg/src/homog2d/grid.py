"""Uniform Cartesian grids on the square (-L, L)^2 with a disk-shaped hole.

All analysis fields live at cell centers (collocated). The solver and the
Bogovskii operators use a staggered arrangement, see :mod:`homog2d.staggered`.

Arrays are indexed ``[ix, iy]`` (x first), i.e. ``numpy.meshgrid(...,
indexing="ij")`` order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

FLUID = 0
HOLE = 1
EXTERIOR = 2


class GridError(ValueError):
    """Invalid grid or domain parameters."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class DomainSpec:
    """Square domain ``(-L, L)^2`` minus the disk ``B_eps(0)``."""

    half_width: float
    hole_radius: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise GridError(f"half_width must be positive, got {self.half_width}")
        if not 0 <= self.hole_radius < self.half_width:
            raise GridError(
                f"hole_radius must lie in [0, L), got {self.hole_radius} with L={self.half_width}"
            )

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def eps(self) -> float:
        return self.hole_radius


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Cell-centred grid with ``n`` cells per axis and a per-cell mask.

    The mask holds ``FLUID`` or ``HOLE``; ``EXTERIOR`` is reserved for the
    ghost ring that the staggered operators treat as solid.
    """

    domain: DomainSpec
    n: int
    mask: np.ndarray = field(repr=False)

    @property
    def L(self) -> float:
        return self.domain.half_width

    @property
    def eps(self) -> float:
        return self.domain.hole_radius

    @property
    def h(self) -> float:
        return 2.0 * self.domain.half_width / self.n

    @property
    def centers_1d(self) -> np.ndarray:
        return -self.L + (np.arange(self.n) + 0.5) * self.h

    @property
    def nodes_1d(self) -> np.ndarray:
        return -self.L + np.arange(self.n + 1) * self.h

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.centers_1d
        return np.meshgrid(c, c, indexing="ij")

    @property
    def fluid(self) -> np.ndarray:
        return self.mask == FLUID

    @property
    def hole(self) -> np.ndarray:
        return self.mask == HOLE

    @property
    def cell_area(self) -> float:
        return self.h * self.h


def make_grid(domain: DomainSpec, n: int) -> Grid2D:
    """Build the grid; cells whose centres satisfy ``|x| < eps`` are marked as hole."""
    if n < 16 or n % 2:
        raise GridError(f"n must be an even integer >= 16, got {n}")
    if domain.hole_radius >= domain.half_width / 2:
        raise GridError(
            f"hole radius {domain.hole_radius} must be below L/2 = {domain.half_width / 2}"
        )
    c = -domain.half_width + (np.arange(n) + 0.5) * (2.0 * domain.half_width / n)
    X, Y = np.meshgrid(c, c, indexing="ij")
    mask = np.full((n, n), FLUID, dtype=np.int8)
    if domain.hole_radius > 0:
        mask[np.hypot(X, Y) < domain.hole_radius] = HOLE
    mask.setflags(write=False)
    return Grid2D(domain, n, mask)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"expected shape {(self.grid.n,) * 2}, got {self.values.shape}")

    @classmethod
    def from_function(cls, grid: Grid2D, f: Callable, zero_hole: bool = True) -> "ScalarField":
        X, Y = grid.cell_centers()
        vals = np.asarray(np.broadcast_to(f(X, Y), X.shape), dtype=float).copy()
        if zero_hole:
            vals[grid.hole] = 0.0
        return cls(grid, vals)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Collocated vector field; ``x`` and ``y`` hold the two components."""

    grid: Grid2D
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def from_function(cls, grid: Grid2D, f: Callable, zero_hole: bool = True) -> "VectorField":
        X, Y = grid.cell_centers()
        fx, fy = f(X, Y)
        fx = np.asarray(np.broadcast_to(fx, X.shape), dtype=float).copy()
        fy = np.asarray(np.broadcast_to(fy, X.shape), dtype=float).copy()
        if zero_hole:
            fx[grid.hole] = 0.0
            fy[grid.hole] = 0.0
        return cls(grid, fx, fy)

    def norm(self) -> np.ndarray:
        return np.hypot(self.x, self.y)


def region_mask(grid: Grid2D, region: str | np.ndarray = "fluid") -> np.ndarray:
    if isinstance(region, np.ndarray):
        return region.astype(bool)
    if region == "fluid":
        return grid.fluid
    if region == "all":
        return np.ones((grid.n, grid.n), dtype=bool)
    if region == "hole":
        return grid.hole
    raise ValueError(f"unknown region selector {region!r}")


def integrate_power(f: ScalarField | np.ndarray, q: float, region="fluid", grid: Grid2D | None = None) -> float:
    """Midpoint rule for ``sum |f_i|^q h^2`` over the selected cells."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        if grid is None:
            raise ValueError("a grid is required for raw arrays")
        vals = np.asarray(f)
    sel = region_mask(grid, region)
    return float(np.sum(np.abs(vals[sel]) ** q) * grid.cell_area)


def lp_norm(f: ScalarField, p: float, region="fluid") -> float:
    return integrate_power(f, p, region) ** (1.0 / p)


def _axis_derivative(vals: np.ndarray, valid: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(vals, axis, 0)
    ok = np.moveaxis(valid, axis, 0)
    out = np.zeros_like(v)
    has_lo = np.zeros_like(ok)
    has_hi = np.zeros_like(ok)
    has_lo[1:] = ok[:-1]
    has_hi[:-1] = ok[1:]
    lo = np.zeros_like(v)
    hi = np.zeros_like(v)
    lo[1:] = v[:-1]
    hi[:-1] = v[1:]
    central = ok & has_lo & has_hi
    fwd = ok & has_hi & ~has_lo
    bwd = ok & has_lo & ~has_hi
    out[central] = (hi[central] - lo[central]) / (2 * h)
    out[fwd] = (hi[fwd] - v[fwd]) / h
    out[bwd] = (v[bwd] - lo[bwd]) / h
    return np.moveaxis(out, 0, axis)


def fd_gradient(f: ScalarField) -> VectorField:
    """Central differences inside, first-order one-sided next to the border or the hole."""
    valid = f.grid.fluid
    gx = _axis_derivative(f.values, valid, f.grid.h, 0)
    gy = _axis_derivative(f.values, valid, f.grid.h, 1)
    return VectorField(f.grid, gx, gy)


def fd_divergence(v: VectorField) -> ScalarField:
    valid = v.grid.fluid
    d = _axis_derivative(v.x, valid, v.grid.h, 0) + _axis_derivative(v.y, valid, v.grid.h, 1)
    return ScalarField(v.grid, d)


def interior_cells(grid: Grid2D, width: int = 1) -> np.ndarray:
    """Fluid cells whose full ``width``-neighbourhood is fluid and inside the grid."""
    ok = grid.fluid.copy()
    pad = np.pad(grid.fluid, width, constant_values=False)
    n = grid.n
    for dx in range(-width, width + 1):
        for dy in range(-width, width + 1):
            ok &= pad[width + dx : width + dx + n, width + dy : width + dy + n]
    return ok


def radial_quadrature(
    profile: Callable[[np.ndarray], np.ndarray],
    q: float,
    r_min: float,
    r_max: float,
    breakpoints: Sequence[float] = (),
    rtol: float = 1e-10,
) -> float:
    """``2 pi * int_{r_min}^{r_max} |profile(r)|^q r dr`` by adaptive Gauss-Kronrod.

    ``breakpoints`` marks kinks of the profile; the interval is split there so
    each piece is smooth.
    """
    if not r_min < r_max:
        raise ValueError(f"need r_min < r_max, got [{r_min}, {r_max}]")
    pts = sorted({r_min, r_max, *(b for b in breakpoints if r_min < b < r_max)})

    def integrand(r):
        return abs(float(profile(np.asarray(r)))) ** q * r

    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=400)
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"adaptive quadrature on [{a}, {b}] did not converge: {exc}") from exc
        if err > max(rtol * abs(val), 1e-300) * 10:
            raise QuadratureError(f"error estimate {err:.3e} too large on [{a}, {b}] (value {val:.6e})")
        total += val
    return 2.0 * math.pi * total


def _gauss_panels(breaks: Sequence[float], order: int) -> tuple[np.ndarray, np.ndarray]:
    xg, wg = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        nodes.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def disk_quadrature(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    r_breaks: Sequence[float],
    panels_per_piece: int = 8,
    order: int = 12,
    n_theta: int = 256,
) -> float:
    """Integrate a (non-radial) function over ``B_R(0)`` in polar coordinates.

    The radial direction is split at ``r_breaks`` (which must start at the inner
    radius and end at ``R``) and each piece gets composite Gauss-Legendre
    panels; the angle uses the periodic trapezoid rule. Intended for integrands
    supported near the origin that a uniform grid cannot resolve.
    """
    breaks = []
    for a, b in zip(r_breaks[:-1], r_breaks[1:]):
        breaks.extend(np.linspace(a, b, panels_per_piece + 1)[:-1])
    breaks.append(r_breaks[-1])
    r, wr = _gauss_panels(breaks, order)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    R, TH = np.meshgrid(r, th, indexing="ij")
    vals = func(R * np.cos(TH), R * np.sin(TH))
    return float(np.sum(vals * (wr * r)[:, None]) * (2 * np.pi / n_theta))
