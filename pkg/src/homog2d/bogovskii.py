"""Discrete right inverses of the divergence with zero trace.

Every operator here is the minimum-Dirichlet-energy solution of
``div v = f`` on a :class:`~homog2d.staggered.MACGrid`: the saddle-point system

    A v + B^T p = 0,    B v = f,      A = G^T G,  B = div

is reduced to the pressure Schur complement ``B A^-1 B^T p = -f`` and solved by
conjugate gradients on mean-zero pressures, with ``A`` factored once per grid.

Operators provided:

* :func:`bogovskii_full` on the unperforated square,
* :func:`annulus_bogovskii` on ``A_{eps,2eps}`` through a cached solve on the
  reference annulus ``A_{1,2}`` and the rescaling ``v(x) = eps w(x / eps)``,
* :func:`restriction` and :func:`perforated_bogovskii`, which patch a
  zero-trace field of the square near the hole,
* :func:`uniformity_probe` and :func:`pressure_testfn`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import linalg as spla

from .cutoff import smooth_step
from .grid import DomainSpec, Grid2D, ScalarField, make_grid
from .staggered import MACGrid

MEAN_TOL = 1e-12
REFERENCE_N = 96


class BogovskiiError(RuntimeError):
    """Non-convergence of the saddle-point solve; ``residual`` holds the achieved value."""

    def __init__(self, msg: str, residual: float = math.nan):
        super().__init__(msg)
        self.residual = residual


class MeanError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DivSolve:
    """Right-hand side ``f`` (fluid cells), face velocities ``(vx, vy)`` and the L2 residual of ``div v - f``."""

    mac: MACGrid
    f: np.ndarray = field(repr=False)
    vx: np.ndarray = field(repr=False)
    vy: np.ndarray = field(repr=False)
    residual: float
    iterations: int

    def div(self) -> np.ndarray:
        return self.mac.div(self.vx, self.vy)

    def lp(self, p: float) -> float:
        return self.mac.lp(self.vx, self.vy, p)

    def w1p(self, p: float) -> float:
        return self.mac.w1p(self.vx, self.vy, p)

    def scaled(self, a: float) -> "DivSolve":
        return DivSolve(self.mac, a * self.f, a * self.vx, a * self.vy, abs(a) * self.residual, self.iterations)


def fixed_profile(s):
    """Smooth increasing profile: 0 on [0, 1], 1 on [2, inf)."""
    return smooth_step(np.asarray(s, dtype=float) - 1.0)[0]


def _l2(mac: MACGrid, a: np.ndarray) -> float:
    return float(math.sqrt(np.sum(a * a)) * mac.h)


def check_mean(mac: MACGrid, f: np.ndarray) -> None:
    vals = f[mac.fluid]
    if vals.size == 0:
        raise MeanError("right-hand side has no fluid cells")
    rms = math.sqrt(float(np.mean(vals * vals)))
    mean = float(np.mean(vals))
    if abs(mean) > MEAN_TOL * max(rms, 1e-300) and rms > 0:
        raise MeanError(f"right-hand side must have zero mean: mean {mean:.3e} vs rms {rms:.3e}")


def remove_mean(mac: MACGrid, f: np.ndarray) -> np.ndarray:
    out = np.where(mac.fluid, f, 0.0)
    out[mac.fluid] -= out[mac.fluid].mean()
    return out


class SaddleSolver:
    """Factorization of ``A`` and the divergence matrix for one grid; immutable after construction."""

    def __init__(self, mac: MACGrid, tol: float = 1e-8, maxiter: int = 2000):
        self.mac = mac
        self.tol = tol
        self.maxiter = maxiter
        self.B = mac.divergence_matrix()
        self.BT = self.B.T.tocsr()
        self.lu = spla.splu(mac.vector_laplacian())

    def solve(self, f: np.ndarray, tol: float | None = None, check: bool = True) -> DivSolve:
        mac = self.mac
        tol = self.tol if tol is None else tol
        f = np.where(mac.fluid, np.asarray(f, dtype=float), 0.0)
        if check:
            check_mean(mac, f)
        b = f[mac.fluid]
        if not np.any(b):
            z = mac.zeros_u(), mac.zeros_v()
            return DivSolve(mac, f, z[0], z[1], 0.0, 0)
        nc = b.size

        def schur(p):
            p = p - p.mean()
            s = self.B @ self.lu.solve(self.BT @ p)
            return s - s.mean()

        S = spla.LinearOperator((nc, nc), matvec=schur, dtype=float)
        rhs = -(b - b.mean())
        # residual is measured as h * ||.||_2; leave headroom for the inexact matvec
        atol = 0.5 * tol / mac.h
        count = [0]

        def cb(_):
            count[0] += 1

        p, _ = spla.cg(S, rhs, rtol=0.0, atol=atol, maxiter=self.maxiter, callback=cb)
        w = -self.lu.solve(self.BT @ (p - p.mean()))
        u, v = mac.unpack(w)
        res = _l2(mac, np.where(mac.fluid, mac.div(u, v) - f, 0.0))
        if res > tol:
            raise BogovskiiError(f"saddle-point solve stalled at residual {res:.3e} (tol {tol:.1e})", res)
        return DivSolve(mac, f, u, v, res, count[0])


# ---------------------------------------------------------------------------
# full square
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _full_solver(n: int, L: float, tol: float) -> SaddleSolver:
    return SaddleSolver(MACGrid.square(n, L), tol)


def bogovskii_full(f: ScalarField | np.ndarray, tol: float = 1e-8, grid: Grid2D | None = None) -> DivSolve:
    """Minimum-energy zero-trace solution of ``div v = f`` on the whole square (holes ignored)."""
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f, dtype=float)
        if grid is None:
            raise ValueError("a grid is required for raw arrays")
    return _full_solver(grid.n, grid.L, tol).solve(vals)


# ---------------------------------------------------------------------------
# reference annulus and rescaling
# ---------------------------------------------------------------------------


def reference_annulus(n_ref: int = REFERENCE_N) -> MACGrid:
    """``A_{1,2}`` as the fluid cells with centres in ``1 <= |y| < 2`` of the square ``(-2, 2)^2``."""
    mac = MACGrid.square(n_ref, 2.0)
    X, Y = mac.centers()
    r = np.hypot(X, Y)
    return MACGrid.square(n_ref, 2.0, (r >= 2.0) | (r < 1.0))


@lru_cache(maxsize=4)
def _reference_solver(n_ref: int, tol: float) -> SaddleSolver:
    return SaddleSolver(reference_annulus(n_ref), tol)


@dataclass(frozen=True, eq=False)
class AnnulusSolve:
    """``B_eps[f](x) = eps * w(x / eps)`` where ``w`` solves on the reference annulus."""

    eps: float
    reference: DivSolve

    def lq_norm(self, q: float) -> float:
        # |eps w|^q integrated over eps-scaled cells
        return self.eps * self.eps ** (2.0 / q) * self.reference.lp(q)

    def gradient_lq_norm(self, q: float) -> float:
        # d/dx [eps w(x/eps)] = (grad w)(x/eps)
        ref = self.reference
        return self.eps ** (2.0 / q) * ref.mac.grad_lp(ref.vx, ref.vy, q)

    def points(self):
        mac = self.reference.mac
        (Xu, Yu), (Xv, Yv) = mac.u_points(), mac.v_points()
        e = self.eps
        return (e * Xu, e * Yu), (e * Xv, e * Yv)

    def values(self):
        return self.eps * self.reference.vx, self.eps * self.reference.vy


def annulus_bogovskii(f: Callable, eps: float, tol: float = 1e-8, n_ref: int = REFERENCE_N) -> AnnulusSolve:
    """Solve ``div v = f`` on ``A_{eps,2eps}`` with zero trace on both circles.

    ``f`` is a function of the physical coordinate; it is pulled back to the
    reference annulus as ``g(y) = f(eps y)``, which must have zero mean there.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    solver = _reference_solver(n_ref, tol)
    mac = solver.mac
    X, Y = mac.centers()
    g = np.asarray(np.broadcast_to(f(eps * X, eps * Y), X.shape), dtype=float)
    g = np.where(mac.fluid, g, 0.0)
    # solve for the unit-norm datum so rescaled data give the same iterates
    scale = float(np.sqrt(np.sum(g * g)) * mac.h)
    if scale == 0:
        ref = solver.solve(g, tol=tol)
    else:
        ref = solver.solve(g / scale, tol=tol).scaled(scale)
    return AnnulusSolve(eps, ref)


# ---------------------------------------------------------------------------
# restriction to the perforated square
# ---------------------------------------------------------------------------


def perforated_mac(grid: Grid2D) -> MACGrid:
    return MACGrid.from_grid(grid)


def cutoff_faces(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """``eta(|x| / eps)`` at u- and v-faces, forced to 0 on faces touching the hole."""
    mac = perforated_mac(grid)
    full = MACGrid.square(grid.n, grid.L)
    (Xu, Yu), (Xv, Yv) = mac.u_points(), mac.v_points()
    eps = grid.eps
    eu = fixed_profile(np.hypot(Xu, Yu) / eps)
    ev = fixed_profile(np.hypot(Xv, Yv) / eps)
    # a face free in the square but not in the perforated grid touches the hole
    eu = np.where(full.free_u & ~mac.free_u, 0.0, eu)
    ev = np.where(full.free_v & ~mac.free_v, 0.0, ev)
    return eu, ev


@lru_cache(maxsize=16)
def _annular_solver(n: int, L: float, eps: float, tol: float) -> SaddleSolver:
    grid = make_grid(DomainSpec(L, eps), n)
    X, Y = grid.cell_centers()
    region = grid.fluid & (np.hypot(X, Y) < 2.0 * eps + 2.0 * grid.h)
    return SaddleSolver(MACGrid.from_grid(grid, ~region), tol)


@dataclass(frozen=True, eq=False)
class Restricted:
    mac: MACGrid
    vx: np.ndarray = field(repr=False)
    vy: np.ndarray = field(repr=False)
    datum_mean: float
    correction: DivSolve | None


def restriction(F, grid: Grid2D, tol: float = 1e-8) -> Restricted:
    """``eta_eps F + B_annulus[div((1 - eta_eps) F) - mean]`` on the perforated grid.

    ``F`` is a pair of face arrays on the unperforated square (zero on the outer
    border) or a function ``(x, y) -> (Fx, Fy)`` sampled at faces.
    """
    if grid.eps <= 0:
        raise ValueError("restriction needs a grid with a hole")
    full = MACGrid.square(grid.n, grid.L)
    Fu, Fv = full.sample(F) if callable(F) else (np.asarray(F[0], dtype=float), np.asarray(F[1], dtype=float))
    Fu, Fv = Fu * full.free_u, Fv * full.free_v
    mac = perforated_mac(grid)
    eu, ev = cutoff_faces(grid)
    d = full.div((1.0 - eu) * Fu, (1.0 - ev) * Fv)
    solver = _annular_solver(grid.n, grid.L, grid.eps, tol)
    region = solver.mac.fluid
    mean = float(d[region].mean())
    if np.any(np.abs(d[mac.fluid & ~region]) > 0):
        raise BogovskiiError("restriction datum leaks outside the annular solve region")
    datum = np.where(region, d - mean, 0.0)
    ux, uy = eu * Fu * mac.free_u, ev * Fv * mac.free_v
    corr = None
    if np.any(datum):
        corr = solver.solve(datum, check=False)
        ux = ux + corr.vx
        uy = uy + corr.vy
    return Restricted(mac, ux, uy, mean, corr)


def perforated_bogovskii(f: ScalarField, tol: float = 1e-8) -> DivSolve:
    """Restriction of the square's operator applied to the zero extension of ``f``."""
    grid = f.grid
    mac = perforated_mac(grid)
    vals = np.where(mac.fluid, f.values, 0.0)
    check_mean(mac, vals)
    if not np.any(vals):
        return DivSolve(mac, vals, mac.zeros_u(), mac.zeros_v(), 0.0, 0)
    # zero extension onto the square; the hole carries no data
    outer = _full_solver(grid.n, grid.L, tol * 0.5).solve(vals, check=False)
    r = restriction((outer.vx, outer.vy), grid, tol * 0.5)
    res = _l2(mac, np.where(mac.fluid, mac.div(r.vx, r.vy) - vals, 0.0))
    if res > tol:
        raise BogovskiiError(f"composed operator residual {res:.3e} exceeds tol {tol:.1e}", res)
    its = outer.iterations + (r.correction.iterations if r.correction else 0)
    return DivSolve(mac, vals, r.vx, r.vy, res, its)


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformityRow:
    eps: float
    w1p_ratio: float
    div_form_ratio: float
    residual: float


def _cell_lp(mac: MACGrid, f: np.ndarray, p: float) -> float:
    return float((np.sum(np.abs(f[mac.fluid]) ** p) * mac.h**2) ** (1.0 / p))


def default_datum(x, y):
    return np.cos(np.pi * x) * np.cos(2 * np.pi * y) + x


def default_flux(x, y):
    """Smooth field vanishing on the border of (-0.5, 0.5)^2."""
    w = np.cos(np.pi * x) ** 2 * np.cos(np.pi * y) ** 2
    return w * (1.0 + y), w * (0.5 - x)


def uniformity_probe(
    eps_list: Sequence[float],
    p: float = 1.5,
    q: float = 4.0,
    n: int = 128,
    L: float = 0.5,
    datum: Callable = default_datum,
    flux: Callable = default_flux,
    tol: float = 1e-8,
) -> list[UniformityRow]:
    """Per eps: ``||B f||_{W^{1,p}} / ||f||_{L^p}`` and ``||B div F||_{L^q} / ||F||_{L^q}``."""
    if not 1 < p <= 2:
        raise ValueError(f"W^(1,p) probe needs 1 < p <= 2, got {p}")
    if not 1 < q < math.inf:
        raise ValueError(f"div-form probe needs 1 < q < inf, got {q}")
    rows = []
    for eps in eps_list:
        grid = make_grid(DomainSpec(L, eps), n)
        mac = perforated_mac(grid)
        X, Y = grid.cell_centers()
        f = remove_mean(mac, datum(X, Y))
        s = perforated_bogovskii(ScalarField(grid, f), tol)
        Fu, Fv = mac.sample(flux)
        g = mac.div(Fu, Fv)
        g = remove_mean(mac, g)
        s2 = perforated_bogovskii(ScalarField(grid, g), tol)
        rows.append(
            UniformityRow(
                float(eps),
                s.w1p(p) / _cell_lp(mac, f, p),
                s2.lp(q) / mac.lp(Fu, Fv, q),
                max(s.residual, s2.residual),
            )
        )
    return rows


def pressure_testfn(rho: ScalarField, theta: float, time_factor: float = 1.0, tol: float = 1e-8) -> DivSolve:
    """``time_factor * B[psi rho^theta - <psi rho^theta>]`` on the perforated grid.

    ``psi = (fixed_profile(|x| / eps))^2`` vanishes on ``B_eps`` and equals 1
    outside ``B_{2 eps}``; the mean is taken over the fluid cells.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    grid = rho.grid
    if np.any(rho.values[grid.fluid] < 0):
        raise ValueError("density must be non-negative")
    X, Y = grid.cell_centers()
    psi = fixed_profile(np.hypot(X, Y) / grid.eps) ** 2 if grid.eps > 0 else np.ones_like(X)
    mac = perforated_mac(grid)
    d = remove_mean(mac, psi * np.maximum(rho.values, 0.0) ** theta)
    if grid.eps > 0:
        s = perforated_bogovskii(ScalarField(grid, d), tol)
    else:
        s = bogovskii_full(ScalarField(grid, d), tol)
    return s.scaled(time_factor) if time_factor != 1.0 else s
