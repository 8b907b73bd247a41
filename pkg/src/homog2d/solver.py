"""Barotropic compressible Navier-Stokes on the perforated square.

    d_t rho + div(rho u) = 0
    d_t (rho u) + div(rho u (x) u) + grad rho^gamma = div S(u)
    S(u) = 2 mu D(u) + (lambda - mu) div(u) I

Density sits at cell centres and momentum ``m = rho u`` on the faces of a
:class:`~homog2d.staggered.MACGrid`. One explicit Euler step:

1. upwind mass fluxes ``rho_up u`` on free faces update rho (flux form, so the
   total mass only changes by round-off);
2. momentum is convected on the dual cells with the averaged mass fluxes and
   upwinded velocities;
3. the pressure gradient uses the updated density (forward-backward in time,
   which keeps the acoustic part stable at the advective CFL number);
4. the viscous force is the staggered ``div S(u)`` of the old velocity.

Solid faces (hole and outer wall) carry zero momentum at all times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .cutoff import Complement
from .grid import Grid2D
from .staggered import MACGrid
from .testfn import bump


class SolverError(RuntimeError):
    """Scheme failure (negative density, blow-up)."""


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class PhysParams:
    mu: float
    lam: float
    gamma: float

    def __post_init__(self):
        errs = []
        if not self.mu > 0:
            errs.append(f"mu must be positive, got {self.mu}")
        if not self.lam >= 0:
            errs.append(f"lambda must be non-negative, got {self.lam}")
        if not self.gamma > 1:
            errs.append(f"gamma must exceed 1, got {self.gamma}")
        if errs:
            raise ValueError("; ".join(errs))

    @property
    def bulk(self) -> float:
        """Effective coefficient ``2 mu + lambda`` of div u in the normal stress."""
        return 2 * self.mu + self.lam


@dataclass(frozen=True, eq=False)
class SolverState:
    mac: MACGrid
    rho: np.ndarray = field(repr=False)
    mx: np.ndarray = field(repr=False)
    my: np.ndarray = field(repr=False)
    t: float = 0.0

    def face_density(self):
        r = self.rho
        ru = np.zeros_like(self.mx)
        rv = np.zeros_like(self.my)
        ru[1:-1] = 0.5 * (r[1:] + r[:-1])
        rv[:, 1:-1] = 0.5 * (r[:, 1:] + r[:, :-1])
        return ru, rv

    def velocity(self):
        ru, rv = self.face_density()
        u = np.divide(self.mx, ru, out=np.zeros_like(self.mx), where=self.mac.free_u & (ru > 0))
        v = np.divide(self.my, rv, out=np.zeros_like(self.my), where=self.mac.free_v & (rv > 0))
        return u, v

    def mass(self) -> float:
        return float(np.sum(self.rho[self.mac.fluid]) * self.mac.h**2)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

IC_KINDS = ("still", "bump", "vortex")


@dataclass(frozen=True)
class ICSpec:
    kind: str = "bump"
    amplitude: float = 0.2
    sigma: float = 0.1
    center: tuple[float, float] = (-0.15, 0.0)
    rho_min: float = 0.5

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ValueError(f"unknown initial condition {self.kind!r}; expected one of {IC_KINDS}")
        if not self.rho_min > 0:
            raise ValueError(f"rho_min must be positive, got {self.rho_min}")
        if self.kind == "bump" and self.amplitude < 0 and 1 + self.amplitude < self.rho_min:
            raise ValueError(f"bump amplitude {self.amplitude} drives the density below rho_min={self.rho_min}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def bump_density(x, y, ic: ICSpec):
    cx, cy = ic.center
    return 1.0 + ic.amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / ic.sigma**2)


def bump_mass_exact(L: float, ic: ICSpec) -> float:
    """Closed-form integral of the bump density over the hole-free square."""
    cx, cy = ic.center
    s = ic.sigma
    ix = 0.5 * math.sqrt(math.pi) * s * (math.erf((L - cx) / s) + math.erf((L + cx) / s))
    iy = 0.5 * math.sqrt(math.pi) * s * (math.erf((L - cy) / s) + math.erf((L + cy) / s))
    return 4 * L * L + ic.amplitude * ix * iy


def init_state(grid: Grid2D, params: PhysParams, ic: ICSpec | str = "bump") -> SolverState:
    if isinstance(ic, str):
        ic = ICSpec(kind=ic)
    mac = MACGrid.from_grid(grid)
    X, Y = mac.centers()
    mx, my = mac.zeros_u(), mac.zeros_v()
    if ic.kind == "bump":
        rho = bump_density(X, Y, ic)
    else:
        rho = np.ones_like(X)
    rho = np.where(mac.fluid, rho, 0.0)
    if np.any(rho[mac.fluid] < ic.rho_min):
        raise ValueError(f"initial density drops below rho_min={ic.rho_min}")
    state = SolverState(mac, rho, mx, my, 0.0)
    if ic.kind == "vortex":
        cx, cy = ic.center
        value, _, _ = bump(cx, cy, 2.5 * ic.sigma)
        Xn, Yn = mac.nodes()
        chi = value(Xn, Yn) * ic.sigma
        # a constant (zero) stream function on every corner of a solid cell keeps walls impermeable and no-slip
        solid_corner = np.zeros_like(chi, dtype=bool)
        s = mac.solid
        for di in (0, 1):
            for dj in (0, 1):
                solid_corner[di : di + mac.n, dj : dj + mac.n] |= s
        solid_corner[[0, -1], :] = True
        solid_corner[:, [0, -1]] = True
        chi = np.where(solid_corner, 0.0, chi)
        u = -ic.amplitude * (chi[:, 1:] - chi[:, :-1]) / mac.h
        v = ic.amplitude * (chi[1:] - chi[:-1]) / mac.h
        ru, rv = state.face_density()
        state = replace(state, mx=u * ru * mac.free_u, my=v * rv * mac.free_v)
    return state


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def sound_speed(rho, gamma):
    return np.sqrt(gamma * np.maximum(rho, 0.0) ** (gamma - 1))


def stable_dt(state: SolverState, params: PhysParams, cfl: float = 0.4) -> float:
    mac = state.mac
    u, v = state.velocity()
    umax = max(np.abs(u).max(initial=0.0), np.abs(v).max(initial=0.0))
    fl = state.rho[mac.fluid]
    c = float(sound_speed(fl, params.gamma).max())
    dt_adv = cfl * mac.h / (umax + c)
    rho_min = float(fl.min())
    dt_visc = 0.25 * mac.h**2 * rho_min / params.bulk
    return min(dt_adv, dt_visc)


def mass_fluxes(state: SolverState, u=None, v=None):
    """Upwind ``rho u`` on free faces."""
    if u is None:
        u, v = state.velocity()
    r = state.rho
    fu = np.zeros_like(u)
    fv = np.zeros_like(v)
    fu[1:-1] = np.where(u[1:-1] > 0, r[:-1], r[1:]) * u[1:-1]
    fv[:, 1:-1] = np.where(v[:, 1:-1] > 0, r[:, :-1], r[:, 1:]) * v[:, 1:-1]
    return fu, fv


def _upwind_flux(mflux, lo, hi):
    return mflux * np.where(mflux > 0, lo, hi)


def convection(state: SolverState, u, v, fu, fv):
    """``div(rho u (x) u)`` on the faces, dual-cell upwind with averaged mass fluxes."""
    h = state.mac.h
    # x-momentum: dual cell around u[i, j]; x-faces at cell centres, y-faces at nodes
    fc = 0.5 * (fu[1:] + fu[:-1])  # (n, n) at centres
    cx = _upwind_flux(fc, u[:-1], u[1:])
    fn = np.zeros((u.shape[0], u.shape[1] + 1))
    fn[1:-1, :] = 0.5 * (fv[1:] + fv[:-1])  # at interior nodes (i, j)
    up = np.pad(u, ((0, 0), (1, 1)))
    cn = _upwind_flux(fn, up[:, :-1], up[:, 1:])
    cu = np.zeros_like(u)
    cu[1:-1] = (cx[1:] - cx[:-1]) / h
    cu += (cn[:, 1:] - cn[:, :-1]) / h
    # y-momentum: mirror image
    fcy = 0.5 * (fv[:, 1:] + fv[:, :-1])
    cy = _upwind_flux(fcy, v[:, :-1], v[:, 1:])
    fny = np.zeros((v.shape[0] + 1, v.shape[1]))
    fny[:, 1:-1] = 0.5 * (fu[:, 1:] + fu[:, :-1])
    vp = np.pad(v, ((1, 1), (0, 0)))
    cny = _upwind_flux(fny, vp[:-1], vp[1:])
    cv = np.zeros_like(v)
    cv[:, 1:-1] = (cy[:, 1:] - cy[:, :-1]) / h
    cv += (cny[1:] - cny[:-1]) / h
    return cu, cv


def step(state: SolverState, dt: float, params: PhysParams, cfl: float = 0.4, check_cfl: bool = True) -> SolverState:
    mac = state.mac
    if check_cfl:
        lim = stable_dt(state, params, cfl)
        if dt > lim * (1 + 1e-12):
            raise CFLError(f"dt={dt:.3e} exceeds the stable step {lim:.3e}")
    u, v = state.velocity()
    fu, fv = mass_fluxes(state, u, v)
    rho = state.rho - dt * mac.div(fu, fv)
    rho = np.where(mac.fluid, rho, 0.0)
    if np.any(rho[mac.fluid] <= 0) or not np.all(np.isfinite(rho)):
        bad = float(rho[mac.fluid].min())
        raise SolverError(f"density became non-positive ({bad:.3e}) at t={state.t + dt:.6g}")
    cu, cv = convection(state, u, v, fu, fv)
    gu, gv = mac.grad(rho**params.gamma)
    su, sv = mac.stress_divergence(u, v, params.mu, params.lam)
    mx = (state.mx - dt * (cu + gu - su)) * mac.free_u
    my = (state.my - dt * (cv + gv - sv)) * mac.free_v
    return SolverState(mac, rho, mx, my, state.t + dt)


# ---------------------------------------------------------------------------
# monitors
# ---------------------------------------------------------------------------


def energy(state: SolverState, params: PhysParams) -> float:
    """``sum (1/2 rho |u|^2 + rho^gamma / (gamma - 1)) h^2`` with u averaged to centres."""
    mac = state.mac
    u, v = state.velocity()
    uc, vc = mac.centred(u, v)
    r = state.rho
    e = 0.5 * r * (uc**2 + vc**2) + r**params.gamma / (params.gamma - 1)
    return float(np.sum(e[mac.fluid]) * mac.h**2)


def dissipation(state: SolverState, params: PhysParams) -> float:
    """``int mu |grad u|^2 + lambda |div u|^2`` from the staggered differences."""
    u, v = state.velocity()
    return state.mac.dissipation_rate(u, v, params.mu, params.lam)


def outside_ball(mac: MACGrid, radius: float) -> np.ndarray:
    X, Y = mac.centers()
    return mac.fluid & (np.hypot(X, Y) >= radius)


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: float
    rho: np.ndarray = field(repr=False)
    mx: np.ndarray = field(repr=False)
    my: np.ndarray = field(repr=False)
    # state one step later, kept for the renormalized-transport residual
    dt_next: float = math.nan
    rho_next: np.ndarray | None = field(default=None, repr=False)


@dataclass
class MonitorSeries:
    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)
    dissipation_integral: list = field(default_factory=list)
    pressure_integral: list = field(default_factory=list)
    rho_min: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    COLUMNS = ("t", "mass", "energy", "dissipation", "dissipation_integral", "pressure_integral", "rho_min", "steps")

    def rows(self):
        return [tuple(getattr(self, c)[k] for c in self.COLUMNS) for k in range(len(self.t))]


@dataclass(eq=False)
class Trajectory:
    mac: MACGrid
    params: PhysParams
    eps: float
    snapshots: list[Snapshot]
    series: MonitorSeries
    n_steps: int = 0

    def state(self, k: int) -> SolverState:
        s = self.snapshots[k]
        return SolverState(self.mac, s.rho, s.mx, s.my, s.t)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def _record(series: MonitorSeries, state: SolverState, params: PhysParams, dint: float, steps: int):
    series.t.append(state.t)
    series.mass.append(state.mass())
    series.energy.append(energy(state, params))
    series.dissipation.append(dissipation(state, params))
    series.dissipation_integral.append(dint)
    fl = state.rho[state.mac.fluid]
    series.pressure_integral.append(float(np.sum(fl**params.gamma) * state.mac.h**2))
    series.rho_min.append(float(fl.min()))
    series.steps.append(steps)


def checkpoint_times(T: float, checkpoints: int | Sequence[float]) -> list[float]:
    if isinstance(checkpoints, int):
        if checkpoints < 1:
            raise ValueError("need at least one checkpoint interval")
        return [T * k / checkpoints for k in range(checkpoints + 1)]
    ts = sorted(set(float(t) for t in checkpoints) | {0.0})
    if ts[-1] > T or ts[0] < 0:
        raise ValueError(f"checkpoints must lie in [0, T={T}]")
    return ts


def run(
    state: SolverState,
    params: PhysParams,
    T: float,
    checkpoints: int | Sequence[float] = 40,
    cfl: float = 0.4,
    eps: float | None = None,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Advance to ``T``; snapshots and monitors at the checkpoint times (hit exactly)."""
    if not 0 < cfl <= 0.5:
        raise CFLError(f"cfl must lie in (0, 0.5], got {cfl}")
    times = checkpoint_times(T, checkpoints)
    eps = 0.0 if eps is None else eps
    series = MonitorSeries()
    snaps: list[Snapshot] = []
    dint = 0.0
    steps = 0
    k = 0
    pending: Snapshot | None = None
    while True:
        while k < len(times) and state.t >= times[k] - 1e-14 * max(T, 1.0):
            _record(series, state, params, dint, steps)
            pending = Snapshot(state.t, state.rho, state.mx, state.my)
            snaps.append(pending)
            k += 1
        if k >= len(times) and pending is None:
            break
        dt = stable_dt(state, params, cfl)
        if k < len(times):
            dt = min(dt, times[k] - state.t)
        if steps >= max_steps:
            raise SolverError(f"step budget {max_steps} exhausted at t={state.t:.6g}")
        d = dissipation(state, params)
        new = step(state, dt, params, cfl, check_cfl=False)
        if pending is not None:
            snaps[-1] = replace(pending, dt_next=dt, rho_next=new.rho)
            pending = None
            if k >= len(times):
                break
        dint += d * dt
        state = new
        steps += 1
    return Trajectory(state.mac, params, eps, snaps, series, steps)


# ---------------------------------------------------------------------------
# checks and functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    max_violation: float
    tol: float
    monotone: bool

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def energy_inequality_check(series: MonitorSeries, tol: float = 1e-3) -> EnergyReport:
    """Relative violation ``max_k (E_k + int_0^t_k D - E_0) / E_0`` (negative values are fine)."""
    E = np.asarray(series.energy)
    Dint = np.asarray(series.dissipation_integral)
    E0 = E[0]
    viol = float(np.max((E + Dint - E0) / abs(E0))) if E0 != 0 else 0.0
    mono = bool(np.all(np.diff(E) <= 1e-12 * abs(E0)))
    return EnergyReport(viol, tol, mono)


def _trapezoid(values, times) -> float:
    v = np.asarray(values, dtype=float)
    t = np.asarray(times, dtype=float)
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


def pressure_functional(traj: Trajectory, theta: float, eps: float | None = None) -> float:
    """``int_0^T int_{fluid, |x| >= 2 eps} rho^(gamma + theta)``, trapezoid over the snapshots."""
    g = traj.params.gamma
    if not 0 < theta < g - 1:
        raise ValueError(f"theta must lie in (0, gamma - 1) = (0, {g - 1}), got {theta}")
    eps = traj.eps if eps is None else eps
    mac = traj.mac
    sel = outside_ball(mac, 2.0 * eps)
    vals = [float(np.sum(s.rho[sel] ** (g + theta)) * mac.h**2) for s in traj.snapshots]
    return _trapezoid(vals, traj.times)


@dataclass(frozen=True)
class FluxReport:
    value: float
    pressure_part: float
    viscous_part: float
    coefficient: float
    note: str = "viscous coefficient implemented as 2*mu + lambda"


def effective_viscous_flux(state: SolverState, psi, eps: float, params: PhysParams) -> FluxReport:
    """``int psi^2 n_eps (rho^gamma - (2 mu + lambda) div u) rho`` over the fluid cells.

    ``psi`` is a cell array or a function of (x, y). With ``eps == 0`` the
    complement factor is 1.
    """
    mac = state.mac
    X, Y = mac.centers()
    ps = np.asarray(psi(X, Y) if callable(psi) else psi, dtype=float)
    w = ps**2 * (Complement.build(eps, mac.L).value(X, Y) if eps > 0 else 1.0)
    u, v = state.velocity()
    d = mac.div(u, v)
    r = state.rho
    a = mac.h**2
    fl = mac.fluid
    pp = float(np.sum((w * r**params.gamma * r)[fl]) * a)
    vp = float(np.sum((w * d * r)[fl]) * a) * params.bulk
    return FluxReport(pp - vp, pp, -vp, params.bulk)


def renormalized_residual(traj: Trajectory, theta: float) -> np.ndarray:
    """L1 norm of the discrete ``d_t rho^theta + div(u rho^theta) + (theta - 1) div(u) rho^theta`` per snapshot.

    ``rho^theta`` is transported with the same upwind choice as the mass
    flux, so ``theta = 1`` reproduces the mass update exactly.
    """
    g = traj.params.gamma
    if not 0 < theta < g - 0.5:
        raise ValueError(f"theta must lie in (0, gamma - 1/2) = (0, {g - 0.5}), got {theta}")
    mac = traj.mac
    out = []
    for s in traj.snapshots:
        if s.rho_next is None:
            out.append(math.nan)
            continue
        state = SolverState(mac, s.rho, s.mx, s.my, s.t)
        u, v = state.velocity()
        b = np.where(mac.fluid, s.rho, 0.0) ** theta
        fu, fv = mass_fluxes(SolverState(mac, b, s.mx, s.my, s.t), u, v)
        r = (s.rho_next**theta - b) / s.dt_next + mac.div(fu, fv) + (theta - 1) * mac.div(u, v) * b
        out.append(float(np.sum(np.abs(r[mac.fluid])) * mac.h**2))
    return np.array(out)


# ---------------------------------------------------------------------------
# refinement studies
# ---------------------------------------------------------------------------


def coarsen(a: np.ndarray) -> np.ndarray:
    """Average 2x2 blocks of a cell field (fine n to coarse n/2)."""
    n = a.shape[0]
    if n % 2 or a.shape != (n, n):
        raise ValueError(f"need an even square array, got shape {a.shape}")
    return a.reshape(n // 2, 2, n // 2, 2).mean(axis=(1, 3))


@dataclass(frozen=True)
class ConvergenceStudy:
    """L1 differences between consecutive levels (coarse to fine) and the observed order."""

    n: tuple[int, ...]
    diffs: tuple[float, ...]

    @property
    def orders(self) -> tuple[float, ...]:
        return tuple(math.log2(a / b) for a, b in zip(self.diffs[:-1], self.diffs[1:]))

    @property
    def order(self) -> float:
        return self.orders[-1]


def self_convergence(fields: Sequence[np.ndarray], L: float) -> ConvergenceStudy:
    """Self-convergence of cell fields on grids n, 2n, 4n, ... of ``(-L, L)^2``.

    Each finer field is block-averaged onto the next coarser grid; the L1
    difference there is ``sum |coarse - coarsen(fine)| h^2``. Needs at least
    three levels for one order.
    """
    if len(fields) < 3:
        raise ValueError("need at least three refinement levels")
    diffs = []
    for coarse, fine in zip(fields[:-1], fields[1:]):
        if fine.shape[0] != 2 * coarse.shape[0]:
            raise ValueError("levels must double in resolution")
        h = 2.0 * L / coarse.shape[0]
        diffs.append(float(np.sum(np.abs(coarse - coarsen(fine))) * h * h))
    return ConvergenceStudy(tuple(f.shape[0] for f in fields), tuple(diffs))
