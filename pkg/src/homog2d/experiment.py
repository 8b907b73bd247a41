"""Sweeps over the hole radius and the convergence metrics computed from them.

Every run uses the same grid; the hole is a mask, and the density and
velocity of a perforated run are extended by zero into it. Metrics compare
each perforated run with the hole-free reference at the shared checkpoints:

* ``a``: ``max_t max_j |int (rho_eps - rho) chi_j|`` over a battery of six smooth chi_j,
* ``b``: ``(int_0^T ||u_eps - u||_2^2 dt)^(1/2)``,
* ``c``: ``max_t max_{j,k} |int (n rho_eps u_eps + (x_perp . rho_eps u_eps) grad_perp n - rho u) . chi_j e_k|``.

Fields are extended by zero into the hole. Metric ``a`` integrates over the
fluid cells outside ``B_{2 eps}`` only, so the hole-area deficit of the zero
extension (nonzero even at equilibrium) does not enter.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cutoff import Complement
from .grid import DomainSpec, disk_quadrature, make_grid
from .solver import (
    ICSpec,
    PhysParams,
    SolverError,
    Trajectory,
    init_state,
    outside_ball,
    pressure_functional,
    run,
)
from .staggered import MACGrid
from .testfn import (
    AnalyticField,
    bump,
    compact_field,
    phi_jacobian,
    phi_values,
    plateau_field,
    solenoidal_bump_field,
)


class SweepConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    eps_list: tuple[float, ...] = (0.08, 0.04, 0.02)
    L: float = 0.5
    n: int = 256
    phys: PhysParams = PhysParams(0.01, 0.01, 3.0)
    ic: ICSpec = ICSpec()
    T: float = 0.25
    checkpoints: int = 40
    cfl: float = 0.4
    theta: float | None = None

    def __post_init__(self):
        errs = validate_sweep(self)
        if errs:
            raise SweepConfigError("; ".join(errs))

    @property
    def pressure_theta(self) -> float:
        return self.phys.gamma - 1.1 if self.theta is None else self.theta


def validate_sweep(cfg: SweepConfig) -> list[str]:
    errs = []
    if not cfg.phys.gamma > 2:
        errs.append(f"homogenization needs gamma > 2, got {cfg.phys.gamma}")
    eps = [e for e in cfg.eps_list if e != 0]
    if any(e < 0 for e in eps):
        errs.append("eps values must be non-negative")
    if any(e >= cfg.L / 4 for e in eps):
        errs.append(f"every eps must be below L/4 = {cfg.L / 4}")
    if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
        errs.append("eps_list must be strictly decreasing")
    if not cfg.T > 0:
        errs.append(f"T must be positive, got {cfg.T}")
    return errs


# ---------------------------------------------------------------------------
# test-function batteries
# ---------------------------------------------------------------------------


def chi_battery(L: float = 0.5):
    """Six smooth scalar functions: constant, low Fourier modes and two bumps."""
    k = math.pi / L
    b1 = bump(0.0, 0.0, 0.6 * L)[0]
    b2 = bump(-0.3 * L, 0.2 * L, 0.5 * L)[0]
    return (
        ("one", lambda x, y: np.ones_like(x)),
        ("cos_x", lambda x, y: np.cos(k * x)),
        ("cos_y", lambda x, y: np.cos(k * y)),
        ("sin_xy", lambda x, y: np.sin(k * x) * np.sin(k * y)),
        ("bump_0", b1),
        ("bump_1", b2),
    )


PHI_KINDS = ("plateau", "curl", "generic")


def phi_battery(L: float = 0.5, kind: str = "plateau") -> tuple[AnalyticField, ...]:
    """Compactly supported vector test functions for the momentum weak form.

    ``plateau``: divergence-free fields equal to a constant vector near the
    hole, the regime in which the ad hoc and naive pressure terms separate.
    ``curl``: ``grad_perp`` of off-centre bumps (divergence free, varying on the
    scale of the cutoff support at the largest eps).
    ``generic``: bumps times fixed directions, not divergence free; these carry
    a pressure term and are the ones used for the reference weak residual.
    """
    if kind == "plateau":
        return (
            plateau_field((1.0, 0.0), 0.64 * L, 0.96 * L),
            plateau_field((0.6, 0.8), 0.6 * L, 0.86 * L, (0.1 * L, 0.1 * L)),
            plateau_field((1.0, 0.0), 0.4 * L, 0.9 * L),
        )
    if kind == "curl":
        return (
            solenoidal_bump_field(0.0, 0.2 * L, 0.6 * L, 0.1),
            solenoidal_bump_field(0.0, -0.24 * L, 0.6 * L, 0.1),
            solenoidal_bump_field(0.1 * L, 0.2 * L, 0.5 * L, 0.1),
        )
    if kind == "generic":
        return (
            compact_field(0.0, 0.0, 0.6 * L, (1.0, 0.0)),
            compact_field(0.1 * L, 0.0, 0.5 * L, (0.6, 0.8)),
        )
    raise ValueError(f"unknown battery {kind!r}; expected one of {PHI_KINDS}")


def time_weight(t, T: float):
    """``a(t) = cos^2(pi t / (2 T))`` and its derivative; a(T) = 0."""
    w = math.pi / (2 * T)
    return np.cos(w * t) ** 2, -w * np.sin(2 * w * t)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _cells(mac: MACGrid, f):
    X, Y = mac.centers()
    return np.asarray(np.broadcast_to(f(X, Y), X.shape), dtype=float)


def comparison_region(mac: MACGrid, eps: float) -> MACGrid:
    """Fluid cells outside ``B_{2 eps}`` as a grid of its own (its free faces mask velocities)."""
    return MACGrid(mac.n, mac.h, mac.L, ~outside_ball(mac, 2.0 * eps)) if eps > 0 else mac


def density_metric(traj: Trajectory, ref: Trajectory, chis) -> float:
    mac = traj.mac
    sel = comparison_region(mac, traj.eps).fluid
    a = mac.h**2
    arrs = [_cells(mac, f) * sel for _, f in chis]
    best = 0.0
    for s, r in zip(traj.snapshots, ref.snapshots):
        d = s.rho - r.rho
        for c in arrs:
            best = max(best, abs(float(np.sum(d * c)) * a))
    return best


def velocity_metric(traj: Trajectory, ref: Trajectory) -> float:
    mac = traj.mac
    vals = []
    for k in range(len(traj.snapshots)):
        u, v = traj.state(k).velocity()
        ur, vr = ref.state(k).velocity()
        vals.append(mac.lp(u - ur, v - vr, 2) ** 2)
    return math.sqrt(_trapz(vals, traj.times))


def _trapz(vals, times) -> float:
    v, t = np.asarray(vals, dtype=float), np.asarray(times, dtype=float)
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t))) if len(t) > 1 else 0.0


def momentum_metric(traj: Trajectory, ref: Trajectory, chis, eps: float) -> float:
    mac = traj.mac
    X, Y = mac.centers()
    a = mac.h**2
    arrs = [_cells(mac, f) for _, f in chis]
    if eps > 0:
        comp = Complement.build(eps, mac.L)
        n = comp.value(X, Y)
        nx, ny = comp.grad(X, Y)
    else:
        n, nx, ny = np.ones_like(X), np.zeros_like(X), np.zeros_like(X)
    best = 0.0
    for s, r in zip(traj.snapshots, ref.snapshots):
        m1, m2 = mac.centred(s.mx, s.my)
        r1, r2 = mac.centred(r.mx, r.my)
        g = -Y * m1 + X * m2
        w1 = n * m1 - g * ny - r1
        w2 = n * m2 + g * nx - r2
        for c in arrs:
            best = max(best, abs(float(np.sum(w1 * c)) * a), abs(float(np.sum(w2 * c)) * a))
    return best


# ---------------------------------------------------------------------------
# weak formulation
# ---------------------------------------------------------------------------

TEST_KINDS = ("adhoc", "naive", "plain")


def _test_function(kind: str, phi: AnalyticField, eps: float, L: float):
    """Return ``(values, jacobian)`` callables of the spatial test function."""
    if kind not in TEST_KINDS:
        raise ValueError(f"unknown test-function kind {kind!r}; expected one of {TEST_KINDS}")
    if kind == "plain" or eps == 0:
        return phi.value, phi.jacobian
    comp = Complement.build(eps, L)
    if kind == "naive":

        def val(x, y):
            n = comp.value(x, y)
            f1, f2 = phi(x, y)
            return n * f1, n * f2

        def jac(x, y):
            n = comp.value(x, y)
            nx, ny = comp.grad(x, y)
            f1, f2 = phi(x, y)
            J = phi.jacobian(x, y)
            g = (nx, ny)
            return tuple(tuple(g[j] * (f1, f2)[i] + n * J[i][j] for j in range(2)) for i in range(2))

        return val, jac

    def val(x, y):
        return phi_values(comp, *phi(x, y), x, y)

    def jac(x, y):
        return phi_jacobian(comp, phi, x, y)

    return val, jac


@dataclass(frozen=True)
class WeakTerms:
    initial: float
    inertia: float
    convection: float
    pressure: float
    viscous: float

    @property
    def residual(self) -> float:
        return abs(self.initial + self.inertia + self.convection + self.pressure - self.viscous)

    @property
    def scale(self) -> float:
        return max(abs(self.initial), abs(self.inertia), abs(self.convection), abs(self.pressure), abs(self.viscous))

    @property
    def relative(self) -> float:
        s = self.scale
        return self.residual / s if s > 0 else 0.0


def weak_terms(
    traj: Trajectory, phi: AnalyticField, kind: str = "adhoc", eps: float | None = None, pressure: str = "exact"
) -> WeakTerms:
    """Terms of the momentum weak form tested with ``a(t) Psi(x)``, trapezoid in time.

    ``Psi`` is the ad hoc test function ``Phi_eps[phi]``, the naive cut
    ``n_eps phi`` or plain ``phi``; for the reference run (eps = 0) all three
    coincide with ``phi``.

    With ``pressure="limit"`` the pressure is tested against ``n_eps div phi``
    (the form that passes to the limit equation) instead of ``div Psi``, so the
    residual also contains the pressure discrepancy of the chosen ``Psi``.
    """
    if pressure not in ("exact", "limit"):
        raise ValueError(f"pressure mode must be 'exact' or 'limit', got {pressure!r}")
    mac = traj.mac
    eps = traj.eps if eps is None else eps
    params = traj.params
    val, jac = _test_function(kind, phi, eps, mac.L)
    (Xu, Yu), (Xv, Yv) = mac.u_points(), mac.v_points()
    Xc, Yc = mac.centers()
    Xn, Yn = mac.nodes()
    psi_u = val(Xu, Yu)[0] * mac.free_u
    psi_v = val(Xv, Yv)[1] * mac.free_v
    Jc = jac(Xc, Yc)
    Jn = jac(Xn, Yn)
    d11, d22 = Jc[0][0], Jc[1][1]
    cross_c = Jc[0][1] + Jc[1][0]
    cross_n = Jn[0][1] + Jn[1][0]
    # discrete divergence of the face samples: the adjoint of the scheme's pressure gradient
    div_c = mac.div(psi_u, psi_v)
    if pressure == "limit" and eps > 0:
        div_c = Complement.build(eps, mac.L).value(Xc, Yc) * phi.div(Xc, Yc)
    a2 = mac.h**2
    fl = mac.fluid
    T = traj.times[-1]
    M, C, P, V = [], [], [], []
    for k, s in enumerate(traj.snapshots):
        st = traj.state(k)
        u, v = st.velocity()
        M.append(float(np.sum(s.mx * psi_u) + np.sum(s.my * psi_v)) * a2)
        uc, vc = mac.centred(u, v)
        r = s.rho
        C.append(float(np.sum((r * (uc * uc * d11 + uc * vc * cross_c + vc * vc * d22))[fl])) * a2)
        P.append(float(np.sum((r**params.gamma * div_c)[fl])) * a2)
        S11, S22, S12 = mac.stress(u, v, params.mu, params.lam)
        V.append(float(np.sum((S11 * d11 + S22 * d22)[fl]) + np.sum(S12 * cross_n)) * a2)
    t = traj.times
    w, dw = time_weight(t, T)
    return WeakTerms(
        M[0] * w[0],
        _trapz(dw * np.array(M), t),
        _trapz(w * np.array(C), t),
        _trapz(w * np.array(P), t),
        _trapz(w * np.array(V), t),
    )


def weak_residual(
    traj: Trajectory, phi: AnalyticField, kind: str = "adhoc", eps: float | None = None, pressure: str = "exact"
) -> float:
    return weak_terms(traj, phi, kind, eps, pressure).residual


@dataclass(frozen=True)
class LimitCheck:
    relative_residuals: tuple[float, ...]
    tol: float

    @property
    def passed(self) -> bool:
        return all(r <= self.tol for r in self.relative_residuals)


def limit_equation_check(reference: Trajectory, battery=None, tol: float = 5e-2) -> LimitCheck:
    """Weak residual of the reference run relative to its largest single term, per test function."""
    battery = phi_battery(reference.mac.L, "generic") if battery is None else battery
    rel = tuple(weak_terms(reference, phi, "plain", 0.0).relative for phi in battery)
    return LimitCheck(rel, tol)


@dataclass(frozen=True)
class PressureDiscrepancy:
    adhoc: float
    naive: float


def pressure_discrepancy(traj: Trajectory, phi: AnalyticField, eps: float | None = None) -> PressureDiscrepancy:
    """Time-L1 norms of ``int rho^gamma (div Phi_eps[phi] - n div phi)`` and ``int rho^gamma phi . grad n``.

    Both integrands live on the transition layer of ``n_eps``, which the grid
    barely resolves for small eps; they are integrated with polar quadrature
    on that layer against the bilinear interpolant of ``rho^gamma``.
    """
    mac = traj.mac
    eps = traj.eps if eps is None else eps
    if eps <= 0:
        return PressureDiscrepancy(0.0, 0.0)
    comp = Complement.build(eps, mac.L)
    R = comp.support_radius
    breaks = sorted({b for b in comp.breakpoints() if b < R} | {R})
    c = mac._c()
    ad, nv = [], []
    for s in traj.snapshots:
        interp = RegularGridInterpolator((c, c), s.rho**traj.params.gamma, method="linear")

        def P(x, y):
            pts = np.stack([x.ravel(), y.ravel()], axis=-1)
            return interp(pts).reshape(x.shape)

        def adhoc(x, y):
            J = phi_jacobian(comp, phi, x, y)
            return P(x, y) * (J[0][0] + J[1][1] - comp.value(x, y) * phi.div(x, y))

        def naive(x, y):
            f1, f2 = phi(x, y)
            nx, ny = comp.grad(x, y)
            return P(x, y) * (f1 * nx + f2 * ny)

        ad.append(abs(disk_quadrature(adhoc, breaks)))
        nv.append(abs(disk_quadrature(naive, breaks)))
    t = traj.times
    return PressureDiscrepancy(_trapz(ad, t), _trapz(nv, t))


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    eps: float
    metric_a: float = 0.0
    metric_b: float = 0.0
    metric_c: float = 0.0
    pressure_functional: float = 0.0
    weak_consistency: list = field(default_factory=list)
    weak_adhoc: list = field(default_factory=list)
    weak_naive: list = field(default_factory=list)
    pressure_adhoc: list = field(default_factory=list)
    pressure_naive: list = field(default_factory=list)
    pressure_adhoc_curl: list = field(default_factory=list)
    pressure_naive_curl: list = field(default_factory=list)
    steps: int = 0
    error: str | None = None


@dataclass
class SweepReport:
    config: dict
    rows: list[SweepRow]
    metadata: dict
    runtimes: dict = field(default_factory=dict)

    def row(self, eps: float) -> SweepRow:
        for r in self.rows:
            if r.eps == eps:
                return r
        raise KeyError(eps)

    def perforated(self) -> list[SweepRow]:
        return [r for r in self.rows if r.eps > 0]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.perforated()])

    def to_dict(self) -> dict:
        return {"config": self.config, "metadata": self.metadata, "rows": [asdict(r) for r in self.rows]}


def config_dict(cfg: SweepConfig) -> dict:
    d = asdict(cfg)
    d["eps_list"] = list(cfg.eps_list)
    d["ic"]["center"] = list(cfg.ic.center)
    return d


def run_one(cfg: SweepConfig, eps: float) -> Trajectory:
    grid = make_grid(DomainSpec(cfg.L, eps), cfg.n)
    state = init_state(grid, cfg.phys, cfg.ic)
    return run(state, cfg.phys, cfg.T, cfg.checkpoints, cfg.cfl, eps=eps)


def run_sweep(cfg: SweepConfig, keep_trajectories: bool = False):
    """Reference run plus one run per eps; returns the report (and trajectories on request)."""
    battery = chi_battery(cfg.L)
    phis = phi_battery(cfg.L, "plateau")
    curls = phi_battery(cfg.L, "curl")
    generic = phi_battery(cfg.L, "generic")
    theta = cfg.pressure_theta
    runtimes = {}
    t0 = time.perf_counter()
    ref = run_one(cfg, 0.0)
    runtimes["0"] = time.perf_counter() - t0
    rows = [SweepRow(0.0, pressure_functional=pressure_functional(ref, theta, 0.0), steps=ref.n_steps)]
    trajs = {0.0: ref}
    for eps in [e for e in cfg.eps_list if e > 0]:
        t0 = time.perf_counter()
        row = SweepRow(eps)
        try:
            tr = run_one(cfg, eps)
        except SolverError as exc:
            row.error = str(exc)
            rows.append(row)
            runtimes[repr(eps)] = time.perf_counter() - t0
            continue
        row.steps = tr.n_steps
        row.metric_a = density_metric(tr, ref, battery)
        row.metric_b = velocity_metric(tr, ref)
        row.metric_c = momentum_metric(tr, ref, battery, eps)
        row.pressure_functional = pressure_functional(tr, theta, eps)
        row.weak_consistency = [weak_terms(tr, p, "adhoc").relative for p in generic]
        row.weak_adhoc = [weak_residual(tr, p, "adhoc", pressure="limit") for p in phis]
        row.weak_naive = [weak_residual(tr, p, "naive", pressure="limit") for p in phis]
        pd = [pressure_discrepancy(tr, p) for p in phis]
        row.pressure_adhoc = [d.adhoc for d in pd]
        row.pressure_naive = [d.naive for d in pd]
        pc = [pressure_discrepancy(tr, p) for p in curls]
        row.pressure_adhoc_curl = [d.adhoc for d in pc]
        row.pressure_naive_curl = [d.naive for d in pc]
        rows.append(row)
        runtimes[repr(eps)] = time.perf_counter() - t0
        if keep_trajectories:
            trajs[eps] = tr
    lim = limit_equation_check(ref, generic)
    meta = {
        "chi_battery": [name for name, _ in battery],
        "phi_battery": [p.name for p in phis],
        "phi_battery_curl": [p.name for p in curls],
        "phi_battery_generic": [p.name for p in generic],
        "theta": theta,
        "metric_b": "L2-in-time L2-in-space norm of u_eps - u",
        "time_weight": "cos^2(pi t / (2 T))",
        "reference_weak_relative": list(lim.relative_residuals),
        "viscous_coefficient": "2*mu + lambda",
    }
    report = SweepReport(config_dict(cfg), rows, meta, runtimes)
    return (report, trajs) if keep_trajectories else report
