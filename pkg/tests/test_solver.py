from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homog2d.cutoff import Complement
from homog2d.grid import DomainSpec, make_grid
from homog2d.solver import (
    CFLError,
    ICSpec,
    PhysParams,
    SolverError,
    SolverState,
    bump_mass_exact,
    checkpoint_times,
    coarsen,
    dissipation,
    effective_viscous_flux,
    energy,
    energy_inequality_check,
    init_state,
    outside_ball,
    pressure_functional,
    renormalized_residual,
    run,
    self_convergence,
    stable_dt,
    step,
)

L = 0.5
PHYS = PhysParams(0.01, 0.01, 3.0)


def _state(n=64, eps=0.0, ic="bump"):
    return init_state(make_grid(DomainSpec(L, eps), n), PHYS, ic)


def _bump_energy_exact(ic: ICSpec, gamma: int = 3) -> float:
    """int (1 + a G)^3 / 2 over the square, G a Gaussian: expand and integrate G^k exactly."""
    cx, cy = ic.center
    total = 0.0
    for k in range(gamma + 1):
        if k == 0:
            ik = 4 * L * L
        else:
            s = ic.sigma / math.sqrt(k)
            ix = 0.5 * math.sqrt(math.pi) * s * (math.erf((L - cx) / s) + math.erf((L + cx) / s))
            iy = 0.5 * math.sqrt(math.pi) * s * (math.erf((L - cy) / s) + math.erf((L + cy) / s))
            ik = ix * iy
        total += math.comb(gamma, k) * ic.amplitude**k * ik
    return total / (gamma - 1)


def test_params_validation():
    with pytest.raises(ValueError):
        PhysParams(0.0, 0.0, 3.0)
    with pytest.raises(ValueError):
        PhysParams(0.01, -1.0, 3.0)
    with pytest.raises(ValueError):
        PhysParams(0.01, 0.0, 1.0)
    assert PHYS.bulk == pytest.approx(0.03)
    with pytest.raises(ValueError):
        ICSpec(kind="jet")
    with pytest.raises(ValueError):
        ICSpec(amplitude=-0.6)


def test_still_state_energy_and_fixed_point():
    s = _state(64, 0.08, "still")
    area = s.mac.fluid.sum() * s.mac.h**2
    assert energy(s, PHYS) == pytest.approx(area / 2, rel=1e-14)
    assert dissipation(s, PHYS) == 0.0
    new = step(s, stable_dt(s, PHYS), PHYS)
    assert np.array_equal(new.rho, s.rho)
    assert not new.mx.any() and not new.my.any()


def test_bump_mass_and_energy_second_order():
    ic = ICSpec()
    em, ee = [], []
    for n in (64, 128):
        s = _state(n)
        em.append(abs(s.mass() - bump_mass_exact(L, ic)))
        ee.append(abs(energy(s, PHYS) - _bump_energy_exact(ic)))
    assert em[0] / em[1] == pytest.approx(4.0, rel=0.05)
    assert ee[0] / ee[1] == pytest.approx(4.0, rel=0.05)
    assert ee[1] < 1e-5


def test_vortex_is_divergence_free_and_no_slip():
    s = init_state(make_grid(DomainSpec(L, 0.04), 64), PHYS, ICSpec(kind="vortex", center=(0.1, 0.0), amplitude=1.0))
    u, v = s.velocity()
    assert np.abs(s.mac.div(u, v)[s.mac.fluid]).max() < 1e-12
    assert not u[~s.mac.free_u].any() and not v[~s.mac.free_v].any()
    assert np.abs(u).max() > 0


def test_mass_conserved_over_100_steps_with_hole():
    s = _state(64, 0.04)
    m0 = s.mass()
    for _ in range(100):
        s = step(s, stable_dt(s, PHYS), PHYS)
    assert abs(s.mass() - m0) <= 1e-12 * m0
    assert not s.mx[~s.mac.free_u].any() and not s.my[~s.mac.free_v].any()


def test_cfl_violation_rejected():
    s = _state(32)
    with pytest.raises(CFLError):
        step(s, 2 * stable_dt(s, PHYS), PHYS)
    with pytest.raises(CFLError):
        run(s, PHYS, 0.1, cfl=0.9)


def test_negative_density_is_fatal():
    s = _state(32, ic=ICSpec(kind="vortex", amplitude=50.0))
    with pytest.raises(SolverError):
        for _ in range(50):
            s = step(s, 0.05, PHYS, check_cfl=False)


def test_run_hits_checkpoints_exactly():
    traj = run(_state(32), PHYS, 0.05, 5)
    assert list(traj.times) == checkpoint_times(0.05, 5)
    assert traj.series.steps[0] == 0 and traj.series.steps[-1] == traj.n_steps
    assert all(s.rho_next is not None for s in traj.snapshots)
    with pytest.raises(ValueError):
        checkpoint_times(1.0, [0.5, 2.0])


def test_energy_inequality_still_is_equality():
    traj = run(_state(32, 0.04, "still"), PHYS, 0.05, 5)
    rep = energy_inequality_check(traj.series)
    assert rep.max_violation == 0.0 and rep.monotone


def test_energy_inequality_bump_small_grid():
    traj = run(_state(64, 0.04), PHYS, 0.1, 10)
    assert energy_inequality_check(traj.series).ok


def test_pressure_functional_still_state():
    eps = 0.06
    traj = run(_state(32, eps, "still"), PHYS, 1.0, 4, eps=eps)
    area = outside_ball(traj.mac, 2 * eps).sum() * traj.mac.h**2
    assert pressure_functional(traj, 1.5) == pytest.approx(area, rel=1e-13)
    with pytest.raises(ValueError):
        pressure_functional(traj, 2.5)


def test_pressure_functional_small_theta_limit():
    traj = run(_state(32), PHYS, 0.05, 5)
    t = traj.times
    p = np.asarray(traj.series.pressure_integral)
    trap = float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(t)))
    assert pressure_functional(traj, 1e-9, 0.0) == pytest.approx(trap, rel=1e-8)


def test_effective_viscous_flux_at_rest():
    eps = 0.04
    s = _state(64, eps, "still")
    rep = effective_viscous_flux(s, lambda x, y: np.ones_like(x), eps, PHYS)
    X, Y = s.mac.centers()
    n = Complement.build(eps, L).value(X, Y)
    assert rep.value == pytest.approx(float(np.sum(n[s.mac.fluid])) * s.mac.h**2, rel=1e-14)
    assert rep.viscous_part == 0.0 and rep.coefficient == PHYS.bulk


def test_renormalized_residual_theta_one_and_rest():
    traj = run(_state(32, 0.04), PHYS, 0.05, 5)
    assert np.all(renormalized_residual(traj, 1.0) < 1e-12)
    still = run(_state(32, 0.04, "still"), PHYS, 0.05, 5)
    assert np.all(renormalized_residual(still, 1.5) == 0.0)
    with pytest.raises(ValueError):
        renormalized_residual(traj, 2.6)


def test_renormalized_residual_refines():
    res = []
    for n in (32, 64):
        traj = run(_state(n), PHYS, 0.05, 5)
        res.append(renormalized_residual(traj, 1.5).max())
    assert res[0] / res[1] >= 1.8


def test_translation_commutes_with_evolution():
    n, shift = 64, 8
    h = 2 * L / n
    a = run(init_state(make_grid(DomainSpec(L, 0.0), n), PHYS, ICSpec(center=(-0.0625, 0.0))), PHYS, 0.03, 1)
    b = run(init_state(make_grid(DomainSpec(L, 0.0), n), PHYS, ICSpec(center=(-0.0625 + shift * h, 0.0))), PHYS, 0.03, 1)
    ra, rb = a.snapshots[-1].rho, b.snapshots[-1].rho
    # cells well away from the walls in both runs
    lo, hi = 20, n - 20 - shift
    diff = np.abs(ra[lo:hi, lo:n - 20] - rb[lo + shift : hi + shift, lo:n - 20]).max()
    assert diff < h


def test_coarsen_and_study():
    a = np.arange(16.0).reshape(4, 4)
    assert np.array_equal(coarsen(a), [[2.5, 4.5], [10.5, 12.5]])
    fields = [np.full((8, 8), 1.0), np.full((16, 16), 1.5), np.full((32, 32), 1.75)]
    st_ = self_convergence(fields, L)
    assert st_.order == pytest.approx(1.0)
    with pytest.raises(ValueError):
        self_convergence(fields[:2], L)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.5, 3.0), eps=st.sampled_from([0.0, 0.04, 0.1]))
def test_constant_equilibrium_property(c, eps):
    s = _state(32, eps, "still")
    s = SolverState(s.mac, np.where(s.mac.fluid, c, 0.0), s.mx, s.my)
    new = step(s, stable_dt(s, PHYS), PHYS)
    assert np.array_equal(new.rho, s.rho) and not new.mx.any() and not new.my.any()


@settings(max_examples=10, deadline=None)
@given(amp=st.floats(-0.4, 0.4), sigma=st.floats(0.05, 0.2), cx=st.floats(-0.2, 0.2))
def test_mass_conservation_property(amp, sigma, cx):
    s = init_state(make_grid(DomainSpec(L, 0.04), 32), PHYS, ICSpec(amplitude=amp, sigma=sigma, center=(cx, 0.1)))
    m0 = s.mass()
    for _ in range(20):
        s = step(s, stable_dt(s, PHYS), PHYS)
    assert abs(s.mass() - m0) <= 1e-12 * m0
    assert s.rho[s.mac.fluid].min() > 0
