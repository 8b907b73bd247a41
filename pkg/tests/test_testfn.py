from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homog2d.cutoff import Complement
from homog2d.grid import DomainSpec, VectorField, interior_cells, make_grid
from homog2d.testfn import (
    ExponentError,
    average_radius,
    ball_average,
    build_pair,
    check_exponents,
    constant_field,
    discrepancy_norms,
    div_decomposition,
    div_phi0_residual,
    div_phi0_3d_residual,
    linear_field,
    named_field,
    phi0_divergence_analytic,
    phi_jacobian,
    phi_values,
    plateau_field,
    quadratic_field,
    rate_probe,
    shell_samples,
    sine_field,
    solenoidal_bump_field,
)

L = 0.5


@pytest.fixture(scope="module")
def grid128():
    return make_grid(DomainSpec(L, 0.0), 128)


def _points(count=10_000, radius=0.45, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-radius, radius, count), rng.uniform(-radius, radius, count)


def test_ball_average_examples(grid128):
    c = VectorField.from_function(grid128, lambda x, y: (0 * x + 2.0, 0 * y - 1.0))
    assert np.allclose(ball_average(c, 0.1), (2.0, -1.0), atol=1e-14)
    lin = VectorField.from_function(grid128, lambda x, y: (x, y))
    assert np.allclose(ball_average(lin, 0.1), 0.0, atol=1e-15)
    # mean of x1^2 over a disk of radius R is R^2/4
    sq = VectorField.from_function(grid128, lambda x, y: (x * x, 0 * y))
    assert ball_average(sq, 0.1)[0] == pytest.approx(0.0025, rel=2e-2)
    assert ball_average(quadratic_field(), 0.1)[0] == pytest.approx(0.0025, rel=1e-12)


def test_zero_field_gives_zero_pair(grid128):
    pair = build_pair(constant_field((0, 0)), 0.02, grid128)
    for f in (pair.Phi, pair.Phi0):
        assert not f.x.any() and not f.y.any()
    d, worst = div_phi0_residual(constant_field((0, 0)), 0.02, grid128)
    assert worst == 0.0


@pytest.mark.parametrize("field", [constant_field((1.0, -0.5)), linear_field(), sine_field()], ids=lambda f: f.name)
def test_analytic_corrector_divergence_is_roundoff(field):
    eps = 0.02
    comp = Complement.build(eps, L)
    c = ball_average(field, average_radius(comp))
    x, y = _points()
    assert np.abs(phi0_divergence_analytic(comp, c, x, y)).max() < 1e-10


def test_phi_jacobian_matches_differences():
    comp = Complement.build(0.04, L)
    field = sine_field() + linear_field()
    x, y = _points(200, 0.3, seed=1)
    k = 1e-6
    J = phi_jacobian(comp, field, x, y)
    for j, (dx, dy) in enumerate(((k, 0), (0, k))):
        hi = phi_values(comp, *field(x + dx, y + dy), x + dx, y + dy)
        lo = phi_values(comp, *field(x - dx, y - dy), x - dx, y - dy)
        for i in range(2):
            assert np.allclose(J[i][j], (hi[i] - lo[i]) / (2 * k), atol=1e-5)


def test_phi_vanishes_near_hole(grid128):
    pair = build_pair(sine_field(), 0.04, grid128)
    X, Y = grid128.cell_centers()
    inside = np.hypot(X, Y) < 0.08
    assert np.all(pair.Phi.x[inside] == 0) and np.all(pair.Phi.y[inside] == 0)


def test_fd_corrector_residual_decreases():
    worst = [div_phi0_residual(constant_field((1.0, 0.0)), 0.1, make_grid(DomainSpec(L, 0.0), n))[1] for n in (256, 512, 1024)]
    assert worst[0] > worst[1] > worst[2]


def test_decomposition_constant_is_zero(grid128):
    direct, three = div_decomposition(constant_field((0.3, 0.7)), 0.04, grid128)
    inner = interior_cells(grid128, 2)
    assert np.abs(three.values[inner]).max() < 1e-12


def test_decomposition_support_inside_cutoff_gradient(grid128):
    eps = 0.04
    _, three = div_decomposition(sine_field(), eps, grid128)
    comp = Complement.build(eps, L)
    X, Y = grid128.cell_centers()
    nx, ny = comp.grad(X, Y)
    assert np.all(three.values[(nx == 0) & (ny == 0)] == 0)


def test_decomposition_agrees_under_refinement():
    gaps = []
    for n in (256, 512, 1024):
        g = make_grid(DomainSpec(L, 0.0), n)
        direct, three = div_decomposition(linear_field(), 0.1, g)
        gaps.append(np.abs(direct.values - three.values)[interior_cells(g, 2)].max())
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[2] > 3.0  # approaching second order


def test_rates_for_constant_field():
    t = rate_probe(constant_field((1.0, 2.0)), 1.5, 4.0, [0.04, 0.02])
    # Phi[c] is divergence free; value and gradient discrepancies are not zero but decay
    assert np.all(t.column("divergence") < 1e-12)
    assert np.all(np.diff(t.column("value")) < 0)
    assert np.all(np.diff(t.column("gradient")) < 0)


@pytest.mark.parametrize("name", ["linear", "quad", "sine"])
def test_rate_columns_non_increasing(name):
    t = rate_probe(named_field(name), 1.5, 4.0, [0.04, 0.02, 0.01, 0.005])
    for col in ("value", "gradient", "divergence"):
        assert np.all(np.diff(t.column(col)) <= 0), col
    assert [r.eps for r in t.rows] == [0.04, 0.02, 0.01, 0.005]


def test_value_discrepancy_triangle_bound():
    from homog2d.grid import disk_quadrature

    eps, p = 0.02, 1.5
    field = sine_field()
    comp = Complement.build(eps, L)
    row = discrepancy_norms(field, eps, p, L)
    R = comp.support_radius
    breaks = sorted({0.0, R, *(b for b in comp.breakpoints() if b < R)})
    cut = disk_quadrature(lambda x, y: (np.abs(1 - comp.value(x, y)) * np.hypot(*field(x, y))) ** p, breaks) ** (1 / p)

    def rot(x, y):
        f1, f2 = field(x, y)
        nx, ny = comp.grad(x, y)
        return (np.abs(-y * f1 + x * f2) * np.hypot(nx, ny)) ** p

    assert row.value <= cut + disk_quadrature(rot, breaks) ** (1 / p) + 1e-15


@pytest.mark.parametrize("p, q", [(2.0, 2.0), (3.0, 4.0), (1.5, 1.8), (0.5, 4.0)])
def test_exponents_outside_hypotheses_rejected(p, q):
    with pytest.raises(ExponentError):
        check_exponents(p, q)


def test_rate_probe_rejects_duplicates():
    with pytest.raises(ValueError):
        rate_probe(linear_field(), 1.5, 4.0, [0.02, 0.02])


def test_plateau_field_is_solenoidal_constant_near_hole():
    f = plateau_field((0.6, 0.8), 0.2, 0.4, (0.05, 0.05))
    x, y = _points(2000, 0.5, seed=2)
    assert np.abs(f.div(x, y)).max() < 1e-12
    r = np.hypot(x - 0.05, y - 0.05)
    v = f(x, y)
    assert np.allclose(v[0][r < 0.2], 0.6) and np.allclose(v[1][r < 0.2], 0.8)
    assert np.all(v[0][r > 0.4] == 0) and np.all(v[1][r > 0.4] == 0)


def test_solenoidal_bump_is_divergence_free():
    f = solenoidal_bump_field(0.0, 0.1, 0.3)
    x, y = _points(2000, 0.5, seed=3)
    assert np.abs(f.div(x, y)).max() < 1e-10


def test_3d_corrector_as_printed():
    eps, alpha = 0.05, 4.0
    pts = shell_samples(eps, alpha, 1000)
    assert div_phi0_3d_residual((0, 0, 0), eps, pts) == 0.0
    far = np.array([[0.5, 0.3, 0.2], [1.0, 1.0, 1.0], [0.0, 0.0, 0.3]])
    assert div_phi0_3d_residual((1.0, 2.0, 3.0), eps, far) == 0.0
    # central differences with step 1e-4 eps: truncation ~1e-7 for a divergence-free field
    assert div_phi0_3d_residual((1, 0, 0), eps, pts) < 1e-5
    assert div_phi0_3d_residual((0, 1, 0), eps, pts) < 1e-5
    # the third column of the printed matrix does not cancel
    assert div_phi0_3d_residual((0, 0, 1), eps, pts) > 1.0


coef = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=20, deadline=None)
@given(a=coef, b=coef, eps=st.floats(0.01, 0.08))
def test_build_pair_is_linear(a, b, eps):
    g = make_grid(DomainSpec(L, 0.0), 32)
    X, Y = g.cell_centers()
    f1 = VectorField(g, np.sin(np.pi * X), X * Y)
    f2 = VectorField(g, Y**2, np.cos(np.pi * Y))
    comb = VectorField(g, a * f1.x + b * f2.x, a * f1.y + b * f2.y)
    P, P1, P2 = build_pair(comb, eps), build_pair(f1, eps), build_pair(f2, eps)
    for attr in ("Phi", "Phi0"):
        for comp in ("x", "y"):
            lhs = getattr(getattr(P, attr), comp)
            rhs = a * getattr(getattr(P1, attr), comp) + b * getattr(getattr(P2, attr), comp)
            assert np.allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(c1=coef, c2=coef, eps=st.floats(0.005, 0.1))
def test_corrector_divergence_free_property(c1, c2, eps):
    comp = Complement.build(eps, L)
    x, y = _points(500, 0.45, seed=4)
    assert np.abs(phi0_divergence_analytic(comp, (c1, c2), x, y)).max() < 1e-8 * (1 + abs(c1) + abs(c2))


@settings(max_examples=20, deadline=None)
@given(eps=st.floats(0.005, 0.1), seed=st.integers(0, 1000))
def test_phi_zero_on_inner_ball_property(eps, seed):
    comp = Complement.build(eps, L)
    rng = np.random.default_rng(seed)
    r = rng.uniform(0, 2 * eps, 200)
    th = rng.uniform(0, 2 * math.pi, 200)
    x, y = r * np.cos(th), r * np.sin(th)
    F = phi_values(comp, *sine_field()(x, y), x, y)
    assert np.all(F[0] == 0) and np.all(F[1] == 0)
