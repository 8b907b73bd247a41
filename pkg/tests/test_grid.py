from __future__ import annotations

import math

import numpy as np
import pytest

from homog2d.grid import (
    DomainSpec,
    GridError,
    QuadratureError,
    ScalarField,
    VectorField,
    disk_quadrature,
    fd_divergence,
    fd_gradient,
    integrate_power,
    interior_cells,
    lp_norm,
    make_grid,
    radial_quadrature,
)


def test_no_hole_cells_without_hole():
    g = make_grid(DomainSpec(0.5, 0.0), 64)
    assert not g.hole.any()
    assert g.fluid.all()


def test_hole_cell_count_matches_disk_area():
    g = make_grid(DomainSpec(0.5, 0.1), 128)
    # oracle: cells whose centres satisfy |x| < eps, counted independently
    c = -0.5 + (np.arange(128) + 0.5) / 128
    count = sum(1 for x in c for y in c if x * x + y * y < 0.01)
    assert g.hole.sum() == count == 524
    perimeter_cells = 2 * math.pi * 0.1 / g.h
    assert abs(count - math.pi * 0.01 / g.h**2) <= perimeter_cells


@pytest.mark.parametrize("L, eps, n", [(0.5, 0.3, 64), (0.5, 0.1, 15), (0.5, 0.1, 17), (-1.0, 0.0, 16)])
def test_make_grid_rejects_bad_input(L, eps, n):
    with pytest.raises(GridError):
        make_grid(DomainSpec(L, eps), n)


def test_integrate_power_examples():
    g = make_grid(DomainSpec(0.5, 0.0), 64)
    one = ScalarField.from_function(g, lambda x, y: np.ones_like(x))
    assert integrate_power(one, 1) == pytest.approx(1.0, abs=1e-14)
    zero = ScalarField.from_function(g, lambda x, y: 0 * x)
    assert integrate_power(zero, 2) == 0.0
    errs = []
    for n in (64, 128):
        g = make_grid(DomainSpec(0.5, 0.0), n)
        r = ScalarField.from_function(g, lambda x, y: np.hypot(x, y))
        errs.append(abs(integrate_power(r, 2) - 1.0 / 6.0))
    # midpoint rule: O(h^2)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=1e-6)


def test_integrate_power_requires_grid_and_q():
    g = make_grid(DomainSpec(0.5, 0.0), 16)
    with pytest.raises(ValueError):
        integrate_power(np.ones((16, 16)), 1)
    with pytest.raises(ValueError):
        integrate_power(ScalarField(g, np.ones((16, 16))), 0.5)
    assert lp_norm(ScalarField(g, np.ones((16, 16))), 2) == pytest.approx(1.0)


def test_hole_is_excluded_from_fluid_integrals():
    g = make_grid(DomainSpec(0.5, 0.1), 128)
    one = ScalarField.from_function(g, lambda x, y: np.ones_like(x))
    assert integrate_power(one, 1) == pytest.approx(1.0 - 524 * g.h**2, abs=1e-14)
    assert integrate_power(one, 1, region="hole") == 0.0  # zeroed inside the hole


def test_gradient_exact_on_linear():
    g = make_grid(DomainSpec(0.5, 0.1), 64)
    f = ScalarField.from_function(g, lambda x, y: x)
    gr = fd_gradient(f)
    inner = interior_cells(g)
    assert np.allclose(gr.x[inner], 1.0, atol=1e-12)
    assert np.allclose(gr.y[inner], 0.0, atol=1e-12)


def test_divergence_of_position_is_two():
    g = make_grid(DomainSpec(0.5, 0.1), 64)
    v = VectorField.from_function(g, lambda x, y: (x, y))
    d = fd_divergence(v)
    assert np.allclose(d.values[interior_cells(g)], 2.0, atol=1e-12)


def test_gradient_second_order_on_sine():
    errs = []
    for n in (64, 128):
        g = make_grid(DomainSpec(0.5, 0.0), n)
        f = ScalarField.from_function(g, lambda x, y: np.sin(np.pi * x))
        X, _ = g.cell_centers()
        inner = interior_cells(g)
        errs.append(np.abs(fd_gradient(f).x - np.pi * np.cos(np.pi * X))[inner].max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_grad_then_div_of_affine_is_zero():
    g = make_grid(DomainSpec(0.5, 0.0), 32)
    f = ScalarField.from_function(g, lambda x, y: 3 * x - 2 * y + 1)
    lap = fd_divergence(fd_gradient(f))
    assert np.abs(lap.values[interior_cells(g, 2)]).max() < 1e-10


def test_radial_quadrature_closed_forms():
    eps, alpha = 0.01, 10.0
    assert radial_quadrature(lambda r: 1 / r, 2, eps, eps * alpha) == pytest.approx(2 * math.pi * math.log(alpha), rel=1e-12)
    assert radial_quadrature(lambda r: np.ones_like(r), 1, 0.0, 0.3) == pytest.approx(math.pi * 0.09, rel=1e-12)
    assert radial_quadrature(lambda r: 1 / r, 1, eps, eps * alpha) == pytest.approx(2 * math.pi * eps * (alpha - 1), rel=1e-12)


def test_radial_quadrature_reports_failure():
    with pytest.raises(QuadratureError):
        radial_quadrature(lambda r: np.sin(1 / r) / r**1.5, 1, 1e-12, 1.0, rtol=1e-13)
    with pytest.raises(ValueError):
        radial_quadrature(lambda r: r, 1, 1.0, 0.5)


def test_radial_quadrature_agrees_with_grid():
    g = make_grid(DomainSpec(0.5, 0.0), 512)
    prof = lambda r: np.exp(-(r**2) / 0.02)
    f = ScalarField.from_function(g, lambda x, y: prof(np.hypot(x, y)))
    oracle = radial_quadrature(prof, 2, 0.0, 0.5)
    # the profile is ~e^-12 at r = 0.5, so truncation to the disk is negligible
    assert integrate_power(f, 2) == pytest.approx(oracle, rel=1e-2)


def test_disk_quadrature_polynomial():
    # int_{B_R} x^2 = pi R^4 / 4
    R = 0.3
    assert disk_quadrature(lambda x, y: x * x, (0.0, R)) == pytest.approx(math.pi * R**4 / 4, rel=1e-13)
