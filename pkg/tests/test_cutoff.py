from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homog2d.cutoff import (
    WHICH,
    Complement,
    CutoffError,
    CutoffSpec,
    closed_form_grad_tilde,
    cutoff_norm_report,
    default_alpha,
    eta_smooth,
    eta_tilde,
    frak_n,
    log_profile,
    mollifier_g,
    smooth_step,
)
from homog2d.grid import DomainSpec, ScalarField, integrate_power, make_grid

eps_st = st.floats(1e-4, 0.05)
alpha_st = st.floats(2.0, 12.0)


def test_log_profile_examples():
    assert log_profile(1, 10, 0.5) == 1.0
    assert log_profile(1, 10, 10) == 0.0
    assert log_profile(1, 10, math.sqrt(10)) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(CutoffError):
        log_profile(2, 1, 0.5)


def test_eta_tilde_examples():
    spec = CutoffSpec(0.01, 10.0)
    assert eta_tilde(spec, 0.005, 0.0) == 1.0
    assert eta_tilde(spec, 0.1, 0.0) == 0.0
    assert eta_tilde(spec, math.sqrt(0.001), 0.0) == pytest.approx(0.5, abs=1e-14)


def test_mollifier_examples():
    assert mollifier_g(1.0) == 1.0
    assert mollifier_g(1.25) == 0.0
    assert mollifier_g(1.15) == pytest.approx(0.5, abs=1e-14)
    # transition antisymmetric about 1.15
    d = np.linspace(0, 0.05, 11)
    assert np.allclose(mollifier_g(1.15 - d) + mollifier_g(1.15 + d), 1.0, atol=1e-14)


def test_smooth_step_derivatives_match_differences():
    t = np.linspace(0.05, 0.95, 19)
    S, S1, S2 = smooth_step(t)
    k = 1e-6
    assert np.allclose(S1, (smooth_step(t + k)[0] - smooth_step(t - k)[0]) / (2 * k), atol=1e-6)
    assert np.allclose(S2, (smooth_step(t + k)[1] - smooth_step(t - k)[1]) / (2 * k), atol=1e-4)


def test_eta_smooth_examples():
    spec = CutoffSpec(0.01, 10.0)
    assert eta_smooth(spec, 0.01, 0.0) == 1.0
    assert eta_smooth(spec, 0.1, 0.0) == 0.0
    r = 1.2 * 0.01 * 1.5
    assert eta_smooth(spec, r, 0.0) == pytest.approx(eta_tilde(spec, r, 0.0), abs=1e-15)


def test_frak_n_examples():
    assert frak_n(0.01, 0.0, 0.0, 0.5) == 0.0
    assert 2e-3 * default_alpha(2e-3, 0.5) < 0.25
    assert frak_n(1e-3, 0.25, 0.0, 0.5) == 1.0


def test_default_alpha_policy():
    assert default_alpha(0.5) == 2.0
    assert default_alpha(1e-3) == pytest.approx(math.log(1e3))
    assert 0.2 * default_alpha(0.2, 0.5) < 0.5
    with pytest.raises(CutoffError):
        default_alpha(0.4, 0.5)


def test_complement_support_inside_domain():
    for eps in (0.08, 0.04, 0.02, 0.01):
        c = Complement.build(eps, 0.5)
        assert c.support_radius < 0.5
        assert c.value(c.support_radius * 1.001, 0.0) == 1.0
        assert c.value(1.9 * eps, 0.0) == 0.0


@pytest.mark.parametrize("q, expected", [(1, 0.24559), (2, 2.7288), (4, 1106.4)])
def test_closed_form_values(q, expected):
    # arithmetic evaluation of the closed forms at eps=0.01, alpha=10
    assert closed_form_grad_tilde(0.01, 10.0, q) == pytest.approx(expected, rel=5e-5)


def test_l2_gradient_uses_two_pi():
    assert closed_form_grad_tilde(0.01, 10.0, 2) == pytest.approx(2 * math.pi / math.log(10), rel=1e-15)
    r = cutoff_norm_report(CutoffSpec(0.01, 10.0), 2)
    assert r.numeric == pytest.approx(2.7288, rel=1e-4)
    assert r.rel_err < 1e-6


@pytest.mark.parametrize("q", [1, 1.5, 3, 4])
def test_quadrature_matches_closed_form(q):
    r = cutoff_norm_report(CutoffSpec(0.01, 10.0), q)
    assert r.rel_err < 1e-8


@pytest.mark.parametrize("q", [1, 1.5, 3, 4])
def test_grid_matches_closed_form_on_support_box(q):
    # 512^2 cells on the box (-eps alpha, eps alpha)^2 that holds the support
    spec = CutoffSpec(0.01, 10.0)
    g = make_grid(DomainSpec(spec.outer, 0.0), 512)
    X, Y = g.cell_centers()
    gx, gy = spec.tilde().grad(X, Y)
    num = integrate_power(ScalarField(g, np.hypot(gx, gy)), q)
    assert num == pytest.approx(closed_form_grad_tilde(0.01, 10.0, q), rel=1e-2)


def test_norm_report_validates():
    spec = CutoffSpec(0.01, 10.0)
    with pytest.raises(CutoffError):
        cutoff_norm_report(spec, 0.5)
    with pytest.raises(CutoffError):
        cutoff_norm_report(spec, 2, "hessian")
    with pytest.raises(CutoffError):
        CutoffSpec(0.0, 10.0)
    with pytest.raises(CutoffError):
        CutoffSpec(0.01, 1.0)


@pytest.mark.parametrize("which", WHICH)
def test_every_norm_is_finite_and_positive(which):
    r = cutoff_norm_report(CutoffSpec(0.01, 10.0), 1.5, which)
    assert math.isfinite(r.numeric) and r.numeric > 0


def test_l2_gradient_bound_constant_is_stable():
    ratios = []
    for eps in (1e-2, 1e-3, 1e-4):
        spec = CutoffSpec(eps, abs(math.log(eps)))
        ratios.append(cutoff_norm_report(spec, 2, "grad").bound_ratio)
    assert max(ratios) / min(ratios) < 2


def test_scaled_lq_gradient_vanishes():
    vals = []
    for eps in (1e-2, 1e-3, 1e-4):
        spec = CutoffSpec(eps, abs(math.log(eps)))
        vals.append(spec.outer * cutoff_norm_report(spec, 3, "grad").numeric ** (1 / 3))
    assert vals[0] > vals[1] > vals[2]


@settings(max_examples=40, deadline=None)
@given(eps=eps_st, alpha=alpha_st, s=st.lists(st.floats(0, 2.0), min_size=2, max_size=30))
def test_cutoffs_bounded_and_monotone(eps, alpha, s):
    spec = CutoffSpec(eps, alpha)
    r = np.sort(np.asarray(s)) * spec.outer
    for prof in (spec.tilde(), spec.smooth()):
        v = prof(r)
        assert np.all((v >= 0) & (v <= 1))
        assert np.all(np.diff(v) <= 1e-15)
    g = mollifier_g(np.asarray(s))
    assert np.all((g >= 0) & (g <= 1))


@settings(max_examples=40, deadline=None)
@given(eps=eps_st, alpha=alpha_st, t=st.floats(0, 1))
def test_smooth_equals_tilde_on_middle_annulus(eps, alpha, t):
    spec = CutoffSpec(eps, alpha)
    lo, hi = 1.2 * eps, 11 / 13 * eps * alpha
    if lo >= hi:
        return
    r = lo + t * (hi - lo) * (1 - 1e-12)
    assert spec.smooth()(r) == pytest.approx(spec.tilde()(r), abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(eps=eps_st, alpha=alpha_st, q=st.sampled_from([1.0, 1.5, 3.0, 4.0]))
def test_closed_form_property(eps, alpha, q):
    r = cutoff_norm_report(CutoffSpec(eps, alpha), q)
    assert r.rel_err < 1e-8
