import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from qcurv import catalog
from qcurv.errors import DomainError, StencilError
from qcurv.quadrature import central_derivative
from qcurv.radial_core import (
    ConformalDensity,
    RadialProfile,
    asymptotic_decomposition,
    decay_limits,
    decomposition_profile,
    ode_residual,
    particular_solution_derivs,
    particular_solution_value,
    profile_from_density,
    q_density_from_profile,
    scalar_curvature_radial,
    total_q,
)

T = sp.symbols("t", real=True)


def sympy_profile(expr, **kw):
    """Analytic profile whose derivatives come from symbolic differentiation."""
    fs = [sp.lambdify(T, sp.diff(expr, T, k), "numpy") for k in range(5)]
    derivs = [lambda t, f=f: np.asarray(f(np.asarray(t, dtype=float)), dtype=float)
              + np.zeros_like(np.asarray(t, dtype=float)) for f in fs]
    return RadialProfile.analytic(derivs, **kw)


def gaussian_density():
    """``F(t) = e^{-t^2}``, total mass sqrt(pi)."""
    return ConformalDensity(lambda t: np.exp(-np.asarray(t, dtype=float) ** 2),
                            breakpoints=(-3.0, 0.0, 3.0))


# -- ode_residual / q density --------------------------------------------------


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 3.0])
def test_cone_ode_residual_vanishes(alpha):
    p = catalog.cone(alpha).profile
    assert np.max(np.abs(ode_residual(p, np.linspace(-5, 5, 11)))) == 0.0
    assert total_q(p.density) == 0.0


def test_ode_residual_with_symbolic_density():
    v = sp.exp(-T**2) + T
    F = sp.lambdify(T, sp.diff(v, T, 4) - 4 * sp.diff(v, T, 2), "numpy")
    dens = ConformalDensity(lambda t: F(np.asarray(t, dtype=float)), breakpoints=(-3, 0, 3))
    p = sympy_profile(v, density=dens)
    assert abs(float(ode_residual(p, 0.7))) < 1e-8


def test_q_density_sech_against_quadrature_oracle():
    v = T + sp.sech(T)
    p = sympy_profile(v)
    F = p.density
    Fexact = sp.lambdify(T, sp.diff(v, T, 4) - 4 * sp.diff(v, T, 2), "math")
    for t in (-2.0, 0.0, 0.3, 4.0):
        assert float(F(t)) == pytest.approx(Fexact(t), abs=1e-12)
    ref = sum(quad(Fexact, a, b, epsabs=1e-13, limit=200)[0] for a, b in ((-60, 0), (0, 60))) / 4
    assert total_q(F) == pytest.approx(ref, abs=1e-8)
    # v'''' - 4v'' integrates to [v''' - 4v'] which vanishes here
    assert abs(total_q(F)) < 1e-8


@pytest.mark.parametrize("entry", catalog.standard_entries(), ids=lambda e: f"{e.id}{e.params}")
def test_catalog_ode_self_consistency(entry):
    ts = np.linspace(-8, 8, 41)
    assert np.max(np.abs(ode_residual(entry.profile, ts))) < 1e-8


# -- decay limits --------------------------------------------------------------


def test_decay_limits_zero_density():
    d = decay_limits(ConformalDensity.zero(), [-4, -2, 2, 4])
    assert np.all(d.K1 == 0) and np.all(d.K2 == 0) and d.violations == []


def test_decay_limits_gaussian_strictly_decreasing():
    d = decay_limits(gaussian_density(), [-2, -4, -8, 2, 4, 8])
    assert np.all(np.diff(d.K1) < 0) and np.all(np.diff(d.K2) < 0)
    assert d.violations == []


def test_decay_limit_indicator_closed_form():
    F = ConformalDensity.indicator(-1.0, 1.0)
    d = decay_limits(F, [-4.0])
    exact = math.exp(-8) * (math.exp(2) - math.exp(-2)) / 2
    assert float(d.K1[0]) == pytest.approx(exact, abs=1e-10)


def test_decay_limits_flags_bad_window():
    d = decay_limits(gaussian_density(), [-0.5, -1.0], rtol=1e-6)
    assert any("exceeds" in v for v in d.violations)


# -- particular solution -------------------------------------------------------


def test_particular_solution_zero():
    ps = particular_solution_derivs(ConformalDensity.zero(), np.array([-1.0, 2.0]))
    assert np.all(ps.d1 == 0) and np.all(ps.d2 == 0)


def test_particular_solution_gaussian_limits():
    ps = particular_solution_derivs(gaussian_density(), np.array([-40.0, 40.0]))
    root_pi = math.sqrt(math.pi)
    assert ps.d1[0] == pytest.approx(root_pi / 8, abs=1e-6)
    assert ps.d1[1] == pytest.approx(-root_pi / 8, abs=1e-6)
    assert abs(ps.d2[0]) < 1e-12 and abs(ps.d2[1]) < 1e-12


def test_particular_solution_finite_differences():
    F = gaussian_density()
    ts = np.linspace(-3, 3, 7)
    d1 = lambda t: particular_solution_derivs(F, t).d1  # noqa: E731
    d2 = particular_solution_derivs(F, ts).d2
    d3 = particular_solution_derivs(F, ts).d3
    for t, a2, a3 in zip(ts, d2, d3):
        assert central_derivative(d1, t, 1, h=0.02) == pytest.approx(a2, abs=1e-6)
        assert central_derivative(d1, t, 2, h=0.02) == pytest.approx(a3, abs=1e-6)
    # integrated f: f' from differentiating the value
    f = lambda t: particular_solution_value(F, t)  # noqa: E731
    assert central_derivative(f, 0.4, 1, h=0.02) == pytest.approx(float(d1(0.4)), abs=1e-6)
    assert float(f(0.0)) == 0.0


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 4))
def test_particular_solution_linear_in_mass(t, scale):
    F1 = ConformalDensity.gaussian(1.0, 0.2, 0.7)
    Fs = ConformalDensity.gaussian(scale, 0.2, 0.7)
    a = particular_solution_derivs(F1, np.array([t]))
    b = particular_solution_derivs(Fs, np.array([t]))
    assert b.d1[0] == pytest.approx(scale * a.d1[0], rel=1e-10, abs=1e-14)
    assert b.d2[0] == pytest.approx(scale * a.d2[0], rel=1e-10, abs=1e-14)


# -- decomposition -------------------------------------------------------------


def test_decomposition_cone():
    dec = asymptotic_decomposition(catalog.cone(3.0).profile)
    assert dec.c1 == pytest.approx(0.5, abs=1e-8)
    assert abs(dec.c2) < 1e-8 and abs(dec.c3) < 1e-8


def test_decomposition_gaussian_end():
    dec = asymptotic_decomposition(catalog.gaussian_end().profile)
    assert dec.c3 == pytest.approx(1.0, abs=1e-3)
    assert dec.violates()


def test_decomposition_synthetic_growth_mode():
    v = 0.3 - 0.2 * T + 0.7 * sp.exp(-2 * T)
    p = sympy_profile(v, density=ConformalDensity.zero())
    dec = asymptotic_decomposition(p)
    assert (dec.c0, dec.c1, dec.c2, dec.c3) == pytest.approx((0.3, -0.2, 0.7, 0.0), abs=1e-6)


def test_decomposition_round_trip():
    e = catalog.bump_normal(0.8, 0.3, 0.9, 0.2)
    dec = asymptotic_decomposition(e.profile)
    again = asymptotic_decomposition(decomposition_profile(dec, e.profile.density))
    for a, b in ((dec.c0, again.c0), (dec.c1, again.c1), (dec.c2, again.c2), (dec.c3, again.c3)):
        assert a == pytest.approx(b, abs=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2))
def test_decomposition_shift_only_moves_c0(c):
    p = catalog.bump_normal(0.5, 0.0, 1.0, 0.0).profile
    d0 = asymptotic_decomposition(p)
    d1 = asymptotic_decomposition(p.shifted(c))
    assert d1.c0 - d0.c0 == pytest.approx(c, abs=1e-9)
    assert d1.c1 == pytest.approx(d0.c1, abs=1e-9)


@pytest.mark.parametrize("mass,center,width,alpha", [(0.8, 0.0, 1.0, 0.0), (-0.6, 0.5, 0.7, 0.3)])
def test_radial_cgb_corollary(mass, center, width, alpha):
    p = catalog.bump_normal(mass, center, width, alpha).profile
    jump = float(p.d1(60.0) - p.d1(-60.0))
    assert jump + total_q(p.density) == pytest.approx(0.0, abs=1e-6)


def test_profile_from_density_matches_catalog():
    e = catalog.bump_normal(0.8, 0.2, 0.6, 0.4, C=0.1)
    q = profile_from_density(ConformalDensity.gaussian(0.8, 0.2, 0.6), alpha=0.4, C=0.1)
    ts = np.linspace(-5, 5, 11)
    for k in range(5):
        assert np.allclose(q.deriv(ts, k), e.profile.deriv(ts, k), atol=1e-12)


# -- scalar curvature ----------------------------------------------------------


def test_scalar_curvature_examples():
    assert float(scalar_curvature_radial(catalog.cone(3.0).profile, 0.0)) == pytest.approx(4.5, abs=1e-14)
    assert np.all(scalar_curvature_radial(catalog.euclidean().profile, np.linspace(-3, 3, 7)) == 0)
    R1 = float(scalar_curvature_radial(catalog.gaussian_end().profile, 0.0))
    assert R1 == pytest.approx(-72 * math.exp(-2), abs=1e-8)


# -- sampled mode --------------------------------------------------------------


def test_sampled_quartic_reconstruction():
    h = 0.1
    ts = -2 + h * np.arange(41)
    poly = np.poly1d([0.3, -0.5, 0.2, 1.0, 0.7])
    p = RadialProfile.sampled(poly(ts), -2.0, h)
    inner = ts[3:-3]
    assert np.max(np.abs(p.v(inner) - poly(inner))) < 1e-10
    probe = np.array([-1.33, 0.0, 0.71])
    for k in range(1, 5):
        assert np.allclose(p.deriv(probe, k), np.polyder(poly, k)(probe), atol=1e-8)


def test_sampled_bump_pipeline():
    e = catalog.bump_normal(0.8, 0.0, 1.0, 0.0)
    s = e.profile.sample(-12.0, 12.0, 1 / 64, with_density=False)
    ts = np.linspace(-8, 8, 33)
    assert np.max(np.abs(ode_residual(s, ts))) < 1e-4
    dec = asymptotic_decomposition(s)
    assert dec.c1 == pytest.approx(e.known["c1"], abs=1e-5)
    assert not dec.violates()


def test_sampled_stencil_and_domain_errors():
    p = RadialProfile.sampled(np.arange(20.0), 0.0, 0.5)
    with pytest.raises(StencilError):
        p.d1(0.2)
    with pytest.raises(DomainError):
        p.v(50.0)
    with pytest.raises(DomainError):
        RadialProfile.sampled(np.arange(5.0), 0.0, 0.5)


def test_sampled_density_from_grid():
    e = catalog.bump_normal(0.8, 0.0, 1.0, 0.0)
    s = e.profile.sample(-12, 12, 1 / 64, with_density=True)
    assert s.has_attached_density
    assert total_q(s.density) == pytest.approx(0.2, abs=1e-8)


def test_density_integrability_certificate():
    ok, seq = ConformalDensity.gaussian(1.0).check_integrable()
    assert ok and len(seq) >= 2
    assert q_density_from_profile(catalog.cone(1.0).profile).is_zero


def test_completeness_flags():
    assert catalog.cone(3.0).profile.is_complete()
    assert catalog.cone(3.0).profile.has_finite_area()
    # v = -2t: v' < 0 everywhere
    p = sympy_profile(-2 * T, density=ConformalDensity.zero())
    assert not p.is_complete() and not p.has_finite_area()


def test_with_window_restricts_working_window():
    p = catalog.cone(1.0).profile.with_window(-8, 9)
    assert p.working_window() == (-8.0, 9.0)
    with pytest.raises(DomainError):
        p.with_window(0, 5)
