import math

import numpy as np
import pytest
from scipy.integrate import quad

from qcurv import catalog
from qcurv.errors import DomainError, OnSphereError
from qcurv.normal_metric import (
    ConformalFactor,
    NormalMetricSpec,
    OffcenterBlob,
    RadialBump,
    Shell,
    averaged_factor,
    averaged_flags,
    check_quadrature,
    decays,
    geometric_probes,
    growth_flags,
    kbar,
    kbar_quadrature,
    kernel_sphere_average,
    kernel_sphere_average_quadrature,
    laplacian_avg_bound,
    laplacian_wbar,
    lemma1_ratio,
    lemma2_moments,
    qmeasure_from_json,
    volume_ratios,
)
from qcurv.quadrature import central_derivative

FOUR_PI2 = 4 * math.pi**2


def _cf(mu, alpha=0.0, C=0.0, **kw):
    return ConformalFactor(NormalMetricSpec(mu, alpha, C), **kw)


def _ray(r, direction=(1.0, 0.0, 0.0, 0.0)):
    d = np.asarray(direction, dtype=float)
    return (r * d / np.linalg.norm(d))[None, :]


def _sphere_log_mean(r, rho):
    """Mean of ``log|x - y|`` over ``|y| = rho`` for fixed ``|x| = r`` (independent copy)."""
    if rho >= r:
        return math.log(rho) + r * r / (4 * rho * rho)
    return math.log(r) + rho * rho / (4 * r * r)


def _radial_oracle(mu, r, alpha=0.0, C=0.0):
    """1-D reduction of the log potential of a radial measure, by adaptive quadrature."""
    lo, hi = mu.support
    dens = lambda rho: float(mu.radial_mean(rho)) * 2 * math.pi**2 * rho**3  # noqa: E731
    pts = [r] if lo < r < hi else None
    val = quad(lambda rho: dens(rho) * (math.log(rho) - _sphere_log_mean(r, rho)), lo, hi,
               points=pts, epsabs=0, epsrel=1e-13, limit=400)[0]
    return val / FOUR_PI2 + alpha * math.log(r) + C


# -- kernel averages ------------------------------------------------------------


def test_kernel_sphere_average_examples():
    assert float(kernel_sphere_average(0.0, 2.0)) == 0.25
    assert float(kernel_sphere_average(0.5, 1.0)) == 1.0
    assert float(kernel_sphere_average(2.0, 1.0)) == 0.25


@pytest.mark.parametrize("ratio", [0.0, 0.3, 0.9, 1.1, 2.0, 10.0])
def test_kernel_sphere_average_quadrature(ratio):
    r = 1.3
    y = np.array([0.6, 0.0, 0.8, 0.0]) * ratio * r
    assert kernel_sphere_average_quadrature(y, r) == pytest.approx(
        float(kernel_sphere_average(ratio * r, r)), abs=1e-8)


def test_kernel_sphere_average_refuses_sphere():
    with pytest.raises(OnSphereError):
        kernel_sphere_average(1.0, 1.0)
    with pytest.raises(OnSphereError):
        kernel_sphere_average(1.0 + 1e-11, 1.0)


def test_kbar_closed_form():
    r = 1.7
    assert float(kbar(r, 0.0)) == pytest.approx(1 / (8 * math.pi**2 * r), rel=1e-15)
    inner = float(kbar(r, r * (1 - 1e-15)))
    outer = float(kbar(r, r * (1 + 1e-15)))
    assert inner == pytest.approx(1 / (16 * math.pi**2 * r), abs=1e-10)
    assert abs(inner - outer) < 1e-10
    assert kbar_quadrature(1.0, np.array([0.3, 0, 0, 0])) == pytest.approx(float(kbar(1.0, 0.3)), abs=1e-8)
    with pytest.raises(DomainError):
        kbar(0.0, 1.0)


# -- evaluation of w ------------------------------------------------------------


def test_zero_density_is_pure_log():
    cf = _cf(RadialBump(0.0), alpha=0.5, C=-0.3)
    for r in (1e-3, 1.0, 40.0):
        assert float(cf.w(_ray(r))[0]) == pytest.approx(0.5 * math.log(r) - 0.3, abs=1e-15)
        assert float(cf.dr_w(_ray(r))[0]) == pytest.approx(0.5 / r, rel=1e-14)


@pytest.mark.parametrize("r", [0.3, 0.95, 1.0, 1.05, 5.0, 50.0])
def test_shell_against_radial_oracle(r):
    mu = Shell(0.5, 1.0, 0.05)
    cf = _cf(mu, alpha=0.1, C=0.2)
    assert float(cf.w(_ray(r, (1, 2, 0, -1)))[0]) == pytest.approx(_radial_oracle(mu, r, 0.1, 0.2), abs=1e-10)


def test_shell_far_field_is_logarithmic():
    mu = Shell(0.5, 1.0, 0.05)
    cf = _cf(mu)
    r = 1e4
    # outside the support: -(1/4 pi^2) (int dens) log|x| up to O(1/r^2) and a constant
    slope = (float(cf.w(_ray(r))[0]) - float(cf.w(_ray(r / 10))[0])) / math.log(10)
    assert slope == pytest.approx(-mu.total / FOUR_PI2, abs=1e-6)


def test_radial_symmetry():
    cf = _cf(RadialBump(0.8, 0.0, 0.3))
    a = cf.w(_ray(2.0, (1, 0, 0, 0)))
    b = cf.w(_ray(2.0, (0.3, -0.5, 0.2, 0.7)))
    assert abs(float(a[0] - b[0])) < 1e-10
    c = _cf(RadialBump(0.8, 0.0, 0.3), method="nodes")
    assert abs(float(c.w(_ray(9.0, (1, 0, 0, 0)))[0] - c.w(_ray(9.0, (0, 0, 1, 1)))[0])) < 1e-10


def test_radial_bump_matches_catalog_profile():
    cf = _cf(RadialBump(0.8, 0.0, 0.3), alpha=0.2)
    e = catalog.bump_normal(0.8, 0.0, 0.3, 0.2)
    # same conformal factor up to an additive constant
    r = np.array([0.1, 1.0, 10.0])
    w = np.array([float(cf.w(_ray(x))[0]) for x in r])
    ref = e.profile.v(np.log(r)) - np.log(r)
    assert np.ptp(w - ref) < 1e-10


def test_blob_near_field_against_centred_oracle():
    mu = OffcenterBlob(0.5, (2.0, 0.0, 0.0, 0.0), 0.2)
    cf = _cf(mu, alpha=0.2)
    c = np.array([2.0, 0.0, 0.0, 0.0])
    s = 0.2
    amp = 0.5 * (2 * math.pi * s * s) ** -2
    shell = lambda rho: amp * math.exp(-0.5 * rho * rho / (s * s)) * 2 * math.pi**2 * rho**3  # noqa: E731
    # int dens log|y| from the radial marginal about the origin
    lo, hi = mu.support
    const = quad(lambda rho: float(mu.radial_mean(rho)) * 2 * math.pi**2 * rho**3 * math.log(rho),
                 lo, hi, epsabs=0, epsrel=1e-13, limit=200)[0]
    for x in ([2.05, 0.03, 0, 0], [2.3, 0, 0.1, 0], [1.5, 0.5, 0, 0]):
        x = np.asarray(x, dtype=float)
        d = float(np.linalg.norm(x - c))
        pot = quad(lambda rho: shell(rho) * _sphere_log_mean(d, rho), 0, 8 * s, points=[d],
                   epsabs=0, epsrel=1e-13, limit=200)[0]
        ref = (const - pot) / FOUR_PI2 + 0.2 * math.log(np.linalg.norm(x))
        assert float(cf.w(x[None, :])[0]) == pytest.approx(ref, abs=1e-10)


def test_dr_w_matches_finite_difference():
    cf = _cf(OffcenterBlob(0.5), alpha=0.2)
    d = np.array([0.6, 0.8, 0.0, 0.0])
    for r in (0.5, 5.0):
        fd = central_derivative(lambda s: float(cf.w((s * d)[None, :])[0]), r, 1, h=1e-3)
        assert float(cf.dr_w((r * d)[None, :])[0]) == pytest.approx(fd, abs=1e-8)


def test_check_quadrature_passes_far_from_support():
    check_quadrature(_cf(OffcenterBlob(0.5)), np.array([[0.0, 5.0, 0.0, 0.0]]))


# -- averaging ------------------------------------------------------------------


class _Odd:
    is_radial = False

    def w(self, x):
        return x[:, 0] / np.linalg.norm(x, axis=1)


def test_averaged_factor_examples():
    cf = _cf(RadialBump(0.8))
    assert averaged_factor(cf, 2.0) == float(cf.w(_ray(2.0))[0])
    assert abs(averaged_factor(_Odd(), 1.3)) < 1e-12


def test_averaged_factor_blob_against_high_order():
    cf = _cf(OffcenterBlob(0.5), alpha=0.2)
    a = averaged_factor(cf, 5.0, (16, 8, 16))
    b = averaged_factor(cf, 5.0, (40, 20, 40))
    assert a == pytest.approx(b, abs=1e-9)
    assert float(cf.wbar(5.0)) == pytest.approx(b, abs=1e-9)


# -- averaging lemmas -----------------------------------------------------------


def test_lemma_quantities_vanish_for_radial_measures():
    cf = _cf(RadialBump(0.8))
    assert lemma1_ratio(cf, 4.0, 10.0) == 0.0
    assert lemma2_moments(cf, 10.0).deviation == 0.0
    with pytest.raises(DomainError):
        lemma1_ratio(cf, 0.0, 1.0)


def test_lemma2_zero_density():
    cf = _cf(RadialBump(0.0), alpha=0.5)
    m = lemma2_moments(cf, 3.0)
    assert m.scaled_moments[1] == pytest.approx(0.5, rel=1e-14)
    assert m.scaled_moments[2] == pytest.approx(0.25, rel=1e-14)
    assert m.deviation == 0.0


def test_lemma1_decays_for_blob():
    cf = _cf(OffcenterBlob(0.5), alpha=0.2)
    seq = [lemma1_ratio(cf, 4.0, r) for r in geometric_probes("inf", 3)]
    assert decays(seq)


def test_laplacian_zero_density():
    cf = _cf(RadialBump(0.0), alpha=0.5)
    assert laplacian_wbar(cf, 2.0) == pytest.approx(2 * 0.5 / 4.0, rel=1e-15)


@pytest.mark.parametrize("r", [0.01, 1.0, 100.0])
def test_laplacian_bound_holds_for_bump(r):
    assert laplacian_avg_bound(_cf(RadialBump(0.8)), r).holds


def test_laplacian_against_averaged_profile():
    cf = _cf(Shell(0.5, 1.0, 0.05), alpha=0.3)
    for r in (0.5, 1.02, 3.0):
        d1 = central_derivative(lambda s: float(cf.wbar(s)), r, 1, h=1e-3)
        d2 = central_derivative(lambda s: float(cf.wbar(s)), r, 2, h=1e-3)
        assert laplacian_wbar(cf, r) == pytest.approx(d2 + 3 * d1 / r, abs=1e-6)


def test_laplacian_when_support_inside_ball():
    mu = Shell(0.5, 1.0, 0.05)
    r = 3.0
    lap = laplacian_wbar(_cf(mu, alpha=0.3), r)
    assert lap == pytest.approx(-mu.total / (2 * math.pi**2 * r * r) + 0.6 / (r * r), rel=1e-12)


def test_volume_ratios_tend_to_one_for_blob():
    cf = _cf(OffcenterBlob(0.5), alpha=0.2)
    vr = volume_ratios(cf, 1e3)
    for x in (vr.v3_ratio, vr.v4_ratio, vr.v2_ratio, vr.v1_ratio):
        assert x == pytest.approx(1.0, abs=1e-3)


def test_growth_flags_agree_with_averaged_flags():
    for mu in (RadialBump(0.8), OffcenterBlob(0.5)):
        cf = _cf(mu, alpha=0.2)
        g, a = growth_flags(cf), averaged_flags(cf)
        assert (g.complete, g.finite_area) == (a.complete, a.finite_area) == (True, True)


def test_probe_helpers():
    assert geometric_probes("zero", 2) == [0.1, 0.01]
    assert decays([1.0, 0.5, 0.05]) and not decays([1.0, 0.5, 0.6])
    with pytest.raises(ValueError):
        geometric_probes("left")


# -- construction and JSON ------------------------------------------------------


def test_measure_validation():
    with pytest.raises(DomainError):
        Shell(1.0, 0.3, 0.05)
    with pytest.raises(DomainError):
        OffcenterBlob(1.0, (0.5, 0, 0, 0), 0.2)
    with pytest.raises(DomainError):
        NormalMetricSpec(RadialBump(0.8), alpha=-1.0)


@pytest.mark.parametrize("mu", [RadialBump(0.8, 0.1, 0.4), Shell(0.5, 1.0, 0.05), OffcenterBlob(0.5)],
                         ids=lambda m: type(m).__name__)
def test_spec_json_round_trip(mu):
    spec = NormalMetricSpec(mu, 0.2, -0.1)
    back = NormalMetricSpec.from_json(spec.to_json())
    assert back.to_json() == spec.to_json()
    assert qmeasure_from_json(mu.to_json()).params == mu.params


def test_total_mass_certified():
    assert RadialBump(0.8).check_total()
    assert Shell(0.5).total == pytest.approx(0.5, rel=1e-10)
