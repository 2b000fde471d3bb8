import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from qcurv import catalog
from qcurv.cgb import (
    ManifoldSpec,
    check_growth_modes,
    deficit,
    extract_limits,
    local_end_identity,
    local_sing_identity,
    manifold_assemble,
    pieces_from_profile,
    radial_boundary_T,
    subtraction_check,
)
from qcurv.errors import DomainError, HypothesisViolation
from qcurv.radial_core import asymptotic_decomposition


@pytest.mark.parametrize("entry", catalog.standard_entries(), ids=lambda e: f"{e.id}{e.params}")
def test_deficit_identity_on_catalog(entry):
    rep = deficit(entry.profile, with_ratios=False)
    assert abs(rep.residual) < 1e-8
    assert rep.nu == pytest.approx(entry.known["nu"], abs=1e-8)
    assert rep.mu == pytest.approx(entry.known["mu"], abs=1e-8)
    assert rep.total_q == pytest.approx(entry.known["total_q"], abs=1e-10)


def test_cone_deficits_closed_form():
    rep = deficit(catalog.cone(3.0).profile)
    assert rep.nu == 0.5 and rep.mu == -0.5 and rep.residual == 0.0
    for nu_kl, mu_kl in rep.ratio_limits.values():
        assert nu_kl == pytest.approx(0.5, abs=1e-10)
        assert mu_kl == pytest.approx(-0.5, abs=1e-10)


def test_ratio_limits_agree_on_bump():
    lim = extract_limits(catalog.bump_normal(0.8, 0.0, 1.0, 0.0).profile)
    spread_nu, spread_mu = lim.ratio_spread()
    assert spread_nu < 1e-4 and spread_mu < 1e-4


def test_gaussian_end_is_rejected():
    p = catalog.gaussian_end().profile
    with pytest.raises(HypothesisViolation, match="Lemma 2.2 hypothesis violated, c3 ≈ 1") as exc:
        deficit(p)
    assert exc.value.c3 == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(HypothesisViolation):
        check_growth_modes(asymptotic_decomposition(p))


@pytest.mark.parametrize("entry,T", [(catalog.euclidean(), 1.0), (catalog.cone(3.0), 0.5)])
def test_boundary_term_flat_and_cone(entry, T):
    assert np.allclose(radial_boundary_T(entry.profile, [-2.0, 0.0, 5.0]), T, atol=1e-14)


def test_boundary_term_symbolic():
    t = sp.symbols("t", real=True)
    v = t + sp.exp(-t**2)
    T_expr = sp.lambdify(t, sp.diff(v, t) - sp.diff(v, t, 3) / 4)
    d = [sp.lambdify(t, sp.diff(v, t, k), "numpy") for k in range(5)]
    from qcurv.radial_core import RadialProfile

    p = RadialProfile.analytic([lambda x, f=f: np.asarray(f(np.asarray(x, float)), float) for f in d])
    for x in (-1.0, 0.3, 2.0):
        assert float(radial_boundary_T(p, x)) == pytest.approx(T_expr(x), abs=1e-14)


@pytest.mark.parametrize("t0", [-1.0, 0.0, 1.5])
def test_local_identities_on_bump(t0):
    p = catalog.bump_normal(0.8, 0.3, 0.9, 0.2).profile
    assert abs(local_end_identity(p, t0).residual) < 1e-8
    assert abs(local_sing_identity(p, t0).residual) < 1e-8
    diff, res = subtraction_check(p, t0)
    assert diff == pytest.approx(res, abs=1e-8)


def test_manifold_from_profile_is_consistent():
    rep = manifold_assemble(pieces_from_profile(catalog.bump_normal(0.8, 0.0, 1.0, 0.0).profile))
    assert rep.consistent and abs(rep.residual) < 1e-8
    assert rep.boundary_mismatch < 1e-10


def test_two_ends_with_zero_euler_characteristic_is_inconsistent():
    e = catalog.euclidean().profile
    rep = manifold_assemble(ManifoldSpec(chi=0, ends=[e, e]))
    assert rep.residual == pytest.approx(-2.0, abs=1e-10)
    assert not rep.consistent
    assert any("inconsistent input" in w for w in rep.warnings)


def test_weyl_energy_enters_with_normalisation():
    e = catalog.euclidean().profile
    rep = manifold_assemble(ManifoldSpec(chi=2, ends=[e], weyl_energy=32 * math.pi**2))
    assert rep.weyl_term == pytest.approx(1.0)
    assert rep.residual == pytest.approx(0.0, abs=1e-10)


def test_manifold_spec_validation():
    with pytest.raises(DomainError):
        ManifoldSpec(chi=1, weyl_energy=-1.0)
    with pytest.raises(DomainError):
        ManifoldSpec(chi=1, glue_radius=0.0)


@settings(max_examples=6, deadline=None)
@given(st.floats(-3, 3))
def test_deficits_invariant_under_constant_shift(c):
    # w -> w + c rescales the metric; nu and mu do not move
    base = catalog.bump_normal(0.8, 0.0, 1.0, 0.0, C=0.0).profile
    a = deficit(base, with_ratios=False)
    b = deficit(catalog.bump_normal(0.8, 0.0, 1.0, 0.0, C=c).profile, with_ratios=False)
    assert b.nu == pytest.approx(a.nu, abs=1e-10)
    assert b.mu == pytest.approx(a.mu, abs=1e-10)
    assert b.residual == pytest.approx(a.residual, abs=1e-10)


def test_sampled_deficit():
    s = catalog.bump_normal(0.8, 0.0, 1.0, 0.0).profile.sample(-12, 12, 1 / 64)
    rep = deficit(s, with_ratios=False)
    assert abs(rep.residual) < 1e-4
