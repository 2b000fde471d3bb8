"""Acceptance criteria, one pass/fail test each, with pinned tolerances."""

import filecmp
import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from qcurv import catalog
from qcurv.cgb import (
    deficit,
    extract_limits,
    manifold_assemble,
    pieces_from_profile,
    subtraction_check,
)
from qcurv.errors import HypothesisViolation
from qcurv.mixed_volumes import RATIO_KEYS, radial_mixed_volumes
from qcurv.normal_metric import (
    ConformalFactor,
    NormalMetricSpec,
    OffcenterBlob,
    decays,
    geometric_probes,
    kbar,
    kernel_sphere_average,
    kernel_sphere_average_quadrature,
    laplacian_avg_bound,
    lemma1_ratio,
    lemma2_moments,
    volume_ratios,
)
from qcurv.quadrature import central_derivative
from qcurv.radial_core import (
    ConformalDensity,
    asymptotic_decomposition,
    decay_limits,
    particular_solution_derivs,
    q_density_from_profile,
    scalar_curvature_radial,
)

CONE_ALPHAS = (-0.75, -0.5, 0.0, 1.0, 3.0)
RADII = tuple(10.0**k for k in range(-3, 4))


@pytest.mark.parametrize("alpha", CONE_ALPHAS)
def test_criterion_1_cone_family(alpha):
    start = time.perf_counter()
    rep = deficit(catalog.cone(alpha).profile, chi=1)
    elapsed = time.perf_counter() - start
    nu = 1 / math.sqrt(1 + alpha)
    assert abs(rep.nu - nu) < 1e-6
    assert abs(rep.mu - (nu - 1)) < 1e-6
    assert rep.total_q == 0.0
    assert abs(rep.residual) < 1e-6
    assert elapsed < 1.0


def test_criterion_2_euclidean_baseline():
    p = catalog.euclidean().profile
    tbl = radial_mixed_volumes(p, RADII)
    for key in RATIO_KEYS:
        assert np.max(np.abs(np.array(tbl.ratio(key)) - 1.0)) < 1e-10
    lim = extract_limits(p, with_ratios=False)
    assert abs(lim.nu - 1.0) < 1e-10 and abs(lim.mu) < 1e-10


def test_criterion_3_particular_solution():
    F = ConformalDensity.gaussian(1.0, 0.0, 1.0)
    d1 = lambda t: particular_solution_derivs(F, t).d1  # noqa: E731
    ts = np.linspace(-6.0, 6.0, 25)
    resid = [central_derivative(d1, t, 3, h=0.05) - 4 * central_derivative(d1, t, 1, h=0.05) - float(F(t))
             for t in ts]
    assert max(abs(r) for r in resid) < 1e-5
    # int F = 1 for the unit-mass Gaussian
    lim = particular_solution_derivs(F, np.array([-40.0, 40.0])).d1
    assert abs(lim[0] - 1 / 8) < 1e-6
    assert abs(lim[1] + 1 / 8) < 1e-6


@pytest.mark.parametrize("F", [ConformalDensity.gaussian(0.8, 0.0, 1.0), ConformalDensity.indicator(-1.0, 1.0)],
                         ids=["gaussian", "compact"])
def test_criterion_4_decay_limits(F):
    probes = [s * 2.0**k for s in (-1, 1) for k in range(5)]
    d = decay_limits(F, probes)
    scale = F.total_abs()
    for seq in (np.abs(d.K1), np.abs(d.K2)):
        assert np.all(np.diff(seq) < 0)
        assert seq[-1] < 1e-6 * scale


def test_criterion_5_kernel_identity():
    r = 1.0
    for q in (0.0, 0.3, 0.9, 1.1, 2.0, 10.0):
        y = np.array([q * r, 0.0, 0.0, 0.0])
        assert abs(kernel_sphere_average_quadrature(y, r) - float(kernel_sphere_average(q * r, r))) < 1e-8
    for rr in (0.5, 1.0, 3.0):
        assert abs(float(kbar(rr, rr * (1 - 1e-12)) - kbar(rr, rr * (1 + 1e-12)))) < 1e-10


@pytest.mark.parametrize("entry", [catalog.cone(3.0), catalog.cone(-0.5), catalog.bump_normal(0.8, 0.0, 1.0, 0.0),
                                   catalog.bump_normal(-0.8, 0.5, 0.7, 0.0)],
                         ids=lambda e: f"{e.id}{sorted(e.params.items())}")
def test_criterion_6_ratio_agreement(entry):
    lim = extract_limits(entry.profile)
    spread_nu, spread_mu = lim.ratio_spread()
    assert spread_nu is not None and spread_nu < 1e-4
    assert spread_mu is not None and spread_mu < 1e-4
    tbl = radial_mixed_volumes(entry.profile, RADII)
    vp = entry.profile.d1(np.log(np.array(RADII)))
    for key in ("23", "12", "13"):
        assert np.max(np.abs(np.array(tbl.ratio(key)) - vp)) < 1e-12


def test_criterion_7_negative_control():
    e = catalog.gaussian_end()
    p = e.profile
    assert abs(asymptotic_decomposition(p).c3 - 1.0) < 1e-3
    ts = np.linspace(-12.0, 12.0, 241)
    assert np.max(np.abs(q_density_from_profile(p, check=False)(ts))) < 1e-8
    assert abs(float(scalar_curvature_radial(p, 0.0)) + 72 * math.exp(-2)) < 1e-8
    with pytest.raises(HypothesisViolation, match="Lemma 2.2"):
        extract_limits(p)


def test_criterion_8_normal_metric_suite():
    # off-centre blob: for radial measures the lemma quantities vanish identically
    cf = ConformalFactor(NormalMetricSpec(OffcenterBlob(0.5, (2.0, 0.0, 0.0, 0.0), 0.2), alpha=0.0))
    for side in ("zero", "inf"):
        probes = geometric_probes(side, 4)
        l1 = [lemma1_ratio(cf, 4.0, r) for r in probes]
        l2 = [lemma2_moments(cf, r).deviation for r in probes]
        assert decays(l1, 0.1), l1
        assert decays(l2, 0.1), l2
        assert all(laplacian_avg_bound(cf, r).holds for r in probes)
        vr = volume_ratios(cf, probes[-1])
        assert abs(vr.v3_ratio - 1) < 1e-3
        assert abs(vr.v4_ratio - 1) < 1e-3


@pytest.mark.parametrize("entry", catalog.standard_entries(), ids=lambda e: f"{e.id}{sorted(e.params.items())}")
def test_criterion_9_local_identities(entry):
    for t0 in (-1.0, 0.0, 1.0):
        diff, res = subtraction_check(entry.profile, t0)
        assert abs(diff - res) < 1e-8


def test_criterion_9_glued_cone():
    rep = manifold_assemble(pieces_from_profile(catalog.cone(3.0).profile, chi=1))
    assert abs(rep.residual) < 1e-6
    assert rep.boundary_mismatch is not None and rep.boundary_mismatch < 1e-8


def _same_tree(a, b) -> bool:
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


def test_criterion_10_verify_all_deterministic(tmp_path):
    exe = shutil.which("qcurv")
    cmd = [exe] if exe else [sys.executable, "-m", "qcurv.cli"]
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        start = time.perf_counter()
        proc = subprocess.run(cmd + ["verify-all", "--out", str(out)], capture_output=True, text=True)
        elapsed = time.perf_counter() - start
        assert proc.returncode == 0, proc.stdout + proc.stderr
        assert elapsed < 60.0
        outs.append(out)
    assert _same_tree(*outs)
