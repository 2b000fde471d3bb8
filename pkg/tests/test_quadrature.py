import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from qcurv.errors import ConvergenceError
from qcurv.quadrature import (
    SPHERE3_AREA,
    cap_rule,
    central_derivative,
    fd_weights,
    gauss_legendre,
    integrate_halfline,
    sphere_mean,
    sphere_rule,
    tanh_sinh,
)


def test_tanh_sinh_endpoint_singularity():
    # int_0^1 log(x) dx = -1, integrand singular at 0
    assert tanh_sinh(np.log, 0.0, 1.0) == pytest.approx(-1.0, abs=1e-13)


def test_tanh_sinh_reversed_interval():
    f = lambda x: np.exp(x)  # noqa: E731
    assert tanh_sinh(f, 1.0, 0.0) == pytest.approx(-(math.e - 1.0), rel=1e-14)


def test_tanh_sinh_reports_error_estimate():
    val, err = tanh_sinh(np.cos, 0.0, 1.0, return_error=True)
    assert val == pytest.approx(math.sin(1.0), rel=1e-14)
    assert err < 1e-10


def test_tanh_sinh_raises_when_unresolved():
    with pytest.raises(ConvergenceError):
        tanh_sinh(lambda x: np.sin(1e4 * x), 0.0, 1.0, rtol=1e-14, max_level=2)


def test_halfline_against_scipy():
    f = lambda x: np.exp(-x) * np.cos(x) ** 2  # noqa: E731
    ref = quad(lambda x: math.exp(-x) * math.cos(x) ** 2, 0, np.inf, epsabs=0, epsrel=1e-13)[0]
    assert integrate_halfline(f, 0.0, breakpoints=(1.0, 3.0)) == pytest.approx(ref, rel=1e-11)


def test_halfline_with_stop():
    assert integrate_halfline(np.exp, 0.0, stop=1.0) == pytest.approx(math.e - 1, rel=1e-14)


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(5, 0.0, 2.0)
    assert np.sum(w * x**9) == pytest.approx(2.0**10 / 10, rel=1e-14)


def test_sphere_rule_area_and_moments():
    pts, w = sphere_rule(8)
    assert np.sum(w) == pytest.approx(SPHERE3_AREA, rel=1e-14)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    # mean of x_i^2 over S^3 is 1/4, mean of x_1^4 is 1/8
    assert np.sum(w * pts[:, 2] ** 2) / SPHERE3_AREA == pytest.approx(0.25, abs=1e-14)
    assert np.sum(w * pts[:, 3] ** 4) / SPHERE3_AREA == pytest.approx(1 / 8, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_sphere_rule_rotation_invariance(pole):
    pts, w = sphere_rule(6, pole)
    assert np.sum(w) == pytest.approx(SPHERE3_AREA, rel=1e-13)
    # odd moments vanish, second moments are isotropic in any frame
    assert np.allclose(pts.T @ w, 0.0, atol=1e-12)
    M = (pts * w[:, None]).T @ pts / SPHERE3_AREA
    assert np.allclose(M, np.eye(4) / 4, atol=1e-12)


def test_cap_rule_volume():
    for psi in (0.3, 1.0, math.pi):
        _, w = cap_rule(psi, (16, 8, 16))
        exact = 4 * math.pi * (psi / 2 - math.sin(2 * psi) / 4)
        assert np.sum(w) == pytest.approx(exact, rel=1e-13)


def test_cap_rule_rejects_bad_angle():
    with pytest.raises(ValueError):
        cap_rule(0.0, (4, 4, 8))


def test_sphere_mean_of_radial_function():
    assert sphere_mean(lambda x: np.sum(x * x, axis=1), 2.0, 4) == pytest.approx(4.0, rel=1e-14)


def test_fd_weights_classic_stencil():
    w = fd_weights([-1, 0, 1], 2)
    assert np.allclose(w[1], [-0.5, 0.0, 0.5])
    assert np.allclose(w[2], [1.0, -2.0, 1.0])


def test_central_derivative_of_exponential():
    for k in range(1, 5):
        assert central_derivative(np.exp, 0.3, k, h=0.05) == pytest.approx(math.exp(0.3), rel=1e-8)
