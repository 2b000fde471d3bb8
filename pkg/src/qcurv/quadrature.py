"""Quadrature primitives.

* ``tanh_sinh`` -- double-exponential rule on a finite interval with
  step-halving refinement.
* ``integrate_halfline`` -- integral over ``[a, inf)`` by splitting at
  breakpoints and then integrating dyadic segments of a window that keeps
  doubling until the newest segment stops contributing.
* ``sphere_rule`` -- product rule on the unit 3-sphere in hyperspherical
  angles, with optional alignment of the pole with a given direction.
* ``fd_weights`` -- Fornberg finite-difference weights for arbitrary offsets.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError

SPHERE3_AREA = 2.0 * math.pi**2

_TAU_MAX = 3.2
_MAX_LEVEL = 9


@lru_cache(maxsize=None)
def _ts_level(level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes added at a given refinement level on the reference interval.

    Returns ``(d_left, d_right, w)`` where the node sits at distance
    ``d_left`` from -1 and ``d_right`` from +1 (both computed without
    cancellation), and ``w`` is the weight without the step factor.
    Level 0 holds the even grid with step 1/2; every later level adds the
    odd points of the halved step.
    """
    h = 0.5 / 2**level
    n = int(math.ceil(_TAU_MAX / h))
    k = np.arange(-n, n + 1)
    if level > 0:
        k = k[k % 2 != 0]
    tau = k * h
    s = 0.5 * math.pi * np.sinh(tau)
    # 1 - tanh(s) = 2 / (1 + e^{2s})
    with np.errstate(over="ignore"):
        d_right = 2.0 / (1.0 + np.exp(2.0 * s))
        d_left = 2.0 / (1.0 + np.exp(-2.0 * s))
        w = 0.5 * math.pi * np.cosh(tau) / np.cosh(s) ** 2
    keep = (d_left > 0) & (d_right > 0) & (w > 0)
    return d_left[keep], d_right[keep], w[keep]


def tanh_sinh(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-12,
    atol: float = 0.0,
    max_level: int = _MAX_LEVEL,
    return_error: bool = False,
):
    """Integrate ``f`` over the finite interval ``[a, b]``.

    ``f`` must accept a 1-D array of abscissae. The endpoints are never
    evaluated. Refinement halves the step until two successive estimates
    agree to ``max(rtol * |I|, atol)``.
    """
    if b == a:
        return (0.0, 0.0) if return_error else 0.0
    if b < a:
        val = tanh_sinh(f, b, a, rtol, atol, max_level, return_error)
        if return_error:
            return -val[0], val[1]
        return -val
    half = 0.5 * (b - a)
    total = 0.0
    prev = None
    err = math.inf
    for level in range(max_level + 1):
        dl, dr, w = _ts_level(level)
        x = np.where(dl < dr, a + half * dl, b - half * dr)
        fx = np.asarray(f(x), dtype=float)
        total += float(np.sum(w * fx))
        est = total * half * (0.5 / 2**level)
        if prev is not None:
            err = abs(est - prev)
            if err <= max(rtol * abs(est), atol) and level >= 2:
                break
        prev = est
    else:
        if err > max(100 * rtol * abs(est), atol, 1e-300):
            raise ConvergenceError(
                f"tanh-sinh did not converge on [{a}, {b}]: estimate {est}, change {err}"
            )
    if return_error:
        return est, err
    return est


def integrate_halfline(
    f: Callable[[np.ndarray], np.ndarray],
    a: float = 0.0,
    breakpoints: Sequence[float] = (),
    stop: float | None = None,
    rtol: float = 1e-12,
    atol: float = 1e-300,
    max_doublings: int = 48,
) -> float:
    """Integrate ``f`` over ``[a, inf)`` (or ``[a, stop]`` if ``stop`` is given).

    The range is split at every breakpoint inside it. Beyond the last
    breakpoint the window ``[B, B + 2^k]`` keeps doubling; integration
    stops once two consecutive new segments change the running total by
    less than ``rtol`` relative (or ``atol`` absolute).
    """
    cuts = sorted(b for b in breakpoints if b > a and (stop is None or b < stop))
    edges = [a, *cuts]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += tanh_sinh(f, lo, hi, rtol=rtol * 1e-2, atol=atol)
    start = edges[-1]
    if stop is not None:
        return total + tanh_sinh(f, start, stop, rtol=rtol * 1e-2, atol=atol)
    width = 1.0
    lo = start
    quiet = 0
    for _ in range(max_doublings + 1):
        hi = start + width
        piece = tanh_sinh(f, lo, hi, rtol=rtol * 1e-2, atol=atol)
        total += piece
        if abs(piece) <= max(rtol * abs(total), atol):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
        lo = hi
        width *= 2.0
    raise ConvergenceError(
        f"half-line integral from {a} not converged after window {width / 2:g}"
    )


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _householder_to(pole: np.ndarray) -> np.ndarray:
    """Orthogonal matrix mapping e1 to the unit vector ``pole``."""
    pole = np.asarray(pole, dtype=float)
    pole = pole / np.linalg.norm(pole)
    e1 = np.zeros(4)
    e1[0] = 1.0
    u = e1 - pole
    nu = np.linalg.norm(u)
    if nu < 1e-15:
        return np.eye(4)
    u /= nu
    return np.eye(4) - 2.0 * np.outer(u, u)


@lru_cache(maxsize=64)
def _sphere_rule_cached(n_psi: int, n_theta: int, n_phi: int):
    # Gauss-Chebyshev (second kind) in cos(psi): exact for polynomials on S^3
    psi = math.pi * np.arange(1, n_psi + 1) / (n_psi + 1)
    wpsi = math.pi / (n_psi + 1) * np.sin(psi) ** 2
    u, wu = gauss_legendre(n_theta, -1.0, 1.0)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * math.pi / n_phi)
    P, U, PH = np.meshgrid(psi, u, phi, indexing="ij")
    W = (wpsi[:, None, None] * wu[None, :, None] * wphi[None, None, :]).ravel()
    sp = np.sin(P)
    su = np.sqrt(1.0 - U**2)
    pts = np.stack(
        [np.cos(P), sp * U, sp * su * np.cos(PH), sp * su * np.sin(PH)], axis=-1
    ).reshape(-1, 4)
    pts.setflags(write=False)
    W.setflags(write=False)
    return pts, W


def sphere_rule(
    order: int | tuple[int, int, int],
    pole: Sequence[float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the unit sphere S^3 in R^4.

    Parameters
    ----------
    order : int or (n_psi, n_theta, n_phi)
        An integer ``n`` means ``(n, n, 2n)``. ``cos(psi)`` uses
        Gauss-Chebyshev nodes of the second kind, ``cos(theta)``
        Gauss-Legendre nodes and ``phi`` the periodic trapezoid rule, so the
        rule is exact for polynomials of degree below ``2n``.
    pole : array_like, optional
        Direction the ``psi = 0`` axis is rotated onto. Aligning it with the
        symmetry axis of an integrand lets low ``n_theta``/``n_phi`` be exact.

    Returns
    -------
    points : (N, 4) ndarray of unit vectors
    weights : (N,) ndarray summing to ``2 pi^2``
    """
    if isinstance(order, int):
        order = (order, order, 2 * order)
    pts, w = _sphere_rule_cached(*order)
    if pole is not None:
        pts = pts @ _householder_to(np.asarray(pole)).T
    return pts, w


@lru_cache(maxsize=16)
def _s2_rule_cached(n_theta: int, n_phi: int):
    u, wu = gauss_legendre(n_theta, -1.0, 1.0)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    U, PH = np.meshgrid(u, phi, indexing="ij")
    su = np.sqrt(1.0 - U**2)
    pts = np.stack([U, su * np.cos(PH), su * np.sin(PH)], axis=-1).reshape(-1, 3)
    w = (wu[:, None] * np.full(n_phi, 2.0 * math.pi / n_phi)[None, :]).ravel()
    return pts, w


def cap_rule(
    psi_max: float,
    order: tuple[int, int, int],
    pole: Sequence[float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the spherical cap ``psi <= psi_max`` of S^3.

    Gauss-Legendre in ``psi`` with the ``sin^2 psi`` Jacobian folded into the
    weights; the remaining 2-sphere is handled as in :func:`sphere_rule`.
    """
    if not 0.0 < psi_max <= math.pi:
        raise ValueError("psi_max must lie in (0, pi]")
    n_psi, n_theta, n_phi = order
    psi, wpsi = gauss_legendre(n_psi, 0.0, psi_max)
    s2, w2 = _s2_rule_cached(n_theta, n_phi)
    sp = np.sin(psi)
    pts = np.concatenate(
        [np.repeat(np.cos(psi), len(w2))[:, None], (sp[:, None, None] * s2[None]).reshape(-1, 3)],
        axis=1,
    )
    w = ((wpsi * sp**2)[:, None] * w2[None, :]).ravel()
    if pole is not None:
        pts = pts @ _householder_to(np.asarray(pole)).T
    return pts, w


def sphere_mean(
    f: Callable[[np.ndarray], np.ndarray],
    r: float,
    order: int | tuple[int, int, int] = 24,
    pole: Sequence[float] | None = None,
) -> float:
    """Mean of ``f`` over the sphere of radius ``r`` centred at the origin."""
    pts, w = sphere_rule(order, pole)
    vals = np.asarray(f(r * pts), dtype=float)
    return float(np.sum(w * vals) / SPHERE3_AREA)


def fd_weights(offsets: Sequence[float], m: int) -> np.ndarray:
    """Finite-difference weights for the derivatives ``0..m`` at 0.

    Fornberg's recursion. ``offsets`` are node positions relative to the
    evaluation point in units of the grid step. Returns an array of shape
    ``(m + 1, len(offsets))``; row ``k`` approximates the ``k``-th derivative
    (still to be divided by ``h**k``).
    """
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c.T


def central_derivative(
    f: Callable[[np.ndarray], np.ndarray], t: np.ndarray, k: int, h: float, npts: int = 9
) -> np.ndarray:
    """``k``-th derivative of ``f`` at ``t`` from a centred ``npts``-point stencil."""
    half = npts // 2
    offs = np.arange(-half, half + 1)
    wts = fd_weights(offs, k)[k] / h**k
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for o, wt in zip(offs, wts):
        out = out + wt * np.asarray(f(t + o * h), dtype=float)
    return out
