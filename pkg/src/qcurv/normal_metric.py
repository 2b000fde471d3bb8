"""Generalised normal metrics on R^4 minus the origin.

A Q-measure ``dens(y) = Q(y) e^{4w(y)}`` with compact (or effectively
compact) support generates

    w(x) = (1/4 pi^2) int log(|y| / |x - y|) dens(y) dy + alpha log|x| + C.

This module evaluates ``w`` and ``dw/dr``, the spherical average ``wbar``
and its derivatives, the closed-form sphere averages of the kernels, and
the quantities monitored by the averaging lemmas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import ive, roots_hermite

from .errors import ConvergenceError, DomainError, OnSphereError
from .quadrature import SPHERE3_AREA, cap_rule, gauss_legendre, sphere_rule
from .radial_core import ConformalDensity, RadialProfile, profile_from_density

FOUR_PI2 = 4.0 * math.pi**2
_SUPPORT_SIGMAS = 8.0


# --------------------------------------------------------------------------
# Q-measures
# --------------------------------------------------------------------------


class QMeasure:
    """Base class. Subclasses define the density and a node rule for it."""

    type_name = "abstract"
    is_radial = False

    def density(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radial_mean(self, rho) -> np.ndarray:
        """Mean of the density over the sphere ``|y| = rho``."""
        raise NotImplementedError

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Y, W)`` with ``int g dens dy ~ sum W_i g(Y_i)`` for smooth ``g``."""
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def length_scale(self) -> float:
        """Smallest length on which the density varies."""
        raise NotImplementedError

    def axis(self) -> np.ndarray | None:
        return None

    def support_ball(self) -> tuple[np.ndarray, float]:
        """Centre and radius of a ball containing the effective support."""
        return np.zeros(4), self.support[1]

    @property
    def params(self) -> dict:
        raise NotImplementedError

    # -- derived --------------------------------------------------------

    def radial_density(self) -> ConformalDensity:
        """``F(s) = 2 e^{4s} radial_mean(e^s)`` in ``s = log |y|``."""
        lo, hi = self.support
        slo, shi = math.log(lo), math.log(hi)

        def F(s):
            s = np.asarray(s, dtype=float)
            inside = (s >= slo) & (s <= shi)
            out = 2.0 * np.exp(4.0 * s) * self.radial_mean(np.exp(np.clip(s, slo, shi)))
            return np.where(inside, out, 0.0)

        bps = tuple(np.linspace(slo, shi, 9)[1:-1])
        return ConformalDensity(F, breakpoints=bps, support=(slo, shi))

    def _radial_integral(self, g, breaks=()) -> float:
        """``int dens(y) g(|y|) dy`` as a 1-D integral over ``s = log|y|``."""
        lo, hi = (math.log(x) for x in self.support)
        cuts = {lo, hi, *[math.log(b) for b in breaks if self.support[0] < b < self.support[1]]}
        cuts |= set(np.linspace(lo, hi, 17)[1:-1].tolist())
        cuts = sorted(cuts)
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            s, w = gauss_legendre(24, a, b)
            x = np.exp(s)
            total += float(np.sum(w * SPHERE3_AREA * x**4 * self.radial_mean(x) * g(x)))
        return total

    @cached_property
    def total(self) -> float:
        return self._radial_integral(np.ones_like)

    @cached_property
    def total_abs(self) -> float:
        Y, W = self.nodes()
        return float(np.sum(np.abs(W)))

    def check_total(self, rtol: float = 1e-8) -> bool:
        """Node rule and radial integral give the same mass."""
        _, W = self.nodes()
        return abs(float(np.sum(W)) - self.total) <= rtol * max(1.0, abs(self.total))

    def to_json(self) -> dict:
        return {"type": self.type_name, "params": self.params, "support": list(self.support)}


@dataclass(frozen=True, eq=False)
class RadialBump(QMeasure):
    """Radial measure whose log-radius density ``F`` is ``mass * N(center_s, width^2)``.

    The total Q-curvature ``(1/4 pi^2) int dens`` is ``mass / 4``.
    """

    mass: float
    center_s: float = 0.0
    width: float = 0.3
    n_radial: int = 24
    sphere_order: int = 8
    type_name = "radial_bump"
    is_radial = True

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("radial_bump needs a positive width")

    @property
    def params(self):
        return {"mass": self.mass, "center_s": self.center_s, "width": self.width}

    @property
    def support(self):
        k = _SUPPORT_SIGMAS * self.width
        return math.exp(self.center_s - k), math.exp(self.center_s + k)

    def length_scale(self):
        return self.width * self.support[0]

    def _F(self, s):
        z = (s - self.center_s) / self.width
        return self.mass * np.exp(-0.5 * z * z) / (self.width * math.sqrt(2.0 * math.pi))

    def radial_mean(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self._F(np.log(rho)) / (2.0 * rho**4)

    def density(self, y):
        return self.radial_mean(np.linalg.norm(y, axis=-1))

    @cached_property
    def _nodes(self):
        x, wx = roots_hermite(self.n_radial)
        s = self.center_s + math.sqrt(2.0) * self.width * x
        ws = 0.5 * self.mass / math.sqrt(math.pi) * wx
        pts, wp = sphere_rule(self.sphere_order)
        Y = (np.exp(s)[:, None, None] * pts[None, :, :]).reshape(-1, 4)
        W = (ws[:, None] * wp[None, :]).ravel()
        return Y, W

    def nodes(self):
        return self._nodes


@dataclass(frozen=True, eq=False)
class Shell(QMeasure):
    """Radial measure of total mass ``mass`` spread as a Gaussian in ``|y|``."""

    mass: float
    radius: float = 1.0
    width: float = 0.05
    n_radial: int = 24
    sphere_order: int = 8
    type_name = "shell"
    is_radial = True

    def __post_init__(self):
        if not self.width > 0 or self.radius - _SUPPORT_SIGMAS * self.width <= 0:
            raise DomainError("shell needs width > 0 and radius > 8 * width")

    @property
    def params(self):
        return {"mass": self.mass, "radius": self.radius, "width": self.width}

    @property
    def support(self):
        k = _SUPPORT_SIGMAS * self.width
        return self.radius - k, self.radius + k

    def length_scale(self):
        return self.width

    def radial_mean(self, rho):
        rho = np.asarray(rho, dtype=float)
        z = (rho - self.radius) / self.width
        g = np.exp(-0.5 * z * z) / (self.width * math.sqrt(2.0 * math.pi))
        return self.mass * g / (SPHERE3_AREA * rho**3)

    def density(self, y):
        return self.radial_mean(np.linalg.norm(y, axis=-1))

    @cached_property
    def _nodes(self):
        x, wx = roots_hermite(self.n_radial)
        rho = self.radius + math.sqrt(2.0) * self.width * x
        wr = self.mass / math.sqrt(math.pi) * wx / SPHERE3_AREA
        pts, wp = sphere_rule(self.sphere_order)
        Y = (rho[:, None, None] * pts[None, :, :]).reshape(-1, 4)
        W = (wr[:, None] * wp[None, :]).ravel()
        return Y, W

    def nodes(self):
        return self._nodes


@dataclass(frozen=True, eq=False)
class OffcenterBlob(QMeasure):
    """Isotropic 4-D Gaussian of total mass ``mass`` centred at ``center``."""

    mass: float
    center: tuple = (2.0, 0.0, 0.0, 0.0)
    width: float = 0.2
    n_per_axis: int = 8
    type_name = "custom_id"
    custom_id = "offcenter_blob"

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (4,):
            raise DomainError("blob center must have 4 components")
        if not self.width > 0 or np.linalg.norm(c) - _SUPPORT_SIGMAS * self.width <= 0:
            raise DomainError("blob needs width > 0 and |center| > 8 * width")
        object.__setattr__(self, "center", tuple(float(x) for x in c))

    @property
    def params(self):
        return {"id": self.custom_id, "mass": self.mass, "center": list(self.center),
                "width": self.width}

    @property
    def _c(self):
        return np.asarray(self.center)

    @property
    def support(self):
        a = float(np.linalg.norm(self._c))
        k = _SUPPORT_SIGMAS * self.width
        return a - k, a + k

    def length_scale(self):
        return self.width

    def axis(self):
        return self._c / np.linalg.norm(self._c)

    def support_ball(self):
        return self._c.copy(), _SUPPORT_SIGMAS * self.width

    def density(self, y):
        d2 = np.sum((np.asarray(y) - self._c) ** 2, axis=-1)
        return self.mass * (2 * math.pi * self.width**2) ** -2 * np.exp(-0.5 * d2 / self.width**2)

    def radial_mean(self, rho):
        # mean of exp(kappa cos psi) over S^3 is 2 I_1(kappa) / kappa
        rho = np.asarray(rho, dtype=float)
        a = float(np.linalg.norm(self._c))
        s2 = self.width**2
        kappa = rho * a / s2
        with np.errstate(divide="ignore", invalid="ignore"):
            ang = np.where(kappa > 1e-8, 2.0 * ive(1, kappa) / np.maximum(kappa, 1e-300),
                           np.exp(-kappa))
        return self.mass * (2 * math.pi * s2) ** -2 * np.exp(-0.5 * (rho - a) ** 2 / s2) * ang

    @cached_property
    def _nodes(self):
        x, wx = roots_hermite(self.n_per_axis)
        g = np.stack(np.meshgrid(x, x, x, x, indexing="ij"), axis=-1).reshape(-1, 4)
        wg = np.prod(np.stack(np.meshgrid(wx, wx, wx, wx, indexing="ij"), axis=-1).reshape(-1, 4), axis=1)
        Y = self._c + math.sqrt(2.0) * self.width * g
        W = self.mass * wg / math.pi**2
        return Y, W

    def nodes(self):
        return self._nodes


def qmeasure_from_json(obj: dict) -> QMeasure:
    t = obj.get("type")
    p = dict(obj.get("params", {}))
    if t == "radial_bump":
        return RadialBump(float(p["mass"]), float(p.get("center_s", 0.0)), float(p.get("width", 0.3)))
    if t == "shell":
        return Shell(float(p["mass"]), float(p.get("radius", 1.0)), float(p.get("width", 0.05)))
    if t == "custom_id":
        cid = p.pop("id", None)
        if cid == "offcenter_blob":
            return OffcenterBlob(float(p["mass"]), tuple(p.get("center", (2.0, 0, 0, 0))),
                                 float(p.get("width", 0.2)))
        raise DomainError(f"unknown custom Q-measure id {cid!r}")
    raise DomainError(f"unknown Q-measure type {t!r}")


# --------------------------------------------------------------------------
# closed-form sphere averages
# --------------------------------------------------------------------------


def kernel_sphere_average(ay, r, rel_guard: float = 1e-9):
    """Mean of ``1/|x - y|^2`` over ``|x| = r``: ``1/r^2`` inside, ``1/|y|^2`` outside."""
    ay = np.asarray(ay, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(ay - r) <= rel_guard * r):
        raise OnSphereError("|y| = r: the sphere average of 1/|x-y|^2 is not defined there")
    return np.where(ay <= r, 1.0 / r**2, 1.0 / np.maximum(ay, 1e-150) ** 2)


def _aligned_sphere(y, n_psi):
    y = np.asarray(y, dtype=float)
    pole = y if np.linalg.norm(y) > 0 else None
    return sphere_rule((n_psi, 4, 4), pole)


def kernel_sphere_average_quadrature(y, r: float, n_psi: int = 256) -> float:
    """The same mean by quadrature, with the pole of the S^3 rule along ``y``."""
    pts, w = _aligned_sphere(y, n_psi)
    x = r * pts
    d2 = np.sum((x - np.asarray(y, dtype=float)) ** 2, axis=1)
    return float(np.sum(w / d2) / SPHERE3_AREA)


def kbar(r, ay):
    """Sphere average over ``|x| = r`` of ``(|x|^2 - x.y) / (8 pi^2 |x| |x - y|^2)``."""
    r = np.asarray(r, dtype=float)
    ay = np.asarray(ay, dtype=float)
    if np.any(r <= 0):
        raise DomainError("kbar needs r > 0")
    c = 1.0 / (16.0 * math.pi**2)
    return np.where(ay <= r, c / r * (2.0 - ay**2 / r**2), c * r / np.maximum(ay, 1e-150) ** 2)


def kbar_quadrature(r: float, y, n_psi: int = 256) -> float:
    pts, w = _aligned_sphere(y, n_psi)
    x = r * pts
    y = np.asarray(y, dtype=float)
    d2 = np.sum((x - y) ** 2, axis=1)
    K = (r * r - x @ y) / (8.0 * math.pi**2 * r * d2)
    return float(np.sum(w * K) / SPHERE3_AREA)


def _log_mean_kernel(r, rho):
    """Mean over ``|y| = rho`` of ``log|x - y|`` for ``|x| = r``."""
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return np.where(rho >= r, np.log(rho) + r**2 / (4 * rho**2), np.log(r) + rho**2 / (4 * r**2))


# --------------------------------------------------------------------------
# the metric
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormalMetricSpec:
    qmeasure: QMeasure
    alpha: float = 0.0
    C: float = 0.0
    finite_area: bool = True

    def __post_init__(self):
        if self.finite_area and not self.alpha > -1.0:
            raise DomainError("finite area over the origin needs alpha > -1")

    def to_json(self) -> dict:
        out = self.qmeasure.to_json()
        out.update({"alpha": self.alpha, "C": self.C})
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "NormalMetricSpec":
        return cls(qmeasure_from_json(obj), float(obj.get("alpha", 0.0)), float(obj.get("C", 0.0)))


class ConformalFactor:
    """Evaluator for a generalised normal metric.

    Radial measures are reduced to a 1-D integral in ``|y|`` with the
    closed-form sphere mean of ``log|x - y|`` (``method='auto'``). Otherwise,
    far from the support the log kernel is smooth and the node rule of the
    measure is used directly; inside ``near_factor`` times the effective
    support ball, the integral is redone in polar coordinates centred at ``x``,
    where the logarithmic singularity is integrable against ``rho^3``.
    ``method='nodes'`` forces the plain node sum everywhere.
    """

    def __init__(self, spec: NormalMetricSpec, near_factor: float = 1.0,
                 polar_order: int = 12, panel_nodes: int = 8,
                 panel_width: float = 2.0, chunk: int = 4096,
                 method: str = "auto"):
        if method not in ("auto", "nodes", "split"):
            raise ValueError("method must be 'auto', 'nodes' or 'split'")
        self.method = method
        self.spec = spec
        self.mu = spec.qmeasure
        self.near_factor = near_factor
        self.polar_order = polar_order
        self.panel_nodes = panel_nodes
        self.panel_width = panel_width
        self.chunk = chunk
        self.is_radial = self.mu.is_radial

    # -- kernels ----------------------------------------------------------

    @staticmethod
    def _log_ratio(x, Y):
        """``log(|y| / |x - y|)`` for every pair, without cancellation."""
        ax2 = np.sum(x * x, axis=1)[:, None]
        ay2 = np.sum(Y * Y, axis=1)[None, :]
        xy = x @ Y.T
        inner = ax2 <= ay2
        # |x - y|^2 = big^2 (1 + q) with big the larger of |x|, |y|
        big2 = np.where(inner, ay2, ax2)
        q = (np.where(inner, ax2, ay2) - 2.0 * xy) / big2
        lg = -0.5 * np.log1p(q)
        return np.where(inner, lg, lg + 0.5 * np.log(ay2 / ax2))

    def _direct(self, x, which):
        Y, W = self.mu.nodes()
        out = np.empty(len(x))
        for i in range(0, len(x), self.chunk):
            xs = x[i : i + self.chunk]
            if which == "w":
                K = self._log_ratio(xs, Y)
            else:
                ax = np.linalg.norm(xs, axis=1)[:, None]
                d2 = np.sum(xs * xs, axis=1)[:, None] - 2.0 * xs @ Y.T + np.sum(Y * Y, axis=1)[None, :]
                K = -(ax**2 - xs @ Y.T) / (ax * d2)
            out[i : i + self.chunk] = K @ W / FOUR_PI2
        return out

    def _near_mask(self, x):
        """Points inside ``near_factor`` times the effective support ball.

        Outside it the log kernel is smooth on the scale of the node rule
        and the plain node sum is accurate to about 1e-12.
        """
        c, R = self.mu.support_ball()
        return np.linalg.norm(x - c, axis=1) < self.near_factor * R

    def _polar(self, x0, which):
        """Integral in polar coordinates ``y = x0 + rho theta`` around ``x0``.

        Only the shells of ``rho`` that meet the support ball are integrated.
        On each shell the angular rule covers just the cap of directions that
        hits the ball, with its pole pointing at the ball's centre.
        """
        c, R = self.mu.support_ball()
        d = float(np.linalg.norm(c - x0))
        lo, hi = max(0.0, d - R), d + R
        scale = self.panel_width * self.mu.length_scale()
        npan = int(min(400, max(8, math.ceil((hi - lo) / scale))))
        edges = np.linspace(lo, hi, npan + 1)
        if lo == 0.0:
            # rho^3 log rho at the origin: grade the first panel geometrically
            edges = np.concatenate([[0.0], edges[1] * np.geomspace(1e-6, 1.0, 12)[:-1], edges[1:]])
        pole = c - x0 if d > 0 else None
        n = self.polar_order
        ax0 = float(np.linalg.norm(x0))
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            rr, wr = gauss_legendre(self.panel_nodes, float(a), float(b))
            for rho, wrho in zip(rr, wr):
                if d > 0:
                    cmin = (rho * rho + d * d - R * R) / (2 * rho * d)
                    psi_max = math.pi if cmin <= -1 else math.acos(min(1.0, cmin))
                else:
                    psi_max = math.pi
                if psi_max <= 0:
                    continue
                pts, wp = cap_rule(psi_max, (2 * n, n, 2 * n), pole)
                Y = x0[None, :] + rho * pts
                dens = self.mu.density(Y)
                if which == "w":
                    K = np.log(np.linalg.norm(Y, axis=-1)) - math.log(rho)
                else:
                    # d/dr_x log(1/|x - y|) with y - x = rho theta
                    K = (pts @ x0 / ax0) / rho
                total += wrho * rho**3 * float(np.sum(wp * K * dens))
        return total / FOUR_PI2

    def _radial_reduction(self, ax, which):
        """Radial measures: the angular integral of the kernel is known in closed form."""
        # sphere samples share |x| up to roundoff: evaluate once per cluster
        order = np.argsort(ax)
        srt = ax[order]
        new = np.concatenate([[True], np.diff(srt) > 1e-13 * srt[1:]])
        uniq = srt[new]
        inv = np.empty(len(ax), dtype=int)
        inv[order] = np.cumsum(new) - 1
        out = np.empty(len(uniq))
        for i, r in enumerate(uniq):
            if which == "w":
                g = lambda rho: np.log(rho) - _log_mean_kernel(r, rho)  # noqa: E731
            else:
                g = lambda rho: -np.where(rho >= r, r / (2 * rho**2), 1 / r - rho**2 / (2 * r**3))  # noqa: E731
            out[i] = self.mu._radial_integral(g, breaks=(r,)) / FOUR_PI2
        return out[inv]

    def _potential(self, x, which):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ax = np.linalg.norm(x, axis=1)
        if np.any(ax == 0):
            raise DomainError("the normal metric is not defined at the origin")
        if self.method == "auto" and self.mu.is_radial:
            return self._radial_reduction(ax, which)
        if self.method == "nodes":
            return self._direct(x, which)
        near = self._near_mask(x)
        out = np.empty(len(x))
        if np.any(~near):
            out[~near] = self._direct(x[~near], which)
        for i in np.nonzero(near)[0]:
            out[i] = self._polar(x[i], which)
        return out

    # -- public -----------------------------------------------------------

    def w(self, x):
        """Conformal factor at points ``x`` of shape ``(N, 4)`` or ``(4,)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        ax = np.linalg.norm(x2, axis=1)
        out = self._potential(x2, "w") + self.spec.alpha * np.log(ax) + self.spec.C
        return out[0] if single else out

    def dr_w(self, x):
        """Radial derivative, by differentiating the kernel under the integral."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        ax = np.linalg.norm(x2, axis=1)
        out = self._potential(x2, "dr") + self.spec.alpha / ax
        return out[0] if single else out

    # -- averaged metric ---------------------------------------------------

    @cached_property
    def averaged_density(self) -> ConformalDensity:
        return self.mu.radial_density()

    @cached_property
    def averaged_profile(self) -> RadialProfile:
        """``vbar(t) = wbar(e^t) + t``; a radial normal metric in its own right."""
        return profile_from_density(self.averaged_density, self.spec.alpha, self.spec.C,
                                    name="averaged")

    def wbar(self, r):
        """Spherical mean of ``w`` over ``|x| = r`` from the radial reduction of the kernel."""
        r = np.asarray(r, dtype=float)
        t = np.log(r)
        return self.averaged_profile.v(t) - t

    def dr_wbar(self, r):
        r = np.asarray(r, dtype=float)
        return (self.averaged_profile.d1(np.log(r)) - 1.0) / r

    def sphere_samples(self, r: float, order=None):
        """Points, weights and ``w``, ``dw/dr`` on the sphere of radius ``r``."""
        if order is None:
            order = (16, 8, 16)
        pts, wts = sphere_rule(order, self.mu.axis())
        x = r * pts
        return x, wts, self.w(x), self.dr_w(x)


def averaged_factor(factor, r: float, quad_order=24) -> float:
    """Mean of ``factor.w`` over ``|x| = r``; radial factors pass straight through."""
    if getattr(factor, "is_radial", False):
        e = np.zeros(4)
        e[0] = r
        return float(np.asarray(factor.w(e[None, :]))[0])
    pts, wts = sphere_rule(quad_order, getattr(getattr(factor, "mu", None), "axis", lambda: None)())
    vals = np.asarray(factor.w(r * pts), dtype=float)
    return float(np.sum(wts * vals) / SPHERE3_AREA)


def _logmeanexp(a, w):
    m = np.max(a)
    return m + math.log(float(np.sum(w * np.exp(a - m)) / np.sum(w)))


def lemma1_ratio(cf: ConformalFactor, k: float, r: float, order=None) -> float:
    """``log mean_{|x|=r} e^{k w} - k wbar(r)``, with ``wbar`` the sample mean."""
    if k <= 0:
        raise DomainError("k must be positive")
    if cf.is_radial:
        return 0.0
    _, wts, w, _ = cf.sphere_samples(r, order)
    wb = float(np.sum(wts * w) / np.sum(wts))
    return max(0.0, _logmeanexp(k * (w - wb), wts))


@dataclass(frozen=True)
class Lemma2Moments:
    r: float
    scaled_moments: dict  # k -> r^k mean((dw/dr)^k)
    mean_sq: float
    dr_wbar_sq: float
    deviation: float  # r^2 (mean((dw/dr)^2) - (dwbar/dr)^2)


def lemma2_moments(cf: ConformalFactor, r: float, ks: Sequence[int] = (1, 2, 3), order=None) -> Lemma2Moments:
    """Radial-derivative moments on ``|x| = r`` and their deviation from the averaged metric."""
    _, wts, _, dw = cf.sphere_samples(r, order)
    tot = float(np.sum(wts))
    mom = {int(k): float(r**k * np.sum(wts * dw**k) / tot) for k in ks}
    msq = float(np.sum(wts * dw**2) / tot)
    dbar = float(np.sum(wts * dw) / tot)
    dev = r * r * max(0.0, msq - dbar * dbar)
    if cf.is_radial:
        dev = 0.0
    return Lemma2Moments(float(r), mom, msq, dbar * dbar, dev)


@dataclass(frozen=True)
class LaplacianBound:
    r: float
    laplacian: float
    bound: float
    holds: bool


def laplacian_wbar(cf: ConformalFactor, r: float) -> float:
    """``Delta wbar(r) = -(1/2 pi^2) int dens(y) kavg(|y|, r) dy + 2 alpha / r^2``."""
    mu = cf.mu
    lo, hi = mu.support
    if lo < r < hi:
        kern = lambda rho: np.where(rho <= r, 1.0 / r**2, 1.0 / rho**2)  # noqa: E731
        val = mu._radial_integral(kern, breaks=(r,))
    else:
        val = mu.total / r**2 if hi <= r else mu._radial_integral(lambda rho: 1.0 / rho**2)
    return -val / (2.0 * math.pi**2) + 2.0 * cf.spec.alpha / r**2


def laplacian_avg_bound(cf: ConformalFactor, r: float) -> LaplacianBound:
    """``Delta wbar(r)`` against ``[(1/2 pi^2) int |dens| + 2 alpha] / r^2``."""
    lap = laplacian_wbar(cf, r)
    bound = (cf.mu.total_abs / (2.0 * math.pi**2) + 2.0 * cf.spec.alpha) / r**2
    return LaplacianBound(float(r), lap, bound, bool(lap <= bound * (1 + 1e-12) + 1e-300))


@dataclass(frozen=True)
class VolumeRatios:
    r: float
    V3: float
    V3bar: float
    dV4: float
    dV4bar: float
    V2: float
    V2bar: float
    V1: float
    V1bar: float

    @property
    def v3_ratio(self):
        return self.V3 / self.V3bar

    @property
    def v4_ratio(self):
        return self.dV4 / self.dV4bar

    @property
    def v2_ratio(self):
        return self.V2 / self.V2bar

    @property
    def v1_ratio(self):
        return self.V1 / self.V1bar


def volume_ratios(cf: ConformalFactor, r: float, order=None) -> VolumeRatios:
    """Surface mixed volumes of ``w`` against those of the averaged metric at radius ``r``.

    ``V3``, ``dV4/dr``, ``V2``, ``V1`` of ``w`` come from sphere quadrature;
    the barred ones from the closed radial form with ``wbar`` from the
    radial reduction, so the two sides share no numerics.
    """
    _, wts, w, dw = cf.sphere_samples(r, order)
    r3 = r**3
    V3 = 0.25 * r3 * float(np.sum(wts * np.exp(3 * w)))
    dV4 = r3 * float(np.sum(wts * np.exp(4 * w)))
    kk = 1.0 / r + dw
    V2 = 0.25 * r3 * float(np.sum(wts * kk * np.exp(2 * w)))
    V1 = 0.25 * r3 * float(np.sum(wts * kk * kk * np.exp(w)))
    wb = float(cf.wbar(r))
    kb = 1.0 / r + float(cf.dr_wbar(r))
    A = SPHERE3_AREA * r3
    return VolumeRatios(
        float(r), V3, 0.25 * A * math.exp(3 * wb), dV4, A * math.exp(4 * wb),
        V2, 0.25 * A * kb * math.exp(2 * wb), V1, 0.25 * A * kb * kb * math.exp(wb),
    )


def geometric_probes(side: str, n: int = 4, factor: float = 10.0, base: float = 1.0) -> list[float]:
    """``base * factor^k`` for ``k = 1..n`` (``side='inf'``) or ``k = -1..-n`` (``'zero'``)."""
    if side not in ("inf", "zero"):
        raise ValueError("side must be 'inf' or 'zero'")
    sgn = 1 if side == "inf" else -1
    return [base * factor ** (sgn * k) for k in range(1, n + 1)]


def decays(seq: Sequence[float], ratio: float = 0.1) -> bool:
    """Strictly decreasing with the last value below ``ratio`` times the first."""
    s = list(seq)
    return all(b < a for a, b in zip(s[:-1], s[1:])) and s[-1] < ratio * s[0]


@dataclass(frozen=True)
class MetricFlags:
    complete: bool
    finite_area: bool
    slope_inf: float
    slope_zero: float


def growth_flags(cf: ConformalFactor, r_far: float = 1e4, r_near: float = 1e-4, order=None) -> MetricFlags:
    """Completeness and finite area read off the growth of ``w`` along rays.

    With ``w ~ beta log r`` in every direction the end is complete iff
    ``1 + beta >= 0`` and the origin has finite area iff ``1 + beta > 0``.
    ``beta`` is the smallest directional slope between two probe radii a
    decade apart.
    """
    pts, _ = sphere_rule(order or (8, 4, 8), cf.mu.axis())

    def slope(r1, r2):
        w1 = cf.w(r1 * pts)
        w2 = cf.w(r2 * pts)
        return float(np.min((w2 - w1) / math.log(r2 / r1)))

    b_inf = slope(r_far / 10.0, r_far)
    b_zero = slope(r_near, r_near * 10.0)
    return MetricFlags(1 + b_inf >= -1e-9, 1 + b_zero > 1e-9, b_inf, b_zero)


def averaged_flags(cf: ConformalFactor) -> MetricFlags:
    p = cf.averaged_profile
    s_inf = float(p.d1(math.log(1e4))) - 1.0
    s_zero = float(p.d1(math.log(1e-4))) - 1.0
    return MetricFlags(p.is_complete(), p.has_finite_area(), s_inf, s_zero)


def check_quadrature(cf: ConformalFactor, x, rtol: float = 1e-8) -> None:
    """Raise if ``w(x)`` moves by more than ``rtol`` when the polar order is doubled."""
    a = cf.w(x)
    hi = ConformalFactor(cf.spec, near_factor=cf.near_factor, polar_order=2 * cf.polar_order,
                         panel_nodes=2 * cf.panel_nodes, panel_width=cf.panel_width, method=cf.method)
    b = hi.w(x)
    if np.max(np.abs(a - b)) > rtol * max(1.0, float(np.max(np.abs(b)))):
        raise ConvergenceError("normal-metric quadrature not converged under order doubling")
