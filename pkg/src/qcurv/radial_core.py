"""Radial conformal factors in logarithmic coordinates.

A radial metric ``e^{2w(|x|)}|dx|^2`` on R^4 minus the origin is described by
``v(t) = w(e^t) + t``. It satisfies the fourth-order ODE
``v'''' - 4 v'' = F`` with the density ``F = 2 Q_g e^{4v}``, and the total
Q-curvature ``(1/4 pi^2) int Q e^{4w} dx`` equals ``(1/4) int F dt``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, IllConditionedFit, StencilError
from .quadrature import gauss_legendre, integrate_halfline

DEFAULT_WINDOW = (-12.0, 12.0)
DEFAULT_H = 1.0 / 64.0
QUAD_RTOL = 1e-12

Array = np.ndarray


# --------------------------------------------------------------------------
# Densities
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalDensity:
    """The radial density ``F(t) = 2 Q_g e^{4v(t)}``.

    Parameters
    ----------
    func
        Vectorised callable ``t -> F(t)``.
    breakpoints
        Points where ``F`` has a kink, a jump or a sharp feature. Quadrature
        splits there.
    support
        ``(lo, hi)`` outside of which ``F`` vanishes, if known.
    envelope
        ``(A, a)`` with ``|F(t)| <= A exp(-a |t|)``; only used to report the
        truncation error of a finite window.
    is_zero
        Short-circuits every integral.
    grid
        ``(t0, h, values)`` for densities known on a uniform grid only. All
        integrals are then done by an exponentially fitted recurrence on the
        grid instead of double-exponential quadrature.
    """

    func: Callable[[Array], Array]
    breakpoints: tuple[float, ...] = ()
    support: tuple[float, float] | None = None
    envelope: tuple[float, float] | None = None
    is_zero: bool = False
    grid: tuple[float, float, Array] | None = field(default=None, repr=False)
    integrable: bool | None = None

    @classmethod
    def zero(cls) -> "ConformalDensity":
        return cls(lambda t: np.zeros_like(np.asarray(t, dtype=float)), is_zero=True)

    @classmethod
    def gaussian(cls, mass: float, center: float = 0.0, width: float = 1.0) -> "ConformalDensity":
        """``mass`` times the normal density with mean ``center`` and sd ``width``."""
        if width <= 0:
            raise DomainError("Gaussian density needs a positive width")
        c = mass / (width * math.sqrt(2.0 * math.pi))

        def F(t):
            t = np.asarray(t, dtype=float)
            return c * np.exp(-0.5 * ((t - center) / width) ** 2)

        bps = tuple(center + k * width for k in (-4.0, -2.0, 0.0, 2.0, 4.0))
        return cls(F, breakpoints=bps, is_zero=(mass == 0.0))

    @classmethod
    def indicator(cls, lo: float, hi: float, height: float = 1.0) -> "ConformalDensity":
        def F(t):
            t = np.asarray(t, dtype=float)
            return np.where((t >= lo) & (t <= hi), height, 0.0)

        return cls(F, breakpoints=(lo, hi), support=(lo, hi), envelope=None)

    @classmethod
    def from_grid(cls, t0: float, h: float, values: Sequence[float]) -> "ConformalDensity":
        values = np.asarray(values, dtype=float)
        ts = t0 + h * np.arange(len(values))
        spline = CubicSpline(ts, values)
        hi = ts[-1]

        def F(t):
            t = np.asarray(t, dtype=float)
            return np.where((t >= t0) & (t <= hi), spline(np.clip(t, t0, hi)), 0.0)

        return cls(
            F,
            support=(t0, float(hi)),
            grid=(float(t0), float(h), values),
            is_zero=bool(np.all(values == 0.0)),
        )

    def __call__(self, t):
        return self.func(t)

    @property
    def abs_floor(self) -> float:
        """Absolute tolerance for integrals: far below the density's own magnitude."""
        cached = self.__dict__.get("_abs_floor")
        if cached is None:
            if self.support is not None:
                lo, hi = self.support
            else:
                pts = self.breakpoints or (0.0,)
                lo, hi = min(pts) - 16.0, max(pts) + 16.0
            ts = np.linspace(lo, hi, 257)
            with np.errstate(all="ignore"):
                vals = np.abs(np.asarray(self.func(ts), dtype=float))
            peak = float(np.max(vals[np.isfinite(vals)], initial=0.0))
            cached = max(1e-17 * peak * max(1.0, hi - lo), 1e-300)
            object.__setattr__(self, "_abs_floor", cached)
        return cached

    # -- integrals --------------------------------------------------------

    def _right(self, t: float, g: Callable[[Array], Array]) -> float:
        """``int_0^inf g(u) F(t + u) du`` where ``g`` is a fixed weight."""
        stop = None
        if self.support is not None:
            if t >= self.support[1]:
                return 0.0
            stop = self.support[1] - t
        bps = [b - t for b in self.breakpoints if b > t]
        if self.support is not None and self.support[0] > t:
            bps.append(self.support[0] - t)
        return integrate_halfline(
            lambda u: g(u) * self.func(t + u), 0.0, bps, stop=stop, rtol=QUAD_RTOL,
            atol=self.abs_floor,
        )

    def _left(self, t: float, g: Callable[[Array], Array]) -> float:
        """``int_0^inf g(u) F(t - u) du``."""
        stop = None
        if self.support is not None:
            if t <= self.support[0]:
                return 0.0
            stop = t - self.support[0]
        bps = [t - b for b in self.breakpoints if b < t]
        if self.support is not None and self.support[1] < t:
            bps.append(t - self.support[1])
        return integrate_halfline(
            lambda u: g(u) * self.func(t - u), 0.0, bps, stop=stop, rtol=QUAD_RTOL,
            atol=self.abs_floor,
        )

    def _vectorize(self, fn, t) -> Array:
        t = np.asarray(t, dtype=float)
        if self.is_zero:
            return np.zeros_like(t)
        out = np.array([fn(float(x)) for x in t.ravel()])
        return out.reshape(t.shape)

    def right_weighted(self, t) -> Array:
        """``e^{2t} int_t^inf F(x) e^{-2x} dx``."""
        if self.grid is not None:
            return _grid_integrals(self).eval("P", t)
        return self._vectorize(lambda s: self._right(s, lambda u: np.exp(-2.0 * u)), t)

    def left_weighted(self, t) -> Array:
        """``e^{-2t} int_{-inf}^t F(x) e^{2x} dx``."""
        if self.grid is not None:
            return _grid_integrals(self).eval("N", t)
        return self._vectorize(lambda s: self._left(s, lambda u: np.exp(-2.0 * u)), t)

    def left_mass(self, t) -> Array:
        """``int_{-inf}^t F(x) dx``."""
        if self.grid is not None:
            return _grid_integrals(self).eval("L", t)
        return self._vectorize(lambda s: self._left(s, np.ones_like), t)

    def right_mass(self, t) -> Array:
        """``int_t^inf F(x) dx``."""
        if self.grid is not None:
            g = _grid_integrals(self)
            return g.total - g.eval("L", t)
        return self._vectorize(lambda s: self._right(s, np.ones_like), t)

    def left_moment(self, t) -> Array:
        """``int_{-inf}^t (t - x) F(x) dx``."""
        if self.grid is not None:
            return _grid_integrals(self).eval("T", t)
        return self._vectorize(lambda s: self._left(s, lambda u: u), t)

    def total(self) -> float:
        """``int F dt`` over the whole line."""
        if self.is_zero:
            return 0.0
        if self.grid is not None:
            return _grid_integrals(self).total
        t0 = self._anchor()
        return float(self.left_mass(t0) + self.right_mass(t0))

    def total_abs(self) -> float:
        if self.is_zero:
            return 0.0
        if self.grid is not None:
            _, h, vals = self.grid
            return float(np.trapezoid(np.abs(vals), dx=h))
        absd = replace(self, func=lambda t: np.abs(self.func(t)), grid=None)
        return absd.total()

    def _anchor(self) -> float:
        if self.support is not None:
            return 0.5 * (self.support[0] + self.support[1])
        if self.breakpoints:
            return float(np.median(self.breakpoints))
        return 0.0

    def window_integral(self, lo: float, hi: float) -> float:
        """``int_lo^hi F dt``."""
        if self.is_zero:
            return 0.0
        return float(self.left_mass(hi) - self.left_mass(lo))

    def check_integrable(self, window: float = 16.0, rtol: float = 1e-8) -> tuple[bool, list[float]]:
        """Window-doubling test of ``int |F|``.

        Integrates ``|F|`` over ``[c - L, c + L]`` for ``L = window, 2 window,
        4 window`` and reports whether the last doubling changed the value by
        less than ``rtol`` (relative, with an absolute floor of ``rtol``).
        """
        if self.is_zero:
            return True, [0.0, 0.0, 0.0]
        c = self._anchor()
        vals = []
        for L in (window, 2 * window, 4 * window):
            if self.grid is not None:
                t0, h, v = self.grid
                ts = t0 + h * np.arange(len(v))
                m = (ts >= c - L) & (ts <= c + L)
                vals.append(float(np.trapezoid(np.abs(v[m]), dx=h)) if m.sum() > 1 else 0.0)
            else:
                # |F| has kinks at sign changes, so use fixed unit panels
                # aligned on c; nested windows then share their inner sums
                x0, w0 = gauss_legendre(16, 0.0, 1.0)
                x = (np.arange(-L, L)[:, None] + x0).ravel()
                w = np.tile(w0, int(2 * L))
                vals.append(float(np.sum(w * np.abs(self.func(c + x)))))
        ok = abs(vals[-1] - vals[-2]) <= rtol * max(1.0, abs(vals[-1]))
        return ok, vals

    def truncation_bound(self, lo: float, hi: float) -> float | None:
        """Bound on ``int |F|`` outside ``[lo, hi]`` from the declared envelope."""
        if self.is_zero:
            return 0.0
        if self.support is not None and self.support[0] >= lo and self.support[1] <= hi:
            return 0.0
        if self.envelope is None:
            return None
        A, a = self.envelope
        return A * (math.exp(a * lo) if lo < 0 else 1.0) / a + A * (
            math.exp(-a * hi) if hi > 0 else 1.0
        ) / a


class _GridIntegrals:
    """Node values of the half-line integrals for a grid density.

    Between nodes ``F`` is taken piecewise linear and every weighted piece is
    integrated exactly, so the only error is the O(h^2) interpolation error.
    """

    def __init__(self, t0: float, h: float, F: Array):
        n = len(F)
        self.ts = t0 + h * np.arange(n)
        e = math.exp(-2.0 * h)
        E0 = (1.0 - e) / 2.0
        E1 = (1.0 - e * (1.0 + 2.0 * h)) / 4.0
        A, B = E0 - E1 / h, E1 / h
        P = np.zeros(n)
        N = np.zeros(n)
        for i in range(n - 2, -1, -1):
            P[i] = e * P[i + 1] + A * F[i] + B * F[i + 1]
        for i in range(1, n):
            N[i] = e * N[i - 1] + A * F[i] + B * F[i - 1]
        L = np.concatenate([[0.0], np.cumsum(0.5 * h * (F[1:] + F[:-1]))])
        T = np.zeros(n)
        for i in range(1, n):
            T[i] = T[i - 1] + h * L[i - 1] + h * h * (F[i] / 6.0 + F[i - 1] / 3.0)
        self.total = float(L[-1])
        self.h = h
        self._vals = {"P": P, "N": N, "L": L, "T": T}
        self._splines = {k: CubicSpline(self.ts, v) for k, v in self._vals.items()}

    def eval(self, key: str, t) -> Array:
        t = np.asarray(t, dtype=float)
        lo, hi = self.ts[0], self.ts[-1]
        inside = np.clip(t, lo, hi)
        out = self._splines[key](inside)
        # beyond the grid: F = 0, so the integrals follow their free behaviour
        if key == "P":
            out = np.where(t < lo, np.exp(2.0 * (t - lo)) * self._vals["P"][0], out)
            out = np.where(t > hi, 0.0, out)
        elif key == "N":
            out = np.where(t > hi, np.exp(-2.0 * (t - hi)) * self._vals["N"][-1], out)
            out = np.where(t < lo, 0.0, out)
        elif key == "L":
            out = np.where(t < lo, 0.0, np.where(t > hi, self.total, out))
        elif key == "T":
            out = np.where(t < lo, 0.0, out)
            out = np.where(t > hi, self._vals["T"][-1] + (t - hi) * self.total, out)
        return out


_GRID_CACHE: dict[int, _GridIntegrals] = {}


def _grid_integrals(d: ConformalDensity) -> _GridIntegrals:
    key = id(d.grid[2])
    g = _GRID_CACHE.get(key)
    if g is None:
        t0, h, vals = d.grid
        g = _GridIntegrals(t0, h, np.asarray(vals, dtype=float))
        _GRID_CACHE[key] = g
    return g


# --------------------------------------------------------------------------
# Profiles
# --------------------------------------------------------------------------

_STENCIL = 7
_HALF = _STENCIL // 2
# local variable centred on the middle node keeps the coefficients well scaled
_VANDER_INV = np.linalg.inv(
    np.vander(np.arange(_STENCIL, dtype=float) - _HALF, increasing=True)
)


class RadialProfile:
    """``v(t) = w(e^t) + t`` with derivatives through order four.

    Build one with :meth:`analytic` (closed-form callbacks) or
    :meth:`sampled` (values on a uniform grid; derivatives from local
    degree-6 interpolation on the 7 nearest nodes, which reproduces any
    polynomial of degree <= 6).
    """

    def __init__(self):
        raise TypeError("use RadialProfile.analytic or RadialProfile.sampled")

    @classmethod
    def analytic(
        cls,
        derivs: Sequence[Callable[[Array], Array]],
        *,
        density: ConformalDensity | None = None,
        t_min: float = -math.inf,
        t_max: float = math.inf,
        features: Sequence[float] = (),
        name: str = "",
        params: dict | None = None,
    ) -> "RadialProfile":
        if len(derivs) != 5:
            raise DomainError("analytic profile needs v and its first four derivatives")
        self = object.__new__(cls)
        self.mode = "analytic"
        self._funcs = tuple(derivs)
        self.t_min, self.t_max = float(t_min), float(t_max)
        self.h = None
        self._density = density
        self.features = tuple(features)
        self.name = name
        self.params = dict(params or {})
        return self

    @classmethod
    def sampled(
        cls,
        values: Sequence[float],
        t_min: float,
        h: float,
        *,
        derivs: dict[int, Sequence[float]] | None = None,
        density: ConformalDensity | None = None,
        name: str = "",
    ) -> "RadialProfile":
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or len(values) < 8:
            raise DomainError("sampled profile needs at least 8 grid values")
        if not h > 0:
            raise DomainError("grid spacing must be positive")
        self = object.__new__(cls)
        self.mode = "sampled"
        self.values = values
        self.h = float(h)
        self.t_min = float(t_min)
        self.t_max = float(t_min + h * (len(values) - 1))
        self._density = density
        self.features = ()
        self.name = name
        self.params = {}
        self.node_derivs = {int(k): np.asarray(v, dtype=float) for k, v in (derivs or {}).items()}
        for k, arr in self.node_derivs.items():
            if arr.shape != values.shape or not 1 <= k <= 4:
                raise DomainError(f"derivative array {k} does not match the grid")
        self._coef = {0: _window_coefficients(values)}
        for k, arr in self.node_derivs.items():
            self._coef[k] = _window_coefficients(arr)
        return self

    # -- evaluation -----------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        return self.t_min, self.t_max

    @property
    def interior(self) -> tuple[float, float]:
        """Range where every derivative can be evaluated."""
        if self.mode == "sampled":
            return self.t_min + 2 * self.h, self.t_max - 2 * self.h
        return self.t_min, self.t_max

    @property
    def grid(self) -> Array:
        if self.mode != "sampled":
            raise DomainError("analytic profiles have no grid")
        return self.t_min + self.h * np.arange(len(self.values))

    def _check(self, t: Array) -> None:
        lo, hi = self.domain
        if np.any(t < lo) or np.any(t > hi) or np.any(np.isnan(t)):
            raise DomainError(f"t outside profile domain [{lo}, {hi}]")
        if self.mode == "sampled":
            ilo, ihi = self.interior
            tol = 1e-9 * self.h
            if np.any(t < ilo - tol) or np.any(t > ihi + tol):
                raise StencilError(
                    f"t within 2h of the grid edge; usable range is [{ilo}, {ihi}]"
                )

    def deriv(self, t, k: int = 0) -> Array:
        """``k``-th derivative of ``v`` at ``t`` (``k`` = 0..4)."""
        if not 0 <= k <= 4:
            raise DomainError("derivative order must be between 0 and 4")
        t = np.asarray(t, dtype=float)
        self._check(t)
        if self.mode == "analytic":
            return np.asarray(self._funcs[k](t), dtype=float) + np.zeros_like(t)
        if k in self.node_derivs:
            return _window_eval(self._coef[k], self.t_min, self.h, t, 0)
        if k == 0 or self.mode == "sampled":
            return _window_eval(self._coef[0], self.t_min, self.h, t, k)

    def v(self, t):
        return self.deriv(t, 0)

    def d1(self, t):
        return self.deriv(t, 1)

    def d2(self, t):
        return self.deriv(t, 2)

    def d3(self, t):
        return self.deriv(t, 3)

    def d4(self, t):
        return self.deriv(t, 4)

    @property
    def density(self) -> ConformalDensity:
        """The attached density, or ``v'''' - 4v''`` if none was given."""
        if self._density is None:
            self._density = q_density_from_profile(self)
        return self._density

    @property
    def has_attached_density(self) -> bool:
        return self._density is not None

    def working_window(self) -> tuple[float, float]:
        lo, hi = self.interior
        wlo, whi = getattr(self, "_window", None) or DEFAULT_WINDOW
        return max(lo, wlo), min(hi, whi)

    def with_window(self, lo: float, hi: float) -> "RadialProfile":
        """Copy whose working window (limit probes, decomposition fits) is ``[lo, hi]``."""
        if not hi - lo >= 12.0:
            raise DomainError("working window must span at least 12 (two 6-wide tail fits)")
        out = copy.copy(self)
        out._window = (float(lo), float(hi))
        return out

    def is_complete(self, tol: float = 1e-9) -> bool:
        """``lim inf v' >= 0`` judged on the top decade of the working window."""
        lo, hi = self.working_window()
        ts = np.linspace(max(lo, hi - math.log(10.0)), hi, 33)
        return bool(np.min(self.d1(ts)) >= -tol)

    def has_finite_area(self, tol: float = 1e-9) -> bool:
        """``v' > 0`` on the bottom decade, so ``int e^{4v} dt`` converges at -inf."""
        lo, hi = self.working_window()
        ts = np.linspace(lo, min(hi, lo + math.log(10.0)), 33)
        return bool(np.min(self.d1(ts)) > tol)

    def shifted(self, c: float) -> "RadialProfile":
        """Profile of ``w + c`` (the metric scaled by ``e^{2c}``)."""
        if self.mode == "analytic":
            f = self._funcs
            return RadialProfile.analytic(
                (lambda t: f[0](t) + c, *f[1:]),
                density=None if self._density is None else _scaled_density(self._density, c),
                t_min=self.t_min,
                t_max=self.t_max,
                features=self.features,
                name=self.name,
                params=self.params,
            )
        return RadialProfile.sampled(
            self.values + c,
            self.t_min,
            self.h,
            derivs=self.node_derivs,
            density=None if self._density is None else _scaled_density(self._density, c),
            name=self.name,
        )

    def sample(
        self,
        t_min: float = DEFAULT_WINDOW[0],
        t_max: float = DEFAULT_WINDOW[1],
        h: float = DEFAULT_H,
        with_density: bool = True,
    ) -> "RadialProfile":
        """Grid-sampled copy of this profile (values only, plus its density)."""
        n = int(round((t_max - t_min) / h)) + 1
        ts = t_min + h * np.arange(n)
        dens = None
        if with_density and self.mode == "analytic":
            dens = ConformalDensity.from_grid(t_min, h, self.density(ts))
        return RadialProfile.sampled(self.v(ts), t_min, h, density=dens, name=self.name)

    def __repr__(self) -> str:
        return f"RadialProfile({self.mode}, {self.name or 'anonymous'}, domain={self.domain})"


def _scaled_density(d: ConformalDensity, c: float) -> ConformalDensity:
    # w -> w + c leaves Q e^{4w} unchanged; F = 2 Q_g e^{4v} with Q_g -> e^{-4c} Q_g
    return d


def _window_coefficients(values: Array) -> Array:
    n = len(values)
    idx = np.arange(n - _STENCIL + 1)[:, None] + np.arange(_STENCIL)[None, :]
    coef = values[idx] @ _VANDER_INV.T
    coef[:, 0] = values[_HALF : n - _HALF]
    return coef


def _window_eval(coef: Array, t0: float, h: float, t: Array, k: int) -> Array:
    s = (t - t0) / h
    nwin = coef.shape[0]
    j = np.clip(np.rint(s).astype(int) - _HALF, 0, nwin - 1)
    x = s - j - _HALF
    x = np.where(np.abs(x) < 1e-9, 0.0, x)
    c = coef[j]
    out = np.zeros_like(x)
    for m in range(_STENCIL - 1, k - 1, -1):
        fac = math.factorial(m) / math.factorial(m - k)
        out = out * x + fac * c[..., m]
    return out / h**k


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def q_density_from_profile(p: RadialProfile, check: bool = True) -> ConformalDensity:
    """``F(t) = v''''(t) - 4 v''(t)``.

    The total Q-curvature is ``0.25 * F.total()``. Integrability is checked
    by window doubling and recorded in ``F.integrable`` (a failed check is
    not an error).
    """
    if p.mode == "sampled":
        ts = p.grid
        lo, hi = p.interior
        inner = ts[(ts >= lo - 1e-9 * p.h) & (ts <= hi + 1e-9 * p.h)]
        vals = p.d4(inner) - 4.0 * p.d2(inner)
        d = ConformalDensity.from_grid(float(inner[0]), p.h, vals)
    else:

        def F(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(all="ignore"):
                out = p.d4(t) - 4.0 * p.d2(t)
            return np.where(np.isfinite(out), out, 0.0)

        lo, hi = p.domain
        support = None if (math.isinf(lo) and math.isinf(hi)) else (lo, hi)
        d = ConformalDensity(F, breakpoints=p.features, support=support)
        lo_w, hi_w = DEFAULT_WINDOW
        probe = np.linspace(max(lo, lo_w), min(hi, hi_w), 97)
        if np.all(F(probe) == 0.0):
            d = replace(d, is_zero=True)
    if check:
        ok, _ = d.check_integrable()
        d = replace(d, integrable=ok)
    return d


def total_q(F: ConformalDensity) -> float:
    """``(1/4 pi^2) int Q e^{4w} dx = (1/4) int F dt``."""
    return 0.25 * F.total()


def ode_residual(p: RadialProfile, t) -> Array:
    """``v''''(t) - 4 v''(t) - F(t)`` with ``F`` the density attached to ``p``."""
    t = np.asarray(t, dtype=float)
    return p.d4(t) - 4.0 * p.d2(t) - p.density(t)


class DecayLimits(NamedTuple):
    t_neg: Array
    K1: Array
    t_pos: Array
    K2: Array
    violations: list


def decay_limits(F: ConformalDensity, t_probe: Sequence[float], rtol: float = 1e-6) -> DecayLimits:
    """Probe the two vanishing limits used to build the particular solution.

    ``K1(t) = e^{2t} int_t^inf F e^{-2x} dx`` at the negative probes and
    ``K2(t) = e^{-2t} int_{-inf}^t F e^{2x} dx`` at the positive ones. Both
    must tend to 0; if the magnitudes do not shrink along the probes
    (ordered outward), or the outermost one exceeds ``rtol * int |F|``, a
    diagnostic string is added to ``violations``.
    """
    tp = np.asarray(t_probe, dtype=float)
    t_neg = np.sort(tp[tp < 0])[::-1]
    t_pos = np.sort(tp[tp > 0])
    K1 = F.right_weighted(t_neg)
    K2 = F.left_weighted(t_pos)
    scale = F.total_abs()
    violations = []
    for label, ts, ks in (("K1", t_neg, K1), ("K2", t_pos, K2)):
        if len(ks) == 0:
            continue
        mags = np.abs(ks)
        if len(ks) > 1 and np.any(np.diff(mags) > 1e-15 * max(scale, 1.0)):
            violations.append(f"{label} not shrinking along probes {ts.tolist()}")
        if mags[-1] > rtol * scale + 1e-300 and scale > 0:
            violations.append(f"{label}({ts[-1]:g}) = {ks[-1]:.3e} exceeds {rtol:g} * int|F|")
    return DecayLimits(t_neg, K1, t_pos, K2, violations)


class ParticularSolution(NamedTuple):
    d1: Array
    d2: Array
    d3: Array


def particular_solution_derivs(F: ConformalDensity, t) -> ParticularSolution:
    """Derivatives of the explicit solution ``f`` of ``f'''' - 4f'' = F``.

    With ``P = e^{2t} int_t^inf F e^{-2x}``, ``N = e^{-2t} int_{-inf}^t F e^{2x}``::

        f''  = -(P + N) / 4
        f'   = (-P - int_{-inf}^t F + N + int_t^inf F) / 8
        f''' = (N - P) / 2

    ``f`` itself is never needed; its additive constant is left open.
    """
    t = np.asarray(t, dtype=float)
    if F.is_zero:
        z = np.zeros_like(t)
        return ParticularSolution(z, z.copy(), z.copy())
    P = F.right_weighted(t)
    N = F.left_weighted(t)
    L = F.left_mass(t)
    R = F.right_mass(t)
    return ParticularSolution(
        (-P - L + N + R) / 8.0,
        -(P + N) / 4.0,
        (N - P) / 2.0,
    )


def particular_solution_value(F: ConformalDensity, t) -> Array:
    """``f(t)`` under the convention ``f(0) = 0`` (Gauss-Legendre in ``f'``)."""
    t = np.asarray(t, dtype=float)
    if F.is_zero:
        return np.zeros_like(t)
    out = np.zeros(t.size)
    for i, ti in enumerate(t.ravel()):
        if ti == 0.0:
            continue
        n = max(16, int(8 * abs(ti)) + 16)
        x, w = gauss_legendre(n, 0.0, float(ti))
        out[i] = float(np.sum(w * particular_solution_derivs(F, x).d1))
    return out.reshape(t.shape)


@dataclass(frozen=True)
class AsymptoticDecomposition:
    """``v = c0 + c1 t + c2 e^{-2t} + c3 e^{2t} + f(t)`` with ``f(0) = 0``."""

    c0: float
    c1: float
    c2: float
    c3: float
    residual: float
    side: str = "both"
    windows: tuple = ()
    vprime_scale: float = 1.0

    def growth_threshold(self, rel: float = 1e-6) -> float:
        return rel * max(1.0, self.vprime_scale)

    def violates(self, rel: float = 1e-6) -> bool:
        thr = self.growth_threshold(rel)
        return abs(self.c2) > thr or abs(self.c3) > thr


def asymptotic_decomposition(
    p: RadialProfile,
    side: str = "both",
    tail: float = 6.0,
    window: tuple[float, float] | None = None,
    npts: int = 49,
    min_span: float = 6.0,
) -> AsymptoticDecomposition:
    """Least-squares fit of ``v' - f'`` on the tail windows.

    Fits ``c1 - 2 c2 e^{-2t} + 2 c3 e^{2t}`` on ``[lo, lo + tail]`` and
    ``[hi - tail, hi]`` of the working window. ``side='right'`` (an end)
    drops ``c2`` and uses the right window only, ``side='left'`` (a
    singular region) drops ``c3``. ``c0`` is then read off ``v`` at an
    anchor point.
    """
    if side not in ("both", "left", "right"):
        raise ValueError("side must be 'both', 'left' or 'right'")
    lo, hi = window if window is not None else p.working_window()
    span = hi - lo
    need = min_span if side == "both" else min_span / 2
    if span < need:
        raise IllConditionedFit(
            f"fit window [{lo}, {hi}] too short; need a span of at least {need:g} in t"
        )
    tail = min(tail, span / 2 if side == "both" else span)
    pieces = []
    if side in ("both", "left"):
        pieces.append(np.linspace(lo, lo + tail, npts))
    if side in ("both", "right"):
        pieces.append(np.linspace(hi - tail, hi, npts))
    ts = np.concatenate(pieces)
    F = p.density
    fp = particular_solution_derivs(F, ts).d1
    vp = p.d1(ts)
    y = vp - fp
    cols = [np.ones_like(ts)]
    names = ["c1"]
    if side in ("both", "left"):
        cols.append(-2.0 * np.exp(-2.0 * ts))
        names.append("c2")
    if side in ("both", "right"):
        cols.append(2.0 * np.exp(2.0 * ts))
        names.append("c3")
    A = np.stack(cols, axis=1)
    # rows where a growth mode dominates carry roundoff relative to their size
    rw = 1.0 / np.max(np.abs(A), axis=1)
    scale = np.max(np.abs(A * rw[:, None]), axis=0)
    coef, *_ = np.linalg.lstsq(A * rw[:, None] / scale, y * rw, rcond=None)
    coef = coef / scale
    fitted = dict(zip(names, coef))
    c1 = float(fitted["c1"])
    c2 = float(fitted.get("c2", 0.0))
    c3 = float(fitted.get("c3", 0.0))
    resid = float(np.max(np.abs(A @ coef - y)))
    # anchor: f(0) = 0 by convention
    ta = 0.0 if lo <= 0.0 <= hi else 0.5 * (lo + hi)
    fa = 0.0 if ta == 0.0 else float(particular_solution_value(F, ta))
    c0 = float(p.v(ta)) - c1 * ta - c2 * math.exp(-2 * ta) - c3 * math.exp(2 * ta) - fa
    return AsymptoticDecomposition(
        c0=c0,
        c1=c1,
        c2=c2,
        c3=c3,
        residual=resid,
        side=side,
        windows=tuple((float(x[0]), float(x[-1])) for x in pieces),
        # scale of the bounded part only: the growth modes must not inflate their own threshold
        vprime_scale=float(np.max(np.abs(c1 + fp))),
    )


def decomposition_profile(dec: AsymptoticDecomposition, F: ConformalDensity) -> RadialProfile:
    """Analytic profile ``c0 + c1 t + c2 e^{-2t} + c3 e^{2t} + f(t)`` built from ``F``."""
    c0, c1, c2, c3 = dec.c0, dec.c1, dec.c2, dec.c3

    def v(t):
        t = np.asarray(t, dtype=float)
        return c0 + c1 * t + c2 * np.exp(-2 * t) + c3 * np.exp(2 * t) + particular_solution_value(F, t)

    def v1(t):
        t = np.asarray(t, dtype=float)
        return c1 - 2 * c2 * np.exp(-2 * t) + 2 * c3 * np.exp(2 * t) + particular_solution_derivs(F, t).d1

    def v2(t):
        t = np.asarray(t, dtype=float)
        return 4 * c2 * np.exp(-2 * t) + 4 * c3 * np.exp(2 * t) + particular_solution_derivs(F, t).d2

    def v3(t):
        t = np.asarray(t, dtype=float)
        return -8 * c2 * np.exp(-2 * t) + 8 * c3 * np.exp(2 * t) + particular_solution_derivs(F, t).d3

    def v4(t):
        t = np.asarray(t, dtype=float)
        f2 = particular_solution_derivs(F, t).d2
        return 16 * c2 * np.exp(-2 * t) + 16 * c3 * np.exp(2 * t) + 4 * f2 + F(t)

    return RadialProfile.analytic((v, v1, v2, v3, v4), density=F, features=F.breakpoints)


def scalar_curvature_radial(p: RadialProfile, t) -> Array:
    """``R_g = 6 e^{-2v} (1 - v'' - v'^2)``."""
    t = np.asarray(t, dtype=float)
    return 6.0 * np.exp(-2.0 * p.v(t)) * (1.0 - p.d2(t) - p.d1(t) ** 2)


def scaled_scalar_curvature(p: RadialProfile, t) -> Array:
    """``R_g e^{2v} / 6 = 1 - v'' - v'^2``; its sign is the curvature sign."""
    t = np.asarray(t, dtype=float)
    return 1.0 - p.d2(t) - p.d1(t) ** 2


def q_curvature_radial(p: RadialProfile, t) -> Array:
    """``Q_g = (v'''' - 4 v'') e^{-4v} / 2``."""
    t = np.asarray(t, dtype=float)
    return 0.5 * (p.d4(t) - 4.0 * p.d2(t)) * np.exp(-4.0 * p.v(t))


def profile_from_density(
    F: ConformalDensity,
    alpha: float = 0.0,
    C: float = 0.0,
    name: str = "normal",
) -> RadialProfile:
    """Radial normal metric generated by ``F``.

    ``w(t) = (1/4) [-P/4 - N/4 - int_{-inf}^t (t - s) F(s) ds] + alpha t + C``
    is the log-kernel potential of a radial Q-density, so ``v = w + t``
    solves ``v'''' - 4v'' = F`` with ``v' -> 1 + alpha`` at ``-inf`` and no
    growth modes.
    """
    a = float(alpha)

    def v(t):
        t = np.asarray(t, dtype=float)
        return (1.0 + a) * t - (F.right_weighted(t) + F.left_weighted(t)) / 16.0 \
            - F.left_moment(t) / 4.0 + C

    def v1(t):
        t = np.asarray(t, dtype=float)
        return 1.0 + a + (F.left_weighted(t) - F.right_weighted(t)) / 8.0 - F.left_mass(t) / 4.0

    def v2(t):
        t = np.asarray(t, dtype=float)
        return -(F.right_weighted(t) + F.left_weighted(t)) / 4.0

    def v3(t):
        t = np.asarray(t, dtype=float)
        return (F.left_weighted(t) - F.right_weighted(t)) / 2.0

    def v4(t):
        t = np.asarray(t, dtype=float)
        return F(t) - (F.right_weighted(t) + F.left_weighted(t))

    return RadialProfile.analytic(
        (v, v1, v2, v3, v4), density=F, features=F.breakpoints, name=name,
        params={"alpha": a, "C": C},
    )
