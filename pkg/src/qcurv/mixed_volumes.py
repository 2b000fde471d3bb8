"""Mixed volumes of geodesic balls and the isoperimetric ratios built from them.

For ``g = e^{2w}|dx|^2`` and the Euclidean ball ``B_r``::

    V4 = int_{B_r} e^{4w} dx            V3 = 1/4 int e^{3w} dsigma
    V2 = 1/4 int (1/r + dw/dr) e^{2w}   V1 = 1/4 int (1/r + dw/dr)^2 e^{w}

with ``dsigma`` the Euclidean area element of the sphere of radius ``r``.
All four equal ``pi^2/2 * r^k`` on the flat metric, and the ratios
``C_{k,l}`` are normalised to be 1 there.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError
from .quadrature import SPHERE3_AREA, gauss_legendre, sphere_rule, tanh_sinh
from .radial_core import DEFAULT_WINDOW, RadialProfile

QUARTER_AREA = SPHERE3_AREA / 4.0  # pi^2 / 2
_LOG_K = math.log(QUARTER_AREA)

RATIO_KEYS = ("34", "23", "12", "24", "13", "14")
CSV_COLUMNS = ("r", "V4", "V3", "V2", "V1", "C34", "C23", "C12", "C24", "C13", "C14")


@dataclass
class MixedVolumeTable:
    """``V1..V4`` and the six ratios on a list of radii.

    ``logV4`` and ``logV3`` carry the same data in log form so very large or
    very small balls do not overflow. Ratio entries that are undefined (a
    non-positive base under a fractional power) are ``None``.
    """

    radii: np.ndarray
    V4: np.ndarray
    V3: np.ndarray
    V2: np.ndarray
    V1: np.ndarray
    logV4: np.ndarray | None = None
    logV3: np.ndarray | None = None
    C: dict[str, list] = field(default_factory=dict)
    v4_tail: np.ndarray | None = None
    v4_tail_resolved: np.ndarray | None = None
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in ("radii", "V4", "V3", "V2", "V1"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if self.logV4 is None:
            with np.errstate(divide="ignore"):
                self.logV4 = np.log(self.V4)
        if self.logV3 is None:
            with np.errstate(divide="ignore"):
                self.logV3 = np.log(self.V3)

    def ratio(self, key: str) -> list:
        if not self.C:
            iso_ratios(self)
        return self.C[key]

    def rows(self) -> list[list]:
        if not self.C:
            iso_ratios(self)
        out = []
        for i, r in enumerate(self.radii):
            row = [r, self.V4[i], self.V3[i], self.V2[i], self.V1[i]]
            row += [self.C[k][i] for k in RATIO_KEYS]
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for row in self.rows():
            wr.writerow(["undefined" if x is None else format(float(x), ".17g") for x in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        if not self.C:
            iso_ratios(self)
        return {
            "r": self.radii.tolist(),
            "V4": self.V4.tolist(),
            "V3": self.V3.tolist(),
            "V2": self.V2.tolist(),
            "V1": self.V1.tolist(),
            "C": {k: ["undefined" if x is None else x for x in self.C[k]] for k in RATIO_KEYS},
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# --------------------------------------------------------------------------
# ratios
# --------------------------------------------------------------------------


def _log_primitives(logV4, logV3, V2, V1):
    """Logs and signs of ``C34``, ``C23``, ``C12``. ``None`` marks undefined."""
    third = _LOG_K / 3.0
    lc34 = 4.0 / 3.0 * logV3 - third - logV4
    # C23 = V2 / (k^{1/3} V3^{2/3}); defined for any sign of V2
    if V2 > 0:
        c23 = (1, math.log(V2) - third - 2.0 / 3.0 * logV3)
    elif V2 < 0:
        c23 = (-1, math.log(-V2) - third - 2.0 / 3.0 * logV3)
    else:
        c23 = (0, -math.inf)
    # C12 = V1^{2/3} / (k^{1/3} V2^{1/3}); fractional power of V2 needs V2 > 0
    if V2 > 0 and V1 >= 0:
        c12 = (1, (2.0 / 3.0 * math.log(V1) if V1 > 0 else -math.inf) - third - math.log(V2) / 3.0)
    else:
        c12 = None
    return (1, lc34), c23, c12


def _combine(factors: Sequence[tuple[tuple[int, float] | None, float]]):
    """``prod c_i^{p_i}`` for signed-log factors; ``None`` if undefined."""
    logv = 0.0
    for f, p in factors:
        if f is None:
            return None
        sign, lg = f
        if sign < 0 or (sign == 0 and p <= 0):
            return None
        if sign == 0:
            return 0.0
        logv += p * lg
    return math.exp(logv)


def _signed_exp(f):
    if f is None:
        return None
    sign, lg = f
    return 0.0 if sign == 0 else sign * math.exp(lg)


def iso_ratios(tbl: MixedVolumeTable) -> MixedVolumeTable:
    """Fill ``tbl.C`` with the six isoperimetric ratios.

    The primitive ratios are computed from the volumes, the composite ones
    from the primitives::

        C24 = C34^{1/3} C23^{2/3}
        C13 = C23^{1/4} C12^{3/4}
        C14 = C34^{1/9} C23^{2/9} C12^{2/3}
    """
    C = {k: [] for k in RATIO_KEYS}
    for i in range(len(tbl.radii)):
        lv4, lv3 = float(tbl.logV4[i]), float(tbl.logV3[i])
        if not (math.isfinite(lv4) and math.isfinite(lv3)):
            for k in RATIO_KEYS:
                C[k].append(None)
            continue
        c34, c23, c12 = _log_primitives(lv4, lv3, float(tbl.V2[i]), float(tbl.V1[i]))
        C["34"].append(_signed_exp(c34))
        C["23"].append(_signed_exp(c23))
        C["12"].append(_signed_exp(c12))
        C["24"].append(_combine([(c34, 1 / 3), (c23, 2 / 3)]))
        C["13"].append(_combine([(c23, 1 / 4), (c12, 3 / 4)]))
        C["14"].append(_combine([(c34, 1 / 9), (c23, 2 / 9), (c12, 2 / 3)]))
    tbl.C = C
    if any(v <= 0 for v in tbl.V2):
        if "nonpositive_V2" not in tbl.flags:
            tbl.flags.append("nonpositive_V2")
    return tbl


# --------------------------------------------------------------------------
# radial closed form
# --------------------------------------------------------------------------


def _log_v4_radial(p: RadialProfile, t: float, rtol: float = 1e-12):
    """``log int_{-inf}^t e^{4v}``, the tail below the cutoff and its status."""
    lo_dom = p.interior[0]
    if math.isfinite(lo_dom):
        tc = lo_dom
    else:
        tc = min(DEFAULT_WINDOW[0], t - 12.0)
    if t <= tc:
        raise DomainError(f"t = {t} is below the V4 integration cutoff {tc}")
    vt = float(p.v(t))
    bps = sorted({t - 2.0**j for j in range(-2, 8) if t - 2.0**j > tc}
                 | {b for b in p.features if tc < b < t})
    edges = [tc, *bps, t]
    if p.mode == "sampled":
        # composite Gauss-Legendre keeps the interpolant's local stencils smooth
        body = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            n = max(8, int(math.ceil((b - a) / p.h)) * 2)
            x, w = gauss_legendre(min(n, 4000), a, b)
            body += float(np.sum(w * np.exp(4.0 * (p.v(x) - vt))))
    else:
        # top segment first: it dominates, and sets the absolute scale for the rest
        body = 0.0
        for a, b in reversed(list(zip(edges[:-1], edges[1:]))):
            body += tanh_sinh(lambda s: np.exp(4.0 * (p.v(s) - vt)), a, b,
                              rtol=rtol * 1e-2, atol=max(rtol * 1e-2 * body, 1e-300))
    vc = float(p.v(tc))
    slope = float(p.d1(tc))
    if slope > 0:
        tail = math.exp(4.0 * (vc - vt)) / (4.0 * slope)
        resolved = True
    else:
        tail = 0.0
        resolved = False
    return 4.0 * vt + math.log(body + tail), tail, resolved


def radial_mixed_volumes(p: RadialProfile, r, rtol: float = 1e-12) -> MixedVolumeTable:
    """Closed-form mixed volumes of a radial profile at radii ``r``.

    ``V4 = |S^3| int_{-inf}^t e^{4v}`` (integrated from a cutoff plus the
    tail ``e^{4v(t_c)} / (4 v'(t_c))``), ``V3 = |S^3| e^{3v} / 4``,
    ``V2 = |S^3| v' e^{2v} / 4``, ``V1 = |S^3| v'^2 e^{v} / 4`` at
    ``t = log r``.
    """
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(radii <= 0):
        raise DomainError("radii must be positive")
    ts = np.log(radii)
    v = p.v(ts)
    d1 = p.d1(ts)
    logV4 = np.empty_like(ts)
    tails = np.empty_like(ts)
    resolved = np.empty(ts.shape, dtype=bool)
    for i, t in enumerate(ts):
        lv, tail, ok = _log_v4_radial(p, float(t), rtol)
        logV4[i] = math.log(SPHERE3_AREA) + lv
        tails[i] = tail
        resolved[i] = ok
    logV3 = _LOG_K + 3.0 * v
    with np.errstate(over="ignore"):
        tbl = MixedVolumeTable(
            radii=radii,
            V4=np.exp(logV4),
            V3=np.exp(logV3),
            V2=QUARTER_AREA * d1 * np.exp(2.0 * v),
            V1=QUARTER_AREA * d1**2 * np.exp(v),
            logV4=logV4,
            logV3=logV3,
            v4_tail=tails,
            v4_tail_resolved=resolved,
        )
    if not np.all(resolved):
        tbl.flags.append("v4_tail_unresolved")
    return iso_ratios(tbl)


def ratio_table_radial(p: RadialProfile, t) -> dict[str, np.ndarray]:
    """The six ratios at ``t`` (log radius) as float arrays, NaN where undefined."""
    tbl = radial_mixed_volumes(p, np.exp(np.asarray(t, dtype=float)))
    return {k: np.array([np.nan if x is None else x for x in tbl.C[k]]) for k in RATIO_KEYS}


# --------------------------------------------------------------------------
# general conformal factors
# --------------------------------------------------------------------------


class ConformalFactorLike(Protocol):
    def w(self, x: np.ndarray) -> np.ndarray: ...

    def dr_w(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FunctionFactor:
    """A conformal factor given by two vectorised callables on ``(N, 4)`` points."""

    w_func: Callable[[np.ndarray], np.ndarray]
    dr_func: Callable[[np.ndarray], np.ndarray]

    def w(self, x):
        return self.w_func(x)

    def dr_w(self, x):
        return self.dr_func(x)


@dataclass(frozen=True)
class RadialFactor:
    """Adapter presenting a radial profile as ``w(x) = v(log|x|) - log|x|``."""

    profile: RadialProfile

    def w(self, x):
        r = np.linalg.norm(x, axis=-1)
        t = np.log(r)
        return self.profile.v(t) - t

    def dr_w(self, x):
        r = np.linalg.norm(x, axis=-1)
        return (self.profile.d1(np.log(r)) - 1.0) / r


def _surface_terms(factor: ConformalFactorLike, r: float, order):
    pts, wts = sphere_rule(order)
    x = r * pts
    w = np.asarray(factor.w(x), dtype=float)
    k = 1.0 / r + np.asarray(factor.dr_w(x), dtype=float)
    r3 = r**3
    V3 = 0.25 * r3 * float(np.sum(wts * np.exp(3.0 * w)))
    V2 = 0.25 * r3 * float(np.sum(wts * k * np.exp(2.0 * w)))
    V1 = 0.25 * r3 * float(np.sum(wts * k * k * np.exp(w)))
    dV4 = r3 * float(np.sum(wts * np.exp(4.0 * w)))
    return V3, V2, V1, dV4


def shell_volume(
    factor: ConformalFactorLike,
    r: float,
    order=12,
    s_cut: float | None = None,
    panel: float = 1.0,
    nodes: int = 12,
) -> tuple[float, float, bool]:
    """``int_{B_r} e^{4w}`` by shells in ``s = log rho`` plus a tail estimate.

    Returns ``(V4, tail, tail_resolved)``. Below ``s_cut`` the shell mass
    ``e^{4s} mean(e^{4w})`` is extrapolated as a pure exponential whose
    rate is measured at the cutoff.
    """
    pts, wts = sphere_rule(order)
    s_top = math.log(r)
    if s_cut is None:
        s_cut = s_top - 12.0

    def shell(s):
        rho = math.exp(s)
        return rho**4 * float(np.sum(wts * np.exp(4.0 * np.asarray(factor.w(rho * pts)))))

    npan = max(1, int(math.ceil((s_top - s_cut) / panel)))
    edges = np.linspace(s_cut, s_top, npan + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(nodes, float(a), float(b))
        total += sum(wi * shell(float(xi)) for xi, wi in zip(x, w))
    d = 1e-3
    m0, m1 = shell(s_cut), shell(s_cut + d)
    rate = (math.log(m1) - math.log(m0)) / d if m0 > 0 and m1 > 0 else 0.0
    if rate > 0:
        return total + m0 / rate, m0 / rate, True
    return total, 0.0, False


def general_mixed_volumes(
    factor: ConformalFactorLike,
    r,
    quad_order=24,
    with_v4: bool = True,
    check_convergence: bool = False,
    rtol: float = 1e-8,
) -> MixedVolumeTable:
    """Mixed volumes of a possibly non-radial conformal factor.

    Surface terms use the product rule on S^3 of the given order; ``V4`` is
    integrated shell by shell (see :func:`shell_volume`). With
    ``check_convergence`` every surface term is recomputed at twice the
    order and a :class:`ConvergenceError` is raised if any moves by more
    than ``rtol``.
    """
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(radii <= 0):
        raise DomainError("radii must be positive")
    V4 = np.full(radii.shape, np.nan)
    V3 = np.empty_like(radii)
    V2 = np.empty_like(radii)
    V1 = np.empty_like(radii)
    tails = np.zeros_like(radii)
    res = np.ones(radii.shape, dtype=bool)
    for i, ri in enumerate(radii):
        V3[i], V2[i], V1[i], _ = _surface_terms(factor, float(ri), quad_order)
        if check_convergence:
            hi = quad_order * 2 if isinstance(quad_order, int) else tuple(2 * q for q in quad_order)
            ref = _surface_terms(factor, float(ri), hi)[:3]
            for a, b in zip((V3[i], V2[i], V1[i]), ref):
                if abs(a - b) > rtol * max(abs(b), 1e-300):
                    raise ConvergenceError(
                        f"sphere quadrature at r = {ri} not converged under order doubling"
                    )
        if with_v4:
            order4 = quad_order if isinstance(quad_order, tuple) else max(8, quad_order // 2)
            V4[i], tails[i], res[i] = shell_volume(factor, float(ri), order4)
    tbl = MixedVolumeTable(radii, V4, V3, V2, V1, v4_tail=tails, v4_tail_resolved=res)
    if with_v4:
        iso_ratios(tbl)
    else:
        tbl.flags.append("v4_not_computed")
    return tbl


def volume_derivative(factor: ConformalFactorLike, r: float, quad_order=24) -> float:
    """``dV4/dr = r^3 int_{S^3} e^{4w(r theta)} dtheta``."""
    return _surface_terms(factor, float(r), quad_order)[3]
