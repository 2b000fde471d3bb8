"""Closed-form test metrics with known ground truth.

Every entry returns a :class:`CatalogEntry` holding an analytic
:class:`~qcurv.radial_core.RadialProfile` and the values a correct pipeline
must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfc, erfcx

from .errors import DomainError
from .radial_core import ConformalDensity, RadialProfile

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class CatalogEntry:
    """A registered metric together with its known values.

    ``known`` may hold ``nu``, ``mu``, ``total_q``, ``c0`` .. ``c3`` and
    ``violates_hypothesis``. ``R`` is the scalar curvature as a function
    of ``r = |x|``.
    """

    id: str
    params: dict
    profile: RadialProfile
    known: dict
    R: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    description: str = ""


def cone(alpha: float, c0: float = 0.0) -> CatalogEntry:
    """The cone metric ``delta_ij + alpha x_i x_j / r^2``, conformally flat.

    Written conformally, ``w(r) = (nu - 1) log r + c0`` with
    ``nu = 1/sqrt(1 + alpha)``, so ``v(t) = c0 + nu t``.
    """
    alpha = float(alpha)
    if not alpha > -1.0:
        raise DomainError("cone needs alpha > -1")
    nu = 1.0 / math.sqrt(1.0 + alpha)

    def zero(t):
        return np.zeros_like(np.asarray(t, dtype=float))

    prof = RadialProfile.analytic(
        (
            lambda t: c0 + nu * np.asarray(t, dtype=float),
            lambda t: np.full_like(np.asarray(t, dtype=float), nu),
            zero,
            zero,
            zero,
        ),
        density=ConformalDensity.zero(),
        name="cone",
        params={"alpha": alpha, "c0": c0},
    )

    def R(r):
        r = np.asarray(r, dtype=float)
        w = (nu - 1.0) * np.log(r) + c0
        return 6.0 * alpha * np.exp(-2.0 * w) / ((1.0 + alpha) * r**2)

    known = {
        "nu": nu,
        "mu": nu - 1.0,
        "total_q": 0.0,
        "c0": c0,
        "c1": nu,
        "c2": 0.0,
        "c3": 0.0,
        "violates_hypothesis": False,
    }
    return CatalogEntry("cone", {"alpha": alpha, "c0": c0}, prof, known, R,
                        "flat cone over the round 3-sphere")


def euclidean() -> CatalogEntry:
    e = cone(0.0)
    return CatalogEntry("euclidean", {}, e.profile, e.known, e.R, "flat R^4")


def gaussian_end() -> CatalogEntry:
    """The metric ``e^{2 r^2} |dx|^2``: Q vanishes but ``c3 = 1``."""

    def ex(t):
        return np.exp(2.0 * np.asarray(t, dtype=float))

    prof = RadialProfile.analytic(
        (
            lambda t: np.asarray(t, dtype=float) + ex(t),
            lambda t: 1.0 + 2.0 * ex(t),
            lambda t: 4.0 * ex(t),
            lambda t: 8.0 * ex(t),
            lambda t: 16.0 * ex(t),
        ),
        name="gaussian_end",
    )

    def R(r):
        r = np.asarray(r, dtype=float)
        return -(48.0 + 24.0 * r**2) * np.exp(-2.0 * r**2)

    known = {
        "total_q": 0.0,
        "c0": 0.0,
        "c1": 1.0,
        "c2": 0.0,
        "c3": 1.0,
        "violates_hypothesis": True,
    }
    return CatalogEntry("gaussian_end", {}, prof, known, R,
                        "e^{2r^2}|dx|^2, negative scalar curvature at infinity")


def _upper_tail(z):
    """``P(Z > z)`` for a standard normal, split so ``exp`` never overflows."""
    return 0.5 * erfc(z / _SQRT2)


def _scaled_tail(log_pref, z):
    """``exp(log_pref) * P(Z > z)`` without overflow or underflow loss."""
    z = np.asarray(z, dtype=float)
    log_pref = np.asarray(log_pref, dtype=float)
    zs = z / _SQRT2
    pos = zs > 0
    with np.errstate(over="ignore", under="ignore"):
        big = 0.5 * erfcx(np.where(pos, zs, 0.0)) * np.exp(log_pref - np.where(pos, zs, 0.0) ** 2)
        small = 0.5 * erfc(np.where(pos, 0.0, zs)) * np.exp(log_pref)
    return np.where(pos, big, small)


def _bump_pieces(t, M, c, s):
    """Half-line integrals of the Gaussian density in closed form.

    Returns ``P, N, L, T`` with ``P = e^{2t} int_t^inf F e^{-2x}``,
    ``N = e^{-2t} int_{-inf}^t F e^{2x}``, ``L = int_{-inf}^t F`` and
    ``T = int_{-inf}^t (t - x) F``.
    """
    t = np.asarray(t, dtype=float)
    P = M * _scaled_tail(2.0 * (t - c) + 2.0 * s * s, (t - c + 2.0 * s * s) / s)
    N = M * _scaled_tail(2.0 * (c - t) + 2.0 * s * s, (c + 2.0 * s * s - t) / s)
    z = (t - c) / s
    L = M * _upper_tail(-z)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    T = M * ((t - c) * _upper_tail(-z) + s * phi)
    return P, N, L, T


def bump_normal(mass: float, center_t: float = 0.0, width: float = 1.0,
                alpha: float = 0.0, C: float = 0.0) -> CatalogEntry:
    """Radial generalised normal metric whose density ``F`` is a Gaussian.

    ``F(t) = mass * N(center_t, width^2)`` and

        v(t) = (1 + alpha) t - P/16 - N/16 - T/4 + C

    which solves ``v'''' - 4 v'' = F`` with ``v' -> 1 + alpha`` at ``-inf``
    and ``v' -> 1 + alpha - mass/4`` at ``+inf``.
    """
    M, c, s, a = float(mass), float(center_t), float(width), float(alpha)
    if not s > 0 or not math.isfinite(M):
        raise DomainError("bump_normal needs a finite mass and a positive width")
    if not a > -1.0:
        raise DomainError("bump_normal needs alpha > -1 for finite area")
    dens = ConformalDensity.gaussian(M, c, s)

    def v(t):
        t = np.asarray(t, dtype=float)
        P, N, _, T = _bump_pieces(t, M, c, s)
        return (1.0 + a) * t - P / 16.0 - N / 16.0 - T / 4.0 + C

    def v1(t):
        P, N, L, _ = _bump_pieces(t, M, c, s)
        return 1.0 + a + (N - P) / 8.0 - L / 4.0

    def v2(t):
        P, N, _, _ = _bump_pieces(t, M, c, s)
        return -(P + N) / 4.0

    def v3(t):
        P, N, _, _ = _bump_pieces(t, M, c, s)
        return (N - P) / 2.0

    def v4(t):
        P, N, _, _ = _bump_pieces(t, M, c, s)
        return dens(t) - (P + N)

    params = {"mass": M, "center_t": c, "width": s, "alpha": a, "C": C}
    prof = RadialProfile.analytic(
        (v, v1, v2, v3, v4), density=dens, features=dens.breakpoints,
        name="bump_normal", params=params,
    )

    def R(r):
        t = np.log(np.asarray(r, dtype=float))
        return 6.0 * np.exp(-2.0 * v(t)) * (1.0 - v2(t) - v1(t) ** 2)

    known = {
        "nu": 1.0 + a - M / 4.0,
        "mu": a,
        "total_q": M / 4.0,
        "c0": float(v(0.0)),
        "c1": 1.0 + a - M / 8.0,
        "c2": 0.0,
        "c3": 0.0,
        "violates_hypothesis": False,
    }
    return CatalogEntry("bump_normal", params, prof, known, R,
                        "radial normal metric with Gaussian density in log r")


_REGISTRY: dict[str, tuple[Callable[..., CatalogEntry], dict]] = {
    "cone": (cone, {"alpha": 3.0}),
    "euclidean": (euclidean, {}),
    "gaussian_end": (gaussian_end, {}),
    "bump_normal": (bump_normal, {"mass": 0.8, "center_t": 0.0, "width": 1.0, "alpha": 0.0}),
}


def get(entry_id: str, **params) -> CatalogEntry:
    """Build a registered entry by id; missing parameters take their defaults."""
    try:
        factory, defaults = _REGISTRY[entry_id]
    except KeyError:
        raise DomainError(f"unknown catalog id {entry_id!r}; known: {sorted(_REGISTRY)}") from None
    unknown = set(params) - set(defaults) - ({"c0"} if entry_id == "cone" else set()) \
        - ({"C"} if entry_id == "bump_normal" else set())
    if unknown:
        raise DomainError(f"unknown parameters for {entry_id}: {sorted(unknown)}")
    return factory(**{**defaults, **params})


def list_catalog() -> list[dict]:
    """Ids, default parameters and one-line descriptions, sorted by id."""
    out = []
    for key in sorted(_REGISTRY):
        factory, defaults = _REGISTRY[key]
        e = factory(**defaults)
        out.append({"id": key, "defaults": dict(defaults), "description": e.description})
    return out


def standard_entries() -> list[CatalogEntry]:
    """Profiles used by the regression suite (all satisfy the hypotheses)."""
    out = [cone(a) for a in (-0.75, -0.5, 0.0, 1.0, 3.0)]
    out += [
        bump_normal(0.8, 0.0, 1.0, 0.0),
        bump_normal(-0.8, 0.5, 0.7, 0.0),
        bump_normal(1.2, -1.0, 0.8, 0.5),
    ]
    return out
