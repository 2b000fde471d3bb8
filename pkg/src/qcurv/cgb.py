"""Chern-Gauss-Bonnet bookkeeping for radial ends and singular regions.

On ``R^4 \\ {0}`` with a complete end at infinity and a finite-area
singular point at the origin::

    chi - (1/4 pi^2) int Q e^{4w} dx = nu - mu

where ``nu = lim_{t->inf} v'`` and ``1 + mu = lim_{t->-inf} v'``. The radial
boundary term on ``|x| = e^{t0}`` is ``T(t0) = v'(t0) - v'''(t0)/4``; it
splits the identity into a local statement on each side of the sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .errors import DomainError, HypothesisViolation
from .limits import LimitEstimate, probe_limit, settle
from .mixed_volumes import RATIO_KEYS, ratio_table_radial
from .quadrature import SPHERE3_AREA
from .radial_core import (
    AsymptoticDecomposition,
    RadialProfile,
    asymptotic_decomposition,
    scaled_scalar_curvature,
    total_q,
)

ANALYTIC_TOL = 1e-10
SAMPLED_TOL = 1e-6


def _limit_tol(p: RadialProfile) -> float:
    return ANALYTIC_TOL if p.mode == "analytic" else SAMPLED_TOL


@dataclass
class Limits:
    """Tail limits of ``v'`` with their provenance."""

    nu: float | None
    mu: float | None
    nu_estimate: LimitEstimate | None
    mu_estimate: LimitEstimate | None
    ratio_limits: dict[str, tuple[float | None, float | None]]
    decomposition: AsymptoticDecomposition
    warnings: list[str] = field(default_factory=list)

    def ratio_spread(self) -> tuple[float | None, float | None]:
        """Largest pairwise disagreement among the extrapolated ``nu_kl`` and ``mu_kl``."""
        out = []
        for j in (0, 1):
            vals = [v[j] for v in self.ratio_limits.values() if v[j] is not None]
            out.append(max(vals) - min(vals) if len(vals) == len(self.ratio_limits) and vals else None)
        return out[0], out[1]


def check_growth_modes(dec: AsymptoticDecomposition, rel: float = 1e-6) -> None:
    """Raise :class:`HypothesisViolation` when ``c2`` or ``c3`` exceed the threshold."""
    thr = dec.growth_threshold(rel)
    bad = []
    if abs(dec.c3) > thr:
        bad.append(f"c3 ≈ {dec.c3:.3g}")
    if abs(dec.c2) > thr:
        bad.append(f"c2 ≈ {dec.c2:.3g}")
    if bad:
        raise HypothesisViolation(
            "Lemma 2.2 hypothesis violated, " + ", ".join(bad)
            + f" (threshold {thr:.3g}); the tail limits of v' are not the deficits",
            dec.c2,
            dec.c3,
        )


def _curvature_warnings(p: RadialProfile, side: str) -> list[str]:
    lo, hi = p.working_window()
    out = []
    decade = math.log(10.0)
    with np.errstate(all="ignore"):
        if side in ("both", "right"):
            ts = np.linspace(max(lo, hi - decade), hi, 17)
            if np.min(scaled_scalar_curvature(p, ts)) < -1e-9:
                out.append("scalar curvature negative on the outermost decade")
        if side in ("both", "left"):
            ts = np.linspace(lo, min(hi, lo + decade), 17)
            if np.min(scaled_scalar_curvature(p, ts)) < -1e-9:
                out.append("scalar curvature negative on the innermost decade")
    return out


def extract_limits(
    p: RadialProfile,
    side: str = "both",
    with_ratios: bool = True,
    tol: float | None = None,
    rel_threshold: float = 1e-6,
) -> Limits:
    """``nu = lim_{t->inf} v'`` and ``mu = lim_{t->-inf} v' - 1``.

    The growth modes ``e^{+-2t}`` are fitted first and must vanish. Each
    limit is read from ``v'`` at ``t = +-2^k``; if the probes do not settle
    it falls back to ``c1 -+ (1/8) int F``. With ``with_ratios`` every
    isoperimetric ratio is extrapolated the same way, giving ``nu_kl``
    and ``mu_kl = lim C_kl - 1``.
    """
    tol = _limit_tol(p) if tol is None else tol
    dec = asymptotic_decomposition(p, side=side)
    check_growth_modes(dec, rel_threshold)
    warnings = _curvature_warnings(p, side)
    F = p.density
    M = F.total()
    window = p.working_window() if getattr(p, "_window", None) else p.interior
    nu = mu = None
    nu_est = mu_est = None
    if side in ("both", "right"):
        nu_est = probe_limit(p.d1, +1, tol=tol, window=window)
        nu = nu_est.value
        if not nu_est.converged:
            nu = dec.c1 - M / 8.0
            warnings.append("v' probes did not settle at +inf; used c1 - (1/8) int F")
    if side in ("both", "left"):
        mu_est = probe_limit(p.d1, -1, tol=tol, window=window)
        mu = mu_est.value - 1.0
        if not mu_est.converged:
            mu = dec.c1 + M / 8.0 - 1.0
            warnings.append("v' probes did not settle at -inf; used c1 + (1/8) int F")
    ratio_limits: dict[str, tuple[float | None, float | None]] = {}
    if with_ratios:
        lo, hi = window
        inner = (lo + 0.5, hi) if math.isfinite(lo) else (lo, hi)
        probes = {}
        for d in (+1, -1):
            if (d > 0 and side == "left") or (d < 0 and side == "right"):
                continue
            ts = [d * 2.0**k for k in range(1, 7)]
            ts = [t for t in ts if inner[0] <= t <= inner[1]]
            edge = inner[1] if d > 0 else inner[0]
            if math.isfinite(edge) and (not ts or ts[-1] != edge):
                ts.append(edge)
            probes[d] = ts
        tables = {d: ratio_table_radial(p, np.array(ts)) for d, ts in probes.items()}
        for key in RATIO_KEYS:
            lims = []
            for d in (+1, -1):
                if d not in tables:
                    lims.append(None)
                    continue
                seq = tables[d][key]
                if np.any(np.isnan(seq)):
                    lims.append(None)
                    continue
                val, ok, _ = settle(seq, max(tol, 1e-9))
                if not ok:
                    warnings.append(f"C{key} probes did not settle at {'+' if d > 0 else '-'}inf")
                lims.append(val if d > 0 else val - 1.0)
            ratio_limits[key] = (lims[0], lims[1])
    return Limits(nu, mu, nu_est, mu_est, ratio_limits, dec, warnings)


@dataclass
class DeficitReport:
    chi: int
    total_q: float
    nu: float
    mu: float
    residual: float
    ratio_limits: dict[str, tuple[float | None, float | None]]
    c0: float
    c1: float
    c2: float
    c3: float
    fit_residual: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chi": self.chi,
            "total_q": self.total_q,
            "nu": self.nu,
            "mu": self.mu,
            "residual": self.residual,
            "ratio_limits": {
                f"C{k}": {"nu": v[0], "mu": v[1]} for k, v in self.ratio_limits.items()
            },
            "decomposition": {
                "c0": self.c0,
                "c1": self.c1,
                "c2": self.c2,
                "c3": self.c3,
                "fit_residual": self.fit_residual,
            },
            "warnings": list(self.warnings),
        }


def deficit(p: RadialProfile, chi: int = 1, with_ratios: bool = True) -> DeficitReport:
    """Residual of ``chi - total_q - (nu - mu)`` for a radial profile on ``R^4 \\ {0}``."""
    lim = extract_limits(p, "both", with_ratios=with_ratios)
    tq = total_q(p.density)
    res = chi - tq - (lim.nu - lim.mu)
    d = lim.decomposition
    return DeficitReport(
        chi=int(chi),
        total_q=tq,
        nu=lim.nu,
        mu=lim.mu,
        residual=res,
        ratio_limits=lim.ratio_limits,
        c0=d.c0,
        c1=d.c1,
        c2=d.c2,
        c3=d.c3,
        fit_residual=d.residual,
        warnings=lim.warnings,
    )


def radial_boundary_T(p: RadialProfile, t0) -> np.ndarray:
    """``(1/4 pi^2) |S^3| (2 v' - v'''/2)`` at ``t0``, i.e. ``v' - v'''/4``."""
    t0 = np.asarray(t0, dtype=float)
    return SPHERE3_AREA / (4.0 * math.pi**2) * (2.0 * p.d1(t0) - 0.5 * p.d3(t0))


@dataclass(frozen=True)
class LocalIdentity:
    residual: float
    boundary: float
    q_part: float
    limit: float


def local_end_identity(p: RadialProfile, t0: float, nu: float | None = None) -> LocalIdentity:
    """``T(t0) - (1/4) int_{t0}^inf F - nu`` for the end ``|x| >= e^{t0}``."""
    if nu is None:
        nu = extract_limits(p, "right", with_ratios=False).nu
    T = float(radial_boundary_T(p, t0))
    q = 0.25 * float(p.density.right_mass(t0))
    return LocalIdentity(T - q - nu, T, q, nu)


def local_sing_identity(p: RadialProfile, t0: float, mu: float | None = None) -> LocalIdentity:
    """``T(t0) + (1/4) int_{-inf}^{t0} F - (1 + mu)`` for the ball ``|x| <= e^{t0}``."""
    if mu is None:
        mu = extract_limits(p, "left", with_ratios=False).mu
    T = float(radial_boundary_T(p, t0))
    q = 0.25 * float(p.density.left_mass(t0))
    return LocalIdentity(T + q - (1.0 + mu), T, q, 1.0 + mu)


@dataclass
class ManifoldSpec:
    """A compact core with radial ends and radial singular regions attached.

    Each end occupies ``|x| >= glue_radius`` of its profile's coordinates and
    each singular region ``|x| <= glue_radius``. ``glued`` lists
    ``(end index, sing index)`` pairs that share a boundary sphere directly
    (no core in between); ``core_boundary_T`` optionally supplies the core's
    boundary term on each piece's sphere, ends first, for the cancellation
    check.
    """

    chi: int
    ends: list[RadialProfile] = field(default_factory=list)
    sings: list[RadialProfile] = field(default_factory=list)
    weyl_energy: float = 0.0
    interior_q: float = 0.0
    glue_radius: float = 1.0
    glued: list[tuple[int, int]] | None = None
    core_boundary_T: list[float] | None = None

    def __post_init__(self):
        if self.weyl_energy < 0:
            raise DomainError("Weyl energy must be non-negative")
        if not self.glue_radius > 0:
            raise DomainError("glue radius must be positive")
        if self.glued is None and not self.core_boundary_T and len(self.ends) == 1 \
                and len(self.sings) == 1 and self.interior_q == 0.0:
            self.glued = [(0, 0)]


@dataclass
class ManifoldReport:
    chi: int
    weyl_term: float
    q_total: float
    sum_nu: float
    sum_mu: float
    residual: float
    piece_q: list[float]
    boundary_mismatch: float | None
    consistent: bool
    warnings: list[str]

    def to_dict(self) -> dict:
        return {
            "chi": self.chi,
            "weyl_term": self.weyl_term,
            "q_total": self.q_total,
            "sum_nu": self.sum_nu,
            "sum_mu": self.sum_mu,
            "residual": self.residual,
            "piece_q": list(self.piece_q),
            "boundary_mismatch": "not checked" if self.boundary_mismatch is None else self.boundary_mismatch,
            "consistent": self.consistent,
            "warnings": list(self.warnings),
        }


def manifold_assemble(m: ManifoldSpec, tol: float = 1e-6, boundary_tol: float | None = None) -> ManifoldReport:
    """``chi - (1/32 pi^2) int (|W|^2 + 8Q) - (sum nu - sum mu)`` over all pieces.

    The Q integral of an end is taken over ``t >= t0`` and of a singular
    region over ``t <= t0`` with ``t0 = log glue_radius``. Boundary terms of
    directly glued pieces are compared with the same orientation.
    """
    t0 = math.log(m.glue_radius)
    warnings: list[str] = []
    piece_q = []
    nus, mus, T_end, T_sing = [], [], [], []
    sampled = False
    for i, p in enumerate(m.ends):
        sampled |= p.mode == "sampled"
        if not p.is_complete():
            raise DomainError(f"end {i} is not complete at infinity")
        lim = extract_limits(p, "right", with_ratios=False)
        warnings += [f"end {i}: {w}" for w in lim.warnings]
        nus.append(lim.nu)
        piece_q.append(0.25 * float(p.density.right_mass(t0)))
        T_end.append(float(radial_boundary_T(p, t0)))
    for j, p in enumerate(m.sings):
        sampled |= p.mode == "sampled"
        if not p.has_finite_area():
            raise DomainError(f"singular region {j} does not have finite area")
        lim = extract_limits(p, "left", with_ratios=False)
        warnings += [f"sing {j}: {w}" for w in lim.warnings]
        mus.append(lim.mu)
        piece_q.append(0.25 * float(p.density.left_mass(t0)))
        T_sing.append(float(radial_boundary_T(p, t0)))
    weyl = m.weyl_energy / (32.0 * math.pi**2)
    q_total = m.interior_q + sum(piece_q)
    residual = m.chi - weyl - q_total - (sum(nus) - sum(mus))
    mismatch = None
    if m.glued:
        mismatch = max(abs(T_end[i] - T_sing[j]) for i, j in m.glued)
    elif m.core_boundary_T:
        if len(m.core_boundary_T) != len(T_end) + len(T_sing):
            raise DomainError("core_boundary_T needs one value per piece, ends first")
        mismatch = max(abs(a - b) for a, b in zip(m.core_boundary_T, T_end + T_sing))
    if boundary_tol is None:
        boundary_tol = 1e-4 if sampled else 1e-8
    consistent = abs(residual) < tol and (mismatch is None or mismatch < boundary_tol)
    if abs(residual) >= tol:
        warnings.append(f"inconsistent input: residual {residual:.6g}")
    return ManifoldReport(
        chi=int(m.chi),
        weyl_term=weyl,
        q_total=q_total,
        sum_nu=float(sum(nus)),
        sum_mu=float(sum(mus)),
        residual=residual,
        piece_q=piece_q,
        boundary_mismatch=mismatch,
        consistent=consistent,
        warnings=warnings,
    )


def pieces_from_profile(p: RadialProfile, chi: int = 1, glue_radius: float = 1.0) -> ManifoldSpec:
    """``R^4 \\ {0}`` split along ``|x| = glue_radius`` into one end and one singular region."""
    return ManifoldSpec(chi=chi, ends=[p], sings=[p], glue_radius=glue_radius)


def subtraction_check(p: RadialProfile, t0: float, chi: int = 1) -> tuple[float, float]:
    """``(end - sing, deficit residual)``; they agree for any ``t0``."""
    lim = extract_limits(p, "both", with_ratios=False)
    e = local_end_identity(p, t0, lim.nu).residual
    s = local_sing_identity(p, t0, lim.mu).residual
    res = chi - total_q(p.density) - (lim.nu - lim.mu)
    return e - s + (chi - 1), res
