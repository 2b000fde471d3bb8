"""Limits of slowly settling sequences sampled at geometric probes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DEFAULT_PROBES = tuple(2.0**k for k in range(1, 7))  # 2 .. 64


@dataclass(frozen=True)
class LimitEstimate:
    value: float
    converged: bool
    method: str
    probes: tuple
    sequence: tuple

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "converged": self.converged,
            "method": self.method,
            "probes": list(self.probes),
            "sequence": list(self.sequence),
        }


def aitken(a0: float, a1: float, a2: float) -> float:
    """Aitken's delta-squared value for three successive terms."""
    d = (a2 - a1) - (a1 - a0)
    if d == 0.0 or not math.isfinite(d):
        return a2
    return a2 - (a2 - a1) ** 2 / d


def settle(seq: Sequence[float], tol: float) -> tuple[float, bool, str]:
    """Accept the last term when the last three agree within ``tol``.

    Otherwise return Aitken's extrapolant of the last three and mark the
    estimate as not converged.
    """
    s = [float(x) for x in seq if x is not None and math.isfinite(x)]
    if len(s) < 3:
        return (s[-1] if s else math.nan), False, "insufficient"
    last = s[-3:]
    scale = max(1.0, abs(last[-1]))
    if max(last) - min(last) <= tol * scale:
        return last[-1], True, "probe"
    acc = aitken(*last)
    return acc, False, "aitken"


def probe_limit(
    g: Callable[[np.ndarray], np.ndarray],
    direction: int,
    tol: float = 1e-10,
    probes: Sequence[float] = DEFAULT_PROBES,
    window: tuple[float, float] | None = None,
) -> LimitEstimate:
    """Limit of ``g(t)`` as ``t -> direction * inf``.

    ``g`` is evaluated at ``direction * p`` for each probe ``p``. Probes
    outside ``window`` are dropped and a finite window edge takes their place.
    """
    pts = [direction * p for p in probes]
    if window is not None:
        lo, hi = window
        edge = hi if direction > 0 else lo
        kept = [t for t in pts if lo <= t <= hi]
        if math.isfinite(edge) and (not kept or kept[-1] != edge):
            kept.append(edge)
        pts = kept
    ts = np.asarray(pts, dtype=float)
    vals = np.asarray(g(ts), dtype=float)
    value, ok, method = settle(vals, tol)
    return LimitEstimate(float(value), ok, method, tuple(ts.tolist()), tuple(vals.tolist()))
