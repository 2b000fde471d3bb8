"""The metric e^{2 r^2}|dx|^2: zero Q-curvature but no deficit identity.

Here ``v(t) = t + e^{2t}`` solves the homogeneous equation, so the Q-density
vanishes, yet ``v'`` has no finite limit at infinity. The fitted growth
coefficient ``c3`` is 1 and limit extraction refuses the profile.
"""

import math

import numpy as np

from qcurv import HypothesisViolation, asymptotic_decomposition, catalog, extract_limits
from qcurv.radial_core import q_density_from_profile, scalar_curvature_radial

p = catalog.gaussian_end().profile
ts = np.linspace(-12, 12, 241)
print("sup |F| on [-12, 12]:", np.max(np.abs(q_density_from_profile(p, check=False)(ts))))
print("R(1) =", float(scalar_curvature_radial(p, 0.0)), " closed form", -72 * math.exp(-2))
print("fitted c3 =", asymptotic_decomposition(p).c3)
try:
    extract_limits(p)
except HypothesisViolation as exc:
    print("refused:", exc)
