"""Numerical checks of Chern-Gauss-Bonnet formulas for conformally flat 4-metrics.

The package evaluates the Q-curvature deficit of radial metrics
``e^{2w(|x|)}|dx|^2`` on R^4 minus the origin, the isoperimetric ratios of
mixed volumes, generalised normal metrics built from a Q-measure, and the
local and glued versions of the identity.
"""

from . import catalog
from .cgb import (
    DeficitReport,
    ManifoldReport,
    ManifoldSpec,
    deficit,
    extract_limits,
    local_end_identity,
    local_sing_identity,
    manifold_assemble,
    pieces_from_profile,
    radial_boundary_T,
    subtraction_check,
)
from .errors import (
    ConvergenceError,
    DomainError,
    HypothesisViolation,
    IllConditionedFit,
    OnSphereError,
    QCurvError,
    ScenarioError,
    StencilError,
)
from .mixed_volumes import (
    MixedVolumeTable,
    general_mixed_volumes,
    iso_ratios,
    radial_mixed_volumes,
)
from .normal_metric import (
    ConformalFactor,
    NormalMetricSpec,
    OffcenterBlob,
    RadialBump,
    Shell,
    averaged_factor,
    kbar,
    kernel_sphere_average,
    laplacian_avg_bound,
    lemma1_ratio,
    lemma2_moments,
    volume_ratios,
)
from .radial_core import (
    AsymptoticDecomposition,
    ConformalDensity,
    RadialProfile,
    asymptotic_decomposition,
    decay_limits,
    ode_residual,
    particular_solution_derivs,
    profile_from_density,
    q_density_from_profile,
    scalar_curvature_radial,
    total_q,
)
from .runner import run_scenario, verify_all

__version__ = "0.1.0"

__all__ = [
    "AsymptoticDecomposition",
    "ConformalDensity",
    "ConformalFactor",
    "ConvergenceError",
    "DeficitReport",
    "DomainError",
    "HypothesisViolation",
    "IllConditionedFit",
    "ManifoldReport",
    "ManifoldSpec",
    "MixedVolumeTable",
    "NormalMetricSpec",
    "OffcenterBlob",
    "OnSphereError",
    "QCurvError",
    "RadialBump",
    "RadialProfile",
    "ScenarioError",
    "Shell",
    "StencilError",
    "asymptotic_decomposition",
    "averaged_factor",
    "catalog",
    "decay_limits",
    "deficit",
    "extract_limits",
    "general_mixed_volumes",
    "iso_ratios",
    "kbar",
    "kernel_sphere_average",
    "laplacian_avg_bound",
    "lemma1_ratio",
    "lemma2_moments",
    "local_end_identity",
    "local_sing_identity",
    "manifold_assemble",
    "ode_residual",
    "particular_solution_derivs",
    "pieces_from_profile",
    "profile_from_density",
    "q_density_from_profile",
    "radial_boundary_T",
    "radial_mixed_volumes",
    "run_scenario",
    "scalar_curvature_radial",
    "subtraction_check",
    "total_q",
    "verify_all",
    "volume_ratios",
]
