"""wslab: a numerical laboratory for Sobolev calculus on discrete measures.

Core modules:

- ``norms``     — norm/cost specifications, duality maps, direction dictionaries
- ``measures``  — discrete measures, mollifiers, moments, sampling
- ``transport`` — Kantorovich problems, dual potentials, potential estimates
- ``cylinder``  — cylinder functions, differentials, metric-slope probes
- ``energy``    — pre-Cheeger energies, Boas inequalities, convexity moduli
- ``approx``    — max-of-potentials dictionaries and convergence reports
- ``config`` / ``experiments`` / ``service`` / ``cli`` — runnable suites
"""

from __future__ import annotations

__version__ = "0.1.0"

from .config import EXPERIMENT_KINDS, ConfigError, ExperimentConfig, load_config, parse_config
from .cylinder import (
    ClampedLinear,
    ClampedPolynomial,
    CombinedOuter,
    CylinderFunction,
    GaussianBump,
    IdentityClampOuter,
    PolynomialOuter,
    ReindexedOuter,
    differential,
    differential_norm,
    eval_cylinder,
    geodesic_interpolate,
    slope_lower_bound,
    slope_upper_probe,
)
from .energy import (
    BoasParams,
    boas_qsum_preservation,
    boas_residual,
    clarkson_params,
    convexity_modulus_probe,
    pre_cheeger,
    sobolev_functional,
)
from .approx import (
    PotentialDictionary,
    build_dictionary,
    convergence_report,
    f_nu_eps,
    g_k,
    g_profile,
    project_measure,
)
from .experiments import ExperimentResult, run_experiment
from .measures import (
    DiscreteMeasure,
    MetaMeasure,
    MollifierSpec,
    kernel_moment,
    moment_p,
    mollified_expectation,
    sample_mollified,
)
from .norms import (
    CostSpec,
    NormSpec,
    approx_duality_map,
    direction_dictionary,
    duality_map,
    euclidean,
    eval_dual_norm,
    eval_norm,
    one_norm,
    p_norm,
    smoothed,
    weighted_p,
)
from .transport import (
    KantorovichPotentials,
    TransportSolution,
    c_superdifferential_members,
    c_transform,
    check_potential_estimates,
    dual_potentials,
    solve_ot,
)

__all__ = [
    "__version__",
    "EXPERIMENT_KINDS",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "ClampedLinear",
    "ClampedPolynomial",
    "CombinedOuter",
    "CylinderFunction",
    "GaussianBump",
    "IdentityClampOuter",
    "PolynomialOuter",
    "ReindexedOuter",
    "differential",
    "differential_norm",
    "eval_cylinder",
    "geodesic_interpolate",
    "slope_lower_bound",
    "slope_upper_probe",
    "BoasParams",
    "boas_qsum_preservation",
    "boas_residual",
    "clarkson_params",
    "convexity_modulus_probe",
    "pre_cheeger",
    "sobolev_functional",
    "PotentialDictionary",
    "build_dictionary",
    "convergence_report",
    "f_nu_eps",
    "g_k",
    "g_profile",
    "project_measure",
    "ExperimentResult",
    "run_experiment",
    "DiscreteMeasure",
    "MetaMeasure",
    "MollifierSpec",
    "kernel_moment",
    "moment_p",
    "mollified_expectation",
    "sample_mollified",
    "CostSpec",
    "NormSpec",
    "approx_duality_map",
    "direction_dictionary",
    "duality_map",
    "euclidean",
    "eval_dual_norm",
    "eval_norm",
    "one_norm",
    "p_norm",
    "smoothed",
    "weighted_p",
    "KantorovichPotentials",
    "TransportSolution",
    "c_superdifferential_members",
    "c_transform",
    "check_potential_estimates",
    "dual_potentials",
    "solve_ot",
]
