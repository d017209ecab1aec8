"""extorus: extreme-value statistics of hyperbolic torus maps.

Closed-form extremal indices, cluster-size laws, and compound counting
distributions for area-preserving hyperbolic integer torus maps,
validated against exact-arithmetic Monte Carlo simulation of the
dynamics.
"""

__version__ = "0.1.0"

from .errors import (
    DeterminantNotOne,
    ExtorusError,
    NoExceedances,
    NotHyperbolic,
    OutOfLocalRange,
    RadiusTooLarge,
    ShiftSetInsufficient,
    TooFewGaps,
)
from .formulas import (
    CompoundPoissonLaw,
    ExtremalModel,
    ThresholdSchedule,
    area_A_q,
    ball_measure,
    extremal_index,
    extremal_model,
    kac_rescale,
    multiplicity_pi,
    nested_area_U,
    polya_aeppli_pmf,
    radius_s_n,
    strip_area_Q,
    threshold_radius,
    threshold_u_n,
    wrap_time_g,
)
from .regions import (
    MeasureEstimate,
    RegionKind,
    RegionSpec,
    contains,
    dprime_sum_diagnostic,
    monte_carlo_measure,
    separation_check,
)
from .simulate import (
    ClusterSummary,
    ExperimentConfig,
    TrialRecord,
    chi_square_vs_pmf,
    decluster,
    decluster_all,
    ei_measure_ratio,
    empirical_extremal_index,
    empirical_multiplicity,
    estimate_block_maxima_cdf,
    gap_ks_statistic,
    repp_counts,
    run_experiment,
    run_trial,
)
from .torus import (
    Direction,
    ExactOrbitState,
    MetricKind,
    ToralAutomorphism,
    TorusPoint,
    build_automorphism,
    compute_period,
    observable_value,
    step_exact,
    torus_distance,
)

__all__ = [
    "__version__",
    "ExtorusError",
    "DeterminantNotOne",
    "NotHyperbolic",
    "ShiftSetInsufficient",
    "RadiusTooLarge",
    "OutOfLocalRange",
    "NoExceedances",
    "TooFewGaps",
    "MetricKind",
    "Direction",
    "ToralAutomorphism",
    "TorusPoint",
    "ExactOrbitState",
    "build_automorphism",
    "step_exact",
    "torus_distance",
    "observable_value",
    "compute_period",
    "ThresholdSchedule",
    "ExtremalModel",
    "CompoundPoissonLaw",
    "threshold_u_n",
    "threshold_radius",
    "radius_s_n",
    "ball_measure",
    "extremal_index",
    "extremal_model",
    "area_A_q",
    "strip_area_Q",
    "nested_area_U",
    "multiplicity_pi",
    "polya_aeppli_pmf",
    "wrap_time_g",
    "kac_rescale",
    "RegionKind",
    "RegionSpec",
    "MeasureEstimate",
    "contains",
    "monte_carlo_measure",
    "separation_check",
    "dprime_sum_diagnostic",
    "ExperimentConfig",
    "TrialRecord",
    "ClusterSummary",
    "run_trial",
    "run_experiment",
    "estimate_block_maxima_cdf",
    "decluster",
    "decluster_all",
    "empirical_extremal_index",
    "empirical_multiplicity",
    "gap_ks_statistic",
    "repp_counts",
    "chi_square_vs_pmf",
    "ei_measure_ratio",
]
