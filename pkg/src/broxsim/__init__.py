"""broxsim: diffusion in a Brownian potential.

Simulation of the recurrent one-dimensional diffusion whose environment is
a two-sided Brownian path, built through the scale-function / time-change
representation, together with the environment valley decomposition, local
time estimators, Bessel-functional reference laws, and the statistical
experiments that compare the two.
"""

from .environment import (
    CrossingPair,
    EnvironmentPath,
    ShiftedPotential,
    ThresholdNotReached,
    Valley,
    ValleyNotContained,
    WindowCapExceeded,
    barrier,
    crossing_points,
    environment_profile,
    extend_environment,
    find_h_extrema,
    find_valley_with_widening,
    gibbs_weight_integral,
    laplace_equivalence_check,
    sample_environment,
    standard_valley,
)
from .diffusion import (
    DiffusionPath,
    DrivingPath,
    LocalTimeProfile,
    RangeExceeded,
    ScaleMap,
    StepBudgetExceeded,
    build_scale_map,
    favorite_point,
    hitting_time,
    inverse_local_time,
    invert_scale,
    local_time_occupation,
    local_time_transfer,
    profile_value_at,
    rescale_to_unit_valley,
    simulate_localtime_summary,
    simulate_path,
)
from .bessel import (
    BesselPath,
    FixedHorizon,
    FunctionalSample,
    LevelHorizon,
    TwoSidedBessel,
    besq2_hitting_time,
    functional_sample,
    profile_sample,
    rayknight_alias_sample,
    sample_bessel3,
    sample_two_sided,
)
from .stats import (
    KsResult,
    SampleSet,
    bootstrap_mean_ci,
    ecdf,
    ks_one_sample,
    ks_two_sample,
    trend_check,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    run_all,
    run_env_functional_approx,
    run_exponent_law,
    run_identity_check,
    run_position_density,
    run_profile_marginals,
    run_sup_localtime,
)

__version__ = "0.1.0"
