"""Rigorous upper and lower bounds on the free energy of directed polymers
in random media, computed through multiplicative-cascade tree models, with
localization and concentration diagnostics."""

from .env import EnvironmentModel, EnvironmentSlab, log_mgf, normalized_weight, sample_energy
from .transfer import (
    PathOracleResult,
    PolymerWeights,
    forward_step,
    initial_weights,
    partition_log,
    path_oracle,
    replica_scan,
    replica_slab_seed,
    run_chain,
    step_distribution,
)
from .cascade import (
    CascadeBoundResult,
    ThetaCurve,
    ThetaMoment,
    WeightVectorSamples,
    cascade_free_energy_path,
    constant_weight_sampler,
    curve_from_samples,
    curve_value,
    derivative_criterion,
    fractional_moment_curve,
    lognormal_weight_sampler,
    minimize_curve,
    polymer_cascade_sampler,
    polymer_weight_samples,
    scaled_slope,
    scaled_slope_derivative,
    simulate_cascade_martingale,
    theta_moment,
)
from .bounds import (
    BoundReport,
    Certificate,
    EntropyDoubling,
    LowerBoundRow,
    TreeBoundRow,
    bracket_critical_beta,
    build_bound_report,
    entropy_doubling_check,
    sandwich_gap,
    strong_disorder_certificate,
    superadditive_lower_bound,
    tree_bound_row,
    tree_upper_bound,
)
from .diagnostics import (
    ConcentrationRow,
    InfluenceReport,
    OverlapSeries,
    concentration_check,
    influence_check,
    occupation_probabilities,
    overlap_series,
)
from .errors import (
    BudgetError,
    DomainError,
    NumericError,
    ParameterError,
    PolycascError,
    UsageError,
)

__version__ = "0.1.0"
