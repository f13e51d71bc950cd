"""Stochastic blockwise splitting with certified regularity.

Forward-backward and Douglas-Rachford maps act on a random subset of
coordinate blocks per iteration; the induced Markov chain is simulated
as a particle ensemble and its distributional convergence is measured
in a probability-weighted Wasserstein-2 distance.  Regularity
(averagedness up to a violation), paracontraction in expectation, and
error-bound gauges are certified empirically on sampled regions.
"""

from .blockspace import (
    BlockLayout,
    BlockProbabilities,
    BlockSubsetScheme,
    block_probabilities,
    chain_rng,
    weighted_norm,
    weighted_sq,
)
from .errors import (
    BlocksplitError,
    ConfigError,
    DegenerateSequence,
    DimensionMismatch,
    EmptyResolvent,
    InadmissibleGauge,
    InnerSolveDiverged,
    InvalidFixedPoints,
    NoEligibleSamples,
    NotPSD,
    OutOfDomain,
    SolverFailure,
    UncoveredBlock,
    UnsupportedSet,
)
from .markov import (
    Ensemble,
    RunResult,
    init_ensemble,
    point_sampler,
    read_snapshot,
    read_trajectory_csv,
    run,
    sbi_step,
    uniform_box_sampler,
    write_snapshot,
    write_trajectory_csv,
)
from .operators import (
    BlockFunction,
    SeparableTerm,
    SmoothCoupling,
    StepBounds,
    coupling_diagonal_indicator,
    coupling_diagonal_sqdist,
    coupling_quadratic,
    coupling_zero,
    estimate_submonotonicity,
    gd_step_bound,
    gd_violation_bound,
    gradient_descent_map,
    h_indicator_ball,
    h_indicator_box,
    h_indicator_point,
    h_l1,
    h_quadratic,
    h_zero,
    resolvent_partial_smooth,
    resolvent_separable,
)
from .problems import (
    PROBLEM_GALLERY,
    ConvexSet,
    ProblemSpec,
    counterexample2d,
    deterministic_reference,
    feasibility,
    make_set,
    quadratic_l1,
    recurrent_reference,
)
from .rates import (
    GaugeSpec,
    RateReport,
    check_asymptotic_regularity,
    check_fejer,
    check_gauge_monotone,
    estimate_msr_kappa,
    fit_linear_rate,
    invert_id_minus_theta,
    theta_iterates,
    theta_linear,
)
from .regularity import (
    CertificationReport,
    Region,
    certify_aafne_in_expectation,
    certify_paracontraction_in_expectation,
    certify_pointwise_aafne,
    verify_expectation_identities,
)
from .splitting import (
    RegularityConstants,
    SplittingMap,
    apply_T,
    apply_full,
    composite_constants,
    expectation_constants,
    expected_weighted_psi,
    expected_weighted_sq_distance,
    transport_discrepancy,
    weighted_transport_discrepancy,
)
from .transport import (
    CouplingPlan,
    DiscreteMeasure,
    distance_to_point_mass,
    distance_to_set_mixture,
    invariant_discrepancy_consistent,
    read_measure,
    wasserstein2_weighted,
    write_measure,
)
from .config import ExperimentConfig, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "BlockFunction",
    "BlockLayout",
    "BlockProbabilities",
    "BlockSubsetScheme",
    "BlocksplitError",
    "CertificationReport",
    "ConfigError",
    "ConvexSet",
    "CouplingPlan",
    "DegenerateSequence",
    "DimensionMismatch",
    "DiscreteMeasure",
    "EmptyResolvent",
    "Ensemble",
    "ExperimentConfig",
    "GaugeSpec",
    "InadmissibleGauge",
    "InnerSolveDiverged",
    "InvalidFixedPoints",
    "NoEligibleSamples",
    "NotPSD",
    "OutOfDomain",
    "PROBLEM_GALLERY",
    "ProblemSpec",
    "RateReport",
    "Region",
    "RegularityConstants",
    "RunResult",
    "SeparableTerm",
    "SmoothCoupling",
    "SolverFailure",
    "SplittingMap",
    "StepBounds",
    "UncoveredBlock",
    "UnsupportedSet",
    "apply_T",
    "apply_full",
    "block_probabilities",
    "certify_aafne_in_expectation",
    "certify_paracontraction_in_expectation",
    "certify_pointwise_aafne",
    "chain_rng",
    "check_asymptotic_regularity",
    "check_fejer",
    "check_gauge_monotone",
    "composite_constants",
    "counterexample2d",
    "coupling_diagonal_indicator",
    "coupling_diagonal_sqdist",
    "coupling_quadratic",
    "coupling_zero",
    "deterministic_reference",
    "distance_to_point_mass",
    "distance_to_set_mixture",
    "estimate_msr_kappa",
    "estimate_submonotonicity",
    "expectation_constants",
    "expected_weighted_psi",
    "expected_weighted_sq_distance",
    "feasibility",
    "fit_linear_rate",
    "gd_step_bound",
    "gd_violation_bound",
    "gradient_descent_map",
    "h_indicator_ball",
    "h_indicator_box",
    "h_indicator_point",
    "h_l1",
    "h_quadratic",
    "h_zero",
    "init_ensemble",
    "invariant_discrepancy_consistent",
    "invert_id_minus_theta",
    "load_config",
    "make_set",
    "parse_config",
    "point_sampler",
    "quadratic_l1",
    "read_measure",
    "read_snapshot",
    "read_trajectory_csv",
    "recurrent_reference",
    "resolvent_partial_smooth",
    "resolvent_separable",
    "run",
    "sbi_step",
    "theta_iterates",
    "theta_linear",
    "transport_discrepancy",
    "uniform_box_sampler",
    "verify_expectation_identities",
    "wasserstein2_weighted",
    "weighted_norm",
    "weighted_sq",
    "weighted_transport_discrepancy",
    "write_measure",
    "write_snapshot",
    "write_trajectory_csv",
]
