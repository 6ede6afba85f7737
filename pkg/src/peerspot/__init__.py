"""peerspot: audit-rate thresholds and equilibrium analysis for peer evaluation games.

The package models a population of evaluators who can either invest costly
effort to observe an informative signal about each object or coordinate on a
free shared observation, a zoo of universal peer mechanisms that reward
reports against other reports, and a spot-checking wrapper that audits
reports against trusted draws with some probability.  Exact expectation
engines and exhaustive symmetric-equilibrium search then answer the core
design question: how often must reports be audited before truth-telling is
dominant, coordination equilibria die, and the truthful equilibrium is the
best one on offer.
"""

from .errors import (
    ConfigError,
    EnumerationBudgetExceeded,
    InvalidDistribution,
    LogOfZero,
    NoDisjointTaskSets,
    NonBinaryLabelSpace,
    NoPeer,
    NotEnoughObjects,
    PeerSpotError,
    ShapeMismatch,
    TooFewAgents,
    ZeroProbabilityConditioning,
)
from .signals import (
    Channel,
    Distribution,
    Environment,
    LabelSpace,
    binary_symmetric_environment,
    joint_signal_distribution,
    posterior_peer_belief,
    reference_environment,
    signal_marginal,
    validate_environment,
)
from .scoring import (
    LOGARITHMIC,
    QUADRATIC,
    LogarithmicRule,
    QuadraticRule,
    ScoringRule,
    check_symmetry,
    divergence,
    rule_from_name,
    score,
)
from .strategies import (
    BeliefMode,
    Effort,
    MixedStrategy,
    Report,
    Strategy,
    StrategyProfile,
    enumerate_pure_strategies,
    low_identity_strategy,
    realize_report,
    truthful_strategy,
)
from .mechanisms import (
    MechanismKind,
    MechanismSpec,
    RealizedInstance,
    UtilityEstimate,
    all_mechanisms,
    analytic_unchecked_value,
    expected_unchecked_utility,
    realized_reward,
    simulate_utilities,
)
from .spotcheck import (
    SpotGame,
    SpotOutcome,
    check_worthwhile_effort,
    combined_expected_utility,
    expected_spot_reward,
    spot_reward,
)
from .equilibrium import (
    NOT_ACHIEVABLE,
    NOT_APPLICABLE,
    NOT_FOUND,
    EquilibriumRecord,
    NotAttained,
    PayoffTable,
    ThresholdReport,
    best_no_effort_strategy,
    best_response,
    check_pareto_bound_condition,
    compute_payoff_table,
    compute_thresholds,
    construct_dominated_environment,
    enumerate_symmetric_pure_equilibria,
    is_symmetric_equilibrium,
    solve_p_ds,
    solve_p_ds_bisection,
    solve_p_el,
    solve_p_ex,
    solve_p_pareto,
    threshold_float,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    emit_report,
    example_config_path,
    generate_environments,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"
