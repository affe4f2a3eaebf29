"""Entropic optimal transport with plug-in statistical inference.

Solves the regularized transport dual for discrete measures, extends and
differentiates the optimal potentials, builds asymptotic confidence
intervals for the transport cost and the debiased divergence, and runs
deterministic Monte Carlo experiments for coverage and convergence rates.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptySupport,
    EntotError,
    MalformedFile,
    NegativeEntry,
    NonPositiveEps,
    NonSimplexWeights,
    NotConverged,
    NotOptimal,
    OutOfRange,
    UnsupportedOrder,
    WrongNormalization,
)
from .measures import (
    CompactDomain,
    DiscreteMeasure,
    SeedSpec,
    SplitMix64,
    dirac,
    load_measure,
    rescale_measure,
    sample_empirical,
    sample_gaussian,
    uniform_on,
    write_measure,
)
from .sinkhorn import (
    Normalization,
    PotentialPair,
    SolveReport,
    SolverConfig,
    TransportPlan,
    cost,
    dual_objective,
    normalize,
    optimality_residual,
    plan,
    primal_cost,
    solve,
)
from .potentials import (
    ExtendedPotential,
    GridSpec,
    HolderNormEstimate,
    HolderOrder,
    PotentialDifference,
    Side,
    check_potential_bounds,
    conditional_moments,
    derivative,
    f_extension,
    g_extension,
    holder_norm,
)
from .inference import (
    ConfidenceInterval,
    DivergenceValue,
    VarianceEstimate,
    VarianceKind,
    ci_one_sample,
    ci_two_sample,
    normal_cdf,
    normal_quantile,
    sinkhorn_divergence,
    variance_one_sample,
    variance_two_sample,
)
from .oracle import (
    GaussianPairSpec,
    brute_force_potentials,
    finite_difference,
    gaussian_cost,
)
from .harness import (
    CoverageResult,
    EmitFormat,
    ExperimentConfig,
    ExperimentKind,
    RateResult,
    ScenarioKind,
    emit,
    load_config,
    parse_config,
    run_bias_rate,
    run_coverage,
    run_divergence_rate,
    run_experiment,
    run_potential_rate,
)

__version__ = "0.1.0"
