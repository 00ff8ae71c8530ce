"""tetrapure: pure measurement models for latent variables from covariance data."""

from .errors import (
    DegenerateDataError,
    GuardExceededError,
    TetrapureError,
    UnknownLabelError,
    ValidationError,
)
from .graphs import (
    GraphViolation,
    LatentVariableGraph,
    LinearParameters,
    NodeId,
    PureMeasurementModel,
    d_separated,
    enumerate_purifications,
    is_pure,
    purifications_oracle,
    validate_graph,
)
from .moments import (
    MomentCache,
    SignificanceConfig,
    build_moments,
    partial_correlation,
    test_vanishing_partial_correlation,
)
from .oracle import ConstraintOracle, CovarianceOracle, population_oracle, tetrad_score, unclustered
from .pattern import (
    CompatibilityGraph,
    MeasurementPattern,
    build_compatibility_graph,
    find_measurement_pattern,
    maximal_cliques,
)
from .purify import ImpurityConflictGraph, mm_equal, mm_set_equal, purify_pattern
from .evaluate import EvaluationReport, impurity_units, match_latents, score_output
from .replicate import RunConfig, StudyTable, run_replication, study_preset
from .simulate import (
    GroundTruth,
    ImpuritySpec,
    StudyConfig,
    population_covariance,
    random_purifiable_graph,
    sample_linear,
    sample_study3,
)
from .tetrads import (
    TetradConstraint,
    TetradIndex,
    all_tetrads,
    bollen_test,
    tetrad_difference,
    wishart_test,
)

__version__ = "0.1.0"
