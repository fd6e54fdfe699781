"""Expert quantile elicitation and aggregation toolkit.

Fits parametric distributions to five-point quantile judgments, combines
experts by linear and log-linear pooling, computes performance-based
weights from seed questions, scores the resulting distributions with
proper scoring rules, and runs the diagnostic-trial coherence checks.
A JSON file store, an HTTP service, and a CLI sit on top of the engine.
"""

from priorpool.errors import (
    ConfigurationError,
    CoverageError,
    DomainError,
    EmptyPoolError,
    FittingError,
    IntegrationError,
    NoCalibratedExpertError,
    NotFoundError,
    PriorPoolError,
    UndefinedCorrelationError,
    UndefinedSensitivityError,
    ValidationError,
    VersionConflictError,
)
from priorpool.classical import (
    CalibrationResult,
    SeedQuestion,
    calibration_score,
    cm_weights,
    evaluate_experts,
    information_score,
    interquantile_hits,
    intrinsic_range,
    leave_one_out_cv,
    optimize_alpha,
    relative_entropy_statistic,
)
from priorpool.distributions import (
    Beta,
    Distribution,
    Gamma,
    LogDomain,
    LogNormal,
    Mixture,
    Normal,
    Tabulated,
    distribution_from_dict,
)
from priorpool.fitting import (
    ElicitedJudgment,
    FitResult,
    admissible_families,
    fit_least_squares,
)
from priorpool.pooling import (
    WeightVector,
    equal_weights,
    linear_pool,
    log_linear_pool,
)
from priorpool.analysis import (
    canonical_json,
    run_checks,
    run_cm_weights,
    run_correlations,
    run_crossval,
    run_fit,
    run_optimized_weights,
    run_overlay,
    run_pool,
    run_scores,
)
from priorpool.quadrature import integrate
from priorpool.scoring import (
    ErrorCorrelationMatrix,
    ScoreTable,
    brier_score,
    logarithmic_score,
    median_error_correlations,
    quadratic_score,
    score_table,
)
from priorpool.store import (
    STAGES,
    ElicitationSession,
    ExpertProfile,
    Quantity,
    SeedDataset,
    SessionStore,
    load_seed_csv,
    new_session,
)
from priorpool.trial import (
    CellProbabilities,
    PatientSample,
    TrialParameters,
    cell_probabilities,
    delayed_positive_check,
    et_sensitivity,
    patient_sample,
    rt_sensitivity,
)

__version__ = "0.1.0"
