"""Multivariate periodic Hawkes processes.

Fitting by MAP expectation-maximization with latent branching recovery,
thinning-based simulation, Monte Carlo goodness-of-fit testing on
inter-event-time distributions, and a next-window prediction benchmark
against a periodic Poisson baseline.
"""

from .errors import (
    BoundViolationError,
    EstimationError,
    FitFileError,
    InputError,
    NumericError,
    PeriodicHawkesError,
    SimulationError,
)
from .estimation import (
    EmConfig,
    FitResult,
    e_step,
    fit_map_em,
    m_step,
    normalize_delta,
)
from .evaluation import (
    BenchmarkResult,
    EmpiricalCdf,
    GofResult,
    PrCurve,
    PredictionModel,
    PredictionScore,
    area_statistic,
    default_thresholds,
    hawkes_gof_pair,
    hawkes_prediction_model,
    interevent_cdf,
    interevent_cdf_by_type,
    interevent_gaps,
    mc_gof_test,
    poisson_gof_pair,
    poisson_prediction_model,
    precision_recall,
    prediction_benchmark,
    predict_window_probability,
    time_rescaled_gaps,
    window_presence_probabilities,
)
from .io import (
    ParseResult,
    RunManifest,
    file_digest,
    load_fit,
    parse_events,
    read_fit_document,
    save_fit,
    write_events_csv,
    write_manifest,
)
from .model import (
    BranchingEstimate,
    EventSequence,
    GammaPriors,
    HawkesParams,
    IMPOSSIBLE,
    complete_data_log_likelihood,
    compensator,
    day_bucket_durations,
    day_index,
    event_intensities,
    intensity,
    log_posterior,
    log_prior,
    observed_log_likelihood,
    spectral_radius,
)
from .poisson import (
    PoissonParams,
    fit_poisson,
    simulate_poisson,
    window_event_probability,
)
from .simulation import (
    SimState,
    apply_event,
    excitation_components,
    rate_recursion,
    simulate,
    simulate_continuation,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkResult",
    "BoundViolationError",
    "BranchingEstimate",
    "EmConfig",
    "EmpiricalCdf",
    "EstimationError",
    "EventSequence",
    "FitFileError",
    "FitResult",
    "GammaPriors",
    "GofResult",
    "HawkesParams",
    "IMPOSSIBLE",
    "InputError",
    "NumericError",
    "ParseResult",
    "PeriodicHawkesError",
    "PoissonParams",
    "PrCurve",
    "PredictionModel",
    "PredictionScore",
    "RunManifest",
    "SimState",
    "SimulationError",
    "apply_event",
    "area_statistic",
    "compensator",
    "complete_data_log_likelihood",
    "day_bucket_durations",
    "day_index",
    "default_thresholds",
    "e_step",
    "event_intensities",
    "excitation_components",
    "file_digest",
    "fit_map_em",
    "fit_poisson",
    "hawkes_gof_pair",
    "hawkes_prediction_model",
    "intensity",
    "interevent_cdf",
    "interevent_cdf_by_type",
    "interevent_gaps",
    "load_fit",
    "log_posterior",
    "log_prior",
    "m_step",
    "mc_gof_test",
    "normalize_delta",
    "observed_log_likelihood",
    "parse_events",
    "poisson_gof_pair",
    "poisson_prediction_model",
    "precision_recall",
    "prediction_benchmark",
    "predict_window_probability",
    "rate_recursion",
    "read_fit_document",
    "save_fit",
    "simulate",
    "simulate_continuation",
    "simulate_poisson",
    "spectral_radius",
    "time_rescaled_gaps",
    "window_event_probability",
    "window_presence_probabilities",
    "write_events_csv",
    "write_manifest",
]
