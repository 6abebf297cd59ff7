"""Noisy probabilistic population codes for uncertain user feedback.

Simulates rating feedback from Poisson-noisy neural populations, fits
per-user-item cognition vectors to observed re-ratings by brute-force grid
search, and evaluates whether the fitted neural features improve simple
clustering-based collaborative filtering.
"""

from .cf import (
    ClusterModel,
    FeatureSpace,
    RmseDistribution,
    SubspaceDim,
    elbow_report,
    kmeans,
    magic_barrier,
    noise_profiling,
    noiseless_reference,
    noisy_reference,
    rmse,
    subspace_clustering,
    xi_clustering,
)
from .dataset import (
    DataValidationError,
    NppcPlanted,
    RatingDataset,
    SynthSpec,
    export,
    ingest,
    round_to_stars,
    synthesize,
    write_ground_truth,
)
from .decoders import (
    DEFAULT_DECODERS,
    DecoderKind,
    DecoderSpec,
    FeedbackSample,
    GaussianPrior,
    UndecodableResponseError,
    decode_mad,
    decode_mld,
    decode_mvd,
    decode_wad,
    log_likelihood,
    sample_feedback,
)
from .fitting import (
    FitResult,
    GridSpec,
    Objective,
    SamplingBudget,
    enumerate_grid,
    fit_dataset,
    fit_pair,
    fit_result_from_dict,
    fit_result_to_dict,
    population_energy,
    read_fit_results,
    score_candidate,
    write_fit_results,
)
from .manifest import RunManifest
from .metrics import (
    MAX_JSD_BITS,
    SIGMA_FLOOR,
    DiscretizedDensity,
    EmpiricalFeedback,
    GaussianFit,
    MetricScore,
    ScoreKind,
    cohen_kappa,
    discretize_gaussian,
    gaussian_ml_fit,
    jsd,
    mse_ratio,
    normalized_jsd,
)
from .population import (
    CognitionVector,
    PopulationResponse,
    Scale,
    preferred_values,
    sample_response,
    static_response,
    tuning_eval,
)
from .reliability import (
    REFERENCE_XI,
    FeedbackHistogram,
    ReliabilitySurface,
    feedback_distribution,
    reliability_sweep,
)

__version__ = "0.1.0"
