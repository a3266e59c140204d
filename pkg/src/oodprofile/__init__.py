"""Inside/outside out-of-distribution profiling for tabular regression data."""

__version__ = "0.1.0"

from .datagen import (
    Dataset,
    DatasetSpec,
    FeatureSpec,
    HyperRanges,
    generate_dataset,
    load_dataset,
    random_dataset_spec,
    sample_with_profile,
    save_dataset,
)
from .detect import (
    KlHistogramDetector,
    KnnDetector,
    MahalanobisDetector,
    ZscoreDetector,
    fit_knn,
    kl_divergence,
)
from .distributions import MixtureDistribution, ObservableWindow
from .experiment import (
    ExperimentConfig,
    run_profile_grid,
    run_sweep_complexity,
    run_sweep_dimensions,
    run_sweep_portion,
    run_sweep_size,
)
from .profile import OodProfiler, OodStatus, Profile, classify_robust, classify_simple, compute_profile
from .regress import ModelZooRegressor, fit_best, normalized_rmse, rmse

__all__ = [
    "Dataset",
    "DatasetSpec",
    "ExperimentConfig",
    "FeatureSpec",
    "HyperRanges",
    "KlHistogramDetector",
    "KnnDetector",
    "MahalanobisDetector",
    "MixtureDistribution",
    "ModelZooRegressor",
    "ObservableWindow",
    "OodProfiler",
    "OodStatus",
    "Profile",
    "ZscoreDetector",
    "classify_robust",
    "classify_simple",
    "compute_profile",
    "fit_best",
    "fit_knn",
    "generate_dataset",
    "kl_divergence",
    "load_dataset",
    "normalized_rmse",
    "random_dataset_spec",
    "rmse",
    "run_profile_grid",
    "run_sweep_complexity",
    "run_sweep_dimensions",
    "run_sweep_portion",
    "run_sweep_size",
    "sample_with_profile",
    "save_dataset",
    "__version__",
]
