"""Model-agnostic explanations for black-box entity-matching decisions."""

from .data import (
    Dataset,
    DatasetLoadError,
    DatasetValidationError,
    Record,
    RecordPair,
    load_benchmark_dataset,
    save_benchmark_dataset,
    tokenize,
    truncate_record,
)
from .evaluation import (
    CounterfactualMetrics,
    PerturbationErrorReport,
    StabilityReport,
    counterfactual_metrics,
    explanation_similarity,
    partition_by_prediction,
    perturbation_error,
    stability,
    sweep,
)
from .explain import (
    DualExplanation,
    ExplainError,
    ExplainerConfig,
    Explanation,
    LemonExplainer,
    explain,
    explain_lime_em,
)
from .matchers import (
    BaselineMatcher,
    BaselineMatcherModel,
    ConfigurationError,
    HttpMatcherClient,
    Matcher,
    MatcherConfig,
    MatcherTransportError,
    StdioMatcherClient,
    train_baseline_matcher,
)
from .render import RenderedExplanation, render
from .synth import available_profiles, generate_benchmark, write_benchmark

__version__ = "0.1.0"

__all__ = [
    "BaselineMatcher",
    "BaselineMatcherModel",
    "ConfigurationError",
    "CounterfactualMetrics",
    "Dataset",
    "DatasetLoadError",
    "DatasetValidationError",
    "DualExplanation",
    "ExplainError",
    "ExplainerConfig",
    "Explanation",
    "HttpMatcherClient",
    "LemonExplainer",
    "Matcher",
    "MatcherConfig",
    "MatcherTransportError",
    "PerturbationErrorReport",
    "Record",
    "RecordPair",
    "RenderedExplanation",
    "StabilityReport",
    "StdioMatcherClient",
    "available_profiles",
    "counterfactual_metrics",
    "explain",
    "explain_lime_em",
    "explanation_similarity",
    "generate_benchmark",
    "load_benchmark_dataset",
    "partition_by_prediction",
    "perturbation_error",
    "render",
    "save_benchmark_dataset",
    "stability",
    "sweep",
    "tokenize",
    "train_baseline_matcher",
    "truncate_record",
    "write_benchmark",
]
