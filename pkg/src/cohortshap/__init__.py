"""Balanced-subgroup classification with Shapley feature attribution.

The package studies heavily imbalanced case/control cohorts (for example
survey data where cases are rare) by splitting the majority class into
balanced subgroups, cross-validating small classifiers inside each
subgroup, and ranking features by softmax-normalized mean absolute
Shapley values aggregated across every cell of the grid.

Everything is deterministic given a master seed: random draws come from
named substreams derived by hashing, so results do not depend on
scheduling or worker count.
"""

from .dataset import (
    MISSING_SENTINEL,
    Dataset,
    FeatureKind,
    FeatureSpec,
    LayoutField,
    LayoutSpec,
    SyntheticSpec,
    apply_missing_policy,
    example_survey_layout,
    generate_synthetic,
    load_dataset,
    load_layout,
    parse_delimited,
    parse_fixed_width,
    save_dataset,
    select_feature_set,
)
from .explain import (
    LOCAL_ACCURACY_TOL,
    ShapExplanation,
    exact_shap_oracle,
    forest_shap,
    forest_shap_batch,
    local_accuracy_gate_stats,
    mean_abs_shap,
    reset_local_accuracy_gate,
    sampling_shap,
    tree_shap,
    tree_value_function,
)
from .models import (
    ForestModel,
    ForestParams,
    MlpModel,
    MlpParams,
    Scaler,
    SvmModel,
    SvmParams,
    fit_forest,
    fit_mlp,
    fit_scaler,
    fit_svm_smo,
    fit_tree,
    load_model,
    predict_forest,
    predict_forest_batch,
    predict_mlp,
    predict_mlp_batch,
    predict_svm,
    save_model,
    transform,
)
from .pipeline import (
    ExperimentConfig,
    ExperimentResult,
    FoldMetrics,
    MetricSummary,
    RankedImportanceReport,
    SubgroupPlan,
    aggregate_importance,
    evaluate_fold,
    format_mean_std,
    format_report,
    kfold_split,
    make_balanced_subgroups,
    run_experiment,
    summarize_cells,
)
from .seeding import derive_seed, substream

__version__ = "0.1.0"

__all__ = [
    "MISSING_SENTINEL",
    "Dataset",
    "FeatureKind",
    "FeatureSpec",
    "LayoutField",
    "LayoutSpec",
    "SyntheticSpec",
    "apply_missing_policy",
    "example_survey_layout",
    "generate_synthetic",
    "load_dataset",
    "load_layout",
    "parse_delimited",
    "parse_fixed_width",
    "save_dataset",
    "select_feature_set",
    "LOCAL_ACCURACY_TOL",
    "ShapExplanation",
    "exact_shap_oracle",
    "forest_shap",
    "forest_shap_batch",
    "local_accuracy_gate_stats",
    "mean_abs_shap",
    "reset_local_accuracy_gate",
    "sampling_shap",
    "tree_shap",
    "tree_value_function",
    "ForestModel",
    "ForestParams",
    "MlpModel",
    "MlpParams",
    "Scaler",
    "SvmModel",
    "SvmParams",
    "fit_forest",
    "fit_mlp",
    "fit_scaler",
    "fit_svm_smo",
    "fit_tree",
    "load_model",
    "predict_forest",
    "predict_forest_batch",
    "predict_mlp",
    "predict_mlp_batch",
    "predict_svm",
    "save_model",
    "transform",
    "ExperimentConfig",
    "ExperimentResult",
    "FoldMetrics",
    "MetricSummary",
    "RankedImportanceReport",
    "SubgroupPlan",
    "aggregate_importance",
    "evaluate_fold",
    "format_mean_std",
    "format_report",
    "kfold_split",
    "make_balanced_subgroups",
    "run_experiment",
    "summarize_cells",
    "derive_seed",
    "substream",
    "__version__",
]
