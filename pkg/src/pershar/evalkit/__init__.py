from .experiments import (
    EXPERIMENTS, FoldData, build_fold, check_provenance, fit_models, load_recordings, ood_holdout,
    run_classification_experiment, run_embsize_sweep, run_experiment, run_generalization_experiment,
    run_ood_experiment, run_refsize_sweep,
)
from .metrics import SubjectMetrics, aggregate_subjects, auroc, five_number, subject_accuracy
from .report import ExperimentReport, emit_report, load_report

__all__ = [
    "EXPERIMENTS", "ExperimentReport", "FoldData", "SubjectMetrics", "aggregate_subjects", "auroc",
    "build_fold", "check_provenance", "emit_report", "fit_models", "five_number", "load_recordings",
    "load_report", "ood_holdout", "run_classification_experiment", "run_embsize_sweep",
    "run_experiment", "run_generalization_experiment", "run_ood_experiment", "run_refsize_sweep",
    "subject_accuracy",
]
