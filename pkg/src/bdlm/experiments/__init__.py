"""Split planning, protocol runners, metrics and report emission."""

from .fixtures import (CONDITION_RATE_SCALES, DATASET_CARRIER_SCALES,
                       synthetic_condition_suite, synthetic_dataset_suite,
                       synthetic_for_plan, synthetic_segments)
from .metrics import CLASS_ORDER, ConfusionMatrix, compute_metrics, label_space_of
from .plans import (CHOSEN_CELL, CWRU_CROSS_CONDITION_CASES, TABLE8_GRID,
                    ExperimentPlan, cwru_cross_condition_plan, load_shipped_plan,
                    read_plan, write_plan)
from .report import (ArmResult, ExperimentReport, TrialRecord, summarize,
                     write_epoch_csv, write_report_json)
from .runners import (SweepCell, export_embeddings, run_cross_condition,
                      run_cross_dataset_full, run_cross_dataset_limited, run_plan,
                      run_single, segments_to_arrays, sweep_patch_stride)
from .splits import (SplitSpec, Splits, audit_leakage, balance_classes, build_splits,
                     membership_hash, subsample_stratified)

__all__ = [
    "CHOSEN_CELL", "CLASS_ORDER", "CONDITION_RATE_SCALES",
    "CWRU_CROSS_CONDITION_CASES", "DATASET_CARRIER_SCALES", "TABLE8_GRID",
    "ArmResult", "ConfusionMatrix", "ExperimentPlan", "ExperimentReport",
    "SplitSpec", "Splits", "SweepCell", "TrialRecord",
    "audit_leakage", "balance_classes", "build_splits", "compute_metrics",
    "cwru_cross_condition_plan", "export_embeddings", "label_space_of",
    "load_shipped_plan", "membership_hash", "read_plan", "run_cross_condition",
    "run_cross_dataset_full", "run_cross_dataset_limited", "run_plan", "run_single",
    "segments_to_arrays", "subsample_stratified", "summarize", "sweep_patch_stride",
    "synthetic_condition_suite", "synthetic_dataset_suite", "synthetic_for_plan",
    "synthetic_segments", "write_epoch_csv", "write_plan", "write_report_json",
]
