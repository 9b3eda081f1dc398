"""Protocol runners: single-dataset, cross-condition, cross-dataset transfer
(full and limited data), the patch/stride sweep, and embedding export.

Every runner balances classes, audits split leakage, repeats over derived
trial seeds and returns an ExperimentReport. With ``plan.emit_corpus`` the
runner writes instruction-tuning corpora for its splits instead of training
the in-repo model.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import (EmptyCondition, EmptyDataset, InvalidConfig,
                      LabelSpaceMismatch, PlanError)
from ..features import extract_features
from ..model import ModelConfig, ModelState, TrainHyper, pooled_features, predict, train
from ..signals import Segment, derive_seed
from ..textgen import PromptTemplate, emit_corpus, render_record
from .metrics import compute_metrics, label_space_of
from .plans import CHOSEN_CELL, ExperimentPlan
from .report import ArmResult, ExperimentReport, TrialRecord, summarize
from .splits import (SplitSpec, audit_leakage, balance_classes, build_splits,
                     membership_hash, subsample_stratified)


def segments_to_arrays(segments: list[Segment], label_space) -> tuple[np.ndarray, np.ndarray]:
    index = {label: i for i, label in enumerate(label_space)}
    x = np.stack([s.samples for s in segments])
    y = np.array([index[s.label] for s in segments], dtype=np.int64)
    return x, y


def _model_config(plan: ExperimentPlan, n_classes: int, seed: int,
                  window_len: int, **overrides) -> ModelConfig:
    kwargs = dict(plan.model)
    kwargs.update(overrides)
    kwargs.setdefault("window_len", window_len)
    if kwargs["window_len"] != window_len:
        raise InvalidConfig(
            f"plan window_len {kwargs['window_len']} does not match segment length {window_len}")
    return ModelConfig(n_classes=n_classes, seed=seed, **kwargs)


def _hyper(plan: ExperimentPlan, seed: int) -> TrainHyper:
    return TrainHyper(seed=seed, **plan.hyper)


def _epoch_dicts(log) -> list[dict]:
    return [{"epoch": r.epoch, "train_loss": float(r.train_loss),
             "val_accuracy": float(r.val_accuracy)} for r in log]


def _evaluate(state: ModelState, test_x, test_y, labels):
    preds = predict(state, test_x)
    return compute_metrics(test_y, preds, labels)


@dataclass
class _Arm:
    """Per-trial records of one experimental arm while a run is assembling."""
    trials: list[TrialRecord] = field(default_factory=list)
    confusions: list = field(default_factory=list)

    def add(self, trial_record, confusion):
        self.trials.append(trial_record)
        self.confusions.append(confusion)

    def result(self) -> ArmResult:
        best = max(range(len(self.trials)), key=lambda i: self.trials[i].test_accuracy)
        return ArmResult(trials=self.trials, confusion=self.confusions[best])


def _corpus_paths(corpus_dir: str, plan: ExperimentPlan, case_id: str, part: str) -> str:
    os.makedirs(corpus_dir, exist_ok=True)
    return os.path.join(corpus_dir, f"{plan.plan_id}_{case_id}_{part}.jsonl")


def _emit_split_corpus(split_parts: dict[str, list], plan: ExperimentPlan, case_id: str,
                       corpus_dir: str, template: PromptTemplate | None) -> dict:
    written = {}
    for part, segments in split_parts.items():
        records = [render_record(extract_features(seg), seg.label, template)
                   for seg in segments]
        path = _corpus_paths(corpus_dir, plan, case_id, part)
        written[part] = {"path": path, "records": emit_corpus(records, path)}
    return written


def run_single(segments: list[Segment], plan: ExperimentPlan, case: dict | None = None,
               corpus_dir: str = "", template: PromptTemplate | None = None) -> ExperimentReport:
    """Train/val/test on one dataset with an 8:1:1 stratified split."""
    t0 = time.perf_counter()
    case = case or {"case_id": "1"}
    if not segments:
        raise EmptyDataset("no segments to run on")
    labels = label_space_of(segments)
    names = tuple(l.short_name for l in labels)
    splits = build_splits(segments, SplitSpec(mode="train_val_test_811",
                                              seed=plan.seed, balance=True))
    leakage = audit_leakage(splits.train, splits.val, splits.test)
    if plan.emit_corpus:
        notes = {"corpus": _emit_split_corpus(
            {"train": splits.train, "val": splits.val, "test": splits.test},
            plan, case.get("case_id", "1"), corpus_dir, template)}
        return ExperimentReport(plan=plan.to_dict(), case=case, arms={}, leakage=leakage,
                                seeds=plan.trial_seeds(),
                                wall_time_s=time.perf_counter() - t0, notes=notes)
    window_len = len(splits.train[0])
    train_x, train_y = segments_to_arrays(splits.train, labels)
    val_x, val_y = segments_to_arrays(splits.val, labels)
    test_x, test_y = segments_to_arrays(splits.test, labels)
    arm = _Arm()
    for t, seed in enumerate(plan.trial_seeds()):
        config = _model_config(plan, len(labels), seed, window_len)
        result = train(train_x, train_y, val_x, val_y, config, _hyper(plan, seed))
        accuracy, confusion = _evaluate(result.state, test_x, test_y, names)
        arm.add(TrialRecord(trial=t, seed=seed, epochs=_epoch_dicts(result.log),
                            test_accuracy=accuracy,
                            extra={"best_epoch": result.best_epoch}), confusion)
    return ExperimentReport(plan=plan.to_dict(), case=case, arms={"main": arm.result()},
                            leakage=leakage, seeds=plan.trial_seeds(),
                            wall_time_s=time.perf_counter() - t0)


def run_cross_condition(segments: list[Segment], plan: ExperimentPlan, case: dict,
                        corpus_dir: str = "",
                        template: PromptTemplate | None = None) -> ExperimentReport:
    """Train (and validate, carved 8:1) on some conditions, test on a held-out
    condition of the same dataset."""
    t0 = time.perf_counter()
    train_conditions = set(case["train_conditions"])
    test_condition = case["test_condition"]
    for cond in sorted(train_conditions | {test_condition}):
        if not any(s.condition_id == cond for s in segments):
            raise EmptyCondition(f"condition {cond!r} has no segments", condition=cond)
    train_pool = [s for s in segments if s.condition_id in train_conditions]
    test_pool = [s for s in segments if s.condition_id == test_condition]
    labels = label_space_of(segments)
    names = tuple(l.short_name for l in labels)
    splits = build_splits(train_pool, SplitSpec(mode="train_val_81", seed=plan.seed,
                                                balance=True))
    test_segments = balance_classes(test_pool, plan.seed)
    leakage = audit_leakage(splits.train, splits.val, test_segments)
    if plan.emit_corpus:
        notes = {"corpus": _emit_split_corpus(
            {"train": splits.train, "val": splits.val, "test": test_segments},
            plan, case.get("case_id", "1"), corpus_dir, template)}
        return ExperimentReport(plan=plan.to_dict(), case=case, arms={}, leakage=leakage,
                                seeds=plan.trial_seeds(),
                                wall_time_s=time.perf_counter() - t0, notes=notes)
    window_len = len(splits.train[0])
    train_x, train_y = segments_to_arrays(splits.train, labels)
    val_x, val_y = segments_to_arrays(splits.val, labels)
    test_x, test_y = segments_to_arrays(test_segments, labels)
    arm = _Arm()
    for t, seed in enumerate(plan.trial_seeds()):
        config = _model_config(plan, len(labels), seed, window_len)
        result = train(train_x, train_y, val_x, val_y, config, _hyper(plan, seed))
        accuracy, confusion = _evaluate(result.state, test_x, test_y, names)
        arm.add(TrialRecord(trial=t, seed=seed, epochs=_epoch_dicts(result.log),
                            test_accuracy=accuracy,
                            extra={"best_epoch": result.best_epoch}), confusion)
    return ExperimentReport(plan=plan.to_dict(), case=case, arms={"main": arm.result()},
                            leakage=leakage, seeds=plan.trial_seeds(),
                            wall_time_s=time.perf_counter() - t0)


def _dataset_splits(segments, dataset_ids, plan):
    groups = {}
    for dataset_id in dataset_ids:
        subset = [s for s in segments if s.dataset_id == dataset_id]
        if not subset:
            raise EmptyDataset(f"dataset {dataset_id!r} has no segments",
                               dataset=dataset_id)
        groups[dataset_id] = build_splits(
            subset, SplitSpec(mode="train_val_test_811",
                              seed=derive_seed(plan.seed, dataset_id), balance=True))
    return groups


def _cross_dataset_run(segments, plan, case, limited, corpus_dir, template):
    t0 = time.perf_counter()
    sources = list(case["sources"])
    target = case["target"]
    by_dataset = _dataset_splits(segments, sources + [target], plan)
    involved = [s for s in segments if s.dataset_id in set(sources + [target])]
    labels = label_space_of(involved)
    names = tuple(l.short_name for l in labels)

    phase1_train = [s for d in sources for s in by_dataset[d].train]
    phase1_val = [s for d in sources for s in by_dataset[d].val]
    target_splits = by_dataset[target]
    leakage = audit_leakage(phase1_train, phase1_val, target_splits.train,
                            target_splits.val, target_splits.test)

    trained_labels = {s.label for s in phase1_train} | {s.label for s in target_splits.train}
    missing = [l.short_name for l in label_space_of(target_splits.test)
               if l not in trained_labels]
    if missing:
        raise LabelSpaceMismatch(
            f"target labels {missing} never appear in any training phase",
            labels=",".join(missing))

    window_len = len(target_splits.train[0])
    p1x, p1y = segments_to_arrays(phase1_train, labels)
    p1vx, p1vy = segments_to_arrays(phase1_val, labels)
    tvx, tvy = segments_to_arrays(target_splits.val, labels)
    test_x, test_y = segments_to_arrays(target_splits.test, labels)

    case_id = case.get("case_id", "1")
    if plan.emit_corpus:
        if limited:
            phase2_corpus = subsample_stratified(target_splits.train,
                                                 plan.limited_fraction, plan.seed)
        else:
            phase2_corpus = target_splits.train
        parts = {"phase1_train": phase1_train, "phase2_train": phase2_corpus,
                 "test": target_splits.test}
        notes = {"corpus": _emit_split_corpus(parts, plan, case_id, corpus_dir, template)}
        return ExperimentReport(plan=plan.to_dict(), case=case, arms={}, leakage=leakage,
                                seeds=plan.trial_seeds(),
                                wall_time_s=time.perf_counter() - t0, notes=notes)

    transfer = _Arm()
    baseline = _Arm()
    notes: dict = {"subsample_hashes": {}} if limited else {}
    for t, seed in enumerate(plan.trial_seeds()):
        config = _model_config(plan, len(labels), seed, window_len)
        hyper = _hyper(plan, seed)

        # transfer arm: source pretraining, then continued training on target
        if limited:
            arm_segments = subsample_stratified(target_splits.train,
                                                plan.limited_fraction, seed)
            notes["subsample_hashes"].setdefault(str(t), {})["transfer"] = \
                membership_hash(arm_segments)
        else:
            arm_segments = target_splits.train
        p2x, p2y = segments_to_arrays(arm_segments, labels)
        phase1 = train(p1x, p1y, p1vx, p1vy, config, hyper)
        phase2 = train(p2x, p2y, tvx, tvy, config, hyper, init_state=phase1.state)
        accuracy, confusion = _evaluate(phase2.state, test_x, test_y, names)
        transfer.add(TrialRecord(
            trial=t, seed=seed, epochs=_epoch_dicts(phase1.log) + _epoch_dicts(phase2.log),
            test_accuracy=accuracy,
            extra={"phase1_best_epoch": phase1.best_epoch,
                   "phase2_best_epoch": phase2.best_epoch}), confusion)

        # baseline arm: scratch training on an independently re-derived subsample
        if limited:
            arm_segments = subsample_stratified(target_splits.train,
                                                plan.limited_fraction, seed)
            notes["subsample_hashes"][str(t)]["baseline"] = membership_hash(arm_segments)
            p2x, p2y = segments_to_arrays(arm_segments, labels)
        scratch = train(p2x, p2y, tvx, tvy, config, hyper)
        b_accuracy, b_confusion = _evaluate(scratch.state, test_x, test_y, names)
        baseline.add(TrialRecord(trial=t, seed=seed, epochs=_epoch_dicts(scratch.log),
                                 test_accuracy=b_accuracy,
                                 extra={"best_epoch": scratch.best_epoch}), b_confusion)

    t_sum = summarize([r.test_accuracy for r in transfer.trials])
    b_sum = summarize([r.test_accuracy for r in baseline.trials])
    notes["transfer_minus_baseline"] = t_sum["mean"] - b_sum["mean"]
    return ExperimentReport(
        plan=plan.to_dict(), case=case,
        arms={"transfer": transfer.result(), "baseline": baseline.result()},
        leakage=leakage, seeds=plan.trial_seeds(),
        wall_time_s=time.perf_counter() - t0, notes=notes)


def run_cross_dataset_full(segments, plan: ExperimentPlan, case: dict,
                           corpus_dir: str = "",
                           template: PromptTemplate | None = None) -> ExperimentReport:
    """Phase 1 trains on the balanced union of source datasets, phase 2
    continues on the target train split; the baseline arm skips phase 1."""
    return _cross_dataset_run(segments, plan, case, limited=False,
                              corpus_dir=corpus_dir, template=template)


def run_cross_dataset_limited(segments, plan: ExperimentPlan, case: dict,
                              corpus_dir: str = "",
                              template: PromptTemplate | None = None) -> ExperimentReport:
    """As the full variant, but phase 2 (and the scratch baseline) consume the
    same stratified fraction of the target train split; the test set stays
    full size."""
    return _cross_dataset_run(segments, plan, case, limited=True,
                              corpus_dir=corpus_dir, template=template)


@dataclass
class SweepCell:
    patch_len: int
    stride: int
    summary: dict
    wall_time_s: float
    chosen: bool

    def to_dict(self) -> dict:
        return {"patch_len": self.patch_len, "stride": self.stride,
                "summary": self.summary, "wall_time_s": self.wall_time_s,
                "chosen": self.chosen}


def sweep_patch_stride(segments: list[Segment], plan: ExperimentPlan) -> list[SweepCell]:
    """run_single per grid cell; the published default grid has 16 cells and
    marks (128, 8) as the chosen trade-off."""
    if not segments:
        raise EmptyDataset("no segments to sweep on")
    window_len = len(segments[0])
    cells = []
    for patch_len, stride in plan.resolved_grid():
        if patch_len > window_len:
            raise PlanError(f"sweep cell ({patch_len}, {stride}) invalid for "
                            f"window {window_len}")
        t0 = time.perf_counter()
        sub_plan = ExperimentPlan(kind="single", plan_id=plan.plan_id,
                                  dataset_id=plan.dataset_id, trials=plan.trials,
                                  seed=plan.seed, model=dict(plan.model),
                                  hyper=dict(plan.hyper))
        sub_plan.model["patch_len"] = patch_len
        sub_plan.model["stride"] = stride
        report = run_single(segments, sub_plan)
        cells.append(SweepCell(
            patch_len=patch_len, stride=stride,
            summary=report.arms["main"].summary(),
            wall_time_s=time.perf_counter() - t0,
            chosen=(patch_len, stride) == CHOSEN_CELL))
    return cells


def run_plan(segments: list[Segment], plan: ExperimentPlan, corpus_dir: str = "",
             template: PromptTemplate | None = None):
    """Dispatch a plan: returns a list of ExperimentReport (or SweepCell list
    for sweeps)."""
    if plan.kind == "single":
        cases = plan.cases or [{"case_id": "1"}]
        return [run_single(segments, plan, case, corpus_dir, template) for case in cases]
    if plan.kind == "cross_condition":
        return [run_cross_condition(segments, plan, case, corpus_dir, template)
                for case in plan.cases]
    if plan.kind == "cross_dataset_full":
        return [run_cross_dataset_full(segments, plan, case, corpus_dir, template)
                for case in plan.cases]
    if plan.kind == "cross_dataset_limited":
        return [run_cross_dataset_limited(segments, plan, case, corpus_dir, template)
                for case in plan.cases]
    if plan.kind == "sweep":
        return sweep_patch_stride(segments, plan)
    raise PlanError(f"unknown plan kind {plan.kind!r}")


def export_embeddings(state: ModelState, segments: list[Segment], path: str) -> int:
    """CSV of penultimate-layer vectors (post-pool, pre-head) with metadata,
    for external visualization. Returns rows written."""
    x = np.stack([s.samples for s in segments])
    feats = pooled_features(state, x)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset_id", "condition_id", "label", "signal_id", "start"]
                        + [f"e{i}" for i in range(feats.shape[1])])
        for seg, row in zip(segments, feats):
            writer.writerow([seg.dataset_id, seg.condition_id, seg.label.short_name,
                             seg.signal_id, seg.start] + [repr(float(v)) for v in row])
    return len(segments)
