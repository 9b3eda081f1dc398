"""Experiment reports: per-trial logs, interval summaries, confusion matrix of
the best trial, leakage audit, and a determinism hash that ignores wall time."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

from .metrics import ConfusionMatrix


@dataclass
class TrialRecord:
    trial: int
    seed: int
    epochs: list[dict]
    test_accuracy: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"trial": self.trial, "seed": self.seed, "epochs": self.epochs,
                "test_accuracy": self.test_accuracy, "extra": self.extra}


def summarize(accuracies: list[float]) -> dict:
    """Mean with the asymmetric (max-mean, mean-min) interval convention."""
    mean = sum(accuracies) / len(accuracies)
    return {"mean": mean, "min": min(accuracies), "max": max(accuracies),
            "plus": max(accuracies) - mean, "minus": mean - min(accuracies)}


@dataclass
class ArmResult:
    trials: list[TrialRecord]
    confusion: ConfusionMatrix

    def summary(self) -> dict:
        return summarize([t.test_accuracy for t in self.trials])

    def best_trial(self) -> TrialRecord:
        # max() keeps the first of equal keys, i.e. the earliest trial
        return max(self.trials, key=lambda t: t.test_accuracy)

    def to_dict(self) -> dict:
        return {"trials": [t.to_dict() for t in self.trials],
                "summary": self.summary(),
                "confusion": self.confusion.to_dict()}


@dataclass
class ExperimentReport:
    plan: dict
    case: dict
    arms: dict[str, ArmResult]
    leakage: int
    seeds: list[int]
    wall_time_s: float
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "plan": self.plan,
            "case": self.case,
            "arms": {name: arm.to_dict() for name, arm in self.arms.items()},
            "leakage": self.leakage,
            "seeds": self.seeds,
            "notes": self.notes,
            "wall_time_s": self.wall_time_s,
        }
        doc["determinism_hash"] = self.determinism_hash()
        return doc

    def determinism_hash(self) -> str:
        doc = {
            "plan": self.plan, "case": self.case,
            "arms": {name: arm.to_dict() for name, arm in self.arms.items()},
            "leakage": self.leakage, "seeds": self.seeds, "notes": self.notes,
        }
        blob = json.dumps(doc, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def write_report_json(report: ExperimentReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_epoch_csv(reports: list[ExperimentReport], path: str) -> int:
    """Flat per-epoch log: one row per (case, arm, trial, epoch)."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["plan_id", "case_id", "arm", "trial", "epoch",
                         "train_loss", "val_accuracy", "test_accuracy"])
        for report in reports:
            plan_id = report.plan.get("plan_id", "plan")
            case_id = report.case.get("case_id", "0")
            for arm_name, arm in report.arms.items():
                for trial in arm.trials:
                    for epoch in trial.epochs:
                        writer.writerow([plan_id, case_id, arm_name, trial.trial,
                                         epoch["epoch"], repr(epoch["train_loss"]),
                                         repr(epoch["val_accuracy"]),
                                         repr(trial.test_accuracy)])
                        rows += 1
    return rows
