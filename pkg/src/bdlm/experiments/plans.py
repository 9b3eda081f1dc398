"""Experiment plans: validated descriptions of what to run, plus the built-in
CWRU cross-condition partitions and the patch/stride sweep grid."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from ..errors import PlanError

KINDS = ("single", "cross_condition", "cross_dataset_full", "cross_dataset_limited", "sweep")

# The 16 train/test condition partitions of the CWRU cross-condition protocol,
# in published order.
CWRU_CROSS_CONDITION_CASES: tuple[tuple[tuple[str, ...], str], ...] = (
    (("0", "1"), "2"),
    (("0", "1"), "3"),
    (("1", "2"), "0"),
    (("1", "2"), "3"),
    (("0", "2"), "1"),
    (("0", "2"), "3"),
    (("1", "3"), "2"),
    (("1", "3"), "0"),
    (("0", "3"), "1"),
    (("0", "3"), "2"),
    (("2", "3"), "0"),
    (("2", "3"), "1"),
    (("1", "2", "3"), "0"),
    (("0", "2", "3"), "1"),
    (("0", "1", "2"), "3"),
    (("0", "1", "3"), "2"),
)

# The 16 (patch size, stride) cells of the hyperparameter sweep.
TABLE8_GRID: tuple[tuple[int, int], ...] = (
    (256, 8),
    (128, 64), (128, 32), (128, 16), (128, 8), (128, 4),
    (64, 32), (64, 16), (64, 8), (64, 4),
    (32, 16), (32, 8), (32, 4),
    (16, 8), (16, 4),
    (8, 4),
)
CHOSEN_CELL = (128, 8)


@dataclass
class ExperimentPlan:
    kind: str
    plan_id: str = "plan"
    dataset_id: str = ""
    trials: int = 3
    seed: int = 0
    limited_fraction: float = 0.10
    model: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    emit_corpus: bool = False
    cases: list[dict] = field(default_factory=list)
    grid: list | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlanError(f"unknown plan kind {self.kind!r}; options: {KINDS}")
        if self.trials < 1:
            raise PlanError(f"trials must be >= 1, got {self.trials}")
        if not 0 < self.limited_fraction <= 1:
            raise PlanError(f"limited_fraction must be in (0, 1], got {self.limited_fraction}")
        if self.kind == "cross_condition":
            if not self.cases:
                raise PlanError("cross_condition plan needs at least one case")
            for case in self.cases:
                train = set(case.get("train_conditions", ()))
                test = case.get("test_condition")
                if not train or test is None:
                    raise PlanError(f"case {case!r} needs train_conditions and test_condition")
                if test in train:
                    raise PlanError(
                        f"case {case.get('case_id', '?')}: test condition {test!r} "
                        "overlaps the train conditions")
        if self.kind in ("cross_dataset_full", "cross_dataset_limited"):
            if not self.cases:
                raise PlanError(f"{self.kind} plan needs at least one case")
            for case in self.cases:
                sources = list(case.get("sources", ()))
                target = case.get("target")
                if len(sources) < 2 or target is None:
                    raise PlanError(f"case {case!r} needs >= 2 sources and a target")
                if target in sources:
                    raise PlanError(
                        f"case {case.get('case_id', '?')}: target {target!r} also "
                        "appears in the sources")
        if self.kind == "sweep" and self.grid is not None:
            for cell in self.grid:
                if len(cell) != 2 or cell[0] < 1 or cell[1] < 1:
                    raise PlanError(f"bad sweep cell {cell!r}")

    def resolved_grid(self) -> tuple[tuple[int, int], ...]:
        if self.grid is None:
            return TABLE8_GRID
        return tuple((int(p), int(s)) for p, s in self.grid)

    def trial_seeds(self) -> list[int]:
        return [self.seed + t for t in range(self.trials)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "plan_id": self.plan_id, "dataset_id": self.dataset_id,
            "trials": self.trials, "seed": self.seed,
            "limited_fraction": self.limited_fraction, "model": dict(self.model),
            "hyper": dict(self.hyper), "emit_corpus": self.emit_corpus,
            "cases": [dict(c) for c in self.cases],
            "grid": None if self.grid is None else [list(c) for c in self.grid],
        }


def read_plan(path: str) -> ExperimentPlan:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanError(f"cannot read plan {path!r}: {exc}", path=path) from exc
    if not isinstance(doc, dict) or "kind" not in doc:
        raise PlanError(f"plan {path!r} must be an object with a 'kind' field", path=path)
    known = {"kind", "plan_id", "dataset_id", "trials", "seed", "limited_fraction",
             "model", "hyper", "emit_corpus", "cases", "grid"}
    unknown = set(doc) - known
    if unknown:
        raise PlanError(f"plan {path!r} has unknown fields {sorted(unknown)}", path=path)
    try:
        return ExperimentPlan(**doc)
    except TypeError as exc:
        raise PlanError(f"plan {path!r} malformed: {exc}", path=path) from exc


def write_plan(plan: ExperimentPlan, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan.to_dict(), fh, indent=2)
        fh.write("\n")


def cwru_cross_condition_plan(**overrides) -> ExperimentPlan:
    """The shipped 16-case CWRU cross-condition plan."""
    cases = [
        {"case_id": str(i + 1), "train_conditions": list(train), "test_condition": test}
        for i, (train, test) in enumerate(CWRU_CROSS_CONDITION_CASES)
    ]
    defaults = dict(kind="cross_condition", plan_id="cwru_cross_condition",
                    dataset_id="CWRU", cases=cases)
    defaults.update(overrides)
    return ExperimentPlan(**defaults)


def load_shipped_plan(name: str) -> ExperimentPlan:
    """Read one of the plan files distributed with the package."""
    ref = resources.files("bdlm").joinpath("plans", f"{name}.json")
    with resources.as_file(ref) as p:
        return read_plan(str(p))
