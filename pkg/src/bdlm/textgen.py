"""Render feature vectors into instruction-tuning records and read/write
line-delimited corpora.

A record has exactly the keys instruction/input/output/history, in that order,
with history always empty. The default English wording is illustrative and
fully overridable; only the structure is contractual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import MalformedLine, MissingKey, TemplateIncomplete
from .features import FeatureVector
from .signals import FaultLabel

RECORD_KEYS = ("instruction", "input", "output", "history")


@dataclass
class FinetuneRecord:
    instruction: str
    input: str
    output: str
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "input": self.input,
                "output": self.output, "history": list(self.history)}


def format_value(value: float, sig_digits: int = 6) -> str:
    """Fixed significant digits; scientific notation outside [1e-3, 1e6)."""
    if value == 0:
        return "0"
    if math.isnan(value):
        return "nan"
    mantissa_exp = f"{value:.{sig_digits - 1}e}"
    mant, exp = mantissa_exp.split("e")
    e = int(exp)
    if -3 <= e <= 5:
        digits = mant.replace(".", "").lstrip("-")
        sign = "-" if value < 0 else ""
        if e >= len(digits) - 1:
            return sign + digits + "0" * (e - len(digits) + 1)
        if e >= 0:
            return sign + digits[:e + 1] + "." + digits[e + 1:]
        return sign + "0." + "0" * (-e - 1) + digits
    return mantissa_exp


DEFAULT_INSTRUCTION = ("You are a bearing fault diagnosis expert. Based on the "
                       "following features, you need to conduct fault diagnosis:")

DEFAULT_FEATURE_PHRASES = (
    "The time-domain mean of the vibration signal is {value}.",
    "The time-domain standard deviation is {value}.",
    "The square root amplitude is {value}.",
    "The absolute mean value is {value}.",
    "The peak value is {value}.",
    "The skewness is {value}.",
    "The kurtosis is {value}.",
    "The variance is {value}.",
    "The kurtosis index is {value}.",
    "The peak index is {value}.",
    "The waveform index is {value}.",
    "The pulse index is {value}.",
    "The frequency-domain mean is {value}.",
    "The frequency variance is {value}.",
    "The frequency skewness is {value}.",
    "The frequency kurtosis is {value}.",
    "The gravity frequency is {value}.",
    "The frequency standard deviation is {value}.",
    "The frequency root mean square is {value}.",
    "The average frequency is {value}.",
    "The regularity degree is {value}.",
    "The variation parameter is {value}.",
    "The eighth-order moment is {value}.",
    "The sixteenth-order moment is {value}.",
)

DEFAULT_OUTPUT_PHRASES = {
    FaultLabel.Normal: "The diagnosis result is normal.",
    FaultLabel.InnerRace: "The diagnosis result is an inner ring fault.",
    FaultLabel.OuterRace: "The diagnosis result is an outer ring fault.",
    FaultLabel.RollingElement: "The diagnosis result is a rolling element fault.",
}


@dataclass
class PromptTemplate:
    """Wording of one record: instruction text, 24 per-feature phrases each
    holding one ``{value}`` placeholder, and an output phrase per label."""

    instruction: str = DEFAULT_INSTRUCTION
    feature_phrases: tuple = DEFAULT_FEATURE_PHRASES
    output_phrases: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUT_PHRASES))
    sig_digits: int = 6
    undefined_phrase: str | None = "undefined"

    def validate(self):
        if len(self.feature_phrases) != 24:
            raise TemplateIncomplete(
                f"template needs 24 feature phrases, got {len(self.feature_phrases)}")
        for i, phrase in enumerate(self.feature_phrases, start=1):
            if phrase.count("{value}") != 1:
                raise TemplateIncomplete(
                    f"feature phrase {i} must contain exactly one {{value}} placeholder",
                    phrase_index=i)
        for label in FaultLabel:
            if label not in self.output_phrases:
                raise TemplateIncomplete(f"no output phrase for label {label.short_name}",
                                         label=label.short_name)
        outputs = list(self.output_phrases.values())
        if len(set(outputs)) != len(outputs):
            raise TemplateIncomplete("output phrases must be distinct per label")


def render_record(fv: FeatureVector, label: FaultLabel,
                  template: PromptTemplate | None = None) -> FinetuneRecord:
    """One instruction-tuning record from a feature vector and its label."""
    tpl = template or PromptTemplate()
    tpl.validate()
    if fv.flags and tpl.undefined_phrase is None:
        raise TemplateIncomplete(
            "feature vector has degenerate features but the template defines no "
            "undefined phrase",
            flagged=",".join(str(i) for i in sorted(fv.flags)))
    parts = []
    for i in range(1, 25):
        if fv.is_flagged(i):
            text = tpl.undefined_phrase
        else:
            text = format_value(fv.p(i), tpl.sig_digits)
        parts.append(tpl.feature_phrases[i - 1].format(value=text))
    return FinetuneRecord(
        instruction=tpl.instruction,
        input=" ".join(parts),
        output=tpl.output_phrases[label],
        history=[],
    )


def emit_corpus(records, path: str) -> int:
    """Write one JSON record per line, UTF-8, fixed key order. Returns count."""
    count = 0
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict(), ensure_ascii=False))
                fh.write("\n")
                count += 1
    except OSError as exc:
        raise OSError(f"cannot write corpus to {path!r}: {exc}") from exc
    return count


def parse_corpus(path: str) -> list[FinetuneRecord]:
    """Inverse of emit_corpus on its own output; strict about keys and order."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip("\n")
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedLine(f"line {lineno} is not valid JSON: {exc.msg}",
                                    line=lineno) from exc
            if not isinstance(obj, dict):
                raise MalformedLine(f"line {lineno} is not an object", line=lineno)
            for key in RECORD_KEYS:
                if key not in obj:
                    raise MissingKey(key, lineno)
            if tuple(obj.keys()) != RECORD_KEYS:
                raise MalformedLine(
                    f"line {lineno} keys must be exactly {list(RECORD_KEYS)} in order, "
                    f"got {list(obj.keys())}", line=lineno)
            if not all(isinstance(obj[k], str) for k in RECORD_KEYS[:3]) \
                    or not isinstance(obj["history"], list):
                raise MalformedLine(f"line {lineno} has wrongly typed fields", line=lineno)
            records.append(FinetuneRecord(instruction=obj["instruction"], input=obj["input"],
                                          output=obj["output"], history=obj["history"]))
    return records
