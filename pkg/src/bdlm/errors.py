"""Exception taxonomy shared across the toolkit.

Every error carries a ``fields`` dict so the CLI can emit machine-readable
``key=value`` lines next to the human message.
"""

from __future__ import annotations


class BdlmError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str, **fields):
        super().__init__(message)
        self.fields = fields

    @property
    def kind(self) -> str:
        return type(self).__name__


# --- configuration / input validation ---------------------------------------

class InvalidConfig(BdlmError):
    pass


class SignalTooShort(BdlmError):
    pass


class EmptyInput(BdlmError):
    pass


class ShapeMismatch(BdlmError):
    pass


class OddDimension(BdlmError):
    pass


# --- text corpus -------------------------------------------------------------

class TemplateIncomplete(BdlmError):
    pass


class MalformedLine(BdlmError):
    def __init__(self, message: str, line: int, **fields):
        super().__init__(message, line=line, **fields)
        self.line = line


class MissingKey(BdlmError):
    def __init__(self, key: str, line: int, **fields):
        super().__init__(f"missing key {key!r} at line {line}", key=key, line=line, **fields)
        self.key = key
        self.line = line


# --- ingest ------------------------------------------------------------------

class MissingColumn(BdlmError):
    pass


class NonNumericCell(BdlmError):
    def __init__(self, message: str, row: int, **fields):
        super().__init__(message, row=row, **fields)
        self.row = row


class SizeMismatch(BdlmError):
    pass


class BadMagic(BdlmError):
    pass


class UnsupportedElement(BdlmError):
    def __init__(self, message: str, type_code: int, **fields):
        super().__init__(message, type_code=type_code, **fields)
        self.type_code = type_code


class VariableNotFound(BdlmError):
    def __init__(self, name: str, available: list[str], **fields):
        super().__init__(
            f"variable {name!r} not found; file contains {available!r}",
            name=name, available=",".join(available), **fields,
        )
        self.name = name
        self.available = available


class CorruptElement(BdlmError):
    def __init__(self, message: str, offset: int, **fields):
        super().__init__(f"{message} (offset {offset})", offset=offset, **fields)
        self.offset = offset


class ManifestError(BdlmError):
    """Aggregate of per-entry manifest failures."""

    def __init__(self, entry_errors: list[tuple[int, Exception]], **fields):
        lines = "; ".join(f"entry {i}: {e}" for i, e in entry_errors)
        super().__init__(f"manifest has {len(entry_errors)} bad entries: {lines}",
                         entries=",".join(str(i) for i, _ in entry_errors), **fields)
        self.entry_errors = entry_errors


class ManifestLabelError(BdlmError):
    pass


# --- model / training ----------------------------------------------------------

class EmptyDataset(BdlmError):
    pass


class DivergedLoss(BdlmError):
    pass


class VersionMismatch(BdlmError):
    pass


class CorruptFile(BdlmError):
    pass


# --- experiments ---------------------------------------------------------------

class ClassTooSmall(BdlmError):
    def __init__(self, message: str, label: str, **fields):
        super().__init__(message, label=label, **fields)
        self.label = label


class EmptyCondition(BdlmError):
    pass


class LabelSpaceMismatch(BdlmError):
    pass


class LengthMismatch(BdlmError):
    pass


class PlanError(BdlmError):
    """Plan file failed validation; maps to CLI exit code 2."""
