"""Warnings, source spans and the exception hierarchy shared by all stages."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True, order=True)
class SourceSpan:
    file_path: str
    line: int = 1
    column: int = 1

    def __post_init__(self) -> None:
        if not self.file_path:
            raise ValueError("SourceSpan.file_path must be non-empty")
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid position {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file_path}:{self.line}:{self.column}"

    def to_json(self) -> dict:
        return {"file": self.file_path, "line": self.line, "column": self.column}

    @classmethod
    def from_json(cls, data: dict) -> "SourceSpan":
        return cls(data["file"], int(data["line"]), int(data["column"]))


# Machine-readable warning codes surfaced by the CLI.
UNSUPPORTED_COMMAND = "UNSUPPORTED_COMMAND"
UNRESOLVED_INCLUDE = "UNRESOLVED_INCLUDE"
EXTERNAL_MODULE = "EXTERNAL_MODULE"
INCLUDE_CYCLE = "INCLUDE_CYCLE"
INCLUDE_DEPTH_EXCEEDED = "INCLUDE_DEPTH_EXCEEDED"
BRANCH_OVERFLOW = "BRANCH_OVERFLOW"
UNROLL_CAP_EXCEEDED = "UNROLL_CAP_EXCEEDED"
CALL_DEPTH_EXCEEDED = "CALL_DEPTH_EXCEEDED"
UNDEFINED_VARIABLE = "UNDEFINED_VARIABLE"
GENERATOR_EXPRESSION = "GENERATOR_EXPRESSION"
OPAQUE_CONDITION = "OPAQUE_CONDITION"
DANGLING_REFERENCE = "DANGLING_REFERENCE"
UNSAT_REFERENCE = "UNSAT_REFERENCE"
LINK_CYCLE = "LINK_CYCLE"
INVALID_ENCODING = "INVALID_ENCODING"
PARSE_ERROR = "PARSE_ERROR"
UNKNOWN_OPTION = "UNKNOWN_OPTION"
ID_COLLISION = "ID_COLLISION"
CONDITIONAL_TARGET_KIND = "CONDITIONAL_TARGET_KIND"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: SourceSpan | None = None
    # the construct the warning is about, e.g. the unsupported command name
    subject: str = ""

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}warning[{self.code}]: {self.message}"

    def to_json(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.span:
            out["span"] = self.span.to_json()
        if self.subject:
            out["subject"] = self.subject
        return out


def summarize(warnings: Iterable[Diagnostic]) -> dict[str, int]:
    """Warning counts per code, keys sorted."""
    counts = Counter(w.code for w in warnings)
    return dict(sorted(counts.items()))


def unsupported_constructs(warnings: Iterable[Diagnostic]) -> dict[str, int]:
    counts = Counter(w.subject for w in warnings if w.code == UNSUPPORTED_COMMAND and w.subject)
    return dict(sorted(counts.items()))


class AnalyzerError(Exception):
    """Base class for all structured errors raised by the analyzer."""


class CMakeSyntaxError(AnalyzerError):
    def __init__(self, message: str, span: SourceSpan) -> None:
        super().__init__(f"{span}: {message}")
        self.span = span


class UnterminatedString(CMakeSyntaxError):
    pass


class UnterminatedBracket(CMakeSyntaxError):
    pass


class UnbalancedBlock(CMakeSyntaxError):
    pass


class MisplacedElse(CMakeSyntaxError):
    pass


class MissingRootListfile(AnalyzerError):
    pass


class SchemaVersionMismatch(AnalyzerError):
    pass


class CorruptPayload(AnalyzerError):
    pass


class UnknownDeliverable(AnalyzerError):
    pass


class MalformedDiff(AnalyzerError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyGroundTruth(AnalyzerError):
    pass


class NotAPermutation(AnalyzerError):
    pass


class TooShort(AnalyzerError):
    pass
