"""
Exception hierarchy for BugForge.

Conditions the analysis can recover from are recorded as diagnostics; the
classes below are raised only where the caller has to decide what happens
next (the CLI maps them to exit codes).
"""

from typing import Optional


class BugForgeError(Exception):
    """Base class for all BugForge errors."""


class UnbalancedDelimiters(BugForgeError):
    """Braces or parentheses cannot be matched at file granularity."""

    def __init__(self, path: str, offset: int, delimiter: str):
        self.path = path
        self.offset = offset
        self.delimiter = delimiter
        super().__init__(f"{path}: unbalanced '{delimiter}' at byte {offset}")


class SummaryParseError(BugForgeError):
    """A summary file line could not be parsed."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class BudgetExhausted(BugForgeError):
    """A depth or path budget was hit while tracing; caught inside the tracer."""


class SpanMismatch(BugForgeError):
    """File bytes no longer match the analysed spans."""

    def __init__(self, path: str, byte_start: int, byte_end: int):
        self.path = path
        self.byte_start = byte_start
        self.byte_end = byte_end
        super().__init__(f"{path}: bytes {byte_start}..{byte_end} changed since analysis")


class ReparseFailure(BugForgeError):
    """A rewrite produced code the frontend can no longer parse cleanly."""


class NotApplicable(BugForgeError):
    """An instrumentation does not apply to the given target."""


class BuildFailure(BugForgeError):
    """Compiling an original or variant corpus failed."""

    def __init__(self, message: str, output: Optional[str] = None):
        self.output = output or ""
        super().__init__(message)


class ReportWriteError(BugForgeError):
    """Persisting a report or ground truth file failed."""


class EmptyCorpus(BugForgeError):
    """The corpus directory holds no C translation units."""


class NoBugdoorableSite(BugForgeError):
    """Analysis found no security mechanism that can be instrumented."""

    def __init__(self, reasons: Optional[dict] = None):
        self.reasons = dict(reasons or {})
        detail = ", ".join(f"{k}: {v}" for k, v in sorted(self.reasons.items())) or "no guard sites"
        super().__init__(f"no bugdoorable site ({detail})")
