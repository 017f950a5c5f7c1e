from enum import Enum
from dataclasses import dataclass, asdict
from typing import Optional, Dict, Any


class VulnClass(Enum):
    """Vulnerability classes a sensitive sink can belong to."""
    BUFFER_LENGTH = "BufferLength"
    FORMAT_STRING = "FormatString"
    ALLOC_SIZE = "AllocSize"
    OUTBOUND_LEAK = "OutboundLeak"


class SourceKind(Enum):
    """Origins of user-controlled data."""
    FILE = "File"
    NETWORK = "Network"
    ARGV = "Argv"
    STDIN = "Stdin"
    ENV = "Env"


class DiagnosticKind(Enum):
    """Recoverable analysis problems that are recorded instead of raised."""
    SKIPPED_REGION = "skipped_region"
    DUPLICATE_DEFINITION = "duplicate_definition"
    MISSING_SUMMARY = "missing_summary"
    DUPLICATE_SUMMARY = "duplicate_summary"
    DANGLING_DEFINITION = "dangling_definition"
    BUDGET_EXHAUSTED = "budget_exhausted"
    SKIPPED_GUARD = "skipped_guard"
    REPARSE_FAILURE = "reparse_failure"


@dataclass(frozen=True)
class SourceSpan:
    """A byte-exact region of a translation unit.

    Lines and columns are 1-based and physical (as found in ``file``);
    ``origin_file``/``origin_line`` carry the location recovered from
    preprocessor line markers when there are any.
    """
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int
    byte_start: int
    byte_end: int
    origin_file: Optional[str] = None
    origin_line: Optional[int] = None

    def __post_init__(self):
        if self.byte_start > self.byte_end:
            raise ValueError(f"Inverted span {self.byte_start}..{self.byte_end} in {self.file}")

    @property
    def display_file(self) -> str:
        return self.origin_file or self.file

    @property
    def display_line(self) -> int:
        return self.origin_line if self.origin_line is not None else self.start_line

    def contains(self, other: "SourceSpan") -> bool:
        return (self.file == other.file
                and self.byte_start <= other.byte_start
                and other.byte_end <= self.byte_end)

    def overlaps(self, other: "SourceSpan") -> bool:
        return (self.file == other.file
                and self.byte_start < other.byte_end
                and other.byte_start < self.byte_end)

    def location(self) -> str:
        return f"{self.display_file}:{self.display_line}"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Diagnostic:
    """A recorded, non-fatal analysis problem."""
    kind: DiagnosticKind
    message: str
    location: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "message": self.message,
            "location": self.location,
        }
