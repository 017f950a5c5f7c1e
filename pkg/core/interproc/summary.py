"""
Function summary records shared by the interprocedural analyses.
"""

from enum import Enum
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set, Tuple

from core.utils.common import SourceKind, VulnClass

RETURN_VALUE = -1
VARIADIC = -2


class ParamStatus(Enum):
    YES = "Y"
    NO = "N"
    MAYBE = "M"


def combine_status(statuses: List[ParamStatus]) -> ParamStatus:
    """Join of the statuses of several possible callees."""
    if not statuses:
        return ParamStatus.MAYBE
    if all(s is ParamStatus.YES for s in statuses):
        return ParamStatus.YES
    if all(s is ParamStatus.NO for s in statuses):
        return ParamStatus.NO
    return ParamStatus.MAYBE


@dataclass(frozen=True)
class SinkSpec:
    param_index: int
    vuln_class: VulnClass

    @property
    def variadic(self) -> bool:
        return self.param_index == VARIADIC


@dataclass
class FunctionSummary:
    """What a function does to its parameters and where its data goes.

    ``param_transfers`` holds (from, to) pairs: data of parameter ``from``
    (or the return value, ``RETURN_VALUE``) ends up in parameter ``to``.
    ``weak_maybe`` lists Maybe entries that only stem from external
    summaries; callers do not inherit them.
    """
    name: str
    param_modified: List[ParamStatus] = field(default_factory=list)
    param_transfers: List[Tuple[int, int]] = field(default_factory=list)
    returns_param_data: Set[int] = field(default_factory=set)
    source_kind: Optional[SourceKind] = None
    source_arg: Optional[int] = None
    sink_specs: List[SinkSpec] = field(default_factory=list)
    external: bool = False
    noreturn: bool = False
    variadic_status: Optional[ParamStatus] = None
    variadic_source: bool = False
    weak_maybe: Set[int] = field(default_factory=set)

    @property
    def sink_spec(self) -> Optional[SinkSpec]:
        return self.sink_specs[0] if self.sink_specs else None

    @property
    def is_source(self) -> bool:
        return self.source_kind is not None

    def status(self, index: int) -> ParamStatus:
        if 0 <= index < len(self.param_modified):
            return self.param_modified[index]
        if self.variadic_status is not None:
            return self.variadic_status
        return ParamStatus.NO

    def propagated_status(self, index: int) -> ParamStatus:
        """Status as seen by a caller deriving its own summary."""
        status = self.status(index)
        if status is ParamStatus.MAYBE and index in self.weak_maybe and not self.external:
            return ParamStatus.NO
        return status

    def controls_arg(self, index: int) -> bool:
        """Whether a source call makes argument ``index`` user-controlled."""
        if not self.is_source:
            return False
        if self.source_arg == VARIADIC:
            return index >= len(self.param_modified)
        return self.source_arg == index

    def transfers_into(self, index: int) -> List[int]:
        """Parameters whose data flows into parameter ``index``."""
        variadic = index >= len(self.param_modified) and self.external
        return sorted({src for src, dst in self.param_transfers
                       if src >= 0 and (dst == index or (variadic and dst == VARIADIC))})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "param_modified": [s.value for s in self.param_modified],
            "param_transfers": [list(t) for t in sorted(self.param_transfers)],
            "returns_param_data": sorted(self.returns_param_data),
            "source_kind": self.source_kind.value if self.source_kind else None,
            "sink_specs": [[s.param_index, s.vuln_class.value] for s in self.sink_specs],
            "external": self.external,
        }
