"""
Instrumentation plans and ground-truth records.
"""

import os
from enum import Enum
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Union

import yaml

from core.cpg.graph import CodePropertyGraph
from core.guards.mechanisms import GuardSite
from core.taint.pairs import SourceSinkPair
from core.taint.sites import SinkSite
from core.taint.tracer import DataFlowPath
from core.utils.common import SourceSpan, VulnClass


class InstrumentationClass(Enum):
    REMOVE_MECHANISM = "RemoveMechanism"
    SURROUND_ALWAYS_FALSE = "SurroundAlwaysFalse"
    SURROUND_ALWAYS_TRUE = "SurroundAlwaysTrue"
    ARITHMETIC_INFLUENCE = "ArithmeticInfluence"
    MOVE_TO_UNRELATED_PATH = "MoveToUnrelatedPath"
    SWAP_CHECK_AND_SINK = "SwapCheckAndSink"
    INTEGER_OVERFLOW_ANTI_PATTERN = "IntegerOverflowAntiPattern"
    FORMAT_STRING_ANTI_PATTERN = "FormatStringAntiPattern"


CLASS_ORDER = list(InstrumentationClass)


@dataclass(frozen=True)
class Rewrite:
    """Replace the bytes of ``span`` (possibly empty, an insertion) with ``replacement``."""
    span: SourceSpan
    replacement: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "file": self.span.file,
            "byte_start": self.span.byte_start,
            "byte_end": self.span.byte_end,
            "line": self.span.display_line,
            "replacement": self.replacement,
        }


Target = Union[GuardSite, SinkSite]


@dataclass
class InstrumentationPlan:
    target: Target
    instrumentation: InstrumentationClass
    variant_id: int
    rewrites: List[Rewrite] = field(default_factory=list)
    rng_seed: int = 0
    description: str = ""

    @property
    def file(self) -> str:
        return self.rewrites[0].span.file if self.rewrites else ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target": self.target.to_dict(),
            "class": self.instrumentation.value,
            "variant_id": self.variant_id,
            "rng_seed": self.rng_seed,
            "description": self.description,
            "rewrites": [r.to_dict() for r in self.rewrites],
        }


@dataclass
class GroundTruthRecord:
    pair: SourceSinkPair
    chosen_path: DataFlowPath
    guard: Optional[GuardSite]
    plan: InstrumentationPlan
    original_snippet: str
    rewritten_snippet: str
    vuln_class: VulnClass

    def to_dict(self, graph: Optional[CodePropertyGraph] = None) -> Dict[str, Any]:
        return {
            "source": self.pair.source.to_dict(),
            "sink": self.pair.sink.to_dict(),
            "chosen_path": self.chosen_path.to_dict(graph),
            "guard": self.guard.to_dict() if self.guard is not None else None,
            "plan": self.plan.to_dict(),
            "original_snippet": self.original_snippet,
            "rewritten_snippet": self.rewritten_snippet,
            "vuln_class": self.vuln_class.value,
        }


def save_plan(plan: InstrumentationPlan, directory: str) -> str:
    """Write ``plan.yaml`` next to a variant's sources."""
    filepath = os.path.join(directory, "plan.yaml")
    plan_dict = asdict(plan)
    # enum values and spans as plain strings for YAML
    plan_dict["instrumentation"] = plan.instrumentation.value
    plan_dict["target"] = plan.target.to_dict()
    plan_dict["rewrites"] = [r.to_dict() for r in plan.rewrites]

    tmp_path = filepath + ".tmp"
    with open(tmp_path, 'w', encoding='utf-8') as f:
        yaml.dump(plan_dict, f, default_flow_style=False,
                  allow_unicode=True, sort_keys=False)
    os.replace(tmp_path, filepath)
    return filepath
