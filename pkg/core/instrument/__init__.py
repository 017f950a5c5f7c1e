from core.instrument.plans import (
    CLASS_ORDER, GroundTruthRecord, InstrumentationClass, InstrumentationPlan, Rewrite, save_plan,
)
from core.instrument.rewrites import InstrumentContext, build_plan, format_string_antipattern, guard_variants
from core.instrument.bugdoor import BugdoorDecision, SkipReason, applicable_instrumentations, is_bugdoorable
from core.instrument.apply import apply_rewrites, choose_and_apply

__all__ = [
    "CLASS_ORDER", "GroundTruthRecord", "InstrumentationClass", "InstrumentationPlan", "Rewrite", "save_plan",
    "InstrumentContext", "build_plan", "format_string_antipattern", "guard_variants",
    "BugdoorDecision", "SkipReason", "applicable_instrumentations", "is_bugdoorable",
    "apply_rewrites", "choose_and_apply",
]
