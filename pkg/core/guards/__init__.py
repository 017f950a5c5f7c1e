from core.guards.corridor import ControlFlowCorridor, CorridorSegment, enumerate_corridor
from core.guards.mechanisms import (
    AbortEvidence, GuardClass, GuardSite, Polarity, classify_guard, detect_sanitizations,
    find_security_mechanisms, locate_guards,
)

__all__ = [
    "ControlFlowCorridor", "CorridorSegment", "enumerate_corridor",
    "AbortEvidence", "GuardClass", "GuardSite", "Polarity", "classify_guard",
    "detect_sanitizations", "find_security_mechanisms", "locate_guards",
]
