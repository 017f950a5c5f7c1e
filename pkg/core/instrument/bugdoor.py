"""
Bugdoorability: whether a security mechanism is understood well enough to
be instrumented, and which instrumentations apply to it.
"""

import logging
from enum import Enum
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

from core.cpg.graph import CodePropertyGraph
from core.frontend.ast import ExprKind, StmtKind
from core.guards.mechanisms import GuardClass, GuardSite, Polarity
from core.instrument.plans import InstrumentationClass
from core.instrument.rewrites import (InstrumentContext, format_string_antipattern,
                                      guard_statement, guard_variants)
from core.taint.sites import SinkSite
from core.utils.errors import NotApplicable

logger = logging.getLogger(__name__)


class SkipReason(Enum):
    NOT_SECURITY_CRITICAL = "NotSecurityCritical"
    NOT_UNDERSTOOD = "NotUnderstood"
    SANITIZATION = "Sanitization"
    UNKNOWN_POLARITY = "UnknownPolarity"
    UNRECOGNIZED = "UnrecognizedMechanism"
    NOT_APPLICABLE = "NotApplicable"


UNDERSTOOD = "Understood"


@dataclass(frozen=True)
class BugdoorDecision:
    bugdoorable: bool
    reason: str = UNDERSTOOD

    def __bool__(self) -> bool:
        return self.bugdoorable


def _refuse(reason: SkipReason) -> BugdoorDecision:
    return BugdoorDecision(False, reason.value)


def _condition_understood(graph: CodePropertyGraph, site: GuardSite) -> bool:
    stmt = guard_statement(graph, site)
    if stmt is None or stmt.expr is None or stmt.condition_span is None:
        return False
    if any(s.kind is StmtKind.OPAQUE for s in stmt.walk()):
        return False
    for inner in stmt.walk():
        if any(expr.contains_opaque() for expr in inner.expressions()):
            return False
    for expr in stmt.expr.walk():
        if expr.kind is ExprKind.CALL:
            callee = expr.callee.stripped() if expr.callee is not None else None
            if callee is None or callee.kind is not ExprKind.IDENT or callee.name not in graph.functions:
                return False
    return True


def is_bugdoorable(site: Union[GuardSite, SinkSite], graph: CodePropertyGraph) -> BugdoorDecision:
    if isinstance(site, SinkSite):
        try:
            format_string_antipattern(site, graph)
        except NotApplicable:
            return _refuse(SkipReason.NOT_APPLICABLE)
        return BugdoorDecision(True)

    if site.classification is GuardClass.SANITIZATION:
        return _refuse(SkipReason.SANITIZATION)
    if site.classification is GuardClass.NON_ABORTING:
        return _refuse(SkipReason.NOT_SECURITY_CRITICAL)
    if site.classification is GuardClass.UNRECOGNIZED:
        return _refuse(SkipReason.UNRECOGNIZED)
    if site.polarity is Polarity.UNKNOWN:
        return _refuse(SkipReason.UNKNOWN_POLARITY)
    if not _condition_understood(graph, site):
        return _refuse(SkipReason.NOT_UNDERSTOOD)
    return BugdoorDecision(True)


def applicable_instrumentations(site: Union[GuardSite, SinkSite], graph: CodePropertyGraph,
                                context: Optional[InstrumentContext] = None
                                ) -> List[Tuple[InstrumentationClass, int]]:
    """(class, variant count) pairs; empty when the site is not bugdoorable."""
    decision = is_bugdoorable(site, graph)
    if not decision:
        logger.debug(f"{site.span.location()} skipped: {decision.reason}")
        return []
    if isinstance(site, SinkSite):
        return [(InstrumentationClass.FORMAT_STRING_ANTI_PATTERN, 1)]
    context = context or InstrumentContext(graph=graph)
    return [(cls, len(variants)) for cls, variants in guard_variants(site, context).items()]
