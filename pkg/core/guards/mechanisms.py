#!/usr/bin/env python3
"""
Security mechanisms on a control-flow corridor.

A condition is a guard when it reads the variable carried by its corridor
segment, or a variable derived from it earlier in the same segment. Guards
are then classified by what their non-continuing branch does: returning,
exiting, raising a signal or setting an error value makes an aborting
check.
"""

import re
import logging
from enum import Enum
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, List, Optional, Set

from core.cpg.exprs import access_key, keys_match, value_uses
from core.cpg.graph import CodePropertyGraph, CpgNode, EdgeKind, NodeKind
from core.frontend.ast import ExprKind, StmtKind
from core.guards.corridor import ControlFlowCorridor, CorridorSegment
from core.utils.common import Diagnostic, DiagnosticKind, SourceSpan

logger = logging.getLogger(__name__)

EXIT_CALLS = frozenset({"exit", "_exit", "_Exit", "abort"})
SIGNAL_CALLS = frozenset({"raise", "abort", "longjmp"})
ZERO_LITERALS = frozenset({"0", "0x0", "0x00", "'\\0'", "'\\x00'", "'\\000'"})

DEFAULT_ERROR_PATTERN = r"err|fail|status"


class GuardClass(Enum):
    ABORTING = "AbortingCheck"
    NON_ABORTING = "NonAbortingCheck"
    UNRECOGNIZED = "UnrecognizedMechanism"
    SANITIZATION = "Sanitization"


class AbortEvidence(Enum):
    RETURN = "ReturnStmt"
    EXIT_CALL = "ExitCall"
    ERROR_VALUE = "ErrorValueSet"
    SIGNAL = "SignalRaise"


class Polarity(Enum):
    MUST_BE_FALSE = "MustBeFalseToPass"
    MUST_BE_TRUE = "MustBeTrueToPass"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class GuardSite:
    """A condition (or sanitizing store) on a corridor.

    ``target_node`` is the next corridor node in the condition's function
    that the passing branch leads to.
    """
    condition_node: int
    guarded_var: str
    function: str
    span: SourceSpan
    target_node: int
    segment_index: int = 0
    classification: GuardClass = GuardClass.UNRECOGNIZED
    abort_evidence: FrozenSet[AbortEvidence] = frozenset()
    polarity: Polarity = Polarity.UNKNOWN

    @property
    def line(self) -> int:
        return self.span.display_line

    def to_dict(self) -> Dict[str, object]:
        return {
            "condition_node": self.condition_node,
            "guarded_var": self.guarded_var,
            "function": self.function,
            "location": self.span.location(),
            "classification": self.classification.value,
            "abort_evidence": sorted(e.value for e in self.abort_evidence),
            "polarity": self.polarity.value,
        }


def _reads_derived(node: CpgNode, derived: Set[str]) -> bool:
    return any(keys_match(use, key) for use in node.uses for key in derived)


def _derive(graph: CodePropertyGraph, node: CpgNode, derived: Set[str]):
    symbols = graph.functions[node.function].symbols
    for assignment in node.assignments:
        if assignment.value is None:
            continue
        uses = value_uses(assignment.value, symbols)
        if any(keys_match(use, key) for use in uses for key in derived):
            derived.add(assignment.target)


def _segment_target(graph: CodePropertyGraph, sequence: List[int], position: int) -> int:
    function = graph.nodes[sequence[position]].function
    target = sequence[position]
    for node_id in sequence[position + 1:]:
        if graph.nodes[node_id].function != function:
            break
        target = node_id
    return target


def find_security_mechanisms(graph: CodePropertyGraph, corridor: ControlFlowCorridor,
                             diagnostics: Optional[List[Diagnostic]] = None) -> List[GuardSite]:
    """Unclassified guard sites of a corridor, ordered by condition node."""
    found: Dict[int, GuardSite] = {}
    skipped: Set[int] = set()
    for segment in corridor.segments:
        for sequence in segment.sequences:
            derived = {segment.var}
            for position, node_id in enumerate(sequence):
                node = graph.nodes[node_id]
                if node.kind is NodeKind.CONDITION and position < len(sequence) - 1:
                    if _reads_derived(node, derived):
                        if node_id not in found:
                            found[node_id] = GuardSite(
                                condition_node=node_id, guarded_var=segment.var, function=node.function,
                                span=node.span, target_node=_segment_target(graph, sequence, position),
                                segment_index=segment.index,
                            )
                    else:
                        skipped.add(node_id)
                _derive(graph, node, derived)

    for node_id in sorted(skipped - set(found)):
        location = graph.nodes[node_id].span.location()
        logger.debug(f"condition at {location} does not read corridor data; skipped")
        if diagnostics is not None:
            diagnostics.append(Diagnostic(DiagnosticKind.SKIPPED_GUARD,
                                          "condition does not read corridor data", location))
    return [found[n] for n in sorted(found)]


def _reachable_from(graph: CodePropertyGraph, start: int, blocked: int) -> Set[int]:
    seen = {start}
    stack = [start]
    while stack:
        for succ in graph.cfg_successors(stack.pop()):
            if succ != blocked and succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return seen


def _is_negative_constant(expr) -> bool:
    if expr is None:
        return False
    expr = expr.stripped()
    return expr.kind is ExprKind.UNARY and expr.op == "-" and expr.children[0].stripped().kind is ExprKind.NUMBER


def _abort_evidence(graph: CodePropertyGraph, start: int, condition: int,
                    error_pattern: re.Pattern) -> Set[AbortEvidence]:
    evidence: Set[AbortEvidence] = set()
    left = False
    reach = _reachable_from(graph, start, condition)
    for node_id in sorted(reach):
        node = graph.nodes[node_id]
        if node.kind is NodeKind.RETURN_STMT:
            evidence.add(AbortEvidence.RETURN)
            left = True
        elif node.kind is NodeKind.EXIT:
            left = True
            falls_off = [p for p in graph.cfg_predecessors(node_id)
                         if graph.nodes[p].kind is not NodeKind.RETURN_STMT
                         and not any(c.callee in EXIT_CALLS for c in graph.nodes[p].calls)]
            # a failing edge straight into Exit leaves the function like a bare return
            if start == node_id or any(p in reach for p in falls_off):
                evidence.add(AbortEvidence.RETURN)
        for call in node.calls:
            if call.callee in EXIT_CALLS:
                evidence.add(AbortEvidence.EXIT_CALL)
                left = True
            if call.callee in SIGNAL_CALLS:
                evidence.add(AbortEvidence.SIGNAL)
        for assignment in node.assignments:
            if error_pattern.search(assignment.target) or _is_negative_constant(assignment.value):
                evidence.add(AbortEvidence.ERROR_VALUE)
    if AbortEvidence.ERROR_VALUE in evidence and not left:
        evidence.discard(AbortEvidence.ERROR_VALUE)
    return evidence


def classify_guard(graph: CodePropertyGraph, site: GuardSite,
                   error_pattern: str = DEFAULT_ERROR_PATTERN) -> GuardSite:
    """Fill in classification, evidence and polarity of a guard site."""
    pattern = re.compile(error_pattern, re.IGNORECASE)
    branches = {d.get("label"): v for v, d in graph.out_edges(site.condition_node, EdgeKind.CFG_NEXT)
                if d.get("label") in ("true", "false")}
    if set(branches) != {"true", "false"}:
        return replace(site, classification=GuardClass.UNRECOGNIZED, polarity=Polarity.UNKNOWN)

    continues = {label for label, succ in branches.items()
                 if succ == site.target_node
                 or site.target_node in _reachable_from(graph, succ, site.condition_node)}
    if continues == {"true", "false"}:
        return replace(site, classification=GuardClass.NON_ABORTING, polarity=Polarity.UNKNOWN)
    if not continues:
        return replace(site, classification=GuardClass.UNRECOGNIZED, polarity=Polarity.UNKNOWN)

    passing = continues.pop()
    failing = "false" if passing == "true" else "true"
    polarity = Polarity.MUST_BE_TRUE if passing == "true" else Polarity.MUST_BE_FALSE
    evidence = _abort_evidence(graph, branches[failing], site.condition_node, pattern)
    classification = GuardClass.ABORTING if evidence else GuardClass.UNRECOGNIZED
    return replace(site, classification=classification, abort_evidence=frozenset(evidence), polarity=polarity)


def _zero_index_stores(node: CpgNode):
    for expr in ([node.expr] if node.expr is not None else []):
        for e in expr.walk():
            if e.kind is not ExprKind.ASSIGN or e.op != "=":
                continue
            target, value = e.children[0].stripped(), e.children[1].stripped()
            if target.kind is ExprKind.INDEX and value.kind in (ExprKind.NUMBER, ExprKind.CHAR) \
                    and value.text.strip() in ZERO_LITERALS:
                key = access_key(target)
                if key is not None:
                    yield key


def detect_sanitizations(graph: CodePropertyGraph, corridor: ControlFlowCorridor) -> List[GuardSite]:
    """Null-byte truncations of a corridor buffer; recorded, never instrumented."""
    found: Dict[int, GuardSite] = {}
    for segment in corridor.segments:
        for sequence in segment.sequences:
            derived = {segment.var}
            for node_id in sequence:
                node = graph.nodes[node_id]
                if node.stmt is not None and node.stmt.kind is StmtKind.EXPR and node_id not in found:
                    for key in _zero_index_stores(node):
                        if any(keys_match(key, d) for d in derived):
                            found[node_id] = GuardSite(
                                condition_node=node_id, guarded_var=segment.var, function=node.function,
                                span=node.span, target_node=segment.to_hop, segment_index=segment.index,
                                classification=GuardClass.SANITIZATION,
                            )
                            break
                _derive(graph, node, derived)
    return [found[n] for n in sorted(found)]


def locate_guards(graph: CodePropertyGraph, corridors: List[ControlFlowCorridor],
                  error_pattern: str = DEFAULT_ERROR_PATTERN,
                  diagnostics: Optional[List[Diagnostic]] = None) -> List[GuardSite]:
    """Classified guards and sanitizations over several corridors, one per node."""
    sites: Dict[int, GuardSite] = {}
    for corridor in corridors:
        for site in find_security_mechanisms(graph, corridor, diagnostics):
            if site.condition_node not in sites:
                sites[site.condition_node] = classify_guard(graph, site, error_pattern)
        for site in detect_sanitizations(graph, corridor):
            sites.setdefault(site.condition_node, site)
    return [sites[n] for n in sorted(sites)]


def segment_of(corridor: ControlFlowCorridor, site: GuardSite) -> Optional[CorridorSegment]:
    for segment in corridor.segments:
        if any(site.condition_node in seq for seq in segment.sequences):
            return segment
    return None
