"""
Sensitive sinks and user-controlled sources of a corpus.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Tuple

from core.cpg.graph import CodePropertyGraph, NodeKind
from core.frontend.ast import ExprKind
from core.interproc.summary import RETURN_VALUE, VARIADIC, FunctionSummary
from core.utils.common import SourceKind, SourceSpan, VulnClass

logger = logging.getLogger(__name__)

MAIN_SOURCES = {"argv": SourceKind.ARGV, "envp": SourceKind.ENV}


@dataclass(frozen=True)
class SinkSite:
    """One sensitive argument of one call."""
    call_node: int
    callee: str
    sensitive_arg_index: int
    vuln_class: VulnClass
    call_index: int
    span: SourceSpan

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.call_node, self.call_index, self.sensitive_arg_index)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "call_node": self.call_node,
            "callee": self.callee,
            "sensitive_arg_index": self.sensitive_arg_index,
            "vuln_class": self.vuln_class.value,
            "location": self.span.location(),
        }


@dataclass(frozen=True)
class SourceSite:
    """A call (or a ``main`` parameter) producing user-controlled data.

    ``controlled_arg`` is an argument index, ``RETURN_VALUE`` or, for
    sources writing all their variadic arguments, ``VARIADIC``. For
    ``main`` parameters ``call_node`` is the Parameter node.
    """
    call_node: int
    callee: str
    source_kind: SourceKind
    controlled_arg: int
    call_index: int
    span: SourceSpan

    @property
    def key(self) -> Tuple[int, int]:
        return (self.call_node, self.call_index)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "call_node": self.call_node,
            "callee": self.callee,
            "source_kind": self.source_kind.value,
            "controlled_arg": "return" if self.controlled_arg == RETURN_VALUE else self.controlled_arg,
            "location": self.span.location(),
        }


def _is_literal(expr) -> bool:
    return expr.stripped().kind in (ExprKind.STRING, ExprKind.NUMBER, ExprKind.CHAR)


def find_sensitive_sinks(graph: CodePropertyGraph, summaries: Dict[str, FunctionSummary],
                         sink_classes: Optional[Iterable[VulnClass]] = None) -> List[SinkSite]:
    """One SinkSite per sensitive argument of every call with a sink summary.

    Format-string positions holding a string literal are not sinks.
    """
    classes = set(sink_classes) if sink_classes is not None else set(VulnClass)
    sinks: List[SinkSite] = []
    for node in graph.call_nodes():
        for call_index, call in enumerate(node.calls):
            summary = summaries.get(call.callee) if call.callee else None
            if summary is None or not summary.sink_specs:
                continue
            for spec in summary.sink_specs:
                if spec.vuln_class not in classes:
                    continue
                if spec.variadic:
                    indexes = range(len(summary.param_modified), len(call.args))
                else:
                    indexes = [spec.param_index] if spec.param_index < len(call.args) else []
                for index in indexes:
                    arg = call.args[index]
                    if spec.vuln_class is VulnClass.FORMAT_STRING and _is_literal(arg):
                        continue
                    sinks.append(SinkSite(node.id, call.callee, index, spec.vuln_class, call_index, arg.span))
    logger.info(f"Found {len(sinks)} sensitive sinks")
    return sinks


def source_for_call(node_id: int, call_index: int, callee: str, summary: FunctionSummary,
                    span: SourceSpan, controlled_arg: Optional[int] = None) -> SourceSite:
    arg = summary.source_arg if controlled_arg is None else controlled_arg
    return SourceSite(node_id, callee, summary.source_kind, arg, call_index, span)


def main_parameter_sources(graph: CodePropertyGraph) -> List[SourceSite]:
    info = graph.functions.get("main")
    if info is None:
        return []
    found = []
    for node_id in info.params:
        node = graph.nodes[node_id]
        kind = MAIN_SOURCES.get(node.name)
        if kind is None and node.param_index in (1, 2) and node.param_index in info.pointer_params:
            kind = SourceKind.ARGV if node.param_index == 1 else SourceKind.ENV
        if kind is not None and node.kind is NodeKind.PARAMETER:
            found.append(SourceSite(node_id, "main", kind, node.param_index, -1, node.span))
    return found


def main_source_of(graph: CodePropertyGraph, node_id: int) -> Optional[SourceSite]:
    for site in main_parameter_sources(graph):
        if site.call_node == node_id:
            return site
    return None


def find_user_controlled_sources(graph: CodePropertyGraph,
                                 summaries: Dict[str, FunctionSummary]) -> List[SourceSite]:
    sources: List[SourceSite] = []
    for node in graph.call_nodes():
        for call_index, call in enumerate(node.calls):
            summary = summaries.get(call.callee) if call.callee else None
            if summary is not None and summary.is_source:
                arg = VARIADIC if summary.variadic_source else summary.source_arg
                sources.append(source_for_call(node.id, call_index, call.callee, summary,
                                               call.expr.span, arg))
    sources.extend(main_parameter_sources(graph))
    sources.sort(key=lambda s: (s.call_node, s.call_index))
    logger.info(f"Found {len(sources)} user-controlled sources")
    return sources
