"""
Concrete source rewrites for every instrumentation class.

A guard site maps to an ordered table ``class -> [(description, rewrites)]``;
the position in a class list is the variant id. Rewrites keep byte offsets
of the surrounding code wherever the class allows it (removal pads with
whitespace and keeps newlines).
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from core.cpg.graph import CodePropertyGraph, FunctionInfo
from core.frontend.ast import ExprKind, Statement, StmtKind
from core.guards.mechanisms import GuardSite, Polarity
from core.instrument.plans import CLASS_ORDER, InstrumentationClass, InstrumentationPlan, Rewrite
from core.instrument.variants import (DEFAULT_MAGIC_CONSTANTS, always_false_predicates,
                                      always_true_predicates, loosening_variants,
                                      monotone_comparisons, needs_parens, overflow_variants)
from core.taint.pairs import SourceSinkPair
from core.taint.sites import SinkSite
from core.taint.tracer import DataFlowPath
from core.utils.common import SourceSpan, VulnClass
from core.utils.errors import NotApplicable

logger = logging.getLogger(__name__)

# format argument position per printf-family callee
FORMAT_ARG_INDEX = {"printf": 0, "fprintf": 1, "dprintf": 1, "sprintf": 1, "snprintf": 2}

Variant = Tuple[str, List[Rewrite]]


@dataclass
class InstrumentContext:
    """What a rewrite needs to know beyond the guard itself."""
    graph: CodePropertyGraph
    pair: Optional[SourceSinkPair] = None
    path: Optional[DataFlowPath] = None
    corridor_nodes: FrozenSet[int] = frozenset()
    magic_constants: Tuple[int, ...] = DEFAULT_MAGIC_CONSTANTS

    @property
    def sink(self) -> Optional[SinkSite]:
        return self.pair.sink if self.pair is not None else None


# -- byte helpers ----------------------------------------------------------------

def blank(text: str) -> str:
    """Whitespace of the same UTF-8 byte length, newlines kept."""
    return "".join(c if c == "\n" else " " * len(c.encode("utf-8")) for c in text)


def point(span: SourceSpan, at_end: bool = False) -> SourceSpan:
    """Zero-length span at the start (or end) of ``span``."""
    if not at_end:
        return replace(span, end_line=span.start_line, end_col=span.start_col, byte_end=span.byte_start)
    origin_line = span.origin_line
    if origin_line is not None:
        origin_line += span.end_line - span.start_line
    return replace(span, start_line=span.end_line, start_col=span.end_col,
                   byte_start=span.byte_end, origin_line=origin_line)


def between(start: SourceSpan, end: SourceSpan) -> SourceSpan:
    """Span from the start of ``start`` to the start of ``end``."""
    return replace(start, end_line=end.start_line, end_col=end.start_col, byte_end=end.byte_start)


def span_text(source: bytes, span: SourceSpan) -> str:
    return source[span.byte_start:span.byte_end].decode("utf-8")


# -- guard structure ---------------------------------------------------------------

def guard_function(graph: CodePropertyGraph, site: GuardSite) -> FunctionInfo:
    return graph.function_of(site.condition_node)


def guard_statement(graph: CodePropertyGraph, site: GuardSite) -> Optional[Statement]:
    stmt = graph.nodes[site.condition_node].stmt
    return stmt if stmt is not None and stmt.kind is StmtKind.IF else None


def _substatements(stmt: Statement) -> List[Statement]:
    subs = [s for s in (stmt.init, stmt.then, stmt.orelse) if s is not None]
    subs.extend(stmt.children)
    return subs


def _same(a: Statement, b: Statement) -> bool:
    return a is b or (a.kind is b.kind and a.span == b.span)


def ancestors(body: Statement, target: Statement) -> List[Statement]:
    """Statements enclosing ``target``, outermost first."""
    chain: List[Statement] = []
    current = body
    while not _same(current, target):
        chain.append(current)
        for sub in _substatements(current):
            if _same(sub, target) or (sub.span.contains(target.span) and sub.span != target.span):
                current = sub
                break
        else:
            return []
    return chain


def in_scope_identifiers(graph: CodePropertyGraph, site: GuardSite) -> List[str]:
    """Integer variables visible at the guard, then the other corpus functions declared before it."""
    info = guard_function(graph, site)
    stmt = guard_statement(graph, site)
    unit = info.unit
    at = stmt.span.byte_start if stmt is not None else site.span.byte_start

    functions = {f.name for f in unit.functions if f.span.byte_start < at and f.name in graph.functions}
    functions.update(d.name for d in unit.globals
                     if d.is_function and d.span.byte_start < at and d.name in graph.functions)

    integers = {d.name for d in unit.globals
                if d.is_integer and d.span.byte_start < info.ast.span.byte_start}
    integers.update(p.name for p in info.ast.parameters if p.is_integer)
    if stmt is not None:
        for outer in ancestors(info.ast.body, stmt):
            scope = list(outer.children)
            if outer.init is not None:
                scope.append(outer.init)
            for child in scope:
                if child.kind is StmtKind.DECL and child.span.byte_end <= at:
                    integers.update(d.name for d in child.declarators if d.is_integer)
    functions.discard(info.name)
    integers -= functions
    return sorted(integers) + sorted(functions)


def _passing_when_false(site: GuardSite) -> bool:
    return site.polarity is Polarity.MUST_BE_FALSE


# -- per-class variant tables ---------------------------------------------------------

def _remove(site: GuardSite, stmt: Statement, source: bytes) -> List[Variant]:
    if stmt.orelse is not None:
        return []
    if _passing_when_false(site):
        return [("remove the check", [Rewrite(stmt.span, blank(span_text(source, stmt.span)))])]
    header = between(stmt.span, stmt.then.span)
    if header.byte_end <= header.byte_start:
        return []
    return [("drop the condition, keep the body", [Rewrite(header, blank(span_text(source, header)))])]


def _surround_false(site: GuardSite, stmt: Statement, identifiers: Sequence[str],
                    magic: Sequence[int]) -> List[Variant]:
    if not _passing_when_false(site) or stmt.orelse is not None:
        return []
    variants = []
    for predicate in always_false_predicates(identifiers, magic):
        variants.append((f"wrap in if ({predicate})", [
            Rewrite(point(stmt.span), f"if ({predicate}) {{ "),
            Rewrite(point(stmt.span, at_end=True), " }"),
        ]))
    return variants


def _surround_true(site: GuardSite, stmt: Statement, condition_text: str,
                   identifiers: Sequence[str], magic: Sequence[int]) -> List[Variant]:
    if site.polarity is not Polarity.MUST_BE_TRUE:
        return []
    return [(f"disjoin {predicate}", [Rewrite(stmt.condition_span, f"{predicate} || ({condition_text})")])
            for predicate in always_true_predicates(identifiers, magic)]


def _arithmetic(site: GuardSite, stmt: Statement, condition_text: str,
                identifiers: Sequence[str], magic: Sequence[int]) -> List[Variant]:
    comparisons = monotone_comparisons(stmt.expr)
    if not comparisons:
        return []
    variants: List[Variant] = []
    if _passing_when_false(site):
        operand = f"({condition_text})" if needs_parens(stmt.expr) else condition_text
        for predicate in always_false_predicates(identifiers, magic)[1:]:
            variants.append((f"conjoin {predicate}",
                             [Rewrite(stmt.condition_span, f"{predicate} && {operand}")]))
    for comparison in comparisons:
        for description, replacement in loosening_variants(comparison, _passing_when_false(site)):
            variants.append((description, [Rewrite(comparison.expr.span, replacement)]))
    return variants


def _uses_block_locals(info: FunctionInfo, outer: Statement, stmt: Statement) -> bool:
    local = {d.name for d in info.ast.local_declarators()
             if outer.span.contains(d.span) and not stmt.span.contains(d.span)}
    names = set()
    for inner in stmt.walk():
        for expr in inner.expressions():
            names.update(e.name for e in expr.walk() if e.kind is ExprKind.IDENT)
    return bool(local & names)


def _move(context: InstrumentContext, site: GuardSite, stmt: Statement, source: bytes) -> List[Variant]:
    graph = context.graph
    info = guard_function(graph, site)
    text = span_text(source, stmt.span)
    if "//" in text or "#" in text:
        return []
    corridor_spans = [graph.nodes[n].span for n in context.corridor_nodes
                      if graph.nodes[n].function == info.name]
    for outer in reversed(ancestors(info.ast.body, stmt)):
        if outer.kind is not StmtKind.IF or outer.orelse is None:
            continue
        if outer.then.span.contains(stmt.span):
            other = outer.orelse
        elif outer.orelse.span.contains(stmt.span):
            other = outer.then
        else:
            continue
        if other.kind is not StmtKind.BLOCK or not span_text(source, other.span).startswith("{"):
            continue
        if any(other.span.overlaps(span) for span in corridor_spans):
            continue
        if _uses_block_locals(info, outer, stmt):
            continue
        flat = " ".join(text.split())
        into = point(replace(other.span, byte_start=other.span.byte_start + 1,
                             start_col=other.span.start_col + 1))
        return [(f"move into the branch at line {other.span.display_line}", [
            Rewrite(stmt.span, blank(text)),
            Rewrite(into, f" {flat}"),
        ])]
    return []


def _swap(context: InstrumentContext, site: GuardSite, stmt: Statement, source: bytes) -> List[Variant]:
    sink = context.sink
    if sink is None:
        return []
    graph = context.graph
    sink_node = graph.nodes[sink.call_node]
    if sink_node.function != site.function or sink_node.stmt is None:
        return []
    info = guard_function(graph, site)
    chain = ancestors(info.ast.body, stmt)
    if not chain:
        return []
    siblings = list(chain[-1].children)
    positions = [i for i, s in enumerate(siblings) if _same(s, stmt)]
    if chain[-1].kind not in (StmtKind.BLOCK, StmtKind.CASE) or not positions:
        return []
    position = positions[0]
    if position + 1 >= len(siblings) or siblings[position + 1].span != sink_node.stmt.span:
        return []
    sink_stmt = siblings[position + 1]
    whole = replace(stmt.span, end_line=sink_stmt.span.end_line, end_col=sink_stmt.span.end_col,
                    byte_end=sink_stmt.span.byte_end)
    gap = source[stmt.span.byte_end:sink_stmt.span.byte_start].decode("utf-8")
    replacement = span_text(source, sink_stmt.span) + gap + span_text(source, stmt.span)
    return [("move the sink above the check", [Rewrite(whole, replacement)])]


def _overflow(stmt: Statement) -> List[Variant]:
    return [(description, [Rewrite(expr.span, replacement)])
            for expr, description, replacement in overflow_variants(stmt.expr)]


def guard_variants(site: GuardSite, context: InstrumentContext) -> Dict[InstrumentationClass, List[Variant]]:
    """Applicable classes of a guard with their variant tables, in class order."""
    graph = context.graph
    stmt = guard_statement(graph, site)
    if stmt is None or stmt.expr is None or stmt.condition_span is None:
        return {}
    source = guard_function(graph, site).unit.source_bytes
    condition_text = span_text(source, stmt.condition_span)
    identifiers = in_scope_identifiers(graph, site)
    magic = context.magic_constants

    table = {
        InstrumentationClass.REMOVE_MECHANISM: _remove(site, stmt, source),
        InstrumentationClass.SURROUND_ALWAYS_FALSE: _surround_false(site, stmt, identifiers, magic),
        InstrumentationClass.SURROUND_ALWAYS_TRUE: _surround_true(site, stmt, condition_text, identifiers, magic),
        InstrumentationClass.ARITHMETIC_INFLUENCE: _arithmetic(site, stmt, condition_text, identifiers, magic),
        InstrumentationClass.MOVE_TO_UNRELATED_PATH: _move(context, site, stmt, source),
        InstrumentationClass.SWAP_CHECK_AND_SINK: _swap(context, site, stmt, source),
        InstrumentationClass.INTEGER_OVERFLOW_ANTI_PATTERN: _overflow(stmt),
    }
    return {cls: table[cls] for cls in CLASS_ORDER if table.get(cls)}


def build_plan(site: Union[GuardSite, SinkSite], cls: InstrumentationClass, variant_id: int,
               context: InstrumentContext, rng_seed: int = 0) -> InstrumentationPlan:
    if cls is InstrumentationClass.FORMAT_STRING_ANTI_PATTERN:
        plan = format_string_antipattern(site, context.graph)
        plan.rng_seed = rng_seed
        return plan
    variants = guard_variants(site, context).get(cls, [])
    if not 0 <= variant_id < len(variants):
        raise NotApplicable(f"{cls.value} variant {variant_id} does not apply at {site.span.location()}")
    description, rewrites = variants[variant_id]
    return InstrumentationPlan(target=site, instrumentation=cls, variant_id=variant_id,
                               rewrites=list(rewrites), rng_seed=rng_seed, description=description)


def format_string_antipattern(sink: SinkSite, graph: CodePropertyGraph) -> InstrumentationPlan:
    """Drop a literal ``"%s"`` format so the tainted argument becomes the format."""
    if sink.vuln_class is not VulnClass.OUTBOUND_LEAK or sink.callee not in FORMAT_ARG_INDEX:
        raise NotApplicable(f"{sink.callee} at {sink.span.location()} is not a printf-family leak")
    node = graph.nodes[sink.call_node]
    call = node.calls[sink.call_index]
    args = call.args
    fmt_index = FORMAT_ARG_INDEX[sink.callee]
    if len(args) != fmt_index + 2 or sink.sensitive_arg_index != fmt_index + 1:
        raise NotApplicable(f"{sink.callee} at {sink.span.location()} does not pass a single string through")
    fmt, data = args[fmt_index].stripped(), args[fmt_index + 1]
    if fmt.kind is not ExprKind.STRING or fmt.text != '"%s"':
        raise NotApplicable(f"format of {sink.callee} at {sink.span.location()} is not \"%s\"")
    removed = between(fmt.span, data.span)
    return InstrumentationPlan(target=sink, instrumentation=InstrumentationClass.FORMAT_STRING_ANTI_PATTERN,
                               variant_id=0, rewrites=[Rewrite(removed, "")],
                               description=f"pass the data of {sink.callee} as its format")
