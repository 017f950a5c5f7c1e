#!/usr/bin/env python3
"""
Backward taint tracing from a sensitive sink to user-controlled sources.

A breadth-first search over (node, variable) items builds a definition
tree rooted at the sink. Each item is expanded by whichever of five cases
defines the variable there:

    Increment     ``x++`` / ``x += y``: the previous definitions of x
    Arithmetic    ``x = <expr>``: definitions of every variable of expr
    ReturnValue   ``x = f(..)``: the return statements of f
    Argument      ``f(&x)``: the writes f performs through that parameter
    Parameter     x is a parameter: the matching argument at every caller

Paths are read off the tree from every item that reached a source.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple

import networkx as nx

from core.cpg.exprs import CallInfo, base_name, calls_in, keys_match, rename_key, value_uses
from core.cpg.graph import CodePropertyGraph, CpgNode, EdgeKind, NodeKind
from core.interproc.summarize import call_targets, find_call
from core.interproc.summary import RETURN_VALUE, FunctionSummary, ParamStatus
from core.taint.sites import SinkSite, SourceSite, main_source_of, source_for_call
from core.utils.common import Diagnostic, DiagnosticKind
from core.utils.config import AnalysisConfig
from core.utils.errors import BudgetExhausted

logger = logging.getLogger(__name__)

RETURN_VAR = "<return>"
SINK_VAR = "<sink>"
_REACHES_SOURCE = "<source>"

Item = Tuple[int, str]


class TraceCase(Enum):
    INCREMENT = "Increment"
    ARITHMETIC = "Arithmetic"
    RETURN_VALUE = "ReturnValue"
    ARGUMENT = "Argument"
    PARAMETER = "Parameter"


@dataclass(frozen=True)
class TreeEdge:
    child: Item
    case: TraceCase
    maybe: bool = False


@dataclass
class DefinitionTree:
    """Data-source predecessors of every expanded (node, variable) item."""
    root: Item
    children: Dict[Item, List[TreeEdge]] = field(default_factory=dict)
    sources: Dict[Item, List[SourceSite]] = field(default_factory=dict)
    loop_edges: Set[Tuple[Item, Item]] = field(default_factory=set)

    def items(self) -> Set[Item]:
        found = {self.root}
        for edges in self.children.values():
            found.update(e.child for e in edges)
        return found


@dataclass(frozen=True)
class DataFlowPath:
    """Source-to-sink hops with the variable carried across each hop."""
    sink: SinkSite
    source: SourceSite
    hops: Tuple[int, ...]
    hop_vars: Tuple[str, ...]
    crossed_functions: Tuple[str, ...]
    cases: Tuple[str, ...] = ()
    confidence: str = "definite"

    @property
    def key(self) -> Tuple[Any, ...]:
        return (self.sink.key, self.source.key, self.hops, self.hop_vars)

    def to_dict(self, graph: Optional[CodePropertyGraph] = None) -> Dict[str, Any]:
        data = {
            "hops": list(self.hops),
            "hop_vars": list(self.hop_vars),
            "crossed_functions": list(self.crossed_functions),
            "cases": list(self.cases),
            "confidence": self.confidence,
        }
        if graph is not None:
            data["locations"] = [graph.nodes[h].span.location() for h in self.hops]
        return data


@dataclass
class TraceResult:
    tree: DefinitionTree
    paths: List[DataFlowPath]
    truncated: bool = False
    diagnostics: List[Diagnostic] = field(default_factory=list)


@dataclass
class _Expansion:
    edges: List[TreeEdge] = field(default_factory=list)
    sources: List[SourceSite] = field(default_factory=list)
    dangling: List[Tuple[int, str]] = field(default_factory=list)

    def extend(self, other: "_Expansion"):
        self.edges.extend(other.edges)
        self.sources.extend(other.sources)
        self.dangling.extend(other.dangling)


class _Expander:
    """Computes the data sources of one item."""

    def __init__(self, graph: CodePropertyGraph, summaries: Dict[str, FunctionSummary],
                 pointer_targets: Dict[int, FrozenSet[str]]):
        self.graph = graph
        self.summaries = summaries
        self.pointer_targets = pointer_targets

    def _external(self, name: str) -> Optional[FunctionSummary]:
        summary = self.summaries.get(name)
        if summary is not None and (summary.external or name not in self.graph.functions):
            return summary
        return None

    def reaching(self, node_id: int, keys, case: TraceCase, maybe: bool = False) -> _Expansion:
        result = _Expansion()
        for key in sorted(keys):
            defs = self.graph.defs_reaching(node_id, key)
            if not defs:
                result.dangling.append((node_id, key))
            result.edges.extend(TreeEdge((d, key), case, maybe) for d in defs)
        return result

    def expr_sources(self, node: CpgNode, expr, case: TraceCase, maybe: bool = False) -> _Expansion:
        if expr is None:
            return _Expansion()
        symbols = self.graph.functions[node.function].symbols
        result = self.reaching(node.id, value_uses(expr, symbols), case, maybe)
        for call_expr in calls_in(expr):
            found = find_call(node, call_expr)
            if found is not None:
                result.extend(self.call_return(node, found[0], found[1], maybe))
        return result

    def _all_args(self, node: CpgNode, call: CallInfo, case: TraceCase, skip: Optional[int] = None) -> _Expansion:
        result = _Expansion()
        for index, arg in enumerate(call.args):
            if index != skip:
                result.extend(self.expr_sources(node, arg, case, maybe=True))
        return result

    def call_return(self, node: CpgNode, call_index: int, call: CallInfo, maybe: bool = False) -> _Expansion:
        """Sources of a call's return value."""
        result = _Expansion()
        targets = call_targets(node.id, call, self.pointer_targets)
        if not targets:
            return self._all_args(node, call, TraceCase.RETURN_VALUE)
        for target in targets:
            external = self._external(target)
            if external is not None:
                if external.is_source and external.source_arg == RETURN_VALUE:
                    result.sources.append(source_for_call(node.id, call_index, target, external, call.expr.span))
                    continue
                for j in sorted(external.returns_param_data):
                    if j < len(call.args):
                        result.extend(self.expr_sources(node, call.args[j], TraceCase.RETURN_VALUE, maybe))
            elif target in self.graph.functions:
                for r in self.graph.functions[target].nodes:
                    ret = self.graph.nodes[r]
                    if ret.kind is NodeKind.RETURN_STMT and ret.expr is not None:
                        result.edges.append(TreeEdge((r, RETURN_VAR), TraceCase.RETURN_VALUE, maybe))
            else:
                result.extend(self._all_args(node, call, TraceCase.RETURN_VALUE))
        return result

    def argument(self, node: CpgNode, call_index: int, call: CallInfo, index: int,
                 def_key: str, var: str, strong: bool) -> _Expansion:
        """Sources of a variable written by a call through argument ``index``."""
        result = _Expansion()
        targets = call_targets(node.id, call, self.pointer_targets)
        if not targets:
            result.extend(self._all_args(node, call, TraceCase.ARGUMENT, skip=index))
        for target in targets:
            external = self._external(target)
            if external is not None:
                if external.controls_arg(index):
                    result.sources.append(source_for_call(node.id, call_index, target, external,
                                                          call.expr.span, index))
                    continue
                maybe = external.status(index) is ParamStatus.MAYBE
                for j in external.transfers_into(index):
                    if j < len(call.args):
                        result.extend(self.expr_sources(node, call.args[j], TraceCase.ARGUMENT, maybe))
            elif target in self.graph.functions:
                info = self.graph.functions[target]
                if index >= len(info.ast.parameters):
                    continue
                param = info.ast.parameters[index].name
                wanted = rename_key(var, def_key, param) if keys_match(var, def_key) else param
                summary = self.summaries.get(target)
                maybe = summary is not None and summary.status(index) is ParamStatus.MAYBE
                for d, key in sorted(self.graph.exit_facts.get(target, ())):
                    writer = self.graph.nodes[d]
                    if writer.kind is NodeKind.PARAMETER or base_name(key) != param:
                        continue
                    if key in writer.pointee_defs() and keys_match(key, wanted):
                        result.edges.append(TreeEdge((d, key), TraceCase.ARGUMENT, maybe))
            else:
                result.extend(self._all_args(node, call, TraceCase.ARGUMENT, skip=index))
        if not strong:
            result.extend(self.reaching(node.id, [def_key], TraceCase.ARGUMENT, maybe=True))
        return result

    def parameter(self, node: CpgNode, var: str) -> _Expansion:
        result = _Expansion()
        site = main_source_of(self.graph, node.id)
        if site is not None:
            result.sources.append(site)
            return result
        for caller_id, data in self.graph.in_edges(node.id, EdgeKind.ARG_TO_PARAM):
            caller = self.graph.nodes[caller_id]
            call = caller.calls[data["call_index"]]
            index = data["index"]
            arg = call.args[index]
            base = call.addr_keys[index] or call.ref_keys[index]
            if base is not None:
                key = rename_key(var, node.name, base)
                result.extend(self.reaching(caller_id, [key], TraceCase.PARAMETER))
                for call_expr in calls_in(arg):
                    found = find_call(caller, call_expr)
                    if found is not None:
                        result.extend(self.call_return(caller, found[0], found[1]))
            else:
                sub = self.expr_sources(caller, arg, TraceCase.PARAMETER)
                result.extend(sub)
        return result

    def expand(self, item: Item, sink_expr=None) -> _Expansion:
        node_id, var = item
        node = self.graph.nodes[node_id]
        if var == SINK_VAR:
            return self.expr_sources(node, sink_expr, TraceCase.ARITHMETIC)
        if var == RETURN_VAR:
            return self.expr_sources(node, node.expr, TraceCase.ARITHMETIC)
        if node.kind is NodeKind.PARAMETER:
            return self.parameter(node, var)

        result = _Expansion()
        for assignment in node.assignments:
            if not keys_match(assignment.target, var):
                continue
            if assignment.is_update or assignment.is_compound:
                result.extend(self.reaching(node_id, [assignment.target], TraceCase.INCREMENT))
            elif not assignment.strong:
                result.extend(self.reaching(node_id, [assignment.target], TraceCase.ARITHMETIC))
            if assignment.value is not None:
                result.extend(self.expr_sources(node, assignment.value, TraceCase.ARITHMETIC))
        for def_key, strong, _ in node.call_defs:
            if not keys_match(def_key, var):
                continue
            for call_index, call in enumerate(node.calls):
                for index in range(len(call.args)):
                    if def_key in (call.addr_keys[index], call.ref_keys[index]):
                        result.extend(self.argument(node, call_index, call, index, def_key, var, strong))
        return result


def _label(parent: Item, child: Item, root_label: str) -> str:
    if child[1] != RETURN_VAR:
        return child[1]
    if parent[1] == SINK_VAR:
        return root_label
    return parent[1]


def _crossed(graph: CodePropertyGraph, hops: List[int]) -> Tuple[str, ...]:
    names: List[str] = []
    for hop in hops:
        name = graph.nodes[hop].function
        if not names or names[-1] != name:
            names.append(name)
    return tuple(names)


def _make_path(graph: CodePropertyGraph, sink: SinkSite, source: SourceSite,
               chain: List[Tuple[Item, Optional[TreeEdge]]], root_label: str) -> DataFlowPath:
    """Path from a root-to-source item chain (the chain runs sink-first)."""
    items = [item for item, _ in chain]
    labels = [_label(items[i - 1], items[i], root_label) for i in range(1, len(items))]
    edges = [edge for _, edge in chain[1:]]
    hops = [item[0] for item in reversed(items)]
    return DataFlowPath(
        sink=sink,
        source=source,
        hops=tuple(hops),
        hop_vars=tuple(reversed(labels)),
        crossed_functions=_crossed(graph, hops),
        cases=tuple(e.case.value for e in reversed(edges)),
        confidence="maybe" if any(e.maybe for e in edges) else "definite",
    )


def productive_items(tree: DefinitionTree) -> Set[Item]:
    """Items from which some chain of the tree reaches a source."""
    g = nx.DiGraph()
    for parent, edges in tree.children.items():
        g.add_node(parent)
        g.add_edges_from((parent, edge.child) for edge in edges)
    g.add_edges_from((item, _REACHES_SOURCE) for item, sources in tree.sources.items() if sources)
    if _REACHES_SOURCE not in g:
        return set()
    return set(nx.ancestors(g, _REACHES_SOURCE))


def trace_to_sources(graph: CodePropertyGraph, summaries: Dict[str, FunctionSummary], sink: SinkSite,
                     config: Optional[AnalysisConfig] = None,
                     pointer_targets: Optional[Dict[int, FrozenSet[str]]] = None) -> TraceResult:
    """Trace one sink back to every reachable user-controlled source.

    ``config.max_depth`` bounds the hops of a path and ``config.max_paths``
    the number of paths. Reading paths off the tree may take at most
    ``max_paths * max_depth`` chain steps. Hitting any of the three sets
    ``truncated``. With ``config.memoize`` every item is expanded once and
    subtrees that reach no source are never walked; without it the search
    re-expands items per path and only refuses cycles on the current path.
    """
    config = config or AnalysisConfig()
    expander = _Expander(graph, summaries, pointer_targets or {})
    sink_expr = graph.nodes[sink.call_node].calls[sink.call_index].args[sink.sensitive_arg_index]
    root: Item = (sink.call_node, SINK_VAR)
    root_label = sink_expr.text
    tree = DefinitionTree(root=root)
    dangling: Dict[Tuple[int, str], None] = {}
    truncated = False
    cache: Dict[Item, _Expansion] = {}

    def expand(item: Item) -> _Expansion:
        if config.memoize and item in cache:
            return cache[item]
        result = expander.expand(item, sink_expr if item == root else None)
        for entry in result.dangling:
            dangling.setdefault(entry)
        if config.memoize:
            cache[item] = result
        return result

    if config.memoize:
        depth = {root: 0}
        queue = deque([root])
        while queue:
            item = queue.popleft()
            if depth[item] >= config.max_depth:
                truncated = True
                continue
            expansion = expand(item)
            tree.children[item] = list(expansion.edges)
            tree.sources[item] = list(expansion.sources)
            for edge in expansion.edges:
                if edge.child not in depth:
                    depth[edge.child] = depth[item] + 1
                    queue.append(edge.child)

    productive = productive_items(tree) if config.memoize else None
    found: Dict[Tuple[Any, ...], DataFlowPath] = {}
    chain: List[Tuple[Item, Optional[TreeEdge]]] = [(root, None)]
    on_chain = {root}
    step_limit = max(config.max_paths, 1) * max(config.max_depth, 1)
    steps = 0

    def walk():
        nonlocal truncated, steps
        steps += 1
        if steps > step_limit:
            raise BudgetExhausted(f"{step_limit} chain steps walked")
        item = chain[-1][0]
        if len(chain) - 1 >= config.max_depth:
            truncated = True
            return
        if config.memoize:
            edges = tree.children.get(item, [])
            sources = tree.sources.get(item, [])
        else:
            expansion = expand(item)
            edges, sources = expansion.edges, expansion.sources
            tree.children.setdefault(item, list(edges))
            tree.sources.setdefault(item, list(sources))
        for source in sources:
            path = _make_path(graph, sink, source, chain, root_label)
            if path.key not in found:
                if len(found) >= config.max_paths:
                    raise BudgetExhausted(f"more than {config.max_paths} paths")
                found[path.key] = path
        for edge in edges:
            if edge.child in on_chain:
                tree.loop_edges.add((item, edge.child))
                continue
            if productive is not None and edge.child not in productive:
                continue
            chain.append((edge.child, edge))
            on_chain.add(edge.child)
            try:
                walk()
            finally:
                on_chain.discard(edge.child)
                chain.pop()

    diagnostics = []
    location = sink.span.location()
    try:
        walk()
    except BudgetExhausted as e:
        truncated = True
        diagnostics.append(Diagnostic(DiagnosticKind.BUDGET_EXHAUSTED, f"{sink.callee}: {e}", location))
    if truncated:
        logger.warning(f"Tracing sink {sink.callee}@{location} hit its budget; results are partial")

    for node_id, key in dangling:
        use_location = graph.nodes[node_id].span.location()
        message = f"'{key}' used at {use_location} has no reaching definition"
        logger.debug(message)
        diagnostics.append(Diagnostic(DiagnosticKind.DANGLING_DEFINITION, message, use_location))

    paths = sorted(found.values(), key=lambda p: (p.hops, p.hop_vars, p.source.key))
    return TraceResult(tree=tree, paths=paths, truncated=truncated, diagnostics=diagnostics)


def path_is_connected(graph: CodePropertyGraph, path: DataFlowPath) -> bool:
    """Whether every adjacent hop pair is joined by a data-flow binding."""
    for a, b in zip(path.hops, path.hops[1:]):
        node_a, node_b = graph.nodes[a], graph.nodes[b]
        if node_a.function == node_b.function and any(d == a for d, _ in graph.reach_in.get(b, ())):
            continue
        if node_b.kind is NodeKind.PARAMETER:
            callers = [u for u, _ in graph.in_edges(b, EdgeKind.ARG_TO_PARAM)]
            if any(u == a or any(d == a for d, _ in graph.reach_in.get(u, ())) for u in callers):
                continue
        entry_a = graph.functions[node_a.function].entry
        if any(v == entry_a for v, _ in graph.out_edges(b, EdgeKind.CALLS_TO)):
            continue
        if a == b:
            continue
        return False
    return True
