#!/usr/bin/env python3
"""
Parameter-modification summaries and call-site dataflow augmentation.

Functions are summarized callees first. For every pointer parameter a
must-analysis over the CFG decides whether a write through it happens on
all paths (Yes), on some path or through an unknown callee (Maybe), or
never (No). Summaries then feed back into the callers' reaching
definitions: a Yes-modified ``&x`` argument kills earlier definitions of
``x``, a Maybe one adds a definition next to them.
"""

import logging
from collections import deque
from dataclasses import replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from core.cpg.builder import compute_dataflow, link_call
from core.cpg.exprs import (
    CallInfo, base_name, calls_in, is_strong_target, keys_match, value_uses,
)
from core.cpg.graph import CodePropertyGraph, CpgNode, NodeKind
from core.interproc.callgraph import CallGraph, cyclic_functions
from core.interproc.summary import (
    FunctionSummary, ParamStatus, combine_status,
)
from core.utils.common import Diagnostic, DiagnosticKind

logger = logging.getLogger(__name__)

RETURN_KEY = "<return>"

Summaries = Dict[str, FunctionSummary]
PointerTargets = Dict[int, FrozenSet[str]]


def call_targets(node_id: int, call: CallInfo, pointer_targets: PointerTargets) -> List[str]:
    if call.callee:
        return [call.callee]
    return sorted(pointer_targets.get(node_id, ()))


def find_call(node: CpgNode, expr) -> Optional[Tuple[int, CallInfo]]:
    """The CallInfo recorded for a call expression of ``node``."""
    for index, call in enumerate(node.calls):
        if call.expr.span == expr.span:
            return index, call
    return None


def arg_status(node_id: int, call: CallInfo, index: int, summaries: Summaries,
               pointer_targets: PointerTargets) -> ParamStatus:
    """What a call does to argument ``index``; unknown callees give Maybe."""
    statuses = []
    for target in call_targets(node_id, call, pointer_targets):
        summary = summaries.get(target)
        statuses.append(summary.status(index) if summary is not None else ParamStatus.MAYBE)
    return combine_status(statuses)


def augment_function(graph: CodePropertyGraph, name: str, summaries: Summaries,
                     pointer_targets: PointerTargets):
    """Recompute call-site definitions of one function and its reaching definitions."""
    info = graph.functions[name]
    for node in graph.function_nodes(name):
        if not node.calls:
            continue
        call_defs = []
        for call in node.calls:
            for index, arg in enumerate(call.args):
                addr, ref = call.addr_keys[index], call.ref_keys[index]
                if addr is None and (ref is None or base_name(ref) not in info.pointer_vars):
                    continue
                status = arg_status(node.id, call, index, summaries, pointer_targets)
                if status is ParamStatus.NO:
                    continue
                if addr is not None:
                    strong = status is ParamStatus.YES and is_strong_target(arg.stripped().children[0])
                    call_defs.append((addr, strong, False))
                else:
                    call_defs.append((ref, False, True))
        defs = frozenset({a.target for a in node.assignments} | {key for key, _, _ in call_defs})
        graph.replace_node(replace(node, call_defs=tuple(call_defs), defs=defs))
    compute_dataflow(graph, name)


def augment_dataflow(graph: CodePropertyGraph, summaries: Summaries,
                     pointer_targets: Optional[PointerTargets] = None) -> CodePropertyGraph:
    """Copy of ``graph`` with summary-driven call definitions and indirect call edges."""
    pointer_targets = pointer_targets or {}
    augmented = graph.copy()
    for name in sorted(augmented.functions):
        augment_function(augmented, name, summaries, pointer_targets)
    for node in augmented.call_nodes():
        for index, call in enumerate(node.calls):
            if call.indirect:
                for target in sorted(pointer_targets.get(node.id, ())):
                    if target in augmented.functions:
                        link_call(augmented, node.id, index, target)
    logger.info(f"Augmented dataflow of {len(augmented.functions)} functions")
    return augmented


class _LocalFlow:
    """Intraprocedural backward data flow used while summarizing."""

    def __init__(self, graph: CodePropertyGraph, summaries: Summaries, pointer_targets: PointerTargets):
        self.graph = graph
        self.summaries = summaries
        self.pointer_targets = pointer_targets

    def _reaching(self, node_id: int, keys: Iterable[str]) -> List[Tuple[int, str]]:
        items = []
        for key in sorted(keys):
            items.extend((d, key) for d in self.graph.defs_reaching(node_id, key))
        return items

    def _returned_args(self, node_id: int, call: CallInfo) -> List[Tuple[int, str]]:
        keys: Set[str] = set()
        for target in call_targets(node_id, call, self.pointer_targets):
            summary = self.summaries.get(target)
            if summary is None:
                for arg in call.arg_keys:
                    keys.update(arg)
                continue
            for j in summary.returns_param_data:
                if j < len(call.arg_keys):
                    keys.update(call.arg_keys[j])
        return self._reaching(node_id, keys)

    def _value_sources(self, node: CpgNode, expr) -> List[Tuple[int, str]]:
        symbols = self.graph.functions[node.function].symbols
        items = self._reaching(node.id, value_uses(expr, symbols))
        for call_expr in calls_in(expr):
            found = find_call(node, call_expr)
            if found is not None:
                items.extend(self._returned_args(node.id, found[1]))
        return items

    def sources(self, node_id: int, key: str) -> List[Tuple[int, str]]:
        node = self.graph.nodes[node_id]
        if key == RETURN_KEY:
            return self._value_sources(node, node.expr) if node.expr is not None else []
        items: List[Tuple[int, str]] = []
        for assignment in node.assignments:
            if not keys_match(assignment.target, key):
                continue
            if assignment.is_update or assignment.is_compound or not assignment.strong:
                items.extend(self._reaching(node_id, [assignment.target]))
            if assignment.value is not None:
                items.extend(self._value_sources(node, assignment.value))
        for def_key, strong, _ in node.call_defs:
            if not keys_match(def_key, key):
                continue
            for call in node.calls:
                for index in range(len(call.args)):
                    if def_key not in (call.addr_keys[index], call.ref_keys[index]):
                        continue
                    keys: Set[str] = set()
                    for target in call_targets(node_id, call, self.pointer_targets):
                        summary = self.summaries.get(target)
                        if summary is None:
                            for other, arg in enumerate(call.arg_keys):
                                if other != index:
                                    keys.update(arg)
                        else:
                            for j in summary.transfers_into(index):
                                if j < len(call.arg_keys):
                                    keys.update(call.arg_keys[j])
                    items.extend(self._reaching(node_id, keys))
            if not strong:
                items.extend(self._reaching(node_id, [def_key]))
        return [item for item in items if item[0] != node_id or item[1] != key]

    def reached_params(self, start: List[Tuple[int, str]]) -> Set[int]:
        params: Set[int] = set()
        seen = set(start)
        queue = deque(start)
        while queue:
            node_id, key = queue.popleft()
            node = self.graph.nodes[node_id]
            if node.kind is NodeKind.PARAMETER:
                params.add(node.param_index)
                continue
            for item in self.sources(node_id, key):
                if item not in seen:
                    seen.add(item)
                    queue.append(item)
        return params


def _reachable(graph: CodePropertyGraph, entry: int) -> Set[int]:
    seen = {entry}
    stack = [entry]
    while stack:
        for succ in graph.cfg_successors(stack.pop()):
            if succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return seen


def _written_on_all_paths(graph: CodePropertyGraph, name: str, writers: Set[int], reachable: Set[int]) -> bool:
    """Must-analysis: does every Entry->Exit path cross a writer node?"""
    info = graph.functions[name]
    if info.exit not in reachable:
        return False
    order = [n for n in info.nodes if n in reachable]
    out = {n: True for n in order}
    out[info.entry] = info.entry in writers
    changed = True
    while changed:
        changed = False
        for n in order:
            if n == info.entry:
                continue
            preds = [p for p in graph.cfg_predecessors(n) if p in reachable]
            value = (all(out[p] for p in preds) if preds else False) or n in writers
            if value != out[n]:
                out[n] = value
                changed = True
    preds = [p for p in graph.cfg_predecessors(info.exit) if p in reachable]
    return bool(preds) and all(out[p] for p in preds)


def summarize_function(graph: CodePropertyGraph, name: str, summaries: Summaries,
                       pointer_targets: PointerTargets,
                       diagnostics: Optional[List[Diagnostic]] = None) -> FunctionSummary:
    info = graph.functions[name]
    reachable = _reachable(graph, info.entry)
    flow = _LocalFlow(graph, summaries, pointer_targets)
    summary = FunctionSummary(name=name, variadic_status=ParamStatus.MAYBE if info.ast.variadic else None)

    for index, param in enumerate(info.ast.parameters):
        if index not in info.pointer_params:
            summary.param_modified.append(ParamStatus.NO)
            continue
        definite: Set[int] = set()
        conditional = False
        weak_only = False
        for node in graph.function_nodes(name):
            if node.id not in reachable:
                continue
            if any(a.through_pointer and base_name(a.target) == param.name for a in node.assignments):
                definite.add(node.id)
            for call in node.calls:
                for arg_index in range(len(call.args)):
                    addr, ref = call.addr_keys[arg_index], call.ref_keys[arg_index]
                    passes = (ref is not None and base_name(ref) == param.name) or \
                             (addr is not None and addr != param.name and base_name(addr) == param.name)
                    if not passes:
                        continue
                    statuses, weak = [], []
                    targets = call_targets(node.id, call, pointer_targets)
                    for target in targets:
                        callee = summaries.get(target)
                        status = callee.propagated_status(arg_index) if callee else ParamStatus.MAYBE
                        statuses.append(status)
                        weak.append(status is ParamStatus.MAYBE and callee is not None and callee.external)
                    if statuses and all(s is ParamStatus.YES for s in statuses):
                        definite.add(node.id)
                    elif any(s is ParamStatus.MAYBE and not w for s, w in zip(statuses, weak)) or \
                            (not statuses) or len(set(statuses)) > 1:
                        conditional = True
                    elif any(weak):
                        weak_only = True

        if definite and _written_on_all_paths(graph, name, definite, reachable):
            status = ParamStatus.YES
        elif definite or conditional:
            status = ParamStatus.MAYBE
        elif weak_only:
            status = ParamStatus.MAYBE
            summary.weak_maybe.add(index)
        else:
            status = ParamStatus.NO
        summary.param_modified.append(status)

        if status is not ParamStatus.NO:
            writers = [(d, key) for d, key in graph.exit_facts.get(name, ())
                       if base_name(key) == param.name and graph.nodes[d].kind is not NodeKind.PARAMETER]
            for origin in sorted(flow.reached_params(writers)):
                if origin != index:
                    summary.param_transfers.append((origin, index))

    returns = [(n, RETURN_KEY) for n in info.nodes
               if graph.nodes[n].kind is NodeKind.RETURN_STMT and graph.nodes[n].expr is not None]
    summary.returns_param_data = flow.reached_params(returns)

    for node in graph.function_nodes(name):
        for call in node.calls:
            if call.indirect and not pointer_targets.get(node.id):
                message = f"indirect call '{call.expr.text}' in {name} has no candidate target"
                logger.warning(message)
                if diagnostics is not None:
                    diagnostics.append(Diagnostic(DiagnosticKind.MISSING_SUMMARY, message, node.span.location()))
    return summary


def summarize_parameters(graph: CodePropertyGraph, order: List[str], externals: Summaries,
                         pointer_targets: Optional[PointerTargets] = None,
                         call_graph: Optional[CallGraph] = None,
                         diagnostics: Optional[List[Diagnostic]] = None) -> Summaries:
    """Summaries for every corpus function, merged with the external ones.

    Functions on a call cycle are analysed a second time once every
    summary exists; on the first pass their not-yet-summarized callees
    count as all-Maybe. External summaries are never replaced.
    """
    pointer_targets = pointer_targets or {}
    work = graph.copy()
    summaries: Summaries = dict(externals)
    internal = [name for name in order if name in work.functions and name not in externals]
    for name in internal:
        augment_function(work, name, summaries, pointer_targets)
        summaries[name] = summarize_function(work, name, summaries, pointer_targets, diagnostics)

    cyclic = cyclic_functions(call_graph) if call_graph is not None else set()
    for name in internal:
        if name in cyclic:
            augment_function(work, name, summaries, pointer_targets)
            summaries[name] = summarize_function(work, name, summaries, pointer_targets)
    for name in internal:
        logger.debug(f"summary {name}: {[s.value for s in summaries[name].param_modified]}")
    return summaries
