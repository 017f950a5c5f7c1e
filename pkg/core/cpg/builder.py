#!/usr/bin/env python3
"""
Code property graph construction.

Lowers every function of the parsed units to statement-level nodes, wires
intraprocedural control flow, and computes reaching definitions to add
DfgReaches edges. Direct calls to corpus functions get CallsTo and
ArgToParam edges.
"""

import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from core.frontend.ast import Expr, FunctionAst, Statement, StmtKind, TranslationUnit
from core.cpg.exprs import DefUseCollector, keys_match, killed_by
from core.cpg.graph import CodePropertyGraph, CpgNode, EdgeKind, FunctionInfo, NodeKind
from core.utils.common import Diagnostic, DiagnosticKind, SourceSpan

logger = logging.getLogger(__name__)

TERMINAL_CALLS = frozenset({"exit", "abort", "_exit", "_Exit"})

Pred = Tuple[int, str]


def _edge_span(span: SourceSpan, at_end: bool) -> SourceSpan:
    if at_end:
        return SourceSpan(span.file, span.end_line, max(1, span.end_col - 1), span.end_line, span.end_col,
                          max(span.byte_start, span.byte_end - 1), span.byte_end,
                          span.origin_file,
                          None if span.origin_line is None else span.origin_line + span.end_line - span.start_line)
    return span


class _LoopContext:
    def __init__(self, continue_target: Optional[int], is_switch: bool = False):
        self.continue_target = continue_target
        self.is_switch = is_switch
        self.breaks: List[Pred] = []
        self.continues: List[Pred] = []


class _FunctionBuilder:
    """Builds the nodes and CFG of one function."""

    def __init__(self, graph: CodePropertyGraph, info: FunctionInfo, next_id: int, functions: Set[str]):
        self.graph = graph
        self.info = info
        self.next_id = next_id
        self.functions = functions
        self.loops: List[_LoopContext] = []
        self.exit_preds: List[Pred] = []

    def _new_node(self, kind: NodeKind, span: SourceSpan, parent: Optional[int], **fields) -> CpgNode:
        node_id = self.next_id
        self.next_id += 1
        node = CpgNode(id=node_id, kind=kind, function=self.info.name, span=span, **fields)
        self.graph.add_node(node)
        self.info.nodes.append(node_id)
        if parent is not None:
            self.graph.add_edge(parent, node_id, EdgeKind.AST_CHILD)
        return node

    def _connect(self, preds: Iterable[Pred], node_id: int):
        for src, label in preds:
            self.graph.add_edge(src, node_id, EdgeKind.CFG_NEXT, label=label)

    def _statement_node(self, kind: NodeKind, span: SourceSpan, parent: Optional[int],
                        stmt: Optional[Statement], exprs: List[Expr],
                        declarators=(), opaque_text: str = "") -> CpgNode:
        collector = DefUseCollector(self.info.symbols, self.functions)
        for declarator in declarators:
            collector.declaration(declarator.name, declarator.init)
        for expr in exprs:
            collector.rvalue(expr)
        if opaque_text:
            collector.opaque_text(opaque_text)
        du = collector.result
        if du.calls and kind is NodeKind.STATEMENT:
            kind = NodeKind.CALL_SITE
        call_defs = tuple((key, False, False)
                          for call in du.calls for key in call.addr_keys if key is not None)
        defs = {a.target for a in du.assignments} | {key for key, _, _ in call_defs}
        return self._new_node(
            kind, span, parent,
            defs=frozenset(defs), uses=frozenset(du.uses), assignments=tuple(du.assignments),
            calls=tuple(du.calls), call_defs=call_defs, function_refs=frozenset(du.function_refs),
            stmt=stmt, expr=exprs[0] if len(exprs) == 1 else None,
        )

    def _simple(self, node: CpgNode, preds: List[Pred]) -> List[Pred]:
        self._connect(preds, node.id)
        if any(call.callee in TERMINAL_CALLS for call in node.calls):
            self.exit_preds.append((node.id, ""))
            return []
        return [(node.id, "")]

    def build(self) -> int:
        fn: FunctionAst = self.info.ast
        entry = self._new_node(NodeKind.ENTRY, fn.span, None, name=fn.name)
        self.info.entry = entry.id
        preds: List[Pred] = [(entry.id, "")]
        for index, param in enumerate(fn.parameters):
            node = self._new_node(NodeKind.PARAMETER, param.span, entry.id, defs=frozenset({param.name}),
                                  param_index=index, name=param.name)
            self.info.params.append(node.id)
            self._connect(preds, node.id)
            preds = [(node.id, "")]

        preds = self.stmt(fn.body, preds, entry.id)
        exit_node = self._new_node(NodeKind.EXIT, _edge_span(fn.span, at_end=True), None, name=fn.name)
        self.info.exit = exit_node.id
        self._connect(self.exit_preds + preds, exit_node.id)
        return self.next_id

    def stmt(self, stmt: Optional[Statement], preds: List[Pred], parent: int) -> List[Pred]:
        if stmt is None:
            return preds
        kind = stmt.kind

        if kind in (StmtKind.BLOCK, StmtKind.LABEL, StmtKind.CASE):
            for child in stmt.children:
                preds = self.stmt(child, preds, parent)
            return preds
        if kind is StmtKind.EMPTY:
            return preds
        if kind is StmtKind.EXPR:
            node = self._statement_node(NodeKind.STATEMENT, stmt.span, parent, stmt, [stmt.expr])
            return self._simple(node, preds)
        if kind is StmtKind.DECL:
            node = self._statement_node(NodeKind.STATEMENT, stmt.span, parent, stmt, [],
                                        declarators=[d for d in stmt.declarators if not d.is_function])
            return self._simple(node, preds)
        if kind is StmtKind.OPAQUE:
            node = self._statement_node(NodeKind.OPAQUE, stmt.span, parent, stmt, [], opaque_text=stmt.text)
            self._connect(preds, node.id)
            return [(node.id, "")]
        if kind is StmtKind.RETURN:
            node = self._statement_node(NodeKind.RETURN_STMT, stmt.span, parent, stmt,
                                        [stmt.expr] if stmt.expr is not None else [])
            self._connect(preds, node.id)
            self.exit_preds.append((node.id, ""))
            return []
        if kind is StmtKind.IF:
            cond = self._condition(stmt, parent)
            self._connect(preds, cond.id)
            exits = self.stmt(stmt.then, [(cond.id, "true")], cond.id)
            if stmt.orelse is not None:
                exits = exits + self.stmt(stmt.orelse, [(cond.id, "false")], cond.id)
            else:
                exits = exits + [(cond.id, "false")]
            return exits
        if kind is StmtKind.WHILE:
            cond = self._condition(stmt, parent)
            self._connect(preds, cond.id)
            ctx = _LoopContext(cond.id)
            self.loops.append(ctx)
            body_exits = self.stmt(stmt.children[0] if stmt.children else None, [(cond.id, "true")], cond.id)
            self.loops.pop()
            self._connect(body_exits + ctx.continues, cond.id)
            return [(cond.id, "false")] + ctx.breaks
        if kind is StmtKind.DO_WHILE:
            ctx = _LoopContext(None)
            self.loops.append(ctx)
            first_id = self.next_id
            body_exits = self.stmt(stmt.children[0] if stmt.children else None, preds, parent)
            self.loops.pop()
            cond = self._condition(stmt, parent)
            self._connect(body_exits + ctx.continues, cond.id)
            target = first_id if first_id < cond.id else cond.id
            if target == cond.id:
                # empty body: the entry edge still has to reach the condition
                self._connect(preds, cond.id)
            self.graph.add_edge(cond.id, target, EdgeKind.CFG_NEXT, label="true")
            return [(cond.id, "false")] + ctx.breaks
        if kind is StmtKind.FOR:
            return self._for(stmt, preds, parent)
        if kind is StmtKind.SWITCH:
            return self._switch(stmt, preds, parent)
        if kind is StmtKind.BREAK:
            if self.loops:
                self.loops[-1].breaks.extend(preds)
                return []
            return preds
        if kind is StmtKind.CONTINUE:
            ctx = next((c for c in reversed(self.loops) if not c.is_switch), None)
            if ctx is None:
                return preds
            if ctx.continue_target is not None:
                self._connect(preds, ctx.continue_target)
            else:
                ctx.continues.extend(preds)
            return []
        node = self._statement_node(NodeKind.OPAQUE, stmt.span, parent, stmt, [], opaque_text=stmt.text)
        self._connect(preds, node.id)
        return [(node.id, "")]

    def _condition(self, stmt: Statement, parent: int) -> CpgNode:
        span = stmt.condition_span or stmt.span
        node = self._statement_node(NodeKind.CONDITION, span, parent, stmt,
                                    [stmt.expr] if stmt.expr is not None else [])
        return node

    def _for(self, stmt: Statement, preds: List[Pred], parent: int) -> List[Pred]:
        if stmt.init is not None:
            preds = self.stmt(stmt.init, preds, parent)
        if stmt.expr is not None:
            header = self._condition(stmt, parent)
            exits: List[Pred] = [(header.id, "false")]
            body_label = "true"
        else:
            header = self._statement_node(NodeKind.STATEMENT, stmt.span, parent, stmt, [])
            exits = []
            body_label = ""
        self._connect(preds, header.id)

        ctx = _LoopContext(None)
        self.loops.append(ctx)
        body_exits = self.stmt(stmt.children[0] if stmt.children else None, [(header.id, body_label)], header.id)
        self.loops.pop()

        tail = body_exits + ctx.continues
        if stmt.update is not None:
            update = self._statement_node(NodeKind.STATEMENT, stmt.update.span, header.id, None, [stmt.update])
            self._connect(tail, update.id)
            tail = [(update.id, "")]
        self._connect(tail, header.id)
        return exits + ctx.breaks

    def _switch(self, stmt: Statement, preds: List[Pred], parent: int) -> List[Pred]:
        dispatch = self._condition(stmt, parent)
        self._connect(preds, dispatch.id)
        ctx = _LoopContext(None, is_switch=True)
        self.loops.append(ctx)
        fallthrough: List[Pred] = []
        has_default = False
        for case in stmt.children:
            if case.expr is None:
                has_default = True
                label = "default"
            else:
                label = f"case:{case.expr.text}"
            fallthrough = self.stmt(case, fallthrough + [(dispatch.id, label)], dispatch.id)
        self.loops.pop()
        exits = fallthrough + ctx.breaks
        if not has_default:
            exits.append((dispatch.id, "default"))
        return exits


def _symbols_for(fn: FunctionAst, global_names: Set[str]) -> Set[str]:
    symbols = set(global_names)
    symbols.update(p.name for p in fn.parameters)
    symbols.update(d.name for d in fn.local_declarators() if not d.is_function)
    return symbols


def compute_dataflow(graph: CodePropertyGraph, name: str):
    """Reaching definitions for one function; replaces its DfgReaches edges."""
    info = graph.functions[name]
    order = info.nodes
    preds = {n: graph.cfg_predecessors(n) for n in order}
    facts = {n: graph.nodes[n].def_facts() for n in order}
    out: Dict[int, FrozenSet[Tuple[int, str]]] = {n: frozenset() for n in order}
    reach_in: Dict[int, FrozenSet[Tuple[int, str]]] = {n: frozenset() for n in order}

    changed = True
    while changed:
        changed = False
        for n in order:
            incoming = frozenset().union(*(out[p] for p in preds[n])) if preds[n] else frozenset()
            strong = [key for key, is_strong in facts[n] if is_strong]
            survivors = {f for f in incoming if not any(killed_by(f[1], s) for s in strong)}
            survivors.update((n, key) for key, _ in facts[n])
            new_out = frozenset(survivors)
            reach_in[n] = incoming
            if new_out != out[n]:
                out[n] = new_out
                changed = True

    graph.remove_edges(EdgeKind.DFG_REACHES, function=name)
    for n in order:
        node = graph.nodes[n]
        for use in sorted(node.uses):
            for def_node, key in sorted(reach_in[n]):
                if keys_match(use, key):
                    graph.add_edge(def_node, n, EdgeKind.DFG_REACHES, var=use)
    graph.reach_in.update(reach_in)
    graph.exit_facts[name] = reach_in[info.exit]


def link_call(graph: CodePropertyGraph, node_id: int, call_index: int, callee: str):
    """CallsTo and ArgToParam edges from one call to a corpus function."""
    info = graph.functions[callee]
    call = graph.nodes[node_id].calls[call_index]
    graph.add_edge(node_id, info.entry, EdgeKind.CALLS_TO, call_index=call_index, callee=callee)
    for index, param_node in enumerate(info.params):
        if index < len(call.args):
            graph.add_edge(node_id, param_node, EdgeKind.ARG_TO_PARAM, index=index,
                           call_index=call_index, callee=callee)


def build_cpg(units: List[TranslationUnit]) -> CodePropertyGraph:
    """Build the code property graph of a corpus.

    Functions defined more than once keep their first definition; later
    ones are recorded as duplicate_definition diagnostics.
    """
    graph = CodePropertyGraph()
    graph.units = list(units)

    chosen: List[Tuple[TranslationUnit, FunctionAst]] = []
    seen: Dict[str, SourceSpan] = {}
    global_names: Set[str] = set()
    global_pointers: Set[str] = set()
    prototypes: Set[str] = set()
    for unit in units:
        for span, reason in unit.skipped_regions:
            graph.diagnostics.append(Diagnostic(DiagnosticKind.SKIPPED_REGION, reason, span.location()))
        for decl in unit.globals:
            (prototypes if decl.is_function else global_names).add(decl.name)
            if decl.is_pointer or decl.is_array:
                global_pointers.add(decl.name)
        for fn in unit.functions:
            if fn.name in seen:
                message = f"function '{fn.name}' defined again at {fn.span.location()}; keeping {seen[fn.name].location()}"
                logger.warning(message)
                graph.diagnostics.append(Diagnostic(DiagnosticKind.DUPLICATE_DEFINITION, message, fn.span.location()))
                continue
            seen[fn.name] = fn.span
            chosen.append((unit, fn))

    function_names = set(seen) | prototypes
    next_id = 0
    for unit, fn in chosen:
        info = FunctionInfo(name=fn.name, ast=fn, unit=unit, entry=-1, exit=-1,
                            symbols=_symbols_for(fn, global_names - {fn.name}))
        info.pointer_params = {i for i, p in enumerate(fn.parameters) if p.is_pointer or p.is_array}
        info.pointer_vars = (global_pointers | {p.name for p in fn.parameters if p.is_pointer or p.is_array}
                             | {d.name for d in fn.local_declarators() if d.is_pointer or d.is_array})
        locals_ = [d.name for d in fn.local_declarators() if d.is_integer]
        info.integer_locals = sorted(set(locals_) | {p.name for p in fn.parameters if p.is_integer})
        graph.functions[fn.name] = info
        next_id = _FunctionBuilder(graph, info, next_id, function_names).build()
        graph.function_index[fn.name] = info.entry

    for name in graph.functions:
        compute_dataflow(graph, name)

    for node in graph.call_nodes():
        for index, call in enumerate(node.calls):
            if call.callee in graph.functions:
                link_call(graph, node.id, index, call.callee)

    logger.info(f"Built CPG: {len(graph.functions)} functions, {len(graph.nodes)} nodes, "
                f"{graph.g.number_of_edges()} edges")
    return graph
