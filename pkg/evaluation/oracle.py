#!/usr/bin/env python3
"""
Flow-insensitive reference taint analysis.

A deliberately naive second opinion on the backward tracer: every variable
of every function becomes a node of one networkx DiGraph, every assignment,
argument binding, return and summary transfer becomes an edge, and a pair
exists when a sink argument is reachable from a source. There is no
ordering, no kill and no calling context, so on corpora without
redefinitions or multiply-called pointer helpers both analyses must agree.

Usage:
    python evaluation/oracle.py evaluation/corpora/fixtures
    python evaluation/oracle.py evaluation/corpora/running --compare
"""

import os
import sys
import shutil
import argparse
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.frontend.ast import Expr, ExprKind, FunctionAst, StmtKind, TranslationUnit
from core.interproc.summary import RETURN_VALUE, VARIADIC, FunctionSummary, ParamStatus
from core.interproc.summary_file import load_summary_stack
from core.utils.common import VulnClass

GLOBAL = "<global>"
MAIN_SOURCE_PARAMS = ("argv", "envp")

PairTuple = Tuple[str, int, str, int, int]
Node = Tuple


def _base(expr: Expr) -> Optional[str]:
    """Variable an lvalue-ish argument or target stores into."""
    e = expr.stripped()
    while e.kind in (ExprKind.ADDR, ExprKind.DEREF, ExprKind.MEMBER, ExprKind.INDEX, ExprKind.CAST) and e.children:
        e = e.children[0].stripped()
    return e.name if e.kind is ExprKind.IDENT else None


def _writes_through(target: Expr) -> bool:
    return target.stripped().kind in (ExprKind.DEREF, ExprKind.INDEX, ExprKind.MEMBER)


def _is_literal(expr: Expr) -> bool:
    return expr.stripped().kind in (ExprKind.STRING, ExprKind.NUMBER, ExprKind.CHAR)


class FlowOracle:
    def __init__(self, units: Iterable[TranslationUnit], summaries: Dict[str, FunctionSummary]):
        self.functions: Dict[str, FunctionAst] = {}
        for unit in units:
            for fn in unit.functions:
                self.functions.setdefault(fn.name, fn)
        self.summaries = summaries
        self.locals = {name: {p.name for p in fn.parameters} | {d.name for d in fn.local_declarators()}
                       for name, fn in self.functions.items()}
        self.graph = nx.DiGraph()
        self.seeds: Set[Node] = set()
        self.address_taken = self._address_taken()
        self.writes = self._written_params()

    # -- naming -------------------------------------------------------------

    def _var(self, fn: str, name: str) -> Node:
        return (fn, name) if name in self.locals[fn] else (GLOBAL, name)

    def _is_function_name(self, fn: str, name: str) -> bool:
        return name in self.functions and name not in self.locals[fn]

    def _calls(self, fn: FunctionAst) -> List[Expr]:
        return [e for s in fn.statements() for root in s.expressions() for e in root.walk()
                if e.kind is ExprKind.CALL]

    def _address_taken(self) -> Set[str]:
        taken = set()
        for name, fn in self.functions.items():
            callees = {id(c.callee) for c in self._calls(fn)}
            for s in fn.statements():
                for root in s.expressions():
                    for e in root.walk():
                        if e.kind is ExprKind.IDENT and id(e) not in callees and self._is_function_name(name, e.name):
                            taken.add(e.name)
        return taken

    def _targets(self, fn: str, call: Expr) -> Tuple[Optional[str], List[str]]:
        """(external callee name, corpus callees) of a call."""
        callee = call.callee.stripped() if call.callee is not None else None
        if callee is not None and callee.kind is ExprKind.IDENT:
            if self._is_function_name(fn, callee.name):
                return None, [callee.name]
            if callee.name not in self.locals[fn]:
                return callee.name, []
        return None, sorted(self.address_taken)

    # -- parameter side effects --------------------------------------------

    def _written_params(self) -> Set[Tuple[str, int]]:
        written: Set[Tuple[str, int]] = set()
        changed = True
        while changed:
            changed = False
            for name, fn in self.functions.items():
                for index, param in enumerate(fn.parameters):
                    if (name, index) not in written and self._writes_param(name, fn, param.name, written):
                        written.add((name, index))
                        changed = True
        return written

    def _writes_param(self, name: str, fn: FunctionAst, param: str, written: Set[Tuple[str, int]]) -> bool:
        for s in fn.statements():
            for root in s.expressions():
                for e in root.walk():
                    if e.kind in (ExprKind.ASSIGN, ExprKind.UPDATE) and _writes_through(e.children[0]) \
                            and _base(e.children[0]) == param:
                        return True
        for call in self._calls(fn):
            external, corpus = self._targets(name, call)
            for j, arg in enumerate(call.args):
                if _base(arg) != param:
                    continue
                if external is not None:
                    summary = self.summaries.get(external)
                    if summary is None or summary.status(j) is not ParamStatus.NO:
                        return True
                elif any((t, j) in written for t in corpus):
                    return True
        return False

    # -- value flow ---------------------------------------------------------

    def sources_of(self, fn: str, expr: Optional[Expr]) -> Set[Node]:
        """Nodes whose data the value of ``expr`` may carry."""
        if expr is None:
            return set()
        e = expr
        if e.kind is ExprKind.IDENT:
            return set() if self._is_function_name(fn, e.name) else {self._var(fn, e.name)}
        if e.kind in (ExprKind.SIZEOF, ExprKind.NUMBER, ExprKind.STRING, ExprKind.CHAR):
            return set()
        if e.kind is ExprKind.ASSIGN:
            return self.sources_of(fn, e.children[1])
        if e.kind is ExprKind.CALL:
            return self._call_value(fn, e)
        found: Set[Node] = set()
        for child in e.children:
            found |= self.sources_of(fn, child)
        return found

    def _seed(self, callee: str, call: Expr) -> Node:
        node = ("source", callee, call.span.display_line)
        self.seeds.add(node)
        return node

    def _call_value(self, fn: str, call: Expr) -> Set[Node]:
        external, corpus = self._targets(fn, call)
        if external is not None:
            summary = self.summaries.get(external)
            if summary is None:
                return set().union(*(self.sources_of(fn, a) for a in call.args))
            found: Set[Node] = set()
            if summary.is_source and summary.source_arg == RETURN_VALUE:
                found.add(self._seed(external, call))
            for j in sorted(summary.returns_param_data):
                if j < len(call.args):
                    found |= self.sources_of(fn, call.args[j])
            return found
        if not corpus:
            return set().union(*(self.sources_of(fn, a) for a in call.args))
        return {("ret", t) for t in corpus}

    def _flow(self, sources: Iterable[Node], target: Node):
        for source in sources:
            if source != target:
                self.graph.add_edge(source, target)

    def _bind_call(self, fn: str, call: Expr):
        external, corpus = self._targets(fn, call)
        if external is not None:
            summary = self.summaries.get(external)
            if summary is None:
                for i, arg in enumerate(call.args):
                    base = _base(arg)
                    if base is not None and not _is_literal(arg):
                        others = [a for j, a in enumerate(call.args) if j != i]
                        self._flow(set().union(*(self.sources_of(fn, a) for a in others)), self._var(fn, base))
                return
            for i, arg in enumerate(call.args):
                base = _base(arg)
                if base is None:
                    continue
                if summary.is_source and summary.source_arg != RETURN_VALUE and summary.controls_arg(i):
                    self._flow({self._seed(external, call)}, self._var(fn, base))
                for j in summary.transfers_into(i):
                    if j < len(call.args):
                        self._flow(self.sources_of(fn, call.args[j]), self._var(fn, base))
            return
        for target in corpus:
            params = self.functions[target].parameters
            for i, arg in enumerate(call.args[:len(params)]):
                param = (target, params[i].name)
                self._flow(self.sources_of(fn, arg), param)
                base = _base(arg)
                if base is not None and (target, i) in self.writes:
                    self._flow({param}, self._var(fn, base))

    def build(self) -> "FlowOracle":
        for name, fn in self.functions.items():
            if name == "main":
                for index, param in enumerate(fn.parameters):
                    if param.name in MAIN_SOURCE_PARAMS or (index in (1, 2) and (param.is_pointer or param.is_array)):
                        seed = ("source", "main", param.span.display_line)
                        self.seeds.add(seed)
                        self._flow({seed}, (name, param.name))
            for s in fn.statements():
                for d in s.declarators:
                    if d.init is not None:
                        self._flow(self.sources_of(name, d.init), self._var(name, d.name))
                if s.kind is StmtKind.RETURN and s.expr is not None:
                    self._flow(self.sources_of(name, s.expr), ("ret", name))
                for root in s.expressions():
                    for e in root.walk():
                        if e.kind is ExprKind.ASSIGN:
                            base = _base(e.children[0])
                            if base is not None:
                                self._flow(self.sources_of(name, e.children[1]), self._var(name, base))
                        elif e.kind is ExprKind.CALL:
                            self._bind_call(name, e)
        return self

    # -- pairs --------------------------------------------------------------

    def sink_arguments(self) -> List[Tuple[str, str, Expr, int]]:
        """(function, callee, argument, index) of every sensitive argument."""
        found = []
        for name, fn in self.functions.items():
            for call in self._calls(fn):
                external, _ = self._targets(name, call)
                summary = self.summaries.get(external) if external else None
                if summary is None:
                    continue
                for spec in summary.sink_specs:
                    if spec.param_index == VARIADIC:
                        indexes = range(len(summary.param_modified), len(call.args))
                    else:
                        indexes = [spec.param_index] if spec.param_index < len(call.args) else []
                    for index in indexes:
                        arg = call.args[index]
                        if spec.vuln_class is VulnClass.FORMAT_STRING and _is_literal(arg):
                            continue
                        found.append((name, external, arg, index))
        return found

    def pairs(self) -> Set[PairTuple]:
        # sink arguments may create seeds of their own, so collect them first
        sinks = [(callee, arg, index, self.sources_of(fn, arg)) for fn, callee, arg, index in self.sink_arguments()]
        reach = {seed: {seed} | (nx.descendants(self.graph, seed) if seed in self.graph else set())
                 for seed in self.seeds}
        result: Set[PairTuple] = set()
        for callee, arg, index, feeds in sinks:
            for seed, reachable in reach.items():
                if feeds & reachable:
                    result.add((seed[1], seed[2], callee, arg.span.display_line, index))
        return result


def oracle_pairs(units: Iterable[TranslationUnit], summary_files: Iterable[str] = ()) -> Set[PairTuple]:
    return FlowOracle(units, load_summary_stack(list(summary_files))).build().pairs()


def tracer_pairs(result) -> Set[PairTuple]:
    """The same tuples from an ``AnalysisResult``."""
    return {(p.source.callee, p.source.span.display_line, p.sink.callee,
             p.sink.span.display_line, p.sink.sensitive_arg_index) for p in result.pairs}


def main():
    from core.pipeline import analyze, parse_corpus

    parser = argparse.ArgumentParser(description="Flow-insensitive reference taint pairs")
    parser.add_argument("corpus_dir", help="Directory of C files; every file is checked on its own")
    parser.add_argument("--compare", action="store_true", help="Also run the tracer and diff the pair sets")
    args = parser.parse_args()

    mismatches = 0
    for name in sorted(os.listdir(args.corpus_dir)):
        if not name.endswith((".c", ".i")):
            continue
        with tempfile.TemporaryDirectory() as tmp:
            shutil.copy(os.path.join(args.corpus_dir, name), tmp)
            expected = oracle_pairs(parse_corpus(tmp))
            print(f"{name}: {len(expected)} pair(s)")
            for pair in sorted(expected):
                print(f"  {pair}")
            if args.compare:
                actual = tracer_pairs(analyze(tmp))
                if actual != expected:
                    mismatches += 1
                    print(f"  MISMATCH tracer-only={sorted(actual - expected)} oracle-only={sorted(expected - actual)}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
