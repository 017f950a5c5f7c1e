#!/usr/bin/env python3
"""
Call graph, analysis order and function-pointer resolution.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

import networkx as nx

from core.cpg.graph import CodePropertyGraph
from core.frontend.ast import ExprKind

logger = logging.getLogger(__name__)


@dataclass
class CallGraph:
    """Caller -> callee edges with the call-site node ids behind them.

    Callees without a body in the corpus are kept as external stub nodes.
    ``break_log`` records, for every broken edge, the strongly connected
    component it was removed from.
    """
    g: nx.DiGraph = field(default_factory=nx.DiGraph)
    call_sites: Dict[Tuple[str, str], List[int]] = field(default_factory=dict)
    external: Set[str] = field(default_factory=set)
    call_counts: Dict[str, int] = field(default_factory=dict)
    broken_edges: List[Tuple[str, str]] = field(default_factory=list)
    break_log: List[Tuple[Tuple[str, str], Tuple[str, ...]]] = field(default_factory=list)

    @property
    def functions(self) -> List[str]:
        return sorted(n for n in self.g.nodes if n not in self.external)

    def add_function(self, name: str, external: bool = False):
        if name not in self.g:
            self.g.add_node(name)
        if external:
            self.external.add(name)
        self.call_counts.setdefault(name, 0)

    def add_call(self, caller: str, callee: str, site: int):
        if callee not in self.g:
            self.add_function(callee, external=True)
        self.g.add_edge(caller, callee)
        self.call_sites.setdefault((caller, callee), []).append(site)

    def edges(self) -> List[Tuple[str, str]]:
        return sorted(self.g.edges)

    def internal_edges(self) -> List[Tuple[str, str]]:
        return [(u, v) for u, v in self.edges() if u not in self.external and v not in self.external]


def resolve_function_pointers(graph: CodePropertyGraph) -> Dict[int, FrozenSet[str]]:
    """Candidate targets of every indirect call site.

    Any corpus function whose name is taken in value position anywhere
    (assigned, passed, stored or returned) is a candidate for every
    indirect call, regardless of flow.
    """
    taken: Set[str] = set()
    for node in graph.nodes.values():
        taken.update(name for name in node.function_refs if name in graph.functions)
    for unit in graph.units:
        for decl in unit.globals:
            if decl.init is None:
                continue
            for expr in decl.init.walk():
                if expr.kind is ExprKind.IDENT and expr.name in graph.functions:
                    taken.add(expr.name)
    candidates = frozenset(taken)

    targets: Dict[int, FrozenSet[str]] = {}
    for node in graph.call_nodes():
        if any(call.indirect for call in node.calls):
            targets[node.id] = candidates
    if targets:
        logger.debug(f"{len(targets)} indirect call sites, candidates {sorted(candidates)}")
    return targets


def build_call_graph(graph: CodePropertyGraph,
                     pointer_targets: Optional[Dict[int, FrozenSet[str]]] = None) -> CallGraph:
    """Direct calls by name; indirect calls through the pointer over-approximation."""
    if pointer_targets is None:
        pointer_targets = resolve_function_pointers(graph)
    cg = CallGraph()
    for name in graph.functions:
        cg.add_function(name)

    for node in graph.call_nodes():
        caller = node.function
        for call in node.calls:
            cg.call_counts[caller] = cg.call_counts.get(caller, 0) + 1
            if call.callee:
                cg.add_call(caller, call.callee, node.id)
            else:
                for target in sorted(pointer_targets.get(node.id, ())):
                    cg.add_call(caller, target, node.id)
    logger.debug(f"Call graph: {cg.g.number_of_nodes()} functions, {cg.g.number_of_edges()} edges")
    return cg


def _order_key(cg: CallGraph, name: str) -> Tuple[int, str]:
    return (cg.call_counts.get(name, 0), name)


def break_cycles(cg: CallGraph) -> List[Tuple[str, str]]:
    """Remove edges until the internal call graph is acyclic.

    Self-calls go first. Then, per strongly connected component, the
    member making the fewest calls (ties by name) loses its outgoing edge
    to the smallest-named member, until no cycle is left.
    """
    work = nx.DiGraph()
    work.add_nodes_from(cg.functions)
    work.add_edges_from(cg.internal_edges())
    broken: List[Tuple[str, str]] = []

    for name in sorted(nx.nodes_with_selfloops(work)):
        work.remove_edge(name, name)
        broken.append((name, name))
        cg.break_log.append(((name, name), (name,)))

    while True:
        components = [sorted(c) for c in nx.strongly_connected_components(work) if len(c) > 1]
        if not components:
            break
        for members in sorted(components):
            member_set = set(members)
            victim = min(members, key=lambda n: _order_key(cg, n))
            callee = min(v for v in work.successors(victim) if v in member_set)
            work.remove_edge(victim, callee)
            broken.append((victim, callee))
            cg.break_log.append(((victim, callee), tuple(members)))
            logger.debug(f"Broke call cycle edge {victim} -> {callee}")
    cg.broken_edges = broken
    return broken


def cyclic_functions(cg: CallGraph) -> Set[str]:
    """Functions that sit on a call cycle of the unbroken graph."""
    found: Set[str] = set()
    for component in nx.strongly_connected_components(cg.g):
        if len(component) > 1:
            found.update(n for n in component if n not in cg.external)
    found.update(n for n in nx.nodes_with_selfloops(cg.g) if n not in cg.external)
    return found


def topological_order(cg: CallGraph) -> List[str]:
    """Callees before callers, externals first, ties by name.

    Breaks call cycles first (stored in ``cg.broken_edges``); only broken
    edges may violate the order.
    """
    broken = set(break_cycles(cg))
    dependencies = nx.DiGraph()
    dependencies.add_nodes_from(cg.g.nodes)
    for caller, callee in cg.edges():
        if (caller, callee) in broken or caller == callee:
            continue
        dependencies.add_edge(callee, caller)
    order = list(nx.lexicographical_topological_sort(
        dependencies, key=lambda n: ("0" if n in cg.external else "1") + n))
    return order
