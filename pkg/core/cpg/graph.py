"""
Code property graph store.

Nodes are statement-level ``CpgNode`` records; AST, control-flow,
data-flow and call edges live in one networkx MultiDiGraph and are told
apart by their ``kind`` attribute.
"""

import copy
import logging
from enum import Enum
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

import networkx as nx

from core.frontend.ast import Expr, FunctionAst, Statement, TranslationUnit
from core.cpg.exprs import Assignment, CallInfo, keys_match
from core.utils.common import Diagnostic, SourceSpan

logger = logging.getLogger(__name__)


class NodeKind(Enum):
    STATEMENT = "Statement"
    CONDITION = "Condition"
    CALL_SITE = "CallSite"
    PARAMETER = "Parameter"
    RETURN_STMT = "ReturnStmt"
    ENTRY = "Entry"
    EXIT = "Exit"
    OPAQUE = "Opaque"


class EdgeKind(Enum):
    AST_CHILD = "AstChild"
    CFG_NEXT = "CfgNext"
    DFG_REACHES = "DfgReaches"
    CALLS_TO = "CallsTo"
    ARG_TO_PARAM = "ArgToParam"


@dataclass(frozen=True)
class CpgNode:
    """A statement-level graph node.

    ``defs`` holds every key the node may write (its own assignments plus
    call-site definitions); ``call_defs`` keeps the call-derived part with a
    strong/weak flag so augmentation can replace it.
    """
    id: int
    kind: NodeKind
    function: str
    span: SourceSpan
    defs: FrozenSet[str] = frozenset()
    uses: FrozenSet[str] = frozenset()
    assignments: Tuple[Assignment, ...] = ()
    calls: Tuple[CallInfo, ...] = ()
    call_defs: Tuple[Tuple[str, bool, bool], ...] = ()
    function_refs: FrozenSet[str] = frozenset()
    stmt: Optional[Statement] = None
    expr: Optional[Expr] = None
    param_index: Optional[int] = None
    name: str = ""

    @property
    def line(self) -> int:
        return self.span.display_line

    def pointee_defs(self) -> Set[str]:
        """Keys written through a pointer at this node."""
        keys = {a.target for a in self.assignments if a.through_pointer}
        keys.update(key for key, _, through in self.call_defs if through)
        return keys

    def def_facts(self) -> List[Tuple[str, bool]]:
        """(key, strong) for every write of the node."""
        facts = [(a.target, a.strong) for a in self.assignments]
        facts.extend((key, strong) for key, strong, _ in self.call_defs)
        if self.kind is NodeKind.PARAMETER:
            facts.append((self.name, True))
        return facts


@dataclass
class FunctionInfo:
    """Per-function bookkeeping kept next to the graph."""
    name: str
    ast: FunctionAst
    unit: TranslationUnit
    entry: int
    exit: int
    params: List[int] = field(default_factory=list)
    nodes: List[int] = field(default_factory=list)
    symbols: Set[str] = field(default_factory=set)
    integer_locals: List[str] = field(default_factory=list)
    pointer_params: Set[int] = field(default_factory=set)
    pointer_vars: Set[str] = field(default_factory=set)

    @property
    def param_names(self) -> List[str]:
        return [p.name for p in self.ast.parameters]


class CodePropertyGraph:
    """In-process code property graph."""

    def __init__(self):
        self.g = nx.MultiDiGraph()
        self.nodes: Dict[int, CpgNode] = {}
        self.functions: Dict[str, FunctionInfo] = {}
        self.function_index: Dict[str, int] = {}
        self.units: List[TranslationUnit] = []
        self.diagnostics: List[Diagnostic] = []
        # reaching (def node, key) facts at each function exit
        self.exit_facts: Dict[str, FrozenSet[Tuple[int, str]]] = {}
        self.reach_in: Dict[int, FrozenSet[Tuple[int, str]]] = {}

    # -- construction ----------------------------------------------------------
    def add_node(self, node: CpgNode):
        self.nodes[node.id] = node
        self.g.add_node(node.id)

    def replace_node(self, node: CpgNode):
        self.nodes[node.id] = node

    def add_edge(self, src: int, dst: int, kind: EdgeKind, **attrs: Any):
        self.g.add_edge(src, dst, kind=kind, **attrs)

    def remove_edges(self, kind: EdgeKind, function: Optional[str] = None):
        doomed = [(u, v, k) for u, v, k, d in self.g.edges(keys=True, data=True)
                  if d["kind"] is kind and (function is None or self.nodes[v].function == function)]
        self.g.remove_edges_from(doomed)

    def copy(self) -> "CodePropertyGraph":
        other = CodePropertyGraph()
        other.g = self.g.copy()
        other.nodes = dict(self.nodes)
        other.functions = {k: copy.copy(v) for k, v in self.functions.items()}
        other.function_index = dict(self.function_index)
        other.units = list(self.units)
        other.diagnostics = list(self.diagnostics)
        other.exit_facts = dict(self.exit_facts)
        other.reach_in = dict(self.reach_in)
        return other

    # -- queries ----------------------------------------------------------------
    def node(self, node_id: int) -> CpgNode:
        return self.nodes[node_id]

    def function_of(self, node_id: int) -> FunctionInfo:
        return self.functions[self.nodes[node_id].function]

    def out_edges(self, node_id: int, kind: EdgeKind) -> List[Tuple[int, Dict[str, Any]]]:
        """Outgoing edges of one kind, ordered by destination id then edge key."""
        edges = [(v, k, d) for _, v, k, d in self.g.out_edges(node_id, keys=True, data=True)
                 if d["kind"] is kind]
        edges.sort(key=lambda e: (e[0], e[1]))
        return [(v, d) for v, _, d in edges]

    def in_edges(self, node_id: int, kind: EdgeKind) -> List[Tuple[int, Dict[str, Any]]]:
        edges = [(u, k, d) for u, _, k, d in self.g.in_edges(node_id, keys=True, data=True)
                 if d["kind"] is kind]
        edges.sort(key=lambda e: (e[0], e[1]))
        return [(u, d) for u, _, d in edges]

    def cfg_successors(self, node_id: int) -> List[int]:
        return sorted({v for v, _ in self.out_edges(node_id, EdgeKind.CFG_NEXT)})

    def cfg_predecessors(self, node_id: int) -> List[int]:
        return sorted({u for u, _ in self.in_edges(node_id, EdgeKind.CFG_NEXT)})

    def reaching_defs(self, node_id: int, key: str) -> List[int]:
        """Definition nodes whose DfgReaches edge into ``node_id`` carries ``key``."""
        return sorted({u for u, d in self.in_edges(node_id, EdgeKind.DFG_REACHES) if d.get("var") == key})

    def defs_reaching(self, node_id: int, key: str) -> List[int]:
        """Definition nodes of any key matching ``key`` that reach ``node_id``."""
        return sorted({d for d, k in self.reach_in.get(node_id, ()) if keys_match(k, key)})

    def edges(self, kind: EdgeKind) -> Iterator[Tuple[int, int, Dict[str, Any]]]:
        for u, v, d in self.g.edges(data=True):
            if d["kind"] is kind:
                yield u, v, d

    def function_nodes(self, name: str) -> List[CpgNode]:
        return [self.nodes[i] for i in self.functions[name].nodes]

    def call_nodes(self) -> List[CpgNode]:
        return [n for n in sorted(self.nodes.values(), key=lambda n: n.id) if n.calls]


def dump_cpg(graph: CodePropertyGraph) -> str:
    """Line-oriented text export of the graph.

    ``node <id> <kind> <file>:<line>`` lines come first in id order, then
    ``edge <kind> <src> <dst> [<var>]`` lines sorted by kind and endpoints.
    """
    lines = []
    for node_id in sorted(graph.nodes):
        node = graph.nodes[node_id]
        lines.append(f"node {node_id} {node.kind.value} {node.span.display_file}:{node.span.display_line}")

    edge_lines = []
    for u, v, d in graph.g.edges(data=True):
        kind: EdgeKind = d["kind"]
        extra = ""
        if kind is EdgeKind.DFG_REACHES:
            extra = f" {d['var']}"
        elif kind is EdgeKind.ARG_TO_PARAM:
            extra = f" {d['index']}"
        elif kind is EdgeKind.CFG_NEXT and d.get("label"):
            extra = f" {d['label']}"
        edge_lines.append((kind.value, u, v, extra))
    for kind, u, v, extra in sorted(edge_lines):
        lines.append(f"edge {kind} {u} {v}{extra}")
    return "\n".join(lines) + "\n"
