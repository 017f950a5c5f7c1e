"""
Control flow spanned by a data-flow path.

For every pair of adjacent hops the corridor holds the loop-free CFG node
sequences leading from the earlier hop to the later one. A hop pair that
crosses a call boundary is split there: a callee can only be entered at
its entry and left at its exit.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Set

from core.cpg.graph import CodePropertyGraph, EdgeKind, NodeKind
from core.cpg.paths import DEFAULT_PATH_LIMIT, enumerate_cfg_paths
from core.taint.tracer import DataFlowPath

logger = logging.getLogger(__name__)

_STRUCTURAL = (NodeKind.ENTRY, NodeKind.EXIT, NodeKind.PARAMETER)


@dataclass
class CorridorSegment:
    index: int
    from_hop: int
    to_hop: int
    var: str
    sequences: List[List[int]] = field(default_factory=list)
    truncated: bool = False


@dataclass
class ControlFlowCorridor:
    path: DataFlowPath
    segments: List[CorridorSegment] = field(default_factory=list)
    total_enumerated: int = 0
    truncated: bool = False

    def nodes(self) -> Set[int]:
        return {n for s in self.segments for seq in s.sequences for n in seq}

    def shortest_nodes(self, graph: CodePropertyGraph) -> List[int]:
        """Statement nodes of the shortest way through the corridor, sink excluded."""
        joined: List[int] = []
        for segment in self.segments:
            if not segment.sequences:
                continue
            best = min(segment.sequences, key=lambda s: (len(s), s))
            if joined and best and joined[-1] == best[0]:
                best = best[1:]
            joined.extend(best)
        if joined and joined[-1] == self.path.hops[-1]:
            joined.pop()
        return [n for n in joined if graph.nodes[n].kind not in _STRUCTURAL]

    def shortest_lines(self, graph: CodePropertyGraph) -> List[int]:
        return [graph.nodes[n].line for n in self.shortest_nodes(graph)]


def _call_sites_into(graph: CodePropertyGraph, caller: str, param_node: int) -> List[int]:
    return sorted({u for u, _ in graph.in_edges(param_node, EdgeKind.ARG_TO_PARAM)
                   if graph.nodes[u].function == caller})


def _segment(graph: CodePropertyGraph, index: int, a: int, b: int, var: str, limit: int,
             path_limit: int) -> CorridorSegment:
    segment = CorridorSegment(index=index, from_hop=a, to_hop=b, var=var)
    node_a, node_b = graph.nodes[a], graph.nodes[b]
    if node_a.function == node_b.function:
        segment.sequences, segment.truncated = enumerate_cfg_paths(graph, a, b, min(limit, path_limit))
        return segment

    first: List[List[int]] = []
    second: List[List[int]] = []
    if node_b.kind is NodeKind.PARAMETER:
        for call_site in _call_sites_into(graph, node_a.function, b):
            paths, cut = enumerate_cfg_paths(graph, a, call_site, path_limit)
            first.extend(paths)
            segment.truncated |= cut
        paths, cut = enumerate_cfg_paths(graph, graph.functions[node_b.function].entry, b, path_limit)
        second.extend(paths)
        segment.truncated |= cut
    else:
        paths, cut = enumerate_cfg_paths(graph, a, graph.functions[node_a.function].exit, path_limit)
        first.extend(paths)
        second.append([b])
        segment.truncated |= cut

    for head in first:
        for tail in second:
            if len(segment.sequences) >= limit:
                segment.truncated = True
                break
            segment.sequences.append(head + tail)
    return segment


def enumerate_corridor(graph: CodePropertyGraph, path: DataFlowPath,
                       limit: int = DEFAULT_PATH_LIMIT,
                       path_limit: int = DEFAULT_PATH_LIMIT) -> ControlFlowCorridor:
    """Per-segment CFG sequences along ``path``.

    ``path_limit`` caps each intraprocedural enumeration, ``limit`` caps the
    sequences a segment keeps once caller and callee halves are joined.
    """
    corridor = ControlFlowCorridor(path=path)
    for index, (a, b) in enumerate(zip(path.hops, path.hops[1:])):
        segment = _segment(graph, index, a, b, path.hop_vars[index], limit, path_limit)
        if not segment.sequences:
            logger.debug(f"no control flow between hops {a} and {b}")
        corridor.segments.append(segment)
        corridor.total_enumerated += len(segment.sequences)
        corridor.truncated |= segment.truncated
    if corridor.truncated:
        logger.warning(f"Corridor of path {path.hops} truncated at {limit} sequences per segment")
    return corridor
