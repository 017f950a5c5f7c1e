"""
Control-flow path enumeration between two nodes of one function.
"""

import logging
from typing import List, Set, Tuple

from core.cpg.graph import CodePropertyGraph, EdgeKind

logger = logging.getLogger(__name__)

DEFAULT_PATH_LIMIT = 1000


def _can_reach(graph: CodePropertyGraph, target: int) -> Set[int]:
    seen = {target}
    stack = [target]
    while stack:
        node = stack.pop()
        for pred in graph.cfg_predecessors(node):
            if pred not in seen:
                seen.add(pred)
                stack.append(pred)
    return seen


def enumerate_cfg_paths(graph: CodePropertyGraph, start: int, end: int,
                        limit: int = DEFAULT_PATH_LIMIT) -> Tuple[List[List[int]], bool]:
    """Loop-free CFG paths from ``start`` to ``end`` plus a truncation flag.

    Each CfgNext edge is used at most once per path, so a loop body is
    walked at most once. Paths come out in lexicographic order of their
    node-id sequences.
    """
    if start not in graph.nodes or end not in graph.nodes:
        return [], False
    if start == end:
        return [[start]], False
    if graph.nodes[start].function != graph.nodes[end].function:
        logger.debug(f"cfg paths requested across functions: {start} -> {end}")
        return [], False

    useful = _can_reach(graph, end)
    if start not in useful:
        return [], False

    found: List[List[int]] = []
    seen_paths: Set[Tuple[int, ...]] = set()
    used_edges: Set[Tuple[int, int, int]] = set()
    path = [start]
    truncated = False

    def successors(node: int):
        edges = [(v, k) for _, v, k, d in graph.g.out_edges(node, keys=True, data=True)
                 if d["kind"] is EdgeKind.CFG_NEXT and v in useful]
        return sorted(edges)

    # iterative DFS; each frame remembers the edge it was entered by
    stack = [(start, iter(successors(start)), None)]
    while stack:
        node, it, _ = stack[-1]
        advanced = False
        for succ, key in it:
            edge = (node, succ, key)
            if edge in used_edges:
                continue
            if succ == end:
                candidate = tuple(path + [succ])
                if candidate not in seen_paths:
                    seen_paths.add(candidate)
                    found.append(list(candidate))
                    if len(found) >= limit:
                        truncated = True
                        stack.clear()
                        break
                continue
            used_edges.add(edge)
            path.append(succ)
            stack.append((succ, iter(successors(succ)), edge))
            advanced = True
            break
        if not advanced and stack:
            _, _, in_edge = stack.pop()
            path.pop()
            if in_edge is not None:
                used_edges.discard(in_edge)

    found.sort()
    return found, truncated


def cfg_paths_between(graph: CodePropertyGraph, start: int, end: int,
                      limit: int = DEFAULT_PATH_LIMIT) -> List[List[int]]:
    """Loop-free control-flow paths from ``start`` to ``end`` (at most ``limit``)."""
    paths, truncated = enumerate_cfg_paths(graph, start, end, limit)
    if truncated:
        logger.warning(f"cfg path enumeration {start} -> {end} truncated at {limit} paths")
    return paths
