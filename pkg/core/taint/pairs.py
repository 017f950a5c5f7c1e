"""
Grouping of data-flow paths into unique source/sink pairs.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from core.cpg.graph import CodePropertyGraph
from core.taint.sites import SinkSite, SourceSite
from core.taint.tracer import DataFlowPath


@dataclass
class SourceSinkPair:
    source: SourceSite
    sink: SinkSite
    paths: List[DataFlowPath] = field(default_factory=list)

    @property
    def key(self) -> Tuple[Any, ...]:
        return (self.source.key, self.sink.key)

    @property
    def confidence(self) -> str:
        return "definite" if any(p.confidence == "definite" for p in self.paths) else "maybe"

    def to_dict(self, graph: Optional[CodePropertyGraph] = None) -> Dict[str, Any]:
        return {
            "source": self.source.to_dict(),
            "sink": self.sink.to_dict(),
            "confidence": self.confidence,
            "path_count": len(self.paths),
            "paths": [p.to_dict(graph) for p in self.paths],
        }


def group_pairs(paths: List[DataFlowPath]) -> List[SourceSinkPair]:
    """One pair per (source call, sink site) with at least one path."""
    groups: Dict[Tuple[Any, ...], SourceSinkPair] = {}
    for path in paths:
        key = (path.source.key, path.sink.key)
        if key not in groups:
            groups[key] = SourceSinkPair(source=path.source, sink=path.sink)
        groups[key].paths.append(path)
    pairs = sorted(groups.values(), key=lambda p: (p.sink.key, p.source.key))
    for pair in pairs:
        pair.paths.sort(key=lambda p: (p.hops, p.hop_vars))
    return pairs
