"""
Corpus-level metrics of one analysis run.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from core.frontend.ast import TranslationUnit
from core.taint.pairs import SourceSinkPair
from core.taint.sites import SinkSite, SourceSite
from core.utils.common import Diagnostic

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

PATH_COUNT_CAVEAT = ("dataflow_paths counts distinct definition-tree paths; paths sharing every "
                     "statement but differing in intermediate calls are counted separately, so the "
                     "figure is an upper bound on semantically distinct flows.")


@dataclass
class CorpusReport:
    lines_of_code: int = 0
    sources_found: int = 0
    sinks_found: int = 0
    unique_pairs: int = 0
    dataflow_paths: int = 0
    truncation_flags: List[str] = field(default_factory=list)
    per_pair: List[Dict[str, Any]] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    diagnostics: Dict[str, int] = field(default_factory=dict)
    caveat: str = PATH_COUNT_CAVEAT

    def to_dict(self, include_timings: bool = False) -> Dict[str, Any]:
        data = {
            "schema_version": SCHEMA_VERSION,
            "lines_of_code": self.lines_of_code,
            "sources_found": self.sources_found,
            "sinks_found": self.sinks_found,
            "unique_pairs": self.unique_pairs,
            "dataflow_paths": self.dataflow_paths,
            "truncation_flags": list(self.truncation_flags),
            "per_pair": list(self.per_pair),
            "diagnostics": dict(self.diagnostics),
            "metadata": {"caveat": self.caveat},
        }
        if include_timings:
            data["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CorpusReport":
        return cls(
            lines_of_code=data["lines_of_code"],
            sources_found=data["sources_found"],
            sinks_found=data["sinks_found"],
            unique_pairs=data["unique_pairs"],
            dataflow_paths=data["dataflow_paths"],
            truncation_flags=list(data.get("truncation_flags", [])),
            per_pair=list(data.get("per_pair", [])),
            timings=dict(data.get("timings", {})),
            diagnostics=dict(data.get("diagnostics", {})),
            caveat=data.get("metadata", {}).get("caveat", PATH_COUNT_CAVEAT),
        )


def unique_pair_count(pairs: Sequence[SourceSinkPair]) -> int:
    """Sum over sinks of the distinct sources reaching that sink."""
    per_sink: Dict[Any, set] = {}
    for pair in pairs:
        if pair.paths:
            per_sink.setdefault(pair.sink.key, set()).add(pair.source.key)
    return sum(len(sources) for sources in per_sink.values())


def pair_digest(pair: SourceSinkPair) -> Dict[str, Any]:
    shortest = min((len(p.hops) for p in pair.paths), default=0)
    return {
        "source": f"{pair.source.callee}@{pair.source.span.location()}",
        "sink": f"{pair.sink.callee}[{pair.sink.sensitive_arg_index}]@{pair.sink.span.location()}",
        "vuln_class": pair.sink.vuln_class.value,
        "confidence": pair.confidence,
        "path_count": len(pair.paths),
        "shortest_hops": shortest,
    }


def compute_metrics(pairs: Sequence[SourceSinkPair], timings: Optional[Dict[str, float]] = None,
                    units: Sequence[TranslationUnit] = (), sources: Sequence[SourceSite] = (),
                    sinks: Sequence[SinkSite] = (), truncation: Sequence[str] = (),
                    diagnostics: Sequence[Diagnostic] = ()) -> CorpusReport:
    report = CorpusReport(
        lines_of_code=sum(u.lines_of_code for u in units),
        sources_found=len(sources),
        sinks_found=len(sinks),
        unique_pairs=unique_pair_count(pairs),
        dataflow_paths=sum(len(p.paths) for p in pairs),
        truncation_flags=sorted(set(truncation)),
        per_pair=[pair_digest(p) for p in pairs],
        timings=dict(timings or {}),
        diagnostics=dict(sorted(Counter(d.kind.value for d in diagnostics).items())),
    )
    if report.unique_pairs and report.dataflow_paths < report.unique_pairs:
        logger.error(f"{report.dataflow_paths} paths for {report.unique_pairs} pairs; pair grouping is inconsistent")
    logger.info(f"{report.unique_pairs} unique pairs over {report.dataflow_paths} data-flow paths")
    return report
