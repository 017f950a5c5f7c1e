from core.taint.sites import SinkSite, SourceSite, find_sensitive_sinks, find_user_controlled_sources
from core.taint.tracer import DataFlowPath, DefinitionTree, TraceResult, path_is_connected, trace_to_sources
from core.taint.pairs import SourceSinkPair, group_pairs

__all__ = [
    "SinkSite", "SourceSite", "find_sensitive_sinks", "find_user_controlled_sources",
    "DataFlowPath", "DefinitionTree", "TraceResult", "path_is_connected", "trace_to_sources",
    "SourceSinkPair", "group_pairs",
]
