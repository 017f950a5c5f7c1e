from core.interproc.summary import FunctionSummary, ParamStatus, SinkSpec, combine_status
from core.interproc.summary_file import load_external_summaries, load_summary_stack, parse_summaries
from core.interproc.callgraph import (
    CallGraph, break_cycles, build_call_graph, resolve_function_pointers, topological_order,
)
from core.interproc.summarize import augment_dataflow, summarize_parameters

__all__ = [
    "FunctionSummary", "ParamStatus", "SinkSpec", "combine_status",
    "load_external_summaries", "load_summary_stack", "parse_summaries",
    "CallGraph", "break_cycles", "build_call_graph", "resolve_function_pointers", "topological_order",
    "augment_dataflow", "summarize_parameters",
]
