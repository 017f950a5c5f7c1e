from core.cpg.graph import CodePropertyGraph, CpgNode, EdgeKind, NodeKind, dump_cpg
from core.cpg.builder import build_cpg, compute_dataflow
from core.cpg.paths import cfg_paths_between, enumerate_cfg_paths

__all__ = [
    "CodePropertyGraph", "CpgNode", "EdgeKind", "NodeKind", "dump_cpg",
    "build_cpg", "compute_dataflow", "cfg_paths_between", "enumerate_cfg_paths",
]
