#!/usr/bin/env python3
"""
End-to-end driver: analyse a corpus, then insert bugs into copies of it.

Analysis runs frontend, graph construction, parameter summaries, graph
augmentation, backward tracing and guard location in sequence and times
each phase. Insertion reuses one analysis for every requested variant.
"""

import os
import time
import random
import shutil
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from core.cpg.builder import build_cpg
from core.cpg.graph import CodePropertyGraph
from core.frontend.ast import TranslationUnit
from core.frontend.parser import parse_unit, read_source
from core.guards.corridor import ControlFlowCorridor, enumerate_corridor
from core.guards.mechanisms import GuardSite, locate_guards
from core.instrument.apply import choose_and_apply
from core.instrument.bugdoor import applicable_instrumentations, is_bugdoorable
from core.instrument.plans import GroundTruthRecord, InstrumentationClass, save_plan
from core.instrument.rewrites import InstrumentContext
from core.interproc.callgraph import CallGraph, build_call_graph, resolve_function_pointers, topological_order
from core.interproc.summarize import augment_dataflow, summarize_parameters
from core.interproc.summary import FunctionSummary
from core.interproc.summary_file import load_summary_stack
from core.report.metrics import CorpusReport, compute_metrics
from core.report.writer import emit_json
from core.taint.pairs import SourceSinkPair, group_pairs
from core.taint.sites import SinkSite, SourceSite, find_sensitive_sinks, find_user_controlled_sources
from core.taint.tracer import DataFlowPath, TraceResult, trace_to_sources
from core.utils.common import Diagnostic
from core.utils.config import AnalysisConfig
from core.utils.errors import EmptyCorpus, NoBugdoorableSite

logger = logging.getLogger(__name__)

C_SUFFIXES = (".c", ".i")

Target = Union[GuardSite, SinkSite]


@dataclass
class AnalysisResult:
    corpus_dir: str
    units: List[TranslationUnit]
    graph: CodePropertyGraph
    summaries: Dict[str, FunctionSummary]
    pointer_targets: Dict[int, FrozenSet[str]]
    call_graph: CallGraph
    sinks: List[SinkSite]
    sources: List[SourceSite]
    traces: List[Tuple[SinkSite, TraceResult]]
    pairs: List[SourceSinkPair]
    corridors: List[ControlFlowCorridor]
    guards: List[GuardSite]
    report: CorpusReport
    diagnostics: List[Diagnostic] = field(default_factory=list)


@dataclass
class InsertionTarget:
    site: Target
    context: InstrumentContext
    candidates: List[Tuple[InstrumentationClass, int]]


class _PhaseTimer:
    def __init__(self):
        self.timings: Dict[str, float] = {}

    def run(self, name: str, fn, *args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        self.timings[name] = time.perf_counter() - start
        logger.info(f"phase {name}: {self.timings[name]:.3f}s")
        return result


def discover_corpus(corpus_dir: str) -> List[str]:
    """Relative paths of the C files under ``corpus_dir``, sorted."""
    found = []
    for root, dirs, files in os.walk(corpus_dir):
        dirs[:] = sorted(d for d in dirs if not d.startswith("."))
        for name in files:
            if name.endswith(C_SUFFIXES):
                found.append(os.path.relpath(os.path.join(root, name), corpus_dir))
    return sorted(found)


def parse_corpus(corpus_dir: str) -> List[TranslationUnit]:
    paths = discover_corpus(corpus_dir)
    if not paths:
        raise EmptyCorpus(f"no .c or .i files under {corpus_dir}")
    units = []
    for rel in paths:
        text, encoding = read_source(os.path.join(corpus_dir, rel))
        unit = parse_unit(text, rel)
        if encoding != unit.encoding:
            unit = replace(unit, encoding=encoding)
        units.append(unit)
    return units


def _summarize(graph: CodePropertyGraph, config: AnalysisConfig, diagnostics: List[Diagnostic]):
    pointer_targets = resolve_function_pointers(graph)
    call_graph = build_call_graph(graph, pointer_targets)
    order = topological_order(call_graph)
    externals = load_summary_stack(config.summary_files)
    summaries = summarize_parameters(graph, order, externals, pointer_targets, call_graph, diagnostics)
    return pointer_targets, call_graph, summaries


def _trace_all(graph: CodePropertyGraph, summaries: Dict[str, FunctionSummary],
               pointer_targets: Dict[int, FrozenSet[str]], config: AnalysisConfig):
    sinks = find_sensitive_sinks(graph, summaries, config.sink_classes)
    sources = find_user_controlled_sources(graph, summaries)
    traces = [(sink, trace_to_sources(graph, summaries, sink, config, pointer_targets)) for sink in sinks]
    paths: List[DataFlowPath] = [p for _, result in traces for p in result.paths]
    return sinks, sources, traces, group_pairs(paths)


def _locate(graph: CodePropertyGraph, pairs: List[SourceSinkPair], config: AnalysisConfig,
            diagnostics: List[Diagnostic]):
    corridors = [enumerate_corridor(graph, path, config.corridor_limit, config.cfg_path_limit)
                 for pair in pairs for path in pair.paths]
    guards = locate_guards(graph, corridors, config.error_value_pattern, diagnostics)
    return corridors, guards


def analyze(corpus_dir: str, config: Optional[AnalysisConfig] = None) -> AnalysisResult:
    """Run every analysis phase over the C files of ``corpus_dir``.

    Raises:
        EmptyCorpus: no translation unit was found.
        SummaryParseError: a summary file is malformed.
    """
    config = config or AnalysisConfig()
    timer = _PhaseTimer()
    diagnostics: List[Diagnostic] = []

    def _import():
        units = parse_corpus(corpus_dir)
        return units, build_cpg(units)

    units, graph = timer.run("import", _import)
    diagnostics.extend(graph.diagnostics)
    pointer_targets, call_graph, summaries = timer.run("intraprocedural", _summarize, graph, config, diagnostics)
    augmented = timer.run("augment", augment_dataflow, graph, summaries, pointer_targets)
    sinks, sources, traces, pairs = timer.run("paths", _trace_all, augmented, summaries, pointer_targets, config)
    corridors, guards = timer.run("guards", _locate, augmented, pairs, config, diagnostics)

    truncation = []
    for sink, result in traces:
        diagnostics.extend(result.diagnostics)
        if result.truncated:
            truncation.append(f"trace {sink.callee}[{sink.sensitive_arg_index}] at {sink.span.location()}")
    for corridor in corridors:
        if corridor.truncated:
            truncation.append(f"corridor of {corridor.path.sink.callee} at {corridor.path.sink.span.location()}")

    report = compute_metrics(pairs, timer.timings, units, sources, sinks, truncation, diagnostics)
    return AnalysisResult(corpus_dir=corpus_dir, units=units, graph=augmented, summaries=summaries,
                          pointer_targets=pointer_targets, call_graph=call_graph, sinks=sinks,
                          sources=sources, traces=traces, pairs=pairs, corridors=corridors,
                          guards=guards, report=report, diagnostics=diagnostics)


def _guard_context(result: AnalysisResult, site: GuardSite, config: AnalysisConfig) -> Optional[InstrumentContext]:
    """The first (pair, path) whose corridor holds the guard."""
    by_path = {c.path.key: c for c in result.corridors}
    for pair in result.pairs:
        for path in pair.paths:
            corridor = by_path.get(path.key)
            if corridor is not None and site.condition_node in corridor.nodes():
                return InstrumentContext(graph=result.graph, pair=pair, path=path,
                                         corridor_nodes=frozenset(corridor.nodes()),
                                         magic_constants=config.magic_constants)
    return None


def _sink_context(result: AnalysisResult, sink: SinkSite, config: AnalysisConfig) -> Optional[InstrumentContext]:
    for pair in result.pairs:
        if pair.sink.key == sink.key and pair.paths:
            return InstrumentContext(graph=result.graph, pair=pair, path=pair.paths[0],
                                     magic_constants=config.magic_constants)
    return None


def insertion_targets(result: AnalysisResult, config: Optional[AnalysisConfig] = None
                      ) -> Tuple[List[InsertionTarget], Counter]:
    """Bugdoorable sites with their candidates, and skip reasons of the others."""
    config = config or AnalysisConfig()
    targets: List[InsertionTarget] = []
    skipped: Counter = Counter()
    sites: List[Tuple[Target, Optional[InstrumentContext]]] = [
        (g, _guard_context(result, g, config)) for g in result.guards]
    paired_sinks = {p.sink.key: p.sink for p in result.pairs}
    sites.extend((s, _sink_context(result, s, config)) for _, s in sorted(paired_sinks.items()))

    for site, context in sites:
        decision = is_bugdoorable(site, result.graph)
        if not decision:
            if isinstance(site, GuardSite):
                skipped[decision.reason] += 1
            continue
        if context is None:
            skipped["NoPath"] += 1
            continue
        candidates = applicable_instrumentations(site, result.graph, context)
        if not candidates:
            skipped["NoInstrumentation"] += 1
            continue
        targets.append(InsertionTarget(site=site, context=context, candidates=candidates))
    return targets, skipped


def _read_corpus_files(result: AnalysisResult) -> Dict[str, bytes]:
    files = {}
    for unit in result.units:
        with open(os.path.join(result.corpus_dir, unit.path), 'rb') as f:
            files[unit.path] = f.read().decode(unit.encoding).encode('utf-8')
    return files


def _mirror(corpus_dir: str, destination: str, rewritten: Dict[str, bytes], encodings: Dict[str, str]):
    for root, dirs, names in os.walk(corpus_dir):
        dirs[:] = sorted(d for d in dirs if not d.startswith("."))
        for name in sorted(names):
            rel = os.path.relpath(os.path.join(root, name), corpus_dir)
            target = os.path.join(destination, rel)
            os.makedirs(os.path.dirname(target), exist_ok=True)
            if rel in rewritten:
                with open(target, 'wb') as f:
                    f.write(rewritten[rel].decode('utf-8').encode(encodings.get(rel, 'utf-8')))
            else:
                shutil.copyfile(os.path.join(root, name), target)


def insert(result: AnalysisResult, seed: int, count: int, out_dir: str,
           config: Optional[AnalysisConfig] = None) -> List[Tuple[str, GroundTruthRecord]]:
    """Write ``count`` instrumented copies of the corpus to ``out_dir/<seed+i>/``.

    Raises:
        NoBugdoorableSite: analysis found nothing to instrument.
        SpanMismatch: a corpus file changed since it was analysed.
        ReparseFailure: no variant of the drawn site re-parses.
    """
    config = config or AnalysisConfig()
    if count <= 0:
        return []
    targets, skipped = insertion_targets(result, config)
    if not targets:
        raise NoBugdoorableSite(skipped)

    files = _read_corpus_files(result)
    encodings = {u.path: u.encoding for u in result.units}
    written: List[Tuple[str, GroundTruthRecord]] = []
    for i in range(count):
        variant_seed = seed + i
        target = random.Random(variant_seed).choice(targets)
        assert is_bugdoorable(target.site, result.graph), "insertion target lost bugdoorability"
        diagnostics: List[Diagnostic] = []
        record, rewritten = choose_and_apply(target.site, target.candidates, variant_seed, files,
                                             target.context, diagnostics)
        result.diagnostics.extend(diagnostics)

        destination = os.path.join(out_dir, str(variant_seed))
        staging = destination + ".tmp"
        if os.path.exists(staging):
            shutil.rmtree(staging)
        changed = {record.plan.file: rewritten[record.plan.file]}
        _mirror(result.corpus_dir, staging, changed, encodings)
        emit_json(None, [record], staging, result.graph)
        save_plan(record.plan, staging)
        if os.path.exists(destination):
            shutil.rmtree(destination)
        os.replace(staging, destination)

        logger.info(f"variant {variant_seed}: {record.plan.instrumentation.value} at {record.plan.target.span.location()}")
        written.append((destination, record))
    return written


def write_report(result: AnalysisResult, out_dir: str, include_timings: bool = False) -> List[str]:
    """``report.json`` of an analysis-only run."""
    return emit_json(result.report, None, out_dir, result.graph, include_timings)
