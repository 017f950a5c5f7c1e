#!/usr/bin/env python3
"""
Taint tests: the running example's pairs and paths, the fixture suite against
the flow-insensitive oracle, budgets and memoization.

Usage:
    python evaluation/test_taint.py
    python evaluation/test_taint.py --test oracle_equivalence
"""

import sys
import time
import shutil
import tempfile
import argparse
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.pipeline import analyze, parse_corpus
from core.taint.tracer import path_is_connected
from core.utils.common import DiagnosticKind, SourceKind, VulnClass
from core.utils.config import AnalysisConfig

from evaluation.oracle import oracle_pairs, tracer_pairs

CORPORA = project_root / "evaluation" / "corpora"
RUNNING = CORPORA / "running"
FIXTURES = CORPORA / "fixtures"

# fixture -> unique source/sink pairs
TEST_CASES = {
    "case_increment.c": 1,
    "case_arithmetic.c": 1,
    "case_return.c": 1,
    "case_argument.c": 1,
    "case_parameter.c": 1,
    "struct_member.c": 1,
    "function_pointer.c": 1,
    "recursion_cycle.c": 1,
    "wrapper_chain.c": 1,
    "two_by_two.c": 4,
    "format_string.c": 1,
    "adjacent_guard.c": 1,
    "sanitize.c": 1,
    "non_aborting.c": 1,
    "opaque_guard.c": 1,
    "move_branch.c": 1,
    "overflow_check.c": 1,
    "gating.c": 1,
    "derived_check.c": 1,
}


def analyze_fixture(name: str, config: AnalysisConfig = None):
    """Analyse one fixture file on its own, in a scratch directory."""
    tmp = tempfile.mkdtemp(prefix="bugforge_fixture_")
    shutil.copy(FIXTURES / name, tmp)
    try:
        return analyze(tmp, config)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _lines(result, path):
    return [result.graph.nodes[h].line for h in path.hops]


def test_running_example_pairs_and_paths():
    start = time.perf_counter()
    result = analyze(str(RUNNING))
    assert time.perf_counter() - start < 5
    assert len(result.sinks) == 1
    sink = result.sinks[0]
    assert (sink.callee, sink.sensitive_arg_index, sink.vuln_class) == ("memcpy", 2, VulnClass.BUFFER_LENGTH)
    assert sink.span.display_line == 30
    assert [(s.callee, s.source_kind) for s in result.sources] == [("fread", SourceKind.FILE)]
    assert len(result.pairs) == 1
    assert result.report.unique_pairs == 1
    assert result.report.dataflow_paths == 4
    pair = result.pairs[0]
    assert pair.source.callee == "fread" and pair.source.span.display_line == 3
    assert pair.confidence == "definite"


def test_running_example_hops():
    result = analyze(str(RUNNING))
    hop_lines = sorted(_lines(result, p) for p in result.pairs[0].paths)
    assert [3, 4, 20, 30] in hop_lines
    assert [3, 4, 21, 30] in hop_lines
    wrapper_paths = [lines for lines in hop_lines if 8 in lines]
    assert len(wrapper_paths) == 2
    assert {16, 17} == {line for lines in wrapper_paths for line in lines if line in (16, 17)}
    for path in result.pairs[0].paths:
        assert path_is_connected(result.graph, path)
        assert path.hops[0] == path.source.call_node
        assert path.hops[-1] == path.sink.call_node
        assert len(path.hop_vars) == len(path.hops) - 1


def test_direct_read_corridor():
    result = analyze(str(RUNNING))
    corridor = next(c for c in result.corridors if _lines(result, c.path) == [3, 4, 20, 30])
    assert corridor.shortest_lines(result.graph) == [3, 4, 20, 24, 29]


def test_fixture_pair_counts():
    for name, expected in TEST_CASES.items():
        result = analyze_fixture(name)
        assert result.report.unique_pairs == expected, f"{name}: {result.report.unique_pairs} != {expected}"


def test_oracle_equivalence():
    start = time.perf_counter()
    checked = 0
    for name in sorted(TEST_CASES):
        with tempfile.TemporaryDirectory() as tmp:
            shutil.copy(FIXTURES / name, tmp)
            expected = oracle_pairs(parse_corpus(tmp))
            actual = tracer_pairs(analyze(tmp))
        assert actual == expected, f"{name}: tracer-only {actual - expected}, oracle-only {expected - actual}"
        checked += 1
    expected = oracle_pairs(parse_corpus(str(RUNNING)))
    assert tracer_pairs(analyze(str(RUNNING))) == expected
    assert checked >= 10
    assert time.perf_counter() - start < 60


def test_fixtures_stay_small():
    for name in TEST_CASES:
        units = parse_corpus_file(name)
        assert units[0].lines_of_code <= 200, name


def parse_corpus_file(name):
    with tempfile.TemporaryDirectory() as tmp:
        shutil.copy(FIXTURES / name, tmp)
        return parse_corpus(tmp)


def test_all_to_all_pairs():
    result = analyze_fixture("two_by_two.c")
    assert len(result.sinks) == 2 and len(result.sources) == 2
    assert result.report.unique_pairs == 4
    assert {(p.source.callee, p.sink.callee) for p in result.pairs} == {
        ("fread", "memcpy"), ("fread", "malloc"), ("fgetc", "memcpy"), ("fgetc", "malloc")}


def test_memoization_is_transparent():
    memoized = analyze(str(RUNNING), AnalysisConfig(memoize=True))
    plain = analyze(str(RUNNING), AnalysisConfig(memoize=False))
    assert [p.key for p in memoized.pairs] == [p.key for p in plain.pairs]
    assert [[q.key for q in p.paths] for p in memoized.pairs] == [[q.key for q in p.paths] for p in plain.pairs]


def test_path_budget_truncates():
    result = analyze(str(RUNNING), AnalysisConfig(max_paths=1))
    assert result.report.dataflow_paths == 1
    assert result.report.truncation_flags
    shallow = analyze(str(RUNNING), AnalysisConfig(max_depth=2))
    assert shallow.report.dataflow_paths == 0
    assert shallow.report.truncation_flags


DIAMONDS = 22


def diamond_chain(count: int, sourced: bool) -> str:
    """``count`` if/else redefinitions of len in a row, then a memcpy of len."""
    lines = ["#include <stdio.h>", "#include <string.h>", "",
             "void spread(FILE *f, char *d, const char *s, int c, int len) {"]
    if sourced:
        lines.append("    len = fgetc(f);")
    for i in range(count):
        lines.append(f"    if (c > {i}) len = len + 1; else len = len + 2;")
    lines += ["    memcpy(d, s, len);", "}", ""]
    return "\n".join(lines)


def analyze_text(text: str, config: AnalysisConfig = None):
    with tempfile.TemporaryDirectory() as tmp:
        with open(Path(tmp) / "spread.c", "w", encoding="utf-8") as f:
            f.write(text)
        return analyze(tmp, config)


def test_sourceless_diamonds_stay_linear():
    start = time.perf_counter()
    result = analyze_text(diamond_chain(DIAMONDS, sourced=False))
    assert time.perf_counter() - start < 10
    assert len(result.sinks) == 1
    assert result.report.dataflow_paths == 0


def test_sourced_diamonds_hit_the_path_budget():
    config = AnalysisConfig(max_paths=32)
    start = time.perf_counter()
    result = analyze_text(diamond_chain(DIAMONDS, sourced=True), config)
    assert time.perf_counter() - start < 20
    [(_, trace)] = result.traces
    assert trace.truncated
    assert 0 < len(trace.paths) <= config.max_paths
    assert result.report.truncation_flags
    assert any(d.kind is DiagnosticKind.BUDGET_EXHAUSTED for d in result.diagnostics)


def test_sink_class_filter():
    result = analyze_fixture("two_by_two.c", AnalysisConfig(sink_classes=(VulnClass.ALLOC_SIZE,)))
    assert [s.callee for s in result.sinks] == ["malloc"]
    assert result.report.unique_pairs == 2


def test_format_string_sink():
    result = analyze_fixture("format_string.c")
    assert [(s.callee, s.sensitive_arg_index, s.vuln_class) for s in result.sinks] == [
        ("printf", 1, VulnClass.OUTBOUND_LEAK)]
    assert result.pairs[0].source.callee == "fgets"


TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    parser = argparse.ArgumentParser(description="Taint tests")
    parser.add_argument("--test", choices=sorted(TESTS), help="Run a single test")
    args = parser.parse_args()
    failed = 0
    for name in ([args.test] if args.test else sorted(TESTS)):
        try:
            TESTS[name]()
            print(f"PASS {name}")
        except AssertionError as e:
            failed += 1
            print(f"FAIL {name}: {e}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
