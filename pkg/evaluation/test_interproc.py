#!/usr/bin/env python3
"""
Interprocedural tests: summary files, parameter summaries, function pointers
and the analysis order over random call graphs.

Usage:
    python evaluation/test_interproc.py
    python evaluation/test_interproc.py --test random_call_graph_order --seed 7
"""

import os
import sys
import random
import tempfile
import argparse
from collections import Counter
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.cpg.builder import build_cpg
from core.frontend.parser import parse_unit, read_source
from core.interproc.callgraph import build_call_graph, resolve_function_pointers, topological_order
from core.interproc import summarize as summarize_module
from core.interproc.summarize import summarize_parameters
from core.interproc.summary import RETURN_VALUE, VARIADIC, ParamStatus
from core.interproc.summary_file import load_summary_stack, parse_summaries, parse_summary_line
from core.utils.common import SourceKind, VulnClass
from core.utils.errors import SummaryParseError

CORPORA = project_root / "evaluation" / "corpora"
RUNNING_EXAMPLE = CORPORA / "running" / "running_example.c"
FUNCTION_POINTER = CORPORA / "fixtures" / "function_pointer.c"

RANDOM_GRAPHS = 100
MAX_FUNCTIONS = 30

TEST_CASES = {
    "summary_lines": {
        "fread      ret=N p0=Y,source=File p1=N p2=N p3=M": "fread",
        "memcpy     ret=p0 p0=Y,transfer=p1 p1=N p2=N,sink=BufferLength": "memcpy",
        "printf     ret=N p0=N,sink=FormatString ...=N,sink=OutboundLeak": "printf",
        "getenv     ret=source:Env p0=N": "getenv",
    },
    "malformed_lines": [
        "broken p0=Q",
        "broken p1=Y",
        "broken p0=Y,sink=Overflow",
        "broken p0=Y,source=Moon",
        "broken p0=Y p0=N",
        "broken p0",
    ],
}


def _graph(*paths):
    units = []
    for path in paths:
        text, _ = read_source(str(path))
        units.append(parse_unit(text, os.path.basename(str(path))))
    return build_cpg(units)


def _summary_line(name):
    return next(line for line, n in TEST_CASES["summary_lines"].items() if n == name)


def _summaries(graph):
    targets = resolve_function_pointers(graph)
    cg = build_call_graph(graph, targets)
    return summarize_parameters(graph, topological_order(cg), load_summary_stack([]), targets, cg)


def test_summary_line_table():
    for line, name in TEST_CASES["summary_lines"].items():
        assert parse_summary_line(line).name == name


def test_summary_line_fields():
    fread = parse_summary_line(_summary_line("fread"))
    assert fread.param_modified == [ParamStatus.YES, ParamStatus.NO, ParamStatus.NO, ParamStatus.MAYBE]
    assert fread.source_kind is SourceKind.FILE and fread.controls_arg(0)
    memcpy = parse_summary_line(_summary_line("memcpy"))
    assert memcpy.transfers_into(0) == [1]
    assert memcpy.returns_param_data == {0}
    assert memcpy.sink_spec.param_index == 2 and memcpy.sink_spec.vuln_class is VulnClass.BUFFER_LENGTH
    printf = parse_summary_line(_summary_line("printf"))
    assert [s.param_index for s in printf.sink_specs] == [0, VARIADIC]
    getenv = parse_summary_line(_summary_line("getenv"))
    assert getenv.source_arg == RETURN_VALUE and getenv.source_kind is SourceKind.ENV


def test_malformed_summary_reports_line():
    for bad in TEST_CASES["malformed_lines"]:
        text = "# header\nfoo ret=N p0=N\n" + bad + "\n"
        try:
            parse_summaries(text, "custom.summ")
        except SummaryParseError as e:
            assert e.line == 3, bad
            assert e.path == "custom.summ"
        else:
            raise AssertionError(f"accepted malformed line: {bad}")


def test_later_summary_file_overrides():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "custom.summ")
        with open(path, "w", encoding="utf-8") as f:
            f.write("memcpy ret=N p0=Y p1=N p2=N\nread_config ret=source:File p0=N\n")
        merged = load_summary_stack([path])
    assert not merged["memcpy"].sink_specs
    assert merged["read_config"].is_source
    assert merged["fread"].is_source


def test_running_example_summaries():
    summaries = _summaries(_graph(RUNNING_EXAMPLE))
    wrapper = summaries["wrapper"]
    assert wrapper.param_modified == [ParamStatus.NO, ParamStatus.YES]
    read_from_file = summaries["read_from_file"]
    # the FILE* handed to fread is only a weak Maybe and stays local
    assert read_from_file.param_modified == [ParamStatus.MAYBE]
    assert 0 in read_from_file.weak_maybe
    assert read_from_file.propagated_status(0) is ParamStatus.NO


def test_function_pointer_candidates():
    graph = _graph(FUNCTION_POINTER)
    targets = resolve_function_pointers(graph)
    assert len(targets) == 1
    assert set(next(iter(targets.values()))) == {"read_header", "read_default"}
    cg = build_call_graph(graph, targets)
    assert ("run", "read_header") in cg.edges() and ("run", "read_default") in cg.edges()


def _random_corpus(rng: random.Random) -> str:
    count = rng.randint(1, MAX_FUNCTIONS)
    names = [f"f{i}" for i in range(count)]
    lines = [f"int {name}(int x);" for name in names]
    for name in names:
        calls = [rng.choice(names) for _ in range(rng.randint(0, 4))]
        if rng.random() < 0.2:
            calls.append("abs")
        body = "".join(f"    r += {callee}(x - 1);\n" for callee in calls)
        lines.append(f"int {name}(int x) {{\n    int r = 0;\n{body}    return r;\n}}")
    return "\n".join(lines) + "\n"


def check_call_graph_order(source: str):
    graph = build_cpg([parse_unit(source, "random.c")])
    cg = build_call_graph(graph)
    order = topological_order(cg)
    assert sorted(order) == sorted(cg.g.nodes)
    position = {name: i for i, name in enumerate(order)}
    broken = set(cg.broken_edges)
    for caller, callee in cg.internal_edges():
        if caller == callee or (caller, callee) in broken:
            continue
        assert position[callee] < position[caller], f"{callee} after {caller}"
    for (victim, callee), members in cg.break_log:
        assert victim in members and callee in members
        fewest = min(cg.call_counts.get(m, 0) for m in members)
        assert cg.call_counts.get(victim, 0) == fewest, f"{victim} does not make the fewest calls in {members}"
    for name in cg.external:
        assert all(position[name] < position[f] for f in cg.functions), "externals come first"


def test_random_call_graph_order(seed: int = 0):
    rng = random.Random(seed)
    for _ in range(RANDOM_GRAPHS):
        check_call_graph_order(_random_corpus(rng))


def test_two_cycle_is_broken_once():
    source = (CORPORA / "fixtures" / "recursion_cycle.c").read_text(encoding="utf-8")
    graph = build_cpg([parse_unit(source, "recursion_cycle.c")])
    cg = build_call_graph(graph)
    topological_order(cg)
    assert len(cg.broken_edges) == 1
    assert set(cg.broken_edges[0]) == {"count_odd", "count_even"}


def test_cycle_gets_one_refinement_pass():
    calls = Counter()
    original = summarize_module.summarize_function

    def counting(graph, name, *args, **kwargs):
        calls[name] += 1
        return original(graph, name, *args, **kwargs)

    summarize_module.summarize_function = counting
    try:
        _summaries(_graph(CORPORA / "fixtures" / "recursion_cycle.c"))
    finally:
        summarize_module.summarize_function = original
    assert calls == {"count_odd": 2, "count_even": 2, "fill": 1}


TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    parser = argparse.ArgumentParser(description="Interprocedural tests")
    parser.add_argument("--test", choices=sorted(TESTS), help="Run a single test")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the random call graphs")
    args = parser.parse_args()
    failed = 0
    for name in ([args.test] if args.test else sorted(TESTS)):
        try:
            if name == "random_call_graph_order":
                TESTS[name](args.seed)
            else:
                TESTS[name]()
            print(f"PASS {name}")
        except AssertionError as e:
            failed += 1
            print(f"FAIL {name}: {e}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
