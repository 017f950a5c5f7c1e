#!/usr/bin/env python3
"""
Code property graph tests on the running example and small C cases.

Usage:
    python evaluation/test_cpg.py
    python evaluation/test_cpg.py --test condition_branches
"""

import sys
import argparse
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.cpg.builder import build_cpg
from core.cpg.graph import EdgeKind, NodeKind, dump_cpg
from core.frontend.parser import parse_unit, read_source
from core.utils.common import DiagnosticKind

RUNNING_EXAMPLE = project_root / "evaluation" / "corpora" / "running" / "running_example.c"

TEST_CASES = {
    "loop": '''int sum(int *v, int n) {
    int total = 0;
    int i;
    for (i = 0; i < n; i++) {
        if (v[i] < 0)
            break;
        total += v[i];
    }
    return total;
}
''',
    "duplicate_a": "int helper(int x) { return x + 1; }\n",
    "duplicate_b": "int helper(int x) { return x + 2; }\n",
}


def _running_graph():
    text, _ = read_source(str(RUNNING_EXAMPLE))
    return build_cpg([parse_unit(text, "running_example.c")])


def _node_at(graph, function, line, kind=None):
    return next(n for n in graph.function_nodes(function)
                if n.line == line and (kind is None or n.kind is kind))


def test_functions_have_entry_and_exit():
    graph = _running_graph()
    assert sorted(graph.functions) == ["copy_buffer", "read_from_file", "wrapper"]
    for info in graph.functions.values():
        assert graph.nodes[info.entry].kind is NodeKind.ENTRY
        assert graph.nodes[info.exit].kind is NodeKind.EXIT
        assert len(info.params) == len(info.ast.parameters)


def test_condition_branches():
    graph = _running_graph()
    guard = _node_at(graph, "copy_buffer", 24, NodeKind.CONDITION)
    labels = sorted(d.get("label") for _, d in graph.out_edges(guard.id, EdgeKind.CFG_NEXT))
    assert labels == ["false", "true"]
    assert guard.expr.text == "len > 256"
    assert "len" in guard.uses


def test_exit_call_ends_the_path():
    graph = _running_graph()
    exit_call = _node_at(graph, "copy_buffer", 26, NodeKind.CALL_SITE)
    assert graph.cfg_successors(exit_call.id) == [graph.functions["copy_buffer"].exit]


def test_call_edges_to_corpus_functions():
    graph = _running_graph()
    entry = graph.functions["wrapper"].entry
    callers = sorted(graph.nodes[u].line for u, _ in graph.in_edges(entry, EdgeKind.CALLS_TO))
    assert callers == [16, 17]
    the_len = graph.functions["wrapper"].params[1]
    indexes = {d["index"] for _, d in graph.in_edges(the_len, EdgeKind.ARG_TO_PARAM)}
    assert indexes == {1}


def test_reaching_definitions_of_len():
    graph = _running_graph()
    memcpy = _node_at(graph, "copy_buffer", 30, NodeKind.CALL_SITE)
    lines = {graph.nodes[d].line for d in graph.reaching_defs(memcpy.id, "len")}
    assert {16, 17, 20, 21} <= lines
    # the guard does not define len
    assert 24 not in lines


def test_loop_back_edge():
    graph = build_cpg([parse_unit(TEST_CASES["loop"], "loop.c")])
    cond = next(n for n in graph.function_nodes("sum") if n.kind is NodeKind.CONDITION and n.expr.text == "i < n")
    preds = graph.cfg_predecessors(cond.id)
    # entry of the loop and the update coming back
    assert len(preds) >= 2


def test_duplicate_definition_keeps_first():
    units = [parse_unit(TEST_CASES["duplicate_a"], "a.c"), parse_unit(TEST_CASES["duplicate_b"], "b.c")]
    graph = build_cpg(units)
    assert graph.functions["helper"].unit.path == "a.c"
    kinds = [d.kind for d in graph.diagnostics]
    assert DiagnosticKind.DUPLICATE_DEFINITION in kinds


def test_dump_is_deterministic():
    first = dump_cpg(_running_graph())
    second = dump_cpg(_running_graph())
    assert first == second
    lines = first.splitlines()
    assert lines[0].startswith("node 0 Entry running_example.c:")
    assert any(line.startswith("edge CfgNext ") and line.endswith(" true") for line in lines)
    assert any(line.startswith("edge DfgReaches ") and line.endswith(" len") for line in lines)


TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    parser = argparse.ArgumentParser(description="Code property graph tests")
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
