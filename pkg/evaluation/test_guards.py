#!/usr/bin/env python3
"""
Guard tests: corridors, guard classification, polarity and bugdoorability.

Usage:
    python evaluation/test_guards.py
    python evaluation/test_guards.py --test classification_table
"""

import sys
import shutil
import tempfile
import argparse
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.cpg.graph import EdgeKind
from core.guards.corridor import enumerate_corridor
from core.guards.mechanisms import AbortEvidence, GuardClass, Polarity
from core.instrument.bugdoor import SkipReason, applicable_instrumentations, is_bugdoorable
from core.instrument.plans import InstrumentationClass
from core.pipeline import analyze
from core.utils.common import DiagnosticKind
from core.utils.config import AnalysisConfig

CORPORA = project_root / "evaluation" / "corpora"
RUNNING = CORPORA / "running"
FIXTURES = CORPORA / "fixtures"

# fixture -> (guard line, classification, polarity, bugdoorability reason)
TEST_CASES = {
    "adjacent_guard.c": (8, GuardClass.ABORTING, Polarity.MUST_BE_FALSE, "Understood"),
    "case_return.c": (12, GuardClass.ABORTING, Polarity.MUST_BE_FALSE, "Understood"),
    "wrapper_chain.c": (20, GuardClass.ABORTING, Polarity.MUST_BE_FALSE, "Understood"),
    "move_branch.c": (8, GuardClass.ABORTING, Polarity.MUST_BE_FALSE, "Understood"),
    "overflow_check.c": (7, GuardClass.ABORTING, Polarity.MUST_BE_FALSE, "Understood"),
    "non_aborting.c": (7, GuardClass.NON_ABORTING, Polarity.UNKNOWN, SkipReason.NOT_SECURITY_CRITICAL.value),
    "opaque_guard.c": (9, GuardClass.ABORTING, Polarity.MUST_BE_FALSE, SkipReason.NOT_UNDERSTOOD.value),
    "sanitize.c": (12, GuardClass.SANITIZATION, Polarity.UNKNOWN, SkipReason.SANITIZATION.value),
    "gating.c": (7, GuardClass.ABORTING, Polarity.MUST_BE_TRUE, "Understood"),
    "derived_check.c": (8, GuardClass.ABORTING, Polarity.MUST_BE_FALSE, "Understood"),
}


def analyze_fixture(name: str, config: AnalysisConfig = None):
    tmp = tempfile.mkdtemp(prefix="bugforge_guard_")
    shutil.copy(FIXTURES / name, tmp)
    try:
        return analyze(tmp, config)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def test_running_example_guard():
    result = analyze(str(RUNNING))
    assert len(result.guards) == 1
    guard = result.guards[0]
    assert guard.line == 24 and guard.function == "copy_buffer"
    assert guard.guarded_var == "len"
    assert guard.classification is GuardClass.ABORTING
    assert guard.polarity is Polarity.MUST_BE_FALSE
    assert AbortEvidence.EXIT_CALL in guard.abort_evidence
    assert is_bugdoorable(guard, result.graph)
    for corridor in result.corridors:
        assert guard.condition_node in corridor.nodes()


def test_classification_table():
    for name, (line, classification, polarity, reason) in TEST_CASES.items():
        result = analyze_fixture(name)
        guards = [g for g in result.guards if g.line == line]
        assert len(guards) == 1, f"{name}: guards at {[g.line for g in result.guards]}"
        guard = guards[0]
        assert guard.classification is classification, f"{name}: {guard.classification}"
        assert guard.polarity is polarity, f"{name}: {guard.polarity}"
        assert is_bugdoorable(guard, result.graph).reason == reason, name


def test_return_and_exit_evidence():
    exiting = analyze_fixture("adjacent_guard.c").guards[0]
    assert exiting.abort_evidence == frozenset({AbortEvidence.EXIT_CALL})
    returning = analyze_fixture("overflow_check.c").guards[0]
    assert returning.abort_evidence == frozenset({AbortEvidence.RETURN})
    gating = analyze_fixture("gating.c").guards[0]
    assert gating.abort_evidence == frozenset({AbortEvidence.RETURN})


def test_unrelated_condition_is_skipped():
    result = analyze_fixture("move_branch.c")
    assert [g.line for g in result.guards] == [8]
    assert any(d.kind is DiagnosticKind.SKIPPED_GUARD for d in result.diagnostics)


def test_guard_dict_shape():
    data = analyze(str(RUNNING)).guards[0].to_dict()
    assert data["classification"] == "AbortingCheck"
    assert data["polarity"] == "MustBeFalseToPass"
    assert data["abort_evidence"] == sorted(data["abort_evidence"])
    assert data["location"].startswith("running_example.c:")


def test_corridor_limit_truncates():
    result = analyze(str(RUNNING))
    path = result.pairs[0].paths[0]
    full = enumerate_corridor(result.graph, path)
    assert not full.truncated
    cut = enumerate_corridor(result.graph, path, limit=1)
    assert all(len(s.sequences) <= 1 for s in cut.segments)
    if full.total_enumerated > len(full.segments):
        assert cut.truncated


def test_cfg_path_limit_reaches_corridors():
    result = analyze(str(RUNNING), AnalysisConfig(cfg_path_limit=1))
    assert result.corridors
    assert all(len(s.sequences) <= 1 for c in result.corridors for s in c.segments)
    wide = analyze(str(RUNNING))
    if any(len(s.sequences) > 1 for c in wide.corridors for s in c.segments):
        assert any(c.truncated for c in result.corridors)



def test_guard_wrapping_the_sink():
    result = analyze_fixture("gating.c")
    [guard] = result.guards
    assert guard.polarity is Polarity.MUST_BE_TRUE
    assert guard.target_node == result.sinks[0].call_node
    classes = [c for c, _ in applicable_instrumentations(guard, result.graph)]
    assert classes and InstrumentationClass.SURROUND_ALWAYS_TRUE in classes
    assert InstrumentationClass.SURROUND_ALWAYS_FALSE not in classes


def test_derived_flag_is_one_guard():
    result = analyze_fixture("derived_check.c")
    assert len(result.guards) == 1
    guard = result.guards[0]
    assert guard.guarded_var == "n" and guard.line == 8
    assert guard.classification is GuardClass.ABORTING


FIRST_BYTE = """#include <stdio.h>

void stamp(FILE *f) {
    char buf[64];
    fgets(buf, sizeof(buf), f);
    buf[0] = 'A';
    printf(buf);
}
"""


def test_non_null_store_is_not_sanitization():
    with tempfile.TemporaryDirectory() as tmp:
        with open(Path(tmp) / "stamp.c", "w", encoding="utf-8") as f:
            f.write(FIRST_BYTE)
        result = analyze(tmp)
    assert result.report.unique_pairs == 1
    assert not any(g.classification is GuardClass.SANITIZATION for g in result.guards)


def _reaches(graph, start, targets, blocked):
    seen, stack = {start}, [start]
    while stack:
        node = stack.pop()
        if node in targets:
            return True
        for succ in graph.cfg_successors(node):
            if succ != blocked and succ not in seen:
                seen.add(succ)
                stack.append(succ)
    return False


def test_failing_branch_never_reaches_the_sink():
    checked = 0
    for name in sorted(TEST_CASES):
        result = analyze_fixture(name)
        sinks = {s.call_node for s in result.sinks}
        for guard in result.guards:
            if guard.classification is not GuardClass.ABORTING:
                continue
            failing = "false" if guard.polarity is Polarity.MUST_BE_TRUE else "true"
            [start] = [v for v, d in result.graph.out_edges(guard.condition_node, EdgeKind.CFG_NEXT)
                       if d.get("label") == failing]
            assert not _reaches(result.graph, start, sinks | {guard.target_node}, guard.condition_node), name
            checked += 1
    assert checked >= 6


def test_opaque_condition_offers_nothing():
    result = analyze_fixture("opaque_guard.c")
    [guard] = [g for g in result.guards if g.line == 9]
    assert not is_bugdoorable(guard, result.graph)
    assert applicable_instrumentations(guard, result.graph) == []

TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    parser = argparse.ArgumentParser(description="Guard tests")
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
