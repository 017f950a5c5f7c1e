#!/usr/bin/env python3
"""
Instrumentation tests: variant tables, byte-level rewrites, seeded choice and
a mutation fuzz that injects opaque constructs into the fixture corpus.

Usage:
    python evaluation/test_instrument.py
    python evaluation/test_instrument.py --test opaque_injection_fuzz --trials 200
"""

import os
import sys
import random
import shutil
import tempfile
import argparse
from pathlib import Path

import yaml

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.frontend.ast import StmtKind
from core.frontend.parser import parse_unit
from core.guards.mechanisms import GuardSite
from core.instrument.apply import apply_rewrites, choose_and_apply
from core.instrument.bugdoor import is_bugdoorable
from core.instrument.plans import InstrumentationClass, save_plan
from core.instrument.rewrites import build_plan, guard_statement, guard_variants, in_scope_identifiers
from core.pipeline import analyze, insert, insertion_targets
from core.taint.sites import SinkSite
from core.utils.errors import SpanMismatch

CORPORA = project_root / "evaluation" / "corpora"
RUNNING = CORPORA / "running"
FIXTURES = CORPORA / "fixtures"

FUZZ_TRIALS = 1000

# fixtures with one bugdoorable guard -> display line of that guard
GUARDED_FIXTURES = {
    "adjacent_guard.c": 8,
    "case_return.c": 12,
    "wrapper_chain.c": 20,
    "move_branch.c": 8,
    "overflow_check.c": 7,
    "gating.c": 7,
    "derived_check.c": 8,
    "case_increment.c": None,
    "case_argument.c": None,
}

OPAQUE_STATEMENTS = ['__asm__("nop");', "goto bail;", "va_end(ap);"]
OPAQUE_CONDITIONS = ["setjmp(jb)", "va_arg(ap, n)"]

TEST_CASES = {
    # fixture -> (class, text expected in the rewritten file)
    "adjacent_guard.c": (InstrumentationClass.SWAP_CHECK_AND_SINK,
                         "memcpy(dst, src, n);\n    if (n > 256) exit(1);"),
    "move_branch.c": (InstrumentationClass.MOVE_TO_UNRELATED_PATH, "{ if (n > 128) { return; }"),
    "overflow_check.c": (InstrumentationClass.INTEGER_OVERFLOW_ANTI_PATTERN, "if ((extra + used > 256))"),
}


def _files(result):
    return {u.path: u.source_bytes for u in result.units}


def _target(result, cls=None):
    targets, _ = insertion_targets(result)
    for target in targets:
        if cls is None or any(c is cls for c, _ in target.candidates):
            return target
    raise AssertionError(f"no target offers {cls}")


def _apply(result, target, cls, variant=0):
    plan = build_plan(target.site, cls, variant, target.context)
    return plan, apply_rewrites(_files(result)[plan.file], plan.rewrites)


def _new_regions(original: bytes, rewritten: bytes, path: str) -> int:
    """Skipped regions the rewrite added; #include lines are skipped in both."""
    before = parse_unit(original.decode("utf-8"), path).skipped_regions
    after = parse_unit(rewritten.decode("utf-8"), path).skipped_regions
    return len(after) - len(before)


def test_running_example_classes():
    result = analyze(str(RUNNING))
    targets, skipped = insertion_targets(result)
    assert len(targets) == 1 and not skipped
    target = targets[0]
    assert isinstance(target.site, GuardSite) and target.site.line == 24
    classes = [c for c, _ in target.candidates]
    assert classes[:2] == [InstrumentationClass.REMOVE_MECHANISM, InstrumentationClass.SURROUND_ALWAYS_FALSE]
    assert InstrumentationClass.ARITHMETIC_INFLUENCE in classes
    assert InstrumentationClass.SURROUND_ALWAYS_TRUE not in classes
    assert InstrumentationClass.SWAP_CHECK_AND_SINK not in classes


def test_function_name_conjunction():
    result = analyze(str(RUNNING))
    target = _target(result)
    variants = guard_variants(target.site, target.context)[InstrumentationClass.ARITHMETIC_INFLUENCE]
    descriptions = [d for d, _ in variants]
    variant = descriptions.index("conjoin wrapper == 0xDEADC0DE")
    _, rewritten = _apply(result, target, InstrumentationClass.ARITHMETIC_INFLUENCE, variant)
    assert b"if(wrapper == 0xDEADC0DE && len > 256)" in rewritten



def test_identifiers_are_integers_first():
    result = analyze(str(RUNNING))
    target = _target(result)
    names = in_scope_identifiers(result.graph, target.site)
    assert names == ["len", "use_wrapper", "which_file", "read_from_file", "wrapper"]
    descriptions = [d for variants in guard_variants(target.site, target.context).values() for d, _ in variants]
    assert not any("copy_buffer" in d for d in descriptions)


def test_gating_guard_keeps_the_body():
    with tempfile.TemporaryDirectory() as tmp:
        shutil.copy(FIXTURES / "gating.c", tmp)
        result = analyze(tmp)
    target = _target(result, InstrumentationClass.REMOVE_MECHANISM)
    plan, rewritten = _apply(result, target, InstrumentationClass.REMOVE_MECHANISM)
    assert plan.description == "drop the condition, keep the body"
    assert b"n < 256" not in rewritten
    assert b"memcpy(dst, src, n);" in rewritten
    assert len(rewritten) == len(_files(result)[plan.file])

def test_loosening_variants():
    result = analyze(str(RUNNING))
    target = _target(result)
    variants = guard_variants(target.site, target.context)[InstrumentationClass.ARITHMETIC_INFLUENCE]
    replacements = [rewrites[0].replacement for _, rewrites in variants]
    assert "(len > 512)" in replacements
    assert "(len/2 > 256)" in replacements
    assert "((char)len > 256)" in replacements


def test_remove_keeps_byte_offsets():
    result = analyze(str(RUNNING))
    target = _target(result)
    plan, rewritten = _apply(result, target, InstrumentationClass.REMOVE_MECHANISM)
    original = _files(result)[plan.file]
    assert len(rewritten) == len(original)
    assert rewritten.count(b"\n") == original.count(b"\n")
    assert b"len > 256" not in rewritten
    # everything after the guard sits at the same offset
    memcpy_at = original.index(b"memcpy(")
    assert rewritten.index(b"memcpy(") == memcpy_at


def test_surround_always_false():
    result = analyze(str(RUNNING))
    target = _target(result)
    plan, rewritten = _apply(result, target, InstrumentationClass.SURROUND_ALWAYS_FALSE, 0)
    assert b"if (0) { if(len > 256)" in rewritten
    assert _new_regions(_files(result)[plan.file], rewritten, plan.file) == 0


def test_rewrite_table():
    for name, (cls, expected) in TEST_CASES.items():
        with tempfile.TemporaryDirectory() as tmp:
            shutil.copy(FIXTURES / name, tmp)
            result = analyze(tmp)
        target = _target(result, cls)
        plan, rewritten = _apply(result, target, cls)
        assert expected.encode("utf-8") in rewritten, f"{name}: {rewritten.decode('utf-8')}"
        assert _new_regions(_files(result)[plan.file], rewritten, plan.file) == 0, name


def test_format_string_rewrite():
    with tempfile.TemporaryDirectory() as tmp:
        shutil.copy(FIXTURES / "format_string.c", tmp)
        result = analyze(tmp)
    target = _target(result, InstrumentationClass.FORMAT_STRING_ANTI_PATTERN)
    assert isinstance(target.site, SinkSite) and target.site.callee == "printf"
    _, rewritten = _apply(result, target, InstrumentationClass.FORMAT_STRING_ANTI_PATTERN)
    assert b"printf(line);" in rewritten


def test_every_variant_reparses():
    for name in sorted(GUARDED_FIXTURES):
        with tempfile.TemporaryDirectory() as tmp:
            shutil.copy(FIXTURES / name, tmp)
            result = analyze(tmp)
        targets, _ = insertion_targets(result)
        for target in targets:
            for cls, count in target.candidates:
                for variant in range(count):
                    plan, rewritten = _apply(result, target, cls, variant)
                    added = _new_regions(_files(result)[plan.file], rewritten, plan.file)
                    assert added == 0, f"{name}: {cls.value}#{variant}"


def test_choice_is_deterministic():
    result = analyze(str(RUNNING))
    target = _target(result)
    first, files_a = choose_and_apply(target.site, target.candidates, 42, _files(result), target.context)
    second, files_b = choose_and_apply(target.site, target.candidates, 42, _files(result), target.context)
    assert files_a == files_b
    assert first.to_dict(result.graph) == second.to_dict(result.graph)
    assert first.vuln_class is result.pairs[0].sink.vuln_class
    assert first.original_snippet != first.rewritten_snippet


def test_seeds_spread_over_variants():
    result = analyze(str(RUNNING))
    target = _target(result)
    drawn = {choose_and_apply(target.site, target.candidates, seed, _files(result), target.context)[0].plan.variant_id
             for seed in range(40)}
    assert len(drawn) > 1


def test_changed_file_is_refused():
    result = analyze(str(RUNNING))
    target = _target(result)
    files = _files(result)
    path = next(iter(files))
    files[path] = files[path].replace(b"len > 256", b"len > 999")
    try:
        choose_and_apply(target.site, [(InstrumentationClass.REMOVE_MECHANISM, 1)], 0, files, target.context)
    except SpanMismatch:
        pass
    else:
        raise AssertionError("stale file accepted")


def test_plan_yaml():
    result = analyze(str(RUNNING))
    target = _target(result)
    plan, _ = _apply(result, target, InstrumentationClass.REMOVE_MECHANISM)
    with tempfile.TemporaryDirectory() as tmp:
        path = save_plan(plan, tmp)
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    assert data["instrumentation"] == "RemoveMechanism"
    assert data["target"]["classification"] == "AbortingCheck"
    assert data["rewrites"][0]["line"] == 24


# -- opaque injection -----------------------------------------------------------------

def _guard_statement_at(unit, line):
    for fn in unit.functions:
        for stmt in fn.statements():
            if stmt.kind is StmtKind.IF and stmt.span.display_line == line:
                return stmt
    return None


def mutate(source: str, name: str, rng: random.Random):
    """Inject one opaque construct; returns (mutated text, whether it hit the guard)."""
    unit = parse_unit(source, name)
    data = unit.source_bytes
    line = GUARDED_FIXTURES[name]
    guard = _guard_statement_at(unit, line) if line is not None else None
    choice = rng.randrange(3) if guard is not None else 0
    if choice == 0:
        statements = [s for fn in unit.functions for s in fn.statements()
                      if s.kind in (StmtKind.EXPR, StmtKind.DECL, StmtKind.RETURN)]
        stmt = rng.choice(statements)
        opaque = rng.choice(OPAQUE_STATEMENTS)
        mutated = data[:stmt.span.byte_start] + f"{opaque} ".encode() + data[stmt.span.byte_start:]
        hit = guard is not None and guard.span.contains(stmt.span)
    elif choice == 1:
        span = guard.then.span
        opaque = rng.choice(OPAQUE_STATEMENTS)
        body = data[span.byte_start:span.byte_end]
        mutated = data[:span.byte_start] + f"{{ {opaque} ".encode() + body + b" }" + data[span.byte_end:]
        hit = True
    else:
        span = guard.condition_span
        condition = data[span.byte_start:span.byte_end]
        opaque = rng.choice(OPAQUE_CONDITIONS)
        mutated = data[:span.byte_start] + b"(" + condition + f") && {opaque}".encode() + data[span.byte_end:]
        hit = True
    return mutated.decode("utf-8"), hit


def _has_opaque(graph, site: GuardSite) -> bool:
    stmt = guard_statement(graph, site)
    if stmt is None:
        return True
    return any(s.kind is StmtKind.OPAQUE or any(e.contains_opaque() for e in s.expressions())
               for s in stmt.walk())


def test_opaque_injection_fuzz(trials: int = FUZZ_TRIALS, seed: int = 0):
    rng = random.Random(seed)
    names = sorted(GUARDED_FIXTURES)
    rewritten = 0
    for trial in range(trials):
        name = rng.choice(names)
        source = (FIXTURES / name).read_text(encoding="utf-8")
        mutated, hit = mutate(source, name, rng)
        with tempfile.TemporaryDirectory() as tmp:
            corpus = os.path.join(tmp, "corpus")
            os.makedirs(corpus)
            with open(os.path.join(corpus, name), "w", encoding="utf-8") as f:
                f.write(mutated)
            result = analyze(corpus)
            targets, _ = insertion_targets(result)
            for target in targets:
                assert is_bugdoorable(target.site, result.graph), f"trial {trial}"
                if isinstance(target.site, GuardSite):
                    assert not _has_opaque(result.graph, target.site), f"trial {trial}: opaque guard offered"
                    if hit:
                        assert target.site.line != GUARDED_FIXTURES[name], f"trial {trial}: mutated guard offered"
            if targets:
                for _, record in insert(result, trial, 1, os.path.join(tmp, "out")):
                    site = record.plan.target
                    assert is_bugdoorable(site, result.graph), f"trial {trial}"
                    rewritten += 1
    assert rewritten > 0


TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    parser = argparse.ArgumentParser(description="Instrumentation tests")
    parser.add_argument("--test", choices=sorted(TESTS), help="Run a single test")
    parser.add_argument("--trials", type=int, default=FUZZ_TRIALS, help="Mutation trials of the fuzz test")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the mutation fuzz")
    args = parser.parse_args()
    failed = 0
    for name in ([args.test] if args.test else sorted(TESTS)):
        try:
            if name == "opaque_injection_fuzz":
                TESTS[name](args.trials, args.seed)
            else:
                TESTS[name]()
            print(f"PASS {name}")
        except AssertionError as e:
            failed += 1
            print(f"FAIL {name}: {e}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
