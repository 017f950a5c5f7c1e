#!/usr/bin/env python3
"""
Verification tests: build the running example and its variants with a
harness and compare them on a benign and a crafted input. Skipped when no C
compiler is installed.

Usage:
    python evaluation/test_verify.py
    python evaluation/test_verify.py --compiler clang
"""

import os
import sys
import shutil
import tempfile
import argparse
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from cli.bugforge_cli import EXIT_BUILD_FAILURE, EXIT_OK, main as cli_main
from core.pipeline import analyze, insert
from core.utils.errors import BuildFailure
from core.verify.harness import RunOutcome, Verdict, find_compiler, judge, verify_variant

CORPORA = project_root / "evaluation" / "corpora"
RUNNING = CORPORA / "running"
HARNESS = CORPORA / "running_harness" / "harness.c"
INPUTS = CORPORA / "running_inputs"

COMPILER = os.getenv("BUGFORGE_CC") or os.getenv("CC") or "cc"
VARIANTS = 5

TEST_CASES = {
    "benign_100.bin": Verdict.BENIGN_IDENTICAL,
    "crafted_300.bin": Verdict.SINK_VIOLATION,
}


def _skip() -> bool:
    if find_compiler(COMPILER) is None:
        print(f"  no C compiler '{COMPILER}'; skipping")
        return True
    return False


def test_judge_table():
    clean = RunOutcome(exit_status=0, stdout="done\n", stderr="")
    refused = RunOutcome(exit_status=1, stdout="ERROR\n", stderr="")
    crashed = RunOutcome(exit_status=1, stdout="", stderr="==1==ERROR: AddressSanitizer: stack-buffer-overflow")
    assert judge(clean, clean) is Verdict.BENIGN_IDENTICAL
    assert judge(refused, crashed) is Verdict.SINK_VIOLATION
    assert judge(clean, refused) is Verdict.DIVERGENCE_DETECTED
    assert judge(crashed, crashed) is Verdict.DIVERGENCE_DETECTED


def test_variants_trip_only_on_crafted_input():
    if _skip():
        return
    with tempfile.TemporaryDirectory() as tmp:
        corpus = os.path.join(tmp, "corpus")
        shutil.copytree(RUNNING, corpus)
        result = analyze(corpus)
        for directory, record in insert(result, 100, VARIANTS, os.path.join(tmp, "out")):
            verdicts = verify_variant(corpus, directory, str(INPUTS), harness_files=[str(HARNESS)],
                                      compiler=COMPILER)
            observed = {v.input_name: v.verdict for v in verdicts}
            label = f"{record.plan.instrumentation.value}#{record.plan.variant_id}"
            assert observed == TEST_CASES, f"{label}: {observed}"


def test_verify_command():
    if _skip():
        return
    with tempfile.TemporaryDirectory() as tmp:
        corpus = os.path.join(tmp, "corpus")
        shutil.copytree(RUNNING, corpus)
        config = os.path.join(tmp, "config.yaml")
        with open(config, "w", encoding="utf-8") as f:
            f.write("seed: null\n")
        out = os.path.join(tmp, "out")
        assert cli_main(["--config", config, "--quiet", "insert", corpus, "--seed", "3", "--out", out]) == EXIT_OK
        code = cli_main(["--config", config, "--quiet", "verify", os.path.join(out, "3"), str(INPUTS),
                         "--original", corpus, "--harness", str(HARNESS), "--compiler", COMPILER])
        assert code == EXIT_OK


def test_broken_variant_is_a_build_failure():
    if _skip():
        return
    with tempfile.TemporaryDirectory() as tmp:
        corpus = os.path.join(tmp, "corpus")
        shutil.copytree(RUNNING, corpus)
        broken = os.path.join(tmp, "broken")
        os.makedirs(broken)
        with open(os.path.join(broken, "running_example.c"), "w", encoding="utf-8") as f:
            f.write("void copy_buffer(void) { this is not C }\n")
        try:
            verify_variant(corpus, broken, str(INPUTS), harness_files=[str(HARNESS)], compiler=COMPILER)
        except BuildFailure as e:
            assert e.output
        else:
            raise AssertionError("broken variant compiled")
        config = os.path.join(tmp, "config.yaml")
        with open(config, "w", encoding="utf-8") as f:
            f.write("seed: null\n")
        code = cli_main(["--config", config, "--quiet", "verify", broken, str(INPUTS),
                         "--original", corpus, "--harness", str(HARNESS), "--compiler", COMPILER])
        assert code == EXIT_BUILD_FAILURE


TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    global COMPILER
    parser = argparse.ArgumentParser(description="Verification tests")
    parser.add_argument("--test", choices=sorted(TESTS), help="Run a single test")
    parser.add_argument("--compiler", default=COMPILER, help="C compiler to build with")
    args = parser.parse_args()
    COMPILER = args.compiler
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
