#!/usr/bin/env python3
"""
CLI tests: exit codes, seed handling, determinism of insert and the
analysis flags.

Usage:
    python evaluation/test_cli.py
    python evaluation/test_cli.py --test insert_is_byte_identical
"""

import io
import os
import sys
import json
import inspect
import shutil
import tempfile
import argparse
import contextlib
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from cli.bugforge_cli import (EXIT_BUILD_FAILURE, EXIT_EMPTY_CORPUS, EXIT_NO_BUGDOORABLE, EXIT_OK,
                              EXIT_SUMMARY_PARSE, main as cli_main)
from core.utils import errors

CORPORA = project_root / "evaluation" / "corpora"
RUNNING = CORPORA / "running"
FIXTURES = CORPORA / "fixtures"

TEST_CASES = {
    "custom_source": '''#include <string.h>
int read_config(int slot);
void apply(char *dst, const char *src) {
    int n = read_config(0);
    memcpy(dst, src, n);
}
''',
    "custom_summary": "read_config ret=source:File p0=N\n",
    "broken_summary": "# comment\nread_config ret=source:Moon p0=N\n",
}


class Workspace:
    """Scratch directory with a config file, so no per-user config leaks in."""

    def __init__(self, seed=None):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = self._tmp.name
        self.config = os.path.join(self.root, "config.yaml")
        with open(self.config, "w", encoding="utf-8") as f:
            f.write("seed: null\n" if seed is None else f"seed: {seed}\n")

    def path(self, *parts):
        return os.path.join(self.root, *parts)

    def corpus(self, source: Path, name: str = "corpus") -> str:
        target = self.path(name)
        if source.is_dir():
            shutil.copytree(source, target)
        else:
            os.makedirs(target)
            shutil.copy(source, target)
        return target

    def run(self, *argv):
        return cli_main(["--config", self.config, "--quiet", *argv])

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self._tmp.cleanup()


def _tree(directory: str):
    files = {}
    for root, _, names in os.walk(directory):
        for name in names:
            path = os.path.join(root, name)
            with open(path, "rb") as f:
                files[os.path.relpath(path, directory)] = f.read()
    return files


def test_empty_corpus_exit_code():
    with Workspace() as ws:
        os.makedirs(ws.path("empty"))
        assert ws.run("analyze", ws.path("empty"), "--out", ws.path("out")) == EXIT_EMPTY_CORPUS


def test_summary_parse_exit_code():
    with Workspace() as ws:
        corpus = ws.corpus(RUNNING)
        summ = ws.path("broken.summ")
        with open(summ, "w", encoding="utf-8") as f:
            f.write(TEST_CASES["broken_summary"])
        assert ws.run("analyze", corpus, "--summaries", summ, "--out", ws.path("out")) == EXIT_SUMMARY_PARSE


def test_no_bugdoorable_exit_code():
    with Workspace() as ws:
        corpus = ws.corpus(FIXTURES / "non_aborting.c")
        assert ws.run("insert", corpus, "--seed", "1", "--out", ws.path("out")) == EXIT_NO_BUGDOORABLE
        assert not os.path.exists(ws.path("out", "1"))


def test_missing_compiler_exit_code():
    with Workspace() as ws:
        corpus = ws.corpus(RUNNING)
        os.makedirs(ws.path("inputs"))
        code = ws.run("verify", corpus, ws.path("inputs"), "--original", corpus,
                      "--compiler", ws.path("no-such-cc"))
        assert code == EXIT_BUILD_FAILURE


def test_count_zero_is_a_no_op():
    with Workspace() as ws:
        corpus = ws.corpus(RUNNING)
        assert ws.run("insert", corpus, "--count", "0", "--out", ws.path("out")) == EXIT_OK
        assert not os.path.exists(ws.path("out"))


def test_insert_is_byte_identical():
    with Workspace() as ws:
        corpus = ws.corpus(RUNNING)
        assert ws.run("insert", corpus, "--seed", "42", "--out", ws.path("a")) == EXIT_OK
        assert ws.run("insert", corpus, "--seed", "42", "--out", ws.path("b")) == EXIT_OK
        first, second = _tree(ws.path("a")), _tree(ws.path("b"))
        assert first == second
        assert {"42/plan.yaml", "42/ground_truth.json", "42/running_example.c"} <= set(first)


def test_seeds_produce_different_variants():
    with Workspace() as ws:
        corpus = ws.corpus(RUNNING)
        assert ws.run("insert", corpus, "--seed", "1", "--count", "10", "--out", ws.path("out")) == EXIT_OK
        assert sorted(os.listdir(ws.path("out"))) == sorted(str(s) for s in range(1, 11))
        sources = {_tree(ws.path("out", str(s)))["running_example.c"] for s in range(1, 11)}
        assert len(sources) > 1


def test_seed_from_config_and_environment():
    with Workspace(seed=9) as ws:
        corpus = ws.corpus(RUNNING)
        assert ws.run("insert", corpus, "--out", ws.path("out")) == EXIT_OK
        assert os.listdir(ws.path("out")) == ["9"]
    previous = os.environ.get("BUGFORGE_SEED")
    os.environ["BUGFORGE_SEED"] = "13"
    try:
        with Workspace() as ws:
            corpus = ws.corpus(RUNNING)
            assert ws.run("insert", corpus, "--out", ws.path("out")) == EXIT_OK
            assert os.listdir(ws.path("out")) == ["13"]
    finally:
        if previous is None:
            del os.environ["BUGFORGE_SEED"]
        else:
            os.environ["BUGFORGE_SEED"] = previous


def test_custom_summary_adds_a_source():
    with Workspace() as ws:
        corpus = ws.path("corpus")
        os.makedirs(corpus)
        with open(os.path.join(corpus, "apply.c"), "w", encoding="utf-8") as f:
            f.write(TEST_CASES["custom_source"])
        summ = ws.path("custom.summ")
        with open(summ, "w", encoding="utf-8") as f:
            f.write(TEST_CASES["custom_summary"])
        assert ws.run("analyze", corpus, "--out", ws.path("plain")) == EXIT_OK
        assert ws.run("analyze", corpus, "--summaries", summ, "--out", ws.path("custom")) == EXIT_OK
        with open(ws.path("plain", "report.json"), encoding="utf-8") as f:
            assert json.load(f)["unique_pairs"] == 0
        with open(ws.path("custom", "report.json"), encoding="utf-8") as f:
            assert json.load(f)["unique_pairs"] == 1


def test_json_only_analyze_and_graph_dump():
    with Workspace() as ws:
        corpus = ws.corpus(RUNNING)
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            code = ws.run("--json-only", "analyze", corpus, "--out", ws.path("out"),
                          "--dump-cpg", ws.path("graph.txt"))
        assert code == EXIT_OK
        assert json.loads(stdout.getvalue())["unique_pairs"] == 1
        with open(ws.path("graph.txt"), encoding="utf-8") as f:
            assert f.readline().startswith("node 0 Entry ")


def test_sink_class_flag():
    with Workspace() as ws:
        corpus = ws.corpus(FIXTURES / "two_by_two.c")
        assert ws.run("analyze", corpus, "--sink-classes", "AllocSize", "--out", ws.path("out")) == EXIT_OK
        with open(ws.path("out", "report.json"), encoding="utf-8") as f:
            report = json.load(f)
        assert report["sinks_found"] == 1 and report["unique_pairs"] == 2


def test_every_error_class_is_raised():
    sources = "\n".join(p.read_text(encoding="utf-8")
                        for root in ("core", "cli") for p in (project_root / root).rglob("*.py"))
    for name, cls in inspect.getmembers(errors, inspect.isclass):
        if issubclass(cls, errors.BugForgeError) and cls is not errors.BugForgeError:
            assert f"raise {name}" in sources, name


TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    parser = argparse.ArgumentParser(description="CLI tests")
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
