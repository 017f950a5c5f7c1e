#!/usr/bin/env python3
"""
Report tests: metrics, JSON persistence and schema validation.

Usage:
    python evaluation/test_report.py
    python evaluation/test_report.py --test writes_are_byte_identical
"""

import os
import sys
import json
import shutil
import tempfile
import argparse
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.pipeline import analyze, insert, write_report
from core.report.metrics import PATH_COUNT_CAVEAT, CorpusReport, compute_metrics, unique_pair_count
from core.report.writer import GROUND_TRUTH_FILE, REPORT_FILE, emit_json, read_report, validate
from core.utils.errors import EmptyCorpus, ReportWriteError

CORPORA = project_root / "evaluation" / "corpora"
RUNNING = CORPORA / "running"
FIXTURES = CORPORA / "fixtures"

try:
    import jsonschema  # noqa: F401
    HAS_JSONSCHEMA = True
except ImportError:
    HAS_JSONSCHEMA = False


def _analyze_fixture(name):
    with tempfile.TemporaryDirectory() as tmp:
        shutil.copy(FIXTURES / name, tmp)
        return analyze(tmp)


def test_unique_pairs_sum_sources_per_sink():
    result = _analyze_fixture("two_by_two.c")
    per_sink = {}
    for pair in result.pairs:
        per_sink.setdefault(pair.sink.key, set()).add(pair.source.key)
    assert unique_pair_count(result.pairs) == sum(len(s) for s in per_sink.values()) == 4
    assert result.report.dataflow_paths >= result.report.unique_pairs
    assert len(result.report.per_pair) == 4
    assert result.report.sources_found == 2 and result.report.sinks_found == 2


def test_empty_corpus():
    with tempfile.TemporaryDirectory() as tmp:
        try:
            analyze(tmp)
        except EmptyCorpus:
            pass
        else:
            raise AssertionError("empty corpus accepted")
    report = compute_metrics([])
    assert (report.unique_pairs, report.dataflow_paths, report.lines_of_code) == (0, 0, 0)
    assert report.to_dict()["metadata"]["caveat"] == PATH_COUNT_CAVEAT
    assert "upper bound" in PATH_COUNT_CAVEAT and "lower bound" not in PATH_COUNT_CAVEAT


def test_report_dict_round_trip():
    report = analyze(str(RUNNING)).report
    data = report.to_dict(include_timings=True)
    restored = CorpusReport.from_dict(json.loads(json.dumps(data)))
    assert restored.to_dict() == report.to_dict()
    assert set(restored.timings) == {"import", "intraprocedural", "augment", "paths", "guards"}
    assert "timings" not in report.to_dict()


def test_per_pair_digest():
    digest = analyze(str(RUNNING)).report.per_pair[0]
    assert digest["vuln_class"] == "BufferLength"
    assert digest["path_count"] == 4
    assert digest["shortest_hops"] == 4
    assert digest["source"].startswith("fread@running_example.c:")
    assert digest["sink"].startswith("memcpy[2]@")


def test_schema_validation():
    if not HAS_JSONSCHEMA:
        print("  jsonschema not installed; skipping")
        return
    data = analyze(str(RUNNING)).report.to_dict(include_timings=True)
    assert validate(data, "report.schema.json")
    broken = dict(data)
    del broken["unique_pairs"]
    assert not validate(broken, "report.schema.json")


def test_writes_are_byte_identical():
    result = analyze(str(RUNNING))
    with tempfile.TemporaryDirectory() as tmp:
        first = write_report(result, os.path.join(tmp, "a"))
        second = write_report(analyze(str(RUNNING)), os.path.join(tmp, "b"))
        assert [os.path.basename(p) for p in first] == [REPORT_FILE]
        with open(first[0], "rb") as a, open(second[0], "rb") as b:
            assert a.read() == b.read()
        assert read_report(first[0]).unique_pairs == 1
        assert not any(name.endswith(".tmp") for name in os.listdir(os.path.join(tmp, "a")))


def test_ground_truth_document():
    with tempfile.TemporaryDirectory() as tmp:
        corpus = os.path.join(tmp, "corpus")
        shutil.copytree(RUNNING, corpus)
        result = analyze(corpus)
        [(directory, record)] = insert(result, 7, 1, os.path.join(tmp, "out"))
        with open(os.path.join(directory, GROUND_TRUTH_FILE), "r", encoding="utf-8") as f:
            document = json.load(f)
    assert document["schema_version"] == "1.0"
    [entry] = document["records"]
    assert entry["vuln_class"] == "BufferLength"
    assert entry["guard"]["location"].startswith("running_example.c:")
    assert entry["plan"]["class"] == record.plan.instrumentation.value
    assert entry["chosen_path"]["locations"]
    if HAS_JSONSCHEMA:
        assert validate(document, "ground_truth.schema.json")


def test_unwritable_directory():
    result = analyze(str(RUNNING))
    with tempfile.TemporaryDirectory() as tmp:
        blocker = os.path.join(tmp, "blocker")
        with open(blocker, "w", encoding="utf-8") as f:
            f.write("not a directory\n")
        try:
            emit_json(result.report, None, os.path.join(blocker, "out"))
        except ReportWriteError:
            pass
        else:
            raise AssertionError("write into a file path succeeded")


TESTS = {name[len("test_"):]: fn for name, fn in list(globals().items())
         if name.startswith("test_") and callable(fn)}


def main():
    parser = argparse.ArgumentParser(description="Report tests")
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
