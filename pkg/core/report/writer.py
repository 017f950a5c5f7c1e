"""
JSON persistence for reports and ground truth.

Files are written with sorted keys and a fixed indent through a temporary
file and ``os.replace``, so reruns with the same inputs are byte-identical
and readers never observe half-written files.
"""

import os
import json
import logging
from typing import Any, Dict, List, Optional, Sequence

from core.cpg.graph import CodePropertyGraph
from core.instrument.plans import GroundTruthRecord
from core.report.metrics import SCHEMA_VERSION, CorpusReport
from core.utils.errors import ReportWriteError

logger = logging.getLogger(__name__)

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
                          "docs", "schemas")

REPORT_FILE = "report.json"
GROUND_TRUTH_FILE = "ground_truth.json"


def load_schema(name: str) -> Optional[Dict[str, Any]]:
    path = os.path.join(SCHEMA_DIR, name)
    if not os.path.exists(path):
        return None
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def validate(data: Dict[str, Any], schema_name: str) -> bool:
    """Validate against a bundled schema; True when jsonschema is not installed."""
    try:
        import jsonschema
    except ImportError:
        logger.debug("jsonschema not installed; skipping validation")
        return True
    schema = load_schema(schema_name)
    if schema is None:
        logger.warning(f"schema {schema_name} not found under {SCHEMA_DIR}")
        return True
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as e:
        logger.error(f"{schema_name}: {e.message}")
        return False
    return True


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(data: Dict[str, Any], filepath: str) -> str:
    tmp_path = filepath + ".tmp"
    try:
        os.makedirs(os.path.dirname(os.path.abspath(filepath)), exist_ok=True)
        with open(tmp_path, 'w', encoding='utf-8') as f:
            f.write(dumps(data))
        os.replace(tmp_path, filepath)
    except OSError as e:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise ReportWriteError(f"could not write {filepath}: {e}") from e
    return filepath


def ground_truth_document(records: Sequence[GroundTruthRecord],
                          graph: Optional[CodePropertyGraph] = None) -> Dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "records": [r.to_dict(graph) for r in records]}


def emit_json(report: Optional[CorpusReport], ground_truths: Optional[Sequence[GroundTruthRecord]], path: str,
              graph: Optional[CodePropertyGraph] = None, include_timings: bool = False) -> List[str]:
    """Write ``report.json`` and ``ground_truth.json`` into ``path``, each when given.

    Returns:
        List[str]: the written file paths.

    Raises:
        ReportWriteError: the directory or a file cannot be written, or a
            document does not validate against its schema.
    """
    written = []
    documents = []
    if report is not None:
        documents.append((REPORT_FILE, "report.schema.json", report.to_dict(include_timings)))
    if ground_truths is not None:
        documents.append((GROUND_TRUTH_FILE, "ground_truth.schema.json", ground_truth_document(ground_truths, graph)))

    for filename, schema_name, data in documents:
        if not validate(data, schema_name):
            raise ReportWriteError(f"{filename} does not match {schema_name}")
        written.append(write_json(data, os.path.join(path, filename)))
        logger.info(f"wrote {written[-1]}")
    return written


def read_report(path: str) -> CorpusReport:
    with open(path, 'r', encoding='utf-8') as f:
        return CorpusReport.from_dict(json.load(f))
