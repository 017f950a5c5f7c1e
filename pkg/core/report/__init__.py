from core.report.metrics import SCHEMA_VERSION, CorpusReport, compute_metrics, unique_pair_count
from core.report.writer import emit_json, read_report, validate, write_json

__all__ = [
    "SCHEMA_VERSION", "CorpusReport", "compute_metrics", "unique_pair_count",
    "emit_json", "read_report", "validate", "write_json",
]
