from core.frontend.parser import parse_unit, read_source, supported_subset_report

__all__ = ["parse_unit", "read_source", "supported_subset_report"]
