#!/usr/bin/env python3
"""
Loader for external function summary files.

One function per line::

    name ret=<flags> p<i>=<Y|N|M>[,transfer=p<j>|ret][,source=<Kind>][,sink=<Class>] ...=<...>

``ret`` flags (comma separated): ``N``, ``noreturn``, ``p<j>`` (the return
value carries parameter j's data) and ``source:<Kind>``. On a parameter,
``transfer=p<j>`` means parameter j's data is written into it and
``transfer=ret`` means the parameter's data is returned. ``...`` describes
every variadic argument. ``#`` starts a comment.
"""

import os
import logging
from typing import Dict, List, Optional

from core.interproc.summary import (
    RETURN_VALUE, VARIADIC, FunctionSummary, ParamStatus, SinkSpec,
)
from core.utils.common import SourceKind, VulnClass
from core.utils.errors import SummaryParseError

logger = logging.getLogger(__name__)

BUNDLED_SUMMARIES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "summaries", "glibc.summ")


def _source_kind(value: str, path: str, line_no: int) -> SourceKind:
    try:
        return SourceKind(value)
    except ValueError:
        raise SummaryParseError(path, line_no, f"unknown source kind '{value}'")


def _vuln_class(value: str, path: str, line_no: int) -> VulnClass:
    try:
        return VulnClass(value)
    except ValueError:
        raise SummaryParseError(path, line_no, f"unknown sink class '{value}'")


def _param_ref(token: str, path: str, line_no: int) -> int:
    if len(token) < 2 or token[0] != "p" or not token[1:].isdigit():
        raise SummaryParseError(path, line_no, f"expected p<index>, got '{token}'")
    return int(token[1:])


def parse_summary_line(line: str, path: str = "<string>", line_no: int = 1) -> Optional[FunctionSummary]:
    """Parse one line; comments and blank lines give ``None``."""
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    tokens = text.split()
    name = tokens[0]
    if not (name[0].isalpha() or name[0] == "_") or "=" in name:
        raise SummaryParseError(path, line_no, f"invalid function name '{name}'")

    summary = FunctionSummary(name=name, external=True)
    params: Dict[int, ParamStatus] = {}

    for token in tokens[1:]:
        if "=" not in token:
            raise SummaryParseError(path, line_no, f"expected key=value, got '{token}'")
        key, value = token.split("=", 1)

        if key == "ret":
            for flag in value.split(","):
                if flag == "N":
                    continue
                if flag == "noreturn":
                    summary.noreturn = True
                elif flag.startswith("source:"):
                    summary.source_kind = _source_kind(flag.split(":", 1)[1], path, line_no)
                    summary.source_arg = RETURN_VALUE
                else:
                    summary.returns_param_data.add(_param_ref(flag, path, line_no))
            continue

        if key == "...":
            index = VARIADIC
        else:
            index = _param_ref(key, path, line_no)

        parts = value.split(",")
        try:
            status = ParamStatus(parts[0])
        except ValueError:
            raise SummaryParseError(path, line_no, f"status must be Y, N or M, got '{parts[0]}'")
        if index == VARIADIC:
            summary.variadic_status = status
        else:
            if index in params:
                raise SummaryParseError(path, line_no, f"parameter p{index} given twice")
            params[index] = status

        for attr in parts[1:]:
            if "=" not in attr:
                raise SummaryParseError(path, line_no, f"expected attribute=value, got '{attr}'")
            attr_key, attr_value = attr.split("=", 1)
            if attr_key == "transfer":
                if attr_value == "ret":
                    summary.returns_param_data.add(index)
                else:
                    summary.param_transfers.append((_param_ref(attr_value, path, line_no), index))
            elif attr_key == "source":
                summary.source_kind = _source_kind(attr_value, path, line_no)
                summary.source_arg = index
                if index == VARIADIC:
                    summary.variadic_source = True
            elif attr_key == "sink":
                summary.sink_specs.append(SinkSpec(index, _vuln_class(attr_value, path, line_no)))
            else:
                raise SummaryParseError(path, line_no, f"unknown attribute '{attr_key}'")

    if params:
        expected = list(range(max(params) + 1))
        if sorted(params) != expected:
            raise SummaryParseError(path, line_no, f"parameters of '{name}' must be p0..p{max(params)} without gaps")
        summary.param_modified = [params[i] for i in expected]
    return summary


def parse_summaries(text: str, path: str = "<string>") -> Dict[str, FunctionSummary]:
    summaries: Dict[str, FunctionSummary] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        summary = parse_summary_line(line, path, line_no)
        if summary is None:
            continue
        if summary.name in summaries:
            logger.warning(f"{path}:{line_no}: duplicate summary for '{summary.name}', last one wins")
        summaries[summary.name] = summary
    return summaries


def load_external_summaries(path: str) -> Dict[str, FunctionSummary]:
    """Load a summary file.

    Raises:
        SummaryParseError: on the first malformed line (with its number).
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise SummaryParseError(path, 0, f"cannot read summary file: {e}")
    summaries = parse_summaries(text, path)
    logger.debug(f"Loaded {len(summaries)} summaries from {path}")
    return summaries


def load_summary_stack(extra_paths: List[str], include_bundled: bool = True) -> Dict[str, FunctionSummary]:
    """Bundled summaries followed by user files; later files override earlier ones."""
    merged: Dict[str, FunctionSummary] = {}
    paths = ([BUNDLED_SUMMARIES] if include_bundled else []) + list(extra_paths)
    for path in paths:
        for name, summary in load_external_summaries(path).items():
            if name in merged:
                logger.info(f"Summary for '{name}' from {path} overrides an earlier one")
            merged[name] = summary
    return merged
