"""
Seeded choice and byte-level application of an instrumentation.
"""

import random
import logging
from typing import Dict, List, Optional, Set, Tuple, Union

from core.frontend.parser import parse_unit
from core.guards.mechanisms import GuardSite
from core.instrument.bugdoor import is_bugdoorable
from core.instrument.plans import CLASS_ORDER, GroundTruthRecord, InstrumentationClass, InstrumentationPlan, Rewrite
from core.instrument.rewrites import InstrumentContext, build_plan
from core.taint.sites import SinkSite
from core.utils.common import Diagnostic, DiagnosticKind
from core.utils.errors import NotApplicable, ReparseFailure, SpanMismatch, UnbalancedDelimiters

logger = logging.getLogger(__name__)

Candidate = Tuple[InstrumentationClass, int]


def apply_rewrites(data: bytes, rewrites: List[Rewrite]) -> bytes:
    """Apply non-overlapping rewrites, last first so offsets stay valid."""
    ordered = sorted(rewrites, key=lambda r: (r.span.byte_start, r.span.byte_end))
    for a, b in zip(ordered, ordered[1:]):
        if a.span.byte_end > b.span.byte_start:
            raise ValueError(f"overlapping rewrites at bytes {a.span.byte_start} and {b.span.byte_start}")
    out = data
    for rewrite in reversed(ordered):
        out = out[:rewrite.span.byte_start] + rewrite.replacement.encode("utf-8") + out[rewrite.span.byte_end:]
    return out


def _check_spans(plan: InstrumentationPlan, files: Dict[str, bytes], analysed: bytes):
    files_touched = {r.span.file for r in plan.rewrites}
    if len(files_touched) != 1:
        raise ValueError(f"plan touches {len(files_touched)} files")
    path = plan.file
    current = files.get(path)
    for rewrite in plan.rewrites:
        start, end = rewrite.span.byte_start, rewrite.span.byte_end
        if current is None or end > len(current) or current[start:end] != analysed[start:end]:
            raise SpanMismatch(path, start, end)


def _snippets(plan: InstrumentationPlan, before: bytes, after: bytes) -> Tuple[str, str]:
    start = min(r.span.byte_start for r in plan.rewrites)
    end = max(r.span.byte_end for r in plan.rewrites)
    growth = len(after) - len(before)
    return (before[start:end].decode("utf-8"),
            after[start:end + growth].decode("utf-8"))


def _reparses(path: str, rewritten: bytes, baseline: int) -> bool:
    try:
        unit = parse_unit(rewritten.decode("utf-8"), path)
    except (UnbalancedDelimiters, UnicodeDecodeError) as e:
        logger.warning(f"rewritten {path} does not parse: {e}")
        return False
    return len(unit.skipped_regions) <= baseline


def candidate_pairs(candidates: List[Candidate]) -> List[Tuple[InstrumentationClass, int]]:
    """Every (class, variant id) pair, in class order."""
    order = {cls: i for i, cls in enumerate(CLASS_ORDER)}
    pairs = []
    for cls, count in sorted(candidates, key=lambda c: order[c[0]]):
        pairs.extend((cls, variant) for variant in range(count))
    return pairs


def choose_and_apply(site: Union[GuardSite, SinkSite], candidates: List[Candidate], seed: int,
                     files: Dict[str, bytes], context: InstrumentContext,
                     diagnostics: Optional[List[Diagnostic]] = None
                     ) -> Tuple[GroundTruthRecord, Dict[str, bytes]]:
    """Draw one (class, variant) uniformly with ``random.Random(seed)`` and apply it.

    Args:
        site: a bugdoorable guard, or a sink for the format-string class.
        candidates: output of ``applicable_instrumentations``.
        seed: the variant seed; the same seed always draws the same pair.
        files: path -> current bytes of the corpus files.
        context: graph, pair and path the record is written for.

    Returns:
        (GroundTruthRecord, files with the rewritten file replaced)

    Raises:
        NotApplicable: the site is not bugdoorable or has no candidates.
        SpanMismatch: the file bytes differ from the analysed ones.
        ReparseFailure: every variant produced code that no longer parses.
    """
    graph = context.graph
    decision = is_bugdoorable(site, graph)
    if not decision:
        raise NotApplicable(f"{site.span.location()} is not bugdoorable: {decision.reason}")
    if context.pair is None or context.path is None:
        raise NotApplicable("an instrumentation needs the source-sink pair and path it disables")

    remaining = candidate_pairs(candidates)
    if not remaining:
        raise NotApplicable(f"no instrumentation applies at {site.span.location()}")

    node_id = site.call_node if isinstance(site, SinkSite) else site.condition_node
    unit = graph.function_of(node_id).unit
    analysed = unit.source_bytes
    baseline = len(unit.skipped_regions)

    rng = random.Random(seed)
    blacklisted: Set[Tuple[InstrumentationClass, int]] = set()
    while remaining:
        cls, variant = rng.choice(remaining)
        plan = build_plan(site, cls, variant, context, rng_seed=seed)
        _check_spans(plan, files, analysed)

        original = files[plan.file]
        rewritten = apply_rewrites(original, plan.rewrites)
        if not _reparses(plan.file, rewritten, baseline):
            blacklisted.add((cls, variant))
            remaining = [c for c in remaining if c not in blacklisted]
            message = f"{cls.value} variant {variant} does not re-parse; trying another"
            logger.warning(f"{site.span.location()}: {message}")
            if diagnostics is not None:
                diagnostics.append(Diagnostic(DiagnosticKind.REPARSE_FAILURE, message, site.span.location()))
            continue

        before, after = _snippets(plan, original, rewritten)
        record = GroundTruthRecord(
            pair=context.pair,
            chosen_path=context.path,
            guard=site if isinstance(site, GuardSite) else None,
            plan=plan,
            original_snippet=before,
            rewritten_snippet=after,
            vuln_class=context.pair.sink.vuln_class,
        )
        out = dict(files)
        out[plan.file] = rewritten
        logger.info(f"{cls.value} variant {variant} applied at {site.span.location()}")
        return record, out

    raise ReparseFailure(f"no variant at {site.span.location()} re-parses cleanly")
