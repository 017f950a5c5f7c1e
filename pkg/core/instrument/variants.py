"""
Finite variant tables for the condition-rewriting instrumentations.

Every table is a deterministic, ordered list so that a (class, variant id)
pair always denotes the same rewrite.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from core.frontend.ast import Expr, ExprKind

DEFAULT_MAGIC_CONSTANTS = (0xDEADC0DE, 0xCAFEBABE, 0x5EED5EED)

_LOOSER_WHEN_FALSE = (">", ">=")
_MIRROR = {">": "<", ">=": "<=", "<": ">", "<=": ">="}


def magic_literal(value: int) -> str:
    return f"0x{value:X}"


def always_false_predicates(identifiers: Sequence[str], magic_constants: Sequence[int]) -> List[str]:
    predicates = ["0"]
    for name in identifiers:
        predicates.extend(f"{name} == {magic_literal(m)}" for m in magic_constants)
    return predicates


def always_true_predicates(identifiers: Sequence[str], magic_constants: Sequence[int]) -> List[str]:
    predicates = ["1"]
    for name in identifiers:
        predicates.extend(f"{name} != {magic_literal(m)}" for m in magic_constants)
    return predicates


def needs_parens(expr: Expr) -> bool:
    """Whether ``expr`` must be parenthesized as an operand of ``&&``/``||``."""
    if expr.kind in (ExprKind.COND, ExprKind.COMMA, ExprKind.ASSIGN):
        return True
    return expr.kind is ExprKind.BINARY and expr.op == "||"


def int_literal(expr: Expr) -> Optional[int]:
    if expr.kind is not ExprKind.NUMBER:
        return None
    text = expr.text.rstrip("uUlL")
    try:
        return int(text, 0)
    except ValueError:
        return None


@dataclass(frozen=True)
class Comparison:
    """A relational comparison normalised to ``subject <op> bound``.

    ``flipped`` means the source text reads ``bound <mirror-op> subject``.
    """
    expr: Expr
    subject: Expr
    op: str
    bound: Expr
    flipped: bool = False


def monotone_comparisons(condition: Expr) -> List[Comparison]:
    """Relational comparisons reachable from the condition through ``&&``/``||`` only."""
    found: List[Comparison] = []
    stack = [condition]
    while stack:
        expr = stack.pop().stripped()
        if expr.kind is ExprKind.BINARY and expr.op in ("&&", "||"):
            stack.extend(reversed(expr.children))
            continue
        if expr.kind is ExprKind.BINARY and expr.op in _MIRROR:
            left, right = expr.children
            if right.stripped().kind is ExprKind.NUMBER:
                found.append(Comparison(expr, left, expr.op, right.stripped()))
            elif left.stripped().kind is ExprKind.NUMBER:
                found.append(Comparison(expr, right, _MIRROR[expr.op], left.stripped(), flipped=True))
    found.sort(key=lambda c: c.expr.span.byte_start)
    return found


def _render(c: Comparison, subject: str, bound: str) -> str:
    if c.flipped:
        return f"({bound} {_MIRROR[c.op]} {subject})"
    return f"({subject} {c.op} {bound})"


def loosening_variants(c: Comparison, passing_when_false: bool) -> List[Tuple[str, str]]:
    """Replacements of one comparison that let larger subjects through.

    Returns (description, replacement text) pairs; an empty list when the
    comparison does not bound the subject from above.
    """
    if passing_when_false and c.op not in _LOOSER_WHEN_FALSE:
        return []
    if not passing_when_false and c.op in _LOOSER_WHEN_FALSE:
        return []
    subject, bound = c.subject.text, c.bound.text
    variants = []
    value = int_literal(c.bound)
    if value is not None:
        variants.append(("double the bound", _render(c, subject, str(value * 2))))
    variants.append(("halve the subject", _render(c, f"{subject}/2", bound)))
    variants.append(("scale the bound", _render(c, subject, f"{bound}*2")))
    variants.append(("truncate the subject to char", _render(c, f"(char){subject}", bound)))
    return variants


def overflow_variants(condition: Expr) -> List[Tuple[Expr, str, str]]:
    """Overflow-prone rewrites of correctly written overflow checks.

    ``a > K - b`` becomes ``a + b > K`` and ``a > K / b`` becomes
    ``a * b > K``; a post-hoc wrap check ``a + b < a`` becomes ``a + b < 0``.
    Returns (comparison, description, replacement) triples.
    """
    found: List[Tuple[Expr, str, str]] = []
    for expr in condition.walk():
        if expr.kind is not ExprKind.BINARY or expr.op not in _MIRROR:
            continue
        left, right = expr.children[0].stripped(), expr.children[1].stripped()
        if expr.op in (">", ">=") and right.kind is ExprKind.BINARY and right.op in ("-", "/"):
            limit, other = right.children
            joined = "+" if right.op == "-" else "*"
            found.append((expr, "sum compared after the fact" if joined == "+" else "product compared after the fact",
                          f"({left.text} {joined} {other.text} {expr.op} {limit.text})"))
        elif expr.op == "<" and left.kind is ExprKind.BINARY and left.op == "+" \
                and right.text in (left.children[0].text, left.children[1].text):
            found.append((expr, "wrap check against zero", f"({left.text} < 0)"))
    found.sort(key=lambda item: item[0].span.byte_start)
    return found
