"""
Def/use extraction over frontend expressions.

Variables are tracked by access-path keys: ``p->f`` and ``s.f`` become
``p.f``/``s.f``, ``*p`` becomes ``p`` and ``a[i]`` becomes ``a``.
"""

import re
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Set, Tuple

from core.frontend.ast import Expr, ExprKind

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def keys_match(a: str, b: str) -> bool:
    """Equal keys, or one is a member path below the other."""
    if a == b:
        return True
    return a.startswith(b + ".") or b.startswith(a + ".")


def killed_by(key: str, strong_key: str) -> bool:
    return key == strong_key or key.startswith(strong_key + ".")


def base_name(key: str) -> str:
    return key.split(".", 1)[0]


def rename_key(key: str, old_base: str, new_base: str) -> str:
    """Swap the base variable of an access path (argument/parameter renaming)."""
    if key == old_base:
        return new_base
    if key.startswith(old_base + "."):
        return new_base + key[len(old_base):]
    return key


def access_key(expr: Optional[Expr]) -> Optional[str]:
    """The access-path key an lvalue-like expression denotes, if any."""
    if expr is None:
        return None
    expr = expr.stripped()
    if expr.kind is ExprKind.IDENT:
        return expr.name
    if expr.kind is ExprKind.MEMBER:
        inner = access_key(expr.children[0])
        return f"{inner}.{expr.name}" if inner else None
    if expr.kind in (ExprKind.DEREF, ExprKind.INDEX):
        return access_key(expr.children[0])
    return None


def _lvalue_chain(expr: Expr) -> List[Expr]:
    chain = []
    while True:
        expr = expr.stripped()
        chain.append(expr)
        if expr.kind in (ExprKind.MEMBER, ExprKind.DEREF, ExprKind.INDEX) and expr.children:
            expr = expr.children[0]
        else:
            return chain


def is_strong_target(expr: Expr) -> bool:
    """Writes through ``*p`` or ``a[i]`` do not overwrite the whole object."""
    return all(e.kind in (ExprKind.IDENT, ExprKind.MEMBER) for e in _lvalue_chain(expr))


def is_pointee_target(expr: Expr) -> bool:
    for e in _lvalue_chain(expr):
        if e.kind in (ExprKind.DEREF, ExprKind.INDEX):
            return True
        if e.kind is ExprKind.MEMBER and e.op == "->":
            return True
    return False


@dataclass(frozen=True)
class Assignment:
    """One write performed by a statement."""
    target: str
    value: Optional[Expr]
    op: str
    strong: bool = True
    through_pointer: bool = False

    @property
    def is_update(self) -> bool:
        return self.op in ("++", "--")

    @property
    def is_compound(self) -> bool:
        return self.op not in ("=", "decl") and not self.is_update


@dataclass(frozen=True)
class CallInfo:
    """A call expression with the variables each argument hands over."""
    expr: Expr
    callee: str
    arg_keys: Tuple[FrozenSet[str], ...]
    addr_keys: Tuple[Optional[str], ...]
    ref_keys: Tuple[Optional[str], ...]
    result_key: Optional[str] = None

    @property
    def indirect(self) -> bool:
        return not self.callee

    @property
    def args(self) -> Tuple[Expr, ...]:
        return self.expr.args


@dataclass
class DefUse:
    assignments: List[Assignment] = field(default_factory=list)
    uses: Set[str] = field(default_factory=set)
    calls: List[CallInfo] = field(default_factory=list)
    function_refs: Set[str] = field(default_factory=set)


class DefUseCollector:
    """Walks expressions of one statement and accumulates a DefUse record.

    Identifiers outside ``symbols`` (function names, enumerators, macro
    residue) are never uses; those in ``functions`` seen in value position
    are remembered as function references.
    """

    def __init__(self, symbols: Set[str], functions: Set[str]):
        self.symbols = symbols
        self.functions = functions
        self.result = DefUse()

    def _use_key(self, key: Optional[str]):
        if key and base_name(key) in self.symbols:
            self.result.uses.add(key)

    def _lvalue_subuses(self, expr: Expr):
        for e in _lvalue_chain(expr):
            if e.kind is ExprKind.INDEX and len(e.children) > 1:
                self.rvalue(e.children[1])
            elif e.kind not in (ExprKind.IDENT, ExprKind.MEMBER, ExprKind.DEREF, ExprKind.INDEX):
                self.rvalue(e)

    def _assign(self, target_expr: Expr, value: Optional[Expr], op: str):
        key = access_key(target_expr)
        self._lvalue_subuses(target_expr)
        if key is None or base_name(key) not in self.symbols:
            return
        self.result.assignments.append(Assignment(
            target=key, value=value, op=op,
            strong=is_strong_target(target_expr),
            through_pointer=is_pointee_target(target_expr),
        ))
        if op != "=":
            self.result.uses.add(key)

    def declaration(self, name: str, init: Optional[Expr]):
        if init is not None:
            self.rvalue(init, result_key=name)
        self.result.assignments.append(Assignment(target=name, value=init, op="decl"))

    def opaque_text(self, text: str):
        for name in IDENTIFIER.findall(text):
            if name in self.symbols:
                self.result.uses.add(name)

    def rvalue(self, expr: Optional[Expr], result_key: Optional[str] = None):
        if expr is None:
            return
        kind = expr.kind
        if kind is ExprKind.IDENT:
            if expr.name in self.symbols:
                self.result.uses.add(expr.name)
            elif expr.name in self.functions:
                self.result.function_refs.add(expr.name)
        elif kind is ExprKind.MEMBER:
            self._use_key(access_key(expr))
            self._lvalue_subuses(expr)
        elif kind is ExprKind.ASSIGN:
            self.rvalue(expr.children[1], result_key=access_key(expr.children[0]) if expr.op == "=" else None)
            self._assign(expr.children[0], expr.children[1], expr.op)
        elif kind is ExprKind.UPDATE:
            self._assign(expr.children[0], None, expr.op)
        elif kind is ExprKind.CALL:
            self._call(expr, result_key)
        elif kind is ExprKind.CAST:
            self.rvalue(expr.children[0], result_key)
        elif kind is ExprKind.OPAQUE:
            self.opaque_text(expr.text)
        else:
            for child in expr.children:
                self.rvalue(child)

    def _call(self, expr: Expr, result_key: Optional[str]):
        function = expr.callee.stripped() if expr.callee is not None else None
        callee = ""
        if function is not None and function.kind is ExprKind.IDENT and function.name not in self.symbols:
            callee = function.name
        elif function is not None:
            self.rvalue(function)

        arg_keys, addr_keys, ref_keys = [], [], []
        for arg in expr.args:
            stripped = arg.stripped()
            if stripped.kind is ExprKind.ADDR:
                key = access_key(stripped.children[0])
                if key in self.functions and key not in self.symbols:
                    self.result.function_refs.add(key)
                addr_keys.append(key if key and base_name(key) in self.symbols else None)
                ref_keys.append(None)
                self._lvalue_subuses(stripped.children[0])
                arg_keys.append(frozenset({key}) if addr_keys[-1] else frozenset())
                continue
            self.rvalue(arg)
            key = access_key(stripped) if stripped.kind in (ExprKind.IDENT, ExprKind.MEMBER) else None
            addr_keys.append(None)
            ref_keys.append(key if key and base_name(key) in self.symbols else None)
            arg_keys.append(frozenset(value_uses(arg, self.symbols)))

        self.result.calls.append(CallInfo(
            expr=expr, callee=callee, arg_keys=tuple(arg_keys),
            addr_keys=tuple(addr_keys), ref_keys=tuple(ref_keys), result_key=result_key,
        ))


def value_uses(expr: Optional[Expr], symbols: Set[str]) -> Set[str]:
    """Keys read by an expression outside of nested calls (the arithmetic operands)."""
    if expr is None:
        return set()
    uses: Set[str] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if e.kind is ExprKind.CALL:
            continue
        if e.kind is ExprKind.IDENT:
            if e.name in symbols:
                uses.add(e.name)
        elif e.kind is ExprKind.MEMBER:
            key = access_key(e)
            if key and base_name(key) in symbols:
                uses.add(key)
            for link in _lvalue_chain(e):
                if link.kind is ExprKind.INDEX and len(link.children) > 1:
                    stack.append(link.children[1])
        elif e.kind is ExprKind.ASSIGN:
            stack.append(e.children[1])
        elif e.kind is ExprKind.SIZEOF:
            continue
        elif e.kind is ExprKind.OPAQUE:
            uses.update(n for n in IDENTIFIER.findall(e.text) if n in symbols)
        else:
            stack.extend(e.children)
    return uses


def calls_in(expr: Optional[Expr]) -> List[Expr]:
    """Outermost call expressions inside ``expr`` (not descending into call arguments)."""
    if expr is None:
        return []
    found: List[Expr] = []
    stack = [expr]
    while stack:
        e = stack.pop()
        if e.kind is ExprKind.CALL:
            found.append(e)
            continue
        stack.extend(reversed(e.children))
    return found
