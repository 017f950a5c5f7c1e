"""
Syntax tree types produced by the frontend.

The tree is deliberately small: expressions keep just enough structure for
def/use extraction and rewriting, statements mirror the supported C subset,
and anything outside that subset becomes an ``OPAQUE`` node with a reason.
"""

from enum import Enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Iterator

from core.utils.common import SourceSpan


class ExprKind(Enum):
    IDENT = "ident"
    NUMBER = "number"
    STRING = "string"
    CHAR = "char"
    CALL = "call"
    ASSIGN = "assign"
    UPDATE = "update"
    BINARY = "binary"
    UNARY = "unary"
    DEREF = "deref"
    ADDR = "addr"
    MEMBER = "member"
    INDEX = "index"
    CAST = "cast"
    SIZEOF = "sizeof"
    COND = "cond"
    COMMA = "comma"
    INIT_LIST = "init_list"
    OPAQUE = "opaque"


RELATIONAL_OPS = frozenset({"<", "<=", ">", ">=", "==", "!="})
LOGICAL_OPS = frozenset({"&&", "||"})
LITERAL_KINDS = frozenset({ExprKind.NUMBER, ExprKind.STRING, ExprKind.CHAR})


@dataclass(frozen=True)
class Expr:
    """An expression node.

    ``children`` layout per kind: CALL (function, *args); ASSIGN/BINARY/COMMA
    (left, right); UPDATE/UNARY/DEREF/ADDR/CAST/MEMBER (operand,); INDEX
    (base, index); COND (test, then, else); SIZEOF and literals have none.
    """
    kind: ExprKind
    span: SourceSpan
    text: str
    op: str = ""
    name: str = ""
    children: Tuple["Expr", ...] = ()
    reason: str = ""

    def walk(self) -> Iterator["Expr"]:
        yield self
        for child in self.children:
            yield from child.walk()

    @property
    def callee(self) -> Optional["Expr"]:
        return self.children[0] if self.kind is ExprKind.CALL else None

    @property
    def args(self) -> Tuple["Expr", ...]:
        return self.children[1:] if self.kind is ExprKind.CALL else ()

    def stripped(self) -> "Expr":
        """The expression with casts removed."""
        expr = self
        while expr.kind is ExprKind.CAST and expr.children:
            expr = expr.children[0]
        return expr

    def contains_opaque(self) -> bool:
        return any(e.kind is ExprKind.OPAQUE for e in self.walk())


@dataclass(frozen=True)
class Declarator:
    name: str
    type_text: str
    span: SourceSpan
    init: Optional[Expr] = None
    is_pointer: bool = False
    is_array: bool = False
    is_function: bool = False

    @property
    def is_integer(self) -> bool:
        if self.is_pointer or self.is_array or self.is_function:
            return False
        return is_integer_type(self.type_text)


_INTEGER_WORDS = frozenset({
    "int", "char", "short", "long", "unsigned", "signed", "size_t", "ssize_t",
    "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t",
    "uint32_t", "uint64_t", "off_t", "uintptr_t", "intptr_t", "_Bool", "bool",
})


def is_integer_type(type_text: str) -> bool:
    words = type_text.replace("*", " ").split()
    words = [w for w in words if w not in ("const", "volatile", "static", "register",
                                            "extern", "inline", "auto", "restrict")]
    return bool(words) and all(w in _INTEGER_WORDS for w in words)


class StmtKind(Enum):
    BLOCK = "block"
    EXPR = "expr"
    DECL = "decl"
    IF = "if"
    WHILE = "while"
    DO_WHILE = "do_while"
    FOR = "for"
    SWITCH = "switch"
    CASE = "case"
    RETURN = "return"
    BREAK = "break"
    CONTINUE = "continue"
    LABEL = "label"
    EMPTY = "empty"
    OPAQUE = "opaque"


@dataclass(frozen=True)
class Statement:
    """A statement node.

    ``expr`` holds the expression of EXPR/RETURN statements, the condition of
    IF/WHILE/DO_WHILE/FOR, the discriminant of SWITCH and the value of CASE
    (``None`` for ``default``). Loop bodies, switch bodies and case bodies
    live in ``children``; IF uses ``then``/``orelse``.
    """
    kind: StmtKind
    span: SourceSpan
    text: str
    expr: Optional[Expr] = None
    children: Tuple["Statement", ...] = ()
    declarators: Tuple[Declarator, ...] = ()
    init: Optional["Statement"] = None
    update: Optional[Expr] = None
    then: Optional["Statement"] = None
    orelse: Optional["Statement"] = None
    label: str = ""
    reason: str = ""
    condition_span: Optional[SourceSpan] = None

    def walk(self) -> Iterator["Statement"]:
        yield self
        for sub in (self.init, self.then, self.orelse):
            if sub is not None:
                yield from sub.walk()
        for child in self.children:
            yield from child.walk()

    def expressions(self) -> List[Expr]:
        exprs = [e for e in (self.expr, self.update) if e is not None]
        exprs.extend(d.init for d in self.declarators if d.init is not None)
        return exprs


@dataclass(frozen=True)
class Parameter:
    name: str
    type_text: str
    span: SourceSpan
    is_pointer: bool = False
    is_array: bool = False

    @property
    def is_integer(self) -> bool:
        return not (self.is_pointer or self.is_array) and is_integer_type(self.type_text)


@dataclass(frozen=True)
class FunctionAst:
    name: str
    parameters: Tuple[Parameter, ...]
    body: Statement
    span: SourceSpan
    return_type: str = ""
    variadic: bool = False
    opaque_regions: Tuple[Tuple[SourceSpan, str], ...] = ()

    def statements(self) -> Iterator[Statement]:
        return self.body.walk()

    def local_declarators(self) -> List[Declarator]:
        return [d for s in self.statements() if s.kind is StmtKind.DECL for d in s.declarators]


@dataclass(frozen=True)
class TranslationUnit:
    path: str
    functions: Tuple[FunctionAst, ...] = ()
    globals: Tuple[Declarator, ...] = ()
    skipped_regions: Tuple[Tuple[SourceSpan, str], ...] = ()
    source_text: str = field(default="", repr=False)
    encoding: str = "utf-8"
    opaque_exprs: Tuple[Tuple[SourceSpan, str], ...] = ()
    lines_of_code: int = 0

    @property
    def source_bytes(self) -> bytes:
        return self.source_text.encode("utf-8")

    def function(self, name: str) -> Optional[FunctionAst]:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None
