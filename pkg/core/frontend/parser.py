#!/usr/bin/env python3
"""
Robust C frontend.

Parses preprocessed translation units with tree-sitter and lowers them to the
small statement/expression tree in ``core.frontend.ast``. Constructs outside
the supported subset never abort the parse: at top level they become skipped
regions, inside function bodies they become OPAQUE nodes.
"""

import re
import bisect
import logging
from typing import Dict, List, Optional, Tuple

import tree_sitter_c as tsc
from tree_sitter import Language, Node, Parser

from core.frontend.ast import (
    Declarator, Expr, ExprKind, FunctionAst, Parameter, Statement, StmtKind,
    TranslationUnit,
)
from core.utils.common import SourceSpan
from core.utils.errors import UnbalancedDelimiters

logger = logging.getLogger(__name__)

C_LANGUAGE = Language(tsc.language())

LINE_MARKER = re.compile(r'^\s*#\s*(?:line\s+)?(\d+)(?:\s+"((?:[^"\\]|\\.)*)")?')

GOTO_REASON = "goto: modeled as opaque CFG edge"
ASM_REASON = "inline asm: modeled as opaque statement"
NONLOCAL_REASON = "setjmp/longjmp: non-local control flow modeled as opaque"
VARARGS_REASON = "varargs: va_* access modeled as opaque"
UNPARSED_REASON = "unparsed construct"
RESIDUE_REASON = "preprocessor residue inside function body"
DIRECTIVE_REASON = "preprocessor directive outside the supported subset"
KNR_REASON = "K&R-style parameter declarations"
UNBALANCED_REASON = "unbalanced delimiters: whole file skipped"

NONLOCAL_CALLS = frozenset({"setjmp", "_setjmp", "sigsetjmp", "longjmp", "_longjmp", "siglongjmp"})
VARARG_CALLS = frozenset({"va_start", "va_arg", "va_end", "va_copy", "__builtin_va_start",
                          "__builtin_va_arg", "__builtin_va_end", "__builtin_va_copy"})

_TOP_LEVEL_OK = frozenset({
    "function_definition", "declaration", "type_definition", "struct_specifier",
    "union_specifier", "enum_specifier", "comment",
})
_LITERALS = {
    "number_literal": ExprKind.NUMBER, "true": ExprKind.NUMBER, "false": ExprKind.NUMBER,
    "null": ExprKind.NUMBER, "string_literal": ExprKind.STRING,
    "concatenated_string": ExprKind.STRING, "char_literal": ExprKind.CHAR,
}


def read_source(path: str) -> Tuple[str, str]:
    """Read a C file as UTF-8, falling back to Latin-1.

    Returns:
        Tuple[str, str]: decoded text and the encoding that worked.
    """
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        return raw.decode('utf-8'), 'utf-8'
    except UnicodeDecodeError:
        return raw.decode('latin-1'), 'latin-1'


def _new_parser() -> Parser:
    return Parser(C_LANGUAGE)


class _LineMap:
    """Maps physical lines to locations named by preprocessor line markers."""

    def __init__(self):
        self._starts: List[int] = []
        self._targets: List[Tuple[str, int]] = []

    def add(self, physical_line: int, origin_file: str, origin_line: int):
        self._starts.append(physical_line)
        self._targets.append((origin_file, origin_line))

    def lookup(self, physical_line: int) -> Tuple[Optional[str], Optional[int]]:
        idx = bisect.bisect_right(self._starts, physical_line) - 1
        if idx < 0:
            return None, None
        origin_file, origin_line = self._targets[idx]
        return origin_file, origin_line + (physical_line - self._starts[idx])


def _blank(data: bytes) -> bytes:
    return bytes(b if b in (0x0A, 0x0D) else 0x20 for b in data)


def _scan_directives(source: bytes, path: str) -> Tuple[bytes, _LineMap, List[Tuple[int, int]]]:
    """Blank every directive line (keeping byte length) and collect line markers.

    Returns:
        the blanked buffer, the line map, and byte ranges of non-marker directives.
    """
    line_map = _LineMap()
    directives: List[Tuple[int, int]] = []
    out = bytearray(source)
    lines = source.splitlines(keepends=True)
    current_file = path
    offset = 0
    idx = 0
    while idx < len(lines):
        line = lines[idx]
        stripped = line.lstrip()
        if not stripped.startswith(b"#"):
            offset += len(line)
            idx += 1
            continue

        start = offset
        end = offset + len(line)
        physical_line = idx + 1
        while lines[idx].rstrip(b"\r\n").endswith(b"\\") and idx + 1 < len(lines):
            idx += 1
            end += len(lines[idx])
        idx += 1
        offset = end

        text = source[start:end].decode('utf-8', errors='replace')
        marker = LINE_MARKER.match(text)
        if marker:
            if marker.group(2) is not None:
                current_file = marker.group(2)
            line_map.add(physical_line + 1, current_file, int(marker.group(1)))
        else:
            directives.append((start, end))
        out[start:end] = _blank(source[start:end])
    return bytes(out), line_map, directives


def _check_balance(buffer: bytes, path: str):
    """Match ()[]{} outside comments and literals; raise on the first mismatch."""
    pairs = {ord(')'): ord('('), ord(']'): ord('['), ord('}'): ord('{')}
    stack: List[Tuple[int, int]] = []
    i, n = 0, len(buffer)
    while i < n:
        c = buffer[i]
        if c == ord('/') and i + 1 < n and buffer[i + 1] == ord('*'):
            close = buffer.find(b"*/", i + 2)
            i = n if close < 0 else close + 2
            continue
        if c == ord('/') and i + 1 < n and buffer[i + 1] == ord('/'):
            close = buffer.find(b"\n", i)
            i = n if close < 0 else close
            continue
        if c in (ord('"'), ord("'")):
            j = i + 1
            while j < n and buffer[j] != c and buffer[j] != ord('\n'):
                j += 2 if buffer[j] == ord('\\') else 1
            i = j + 1
            continue
        if c in (ord('('), ord('['), ord('{')):
            stack.append((c, i))
        elif c in pairs:
            if not stack or stack[-1][0] != pairs[c]:
                raise UnbalancedDelimiters(path, i, chr(c))
            stack.pop()
        i += 1
    if stack:
        c, pos = stack[-1]
        raise UnbalancedDelimiters(path, pos, chr(c))


class _UnitBuilder:
    """Lowers one tree-sitter tree into a TranslationUnit."""

    def __init__(self, path: str, source: bytes, line_map: _LineMap):
        self.path = path
        self.source = source
        self.line_map = line_map
        self._line_starts = [0]
        for pos, byte in enumerate(source):
            if byte == 0x0A:
                self._line_starts.append(pos + 1)
        self.opaque_exprs: List[Tuple[SourceSpan, str]] = []

    # -- locations -----------------------------------------------------------
    def span(self, start: int, end: int) -> SourceSpan:
        start_line = bisect.bisect_right(self._line_starts, start) - 1
        end_line = bisect.bisect_right(self._line_starts, max(start, end - 1)) - 1
        origin_file, origin_line = self.line_map.lookup(start_line + 1)
        return SourceSpan(
            file=self.path,
            start_line=start_line + 1,
            start_col=start - self._line_starts[start_line] + 1,
            end_line=end_line + 1,
            end_col=end - self._line_starts[end_line] + 1,
            byte_start=start,
            byte_end=end,
            origin_file=origin_file,
            origin_line=origin_line,
        )

    def node_span(self, node: Node) -> SourceSpan:
        return self.span(node.start_byte, node.end_byte)

    def text(self, node: Node) -> str:
        return self.source[node.start_byte:node.end_byte].decode('utf-8', errors='replace')

    # -- declarators -----------------------------------------------------------
    def _unwrap_declarator(self, node: Optional[Node]) -> Tuple[str, bool, bool, bool]:
        """Return (name, is_pointer, is_array, is_function) for a declarator chain."""
        is_pointer = is_array = False
        saw_function = False
        pointer_inside_function = False
        while node is not None:
            if node.type in ("identifier", "field_identifier", "type_identifier"):
                is_function = saw_function and not pointer_inside_function
                if saw_function and pointer_inside_function:
                    is_pointer = True
                return self.text(node), is_pointer, is_array, is_function
            if node.type == "pointer_declarator":
                if saw_function:
                    pointer_inside_function = True
                else:
                    is_pointer = True
            elif node.type == "array_declarator":
                is_array = True
            elif node.type == "function_declarator":
                saw_function = True
            nxt = node.child_by_field_name("declarator")
            if nxt is None:
                named = [c for c in node.named_children if c.type != "comment"]
                nxt = named[0] if node.type == "parenthesized_declarator" and named else None
            node = nxt
        return "", is_pointer, is_array, saw_function

    def declarators(self, decl: Node) -> Tuple[Declarator, ...]:
        type_node = decl.child_by_field_name("type")
        type_text = self.text(type_node) if type_node is not None else ""
        result = []
        for child in decl.children_by_field_name("declarator"):
            init = None
            target = child
            if child.type == "init_declarator":
                target = child.child_by_field_name("declarator")
                value = child.child_by_field_name("value")
                init = self.expr(value) if value is not None else None
            name, is_pointer, is_array, is_function = self._unwrap_declarator(target)
            if not name:
                continue
            result.append(Declarator(
                name=name, type_text=type_text, span=self.node_span(child), init=init,
                is_pointer=is_pointer, is_array=is_array, is_function=is_function,
            ))
        return tuple(result)

    # -- expressions -------------------------------------------------------------
    def _opaque_expr(self, node: Node, reason: str) -> Expr:
        span = self.node_span(node)
        self.opaque_exprs.append((span, reason))
        return Expr(ExprKind.OPAQUE, span, self.text(node), reason=reason)

    def expr(self, node: Optional[Node]) -> Optional[Expr]:
        if node is None:
            return None
        kind = node.type
        span = self.node_span(node)
        text = self.text(node)

        if node.is_missing or kind == "ERROR":
            return self._opaque_expr(node, UNPARSED_REASON)
        if kind == "identifier":
            return Expr(ExprKind.IDENT, span, text, name=text)
        if kind in _LITERALS:
            return Expr(_LITERALS[kind], span, text)
        if kind == "parenthesized_expression":
            inner = [c for c in node.named_children if c.type != "comment"]
            if len(inner) != 1:
                return self._opaque_expr(node, UNPARSED_REASON)
            return self.expr(inner[0])
        if kind == "call_expression":
            function = node.child_by_field_name("function")
            arguments = node.child_by_field_name("arguments")
            callee_name = self.text(function) if function is not None and function.type == "identifier" else ""
            if callee_name in NONLOCAL_CALLS:
                return self._opaque_expr(node, NONLOCAL_REASON)
            if callee_name in VARARG_CALLS:
                return self._opaque_expr(node, VARARGS_REASON)
            if function is None or arguments is None or arguments.has_error:
                return self._opaque_expr(node, UNPARSED_REASON)
            args = [self.expr(a) for a in arguments.named_children if a.type != "comment"]
            return Expr(ExprKind.CALL, span, text, name=callee_name,
                        children=(self.expr(function),) + tuple(args))
        if kind in ("assignment_expression", "binary_expression"):
            left = node.child_by_field_name("left")
            right = node.child_by_field_name("right")
            operator = node.child_by_field_name("operator")
            if left is None or right is None or operator is None:
                return self._opaque_expr(node, UNPARSED_REASON)
            expr_kind = ExprKind.ASSIGN if kind == "assignment_expression" else ExprKind.BINARY
            return Expr(expr_kind, span, text, op=operator.type,
                        children=(self.expr(left), self.expr(right)))
        if kind in ("update_expression", "unary_expression", "pointer_expression"):
            argument = node.child_by_field_name("argument")
            operator = node.child_by_field_name("operator")
            if argument is None or operator is None:
                return self._opaque_expr(node, UNPARSED_REASON)
            op = operator.type
            if kind == "update_expression":
                expr_kind = ExprKind.UPDATE
            elif kind == "pointer_expression":
                expr_kind = ExprKind.DEREF if op == "*" else ExprKind.ADDR
            else:
                expr_kind = ExprKind.UNARY
            return Expr(expr_kind, span, text, op=op, children=(self.expr(argument),))
        if kind == "field_expression":
            argument = node.child_by_field_name("argument")
            field = node.child_by_field_name("field")
            operator = node.child_by_field_name("operator")
            if argument is None or field is None:
                return self._opaque_expr(node, UNPARSED_REASON)
            op = operator.type if operator is not None else "."
            return Expr(ExprKind.MEMBER, span, text, op=op, name=self.text(field),
                        children=(self.expr(argument),))
        if kind == "subscript_expression":
            parts = [c for c in node.named_children if c.type != "comment"]
            if len(parts) != 2:
                return self._opaque_expr(node, UNPARSED_REASON)
            index = parts[1]
            if index.type == "subscript_argument_list" and index.named_children:
                index = index.named_children[0]
            return Expr(ExprKind.INDEX, span, text, children=(self.expr(parts[0]), self.expr(index)))
        if kind == "cast_expression":
            type_node = node.child_by_field_name("type")
            value = node.child_by_field_name("value")
            if value is None:
                return self._opaque_expr(node, UNPARSED_REASON)
            return Expr(ExprKind.CAST, span, text,
                        name=self.text(type_node) if type_node is not None else "",
                        children=(self.expr(value),))
        if kind in ("sizeof_expression", "alignof_expression", "offsetof_expression"):
            return Expr(ExprKind.SIZEOF, span, text)
        if kind == "conditional_expression":
            parts = [node.child_by_field_name(f) for f in ("condition", "consequence", "alternative")]
            if any(p is None for p in parts):
                return self._opaque_expr(node, UNPARSED_REASON)
            return Expr(ExprKind.COND, span, text, children=tuple(self.expr(p) for p in parts))
        if kind == "comma_expression":
            left = node.child_by_field_name("left")
            right = node.child_by_field_name("right")
            if left is None or right is None:
                return self._opaque_expr(node, UNPARSED_REASON)
            return Expr(ExprKind.COMMA, span, text, children=(self.expr(left), self.expr(right)))
        if kind in ("initializer_list", "compound_literal_expression"):
            values = []
            for child in node.named_children:
                if child.type == "comment" or child.type == "type_descriptor":
                    continue
                if child.type == "initializer_pair":
                    child = child.child_by_field_name("value")
                if child is not None:
                    values.append(self.expr(child))
            return Expr(ExprKind.INIT_LIST, span, text, children=tuple(values))
        if kind == "gnu_asm_expression":
            return self._opaque_expr(node, ASM_REASON)
        return self._opaque_expr(node, f"unsupported expression: {kind}")

    def condition(self, node: Optional[Node]) -> Tuple[Optional[Expr], Optional[SourceSpan]]:
        if node is None:
            return None, None
        if node.type == "parenthesized_expression":
            inner = [c for c in node.named_children if c.type != "comment"]
            if len(inner) == 1:
                return self.expr(inner[0]), self.node_span(inner[0])
        return self.expr(node), self.node_span(node)

    # -- statements ----------------------------------------------------------------
    def _opaque_stmt(self, node: Node, reason: str, label: str = "") -> Statement:
        return Statement(StmtKind.OPAQUE, self.node_span(node), self.text(node),
                         label=label, reason=reason)

    def _block_items(self, nodes: List[Node]) -> Tuple[Statement, ...]:
        items = []
        for child in nodes:
            stmt = self.statement(child)
            if stmt is not None:
                items.append(stmt)
        return tuple(items)

    def statement(self, node: Node) -> Optional[Statement]:
        kind = node.type
        span = self.node_span(node)
        text = self.text(node)

        if kind == "comment" or not node.is_named:
            return None
        if kind == "compound_statement":
            return Statement(StmtKind.BLOCK, span, text, children=self._block_items(node.named_children))
        if kind == "ERROR" or node.is_missing:
            return self._opaque_stmt(node, UNPARSED_REASON)
        if kind == "expression_statement":
            if node.has_error:
                return self._opaque_stmt(node, UNPARSED_REASON)
            named = [c for c in node.named_children if c.type != "comment"]
            if not named:
                return Statement(StmtKind.EMPTY, span, text)
            expr = self.expr(named[0])
            top = expr.stripped()
            if top.kind is ExprKind.OPAQUE:
                return Statement(StmtKind.OPAQUE, span, text, expr=expr, reason=top.reason)
            return Statement(StmtKind.EXPR, span, text, expr=expr)
        if kind == "declaration":
            if node.has_error:
                return self._opaque_stmt(node, UNPARSED_REASON)
            return Statement(StmtKind.DECL, span, text, declarators=self.declarators(node))
        if kind in ("type_definition", "struct_specifier", "union_specifier", "enum_specifier"):
            return Statement(StmtKind.EMPTY, span, text)
        if kind == "if_statement":
            cond_node = node.child_by_field_name("condition")
            if cond_node is None or cond_node.has_error:
                return self._opaque_stmt(node, UNPARSED_REASON)
            cond, cond_span = self.condition(cond_node)
            consequence = node.child_by_field_name("consequence")
            alternative = node.child_by_field_name("alternative")
            if alternative is not None and alternative.type == "else_clause":
                inner = [c for c in alternative.named_children if c.type != "comment"]
                alternative = inner[0] if inner else None
            then = self.statement(consequence) if consequence is not None else None
            orelse = self.statement(alternative) if alternative is not None else None
            return Statement(StmtKind.IF, span, text, expr=cond, then=then or Statement(StmtKind.EMPTY, span, ""),
                             orelse=orelse, condition_span=cond_span)
        if kind in ("while_statement", "do_statement"):
            cond_node = node.child_by_field_name("condition")
            body = node.child_by_field_name("body")
            if cond_node is None or cond_node.has_error or body is None:
                return self._opaque_stmt(node, UNPARSED_REASON)
            cond, cond_span = self.condition(cond_node)
            body_stmt = self.statement(body)
            stmt_kind = StmtKind.WHILE if kind == "while_statement" else StmtKind.DO_WHILE
            return Statement(stmt_kind, span, text, expr=cond,
                             children=(body_stmt,) if body_stmt is not None else (),
                             condition_span=cond_span)
        if kind == "for_statement":
            return self._for_statement(node)
        if kind == "switch_statement":
            cond_node = node.child_by_field_name("condition")
            body = node.child_by_field_name("body")
            if cond_node is None or cond_node.has_error or body is None:
                return self._opaque_stmt(node, UNPARSED_REASON)
            cond, cond_span = self.condition(cond_node)
            cases = []
            for child in body.named_children:
                stmt = self.statement(child)
                if stmt is None:
                    continue
                if stmt.kind is not StmtKind.CASE:
                    # statements before the first label are unreachable
                    continue
                cases.append(stmt)
            return Statement(StmtKind.SWITCH, span, text, expr=cond, children=tuple(cases),
                             condition_span=cond_span)
        if kind == "case_statement":
            value = node.child_by_field_name("value")
            body_nodes = [c for c in node.named_children
                          if value is None or c.start_byte != value.start_byte or c.end_byte != value.end_byte]
            return Statement(StmtKind.CASE, span, text, expr=self.expr(value) if value is not None else None,
                             children=self._block_items(body_nodes))
        if kind == "return_statement":
            named = [c for c in node.named_children if c.type != "comment"]
            if node.has_error:
                return self._opaque_stmt(node, UNPARSED_REASON)
            return Statement(StmtKind.RETURN, span, text, expr=self.expr(named[0]) if named else None)
        if kind == "break_statement":
            return Statement(StmtKind.BREAK, span, text)
        if kind == "continue_statement":
            return Statement(StmtKind.CONTINUE, span, text)
        if kind == "goto_statement":
            label = node.child_by_field_name("label")
            return self._opaque_stmt(node, GOTO_REASON, label=self.text(label) if label is not None else "")
        if kind == "labeled_statement":
            label = node.child_by_field_name("label")
            inner = [c for c in node.named_children if label is None or c.start_byte != label.start_byte]
            inner_stmt = self.statement(inner[-1]) if inner else None
            return Statement(StmtKind.LABEL, span, text, label=self.text(label) if label is not None else "",
                             children=(inner_stmt,) if inner_stmt is not None else ())
        return self._opaque_stmt(node, f"unsupported statement: {kind}")

    def _for_statement(self, node: Node) -> Statement:
        span = self.node_span(node)
        text = self.text(node)
        initializer = node.child_by_field_name("initializer")
        cond_node = node.child_by_field_name("condition")
        update = node.child_by_field_name("update")
        body = node.child_by_field_name("body")
        if body is None or any(n is not None and n.has_error for n in (initializer, cond_node, update)):
            return self._opaque_stmt(node, UNPARSED_REASON)

        init_stmt = None
        if initializer is not None:
            if initializer.type == "declaration":
                init_stmt = Statement(StmtKind.DECL, self.node_span(initializer), self.text(initializer),
                                      declarators=self.declarators(initializer))
            else:
                init_stmt = Statement(StmtKind.EXPR, self.node_span(initializer), self.text(initializer),
                                      expr=self.expr(initializer))
        cond, cond_span = self.condition(cond_node)
        body_stmt = self.statement(body)
        return Statement(StmtKind.FOR, span, text, expr=cond, init=init_stmt,
                         update=self.expr(update) if update is not None else None,
                         children=(body_stmt,) if body_stmt is not None else (),
                         condition_span=cond_span)

    # -- functions -------------------------------------------------------------------
    def _function_declarator(self, node: Optional[Node]) -> Optional[Node]:
        while node is not None and node.type != "function_declarator":
            nxt = node.child_by_field_name("declarator")
            if nxt is None and node.type == "parenthesized_declarator" and node.named_children:
                nxt = node.named_children[0]
            node = nxt
        return node

    def parameters(self, declarator: Node) -> Tuple[Tuple[Parameter, ...], bool]:
        params_node = declarator.child_by_field_name("parameters")
        params: List[Parameter] = []
        variadic = False
        if params_node is None:
            return (), False
        for index, child in enumerate(params_node.named_children):
            if child.type == "variadic_parameter":
                variadic = True
                continue
            if child.type != "parameter_declaration":
                continue
            type_node = child.child_by_field_name("type")
            type_text = self.text(type_node) if type_node is not None else ""
            decl = child.child_by_field_name("declarator")
            if decl is None:
                if type_text == "void" and len(params_node.named_children) == 1:
                    break
                name, is_pointer, is_array = f"__unnamed{index}", False, False
            else:
                name, is_pointer, is_array, is_function = self._unwrap_declarator(decl)
                if not name:
                    name = f"__unnamed{index}"
                    is_pointer = is_pointer or decl.type.startswith("abstract_pointer")
                if is_function:
                    is_pointer = True
            params.append(Parameter(name=name, type_text=type_text, span=self.node_span(child),
                                    is_pointer=is_pointer, is_array=is_array))
        return tuple(params), variadic

    def function(self, node: Node) -> Tuple[Optional[FunctionAst], Optional[str]]:
        """Lower a function_definition; returns (function, skip reason)."""
        if any(c.type == "declaration" for c in node.children):
            return None, KNR_REASON
        declarator = self._function_declarator(node.child_by_field_name("declarator"))
        body = node.child_by_field_name("body")
        if declarator is None or body is None or declarator.has_error:
            return None, UNPARSED_REASON
        name_node = declarator.child_by_field_name("declarator")
        while name_node is not None and name_node.type == "parenthesized_declarator" and name_node.named_children:
            name_node = name_node.named_children[0]
        if name_node is None or name_node.type != "identifier":
            return None, UNPARSED_REASON

        params, variadic = self.parameters(declarator)
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            return None, "duplicate parameter names"
        type_node = node.child_by_field_name("type")
        body_stmt = self.statement(body)
        return FunctionAst(
            name=self.text(name_node),
            parameters=params,
            body=body_stmt,
            span=self.node_span(node),
            return_type=self.text(type_node) if type_node is not None else "",
            variadic=variadic,
        ), None


def _count_loc(buffer: bytes, tree) -> int:
    """Non-blank, non-comment lines of the (directive-blanked) buffer."""
    data = bytearray(buffer)
    stack = [tree.root_node]
    while stack:
        node = stack.pop()
        if node.type == "comment":
            data[node.start_byte:node.end_byte] = _blank(bytes(data[node.start_byte:node.end_byte]))
            continue
        stack.extend(node.children)
    return sum(1 for line in bytes(data).splitlines() if line.strip())


def parse_unit(source_text: str, path: str) -> TranslationUnit:
    """Parse one preprocessed C translation unit.

    Args:
        source_text: preprocessor-expanded C; line markers are honoured.
        path: the file's path, recorded in every span.

    Returns:
        TranslationUnit: functions of the supported subset, global
        declarations, and the skipped top-level regions with reasons.
    """
    source = source_text.encode('utf-8')
    if not source.strip():
        return TranslationUnit(path=path, source_text=source_text)

    blanked, line_map, directives = _scan_directives(source, path)
    builder = _UnitBuilder(path, source, line_map)

    try:
        _check_balance(blanked, path)
    except UnbalancedDelimiters as e:
        logger.warning(f"{e}; skipping whole file")
        return TranslationUnit(
            path=path,
            skipped_regions=((builder.span(0, len(source)), UNBALANCED_REASON),),
            source_text=source_text,
        )

    tree = _new_parser().parse(blanked)
    functions: List[FunctionAst] = []
    globals_: List[Declarator] = []
    skipped: List[Tuple[SourceSpan, str]] = []

    def visit_top(node: Node):
        if not node.is_named:
            return
        if node.type == "function_definition":
            fn, reason = builder.function(node)
            if fn is not None:
                functions.append(fn)
            else:
                skipped.append((builder.node_span(node), reason))
        elif node.type == "declaration":
            if node.has_error:
                skipped.append((builder.node_span(node), UNPARSED_REASON))
            else:
                globals_.extend(builder.declarators(node))
        elif node.type in _TOP_LEVEL_OK:
            return
        elif node.type == "ERROR":
            # keep any complete function the error recovery wrapped
            cursor = node.start_byte
            for child in node.named_children:
                if child.type == "function_definition" and not child.has_error:
                    if child.start_byte > cursor:
                        skipped.append((builder.span(cursor, child.start_byte), UNPARSED_REASON))
                    visit_top(child)
                    cursor = child.end_byte
            if node.end_byte > cursor and blanked[cursor:node.end_byte].strip():
                skipped.append((builder.span(cursor, node.end_byte), UNPARSED_REASON))
        else:
            skipped.append((builder.node_span(node), f"unsupported top-level construct: {node.type}"))

    for top in tree.root_node.children:
        visit_top(top)

    # directives inside bodies are residue of the function, never skipped regions
    bodies = [fn.span for fn in functions]
    residue: Dict[int, List[Tuple[SourceSpan, str]]] = {}
    for start, end in directives:
        span = builder.span(start, end)
        owner = next((i for i, b in enumerate(bodies) if b.byte_start <= start < b.byte_end), None)
        if owner is None:
            skipped.append((span, DIRECTIVE_REASON))
        else:
            residue.setdefault(owner, []).append((span, RESIDUE_REASON))
    if residue:
        functions = [
            FunctionAst(fn.name, fn.parameters, fn.body, fn.span, fn.return_type, fn.variadic,
                        tuple(residue.get(i, ())))
            for i, fn in enumerate(functions)
        ]

    skipped.sort(key=lambda item: item[0].byte_start)
    unit = TranslationUnit(
        path=path,
        functions=tuple(functions),
        globals=tuple(globals_),
        skipped_regions=tuple(skipped),
        source_text=source_text,
        opaque_exprs=tuple(builder.opaque_exprs),
        lines_of_code=_count_loc(blanked, tree),
    )
    logger.debug(f"Parsed {path}: {len(functions)} functions, {len(skipped)} skipped regions")
    return unit


def supported_subset_report(unit: TranslationUnit) -> List[Tuple[SourceSpan, str]]:
    """List every skipped or opaque construct of a unit with a reason.

    An empty list means the unit is fully covered by the supported subset.
    """
    entries: List[Tuple[SourceSpan, str]] = list(unit.skipped_regions)
    opaque_stmt_spans = set()
    for fn in unit.functions:
        entries.extend(fn.opaque_regions)
        for stmt in fn.statements():
            if stmt.kind is StmtKind.OPAQUE:
                entries.append((stmt.span, stmt.reason))
                opaque_stmt_spans.add((stmt.span.byte_start, stmt.span.byte_end))
    for span, reason in unit.opaque_exprs:
        # opaque expressions that already made their statement opaque count once
        if not any(s <= span.byte_start and span.byte_end <= e for s, e in opaque_stmt_spans):
            entries.append((span, reason))
    entries.sort(key=lambda item: (item[0].file, item[0].byte_start, item[0].byte_end))
    return entries
