"""Expression language for CPDs.

Grammar (EBNF)::

    cpd      = head "(" expr { "," expr } ")" | expr ;
    head     = "Normal" | "Arithmetic" | "Uniform" | "Student" ;
    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = atom [ "^" unary ] ;
    atom     = number [ ident ] | ident | "(" expr ")" ;
    number   = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
    ident    = letter { letter | digit | "_" } ;

``+ - * /`` are left-associative, ``^`` is right-associative. A number
directly followed by an identifier (``0.3X``) is an implicit product.
Bare arithmetic text is shorthand for ``Arithmetic(...)``. The unicode
operators ``×``, ``÷`` and ``∧`` are accepted as ``*``, ``/`` and ``^``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Var", "Const", "BinOp", "Expr",
    "Normal", "Arithmetic", "Uniform", "Student", "Head",
    "ParsedCpdExpr", "ParseError",
    "parse", "parse_expr", "unparse", "substitute", "evaluate",
    "free_vars", "lint", "HEADS",
]


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is the 0-based character position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


# ----------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Const, BinOp]

OPS = ("+", "-", "*", "/", "^")
PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


@dataclass(frozen=True)
class Normal:
    mean: Expr
    variance: Expr

    @property
    def args(self) -> tuple:
        return (self.mean, self.variance)

    @property
    def sigma(self) -> float:
        return math.sqrt(constant_value(self.variance))


@dataclass(frozen=True)
class Arithmetic:
    value: Expr

    @property
    def args(self) -> tuple:
        return (self.value,)


@dataclass(frozen=True)
class Uniform:
    lo: Expr
    hi: Expr

    @property
    def args(self) -> tuple:
        return (self.lo, self.hi)


@dataclass(frozen=True)
class Student:
    """Parsed but not compilable: the distribution has no agreed parameterization."""

    params: tuple

    @property
    def args(self) -> tuple:
        return self.params


Head = Union[Normal, Arithmetic, Uniform, Student]

# name -> (constructor, allowed arities)
HEADS = {
    "Normal": (lambda a: Normal(a[0], a[1]), (2,)),
    "Arithmetic": (lambda a: Arithmetic(a[0]), (1,)),
    "Uniform": (lambda a: Uniform(a[0], a[1]), (2,)),
    "Student": (lambda a: Student(tuple(a)), (1, 2)),
}


def head_name(head: Head) -> str:
    return type(head).__name__


def rebuild(head: Head, args) -> Head:
    """Same head type with new argument ASTs."""
    return HEADS[head_name(head)][0](list(args))


@dataclass(frozen=True)
class ParsedCpdExpr:
    head: Head
    free_vars: tuple

    @classmethod
    def of(cls, head: Head) -> "ParsedCpdExpr":
        return cls(head, free_vars(head))

    def __str__(self) -> str:
        return unparse(self)


# ----------------------------------------------------------------------------
# Lexer

_UNICODE_OPS = {"×": "*", "÷": "/", "∧": "^", "−": "-"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | id | op | end
    text: str
    offset: int
    value: float = 0.0


def _tokenize(text: str) -> list:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            # exponent only when digits follow and no identifier chars trail them
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    if not (k < n and (text[k].isalpha() or text[k] == "_")):
                        j = k
            toks.append(_Tok("num", text[i:j], i, float(text[i:j])))
            # implicit multiplication: 0.3X
            if j < n and text[j].isalpha():
                toks.append(_Tok("op", "*", j))
            i = j
            continue
        if c.isalpha() and c.isascii():
            j = i + 1
            while j < n and text[j].isascii() and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("id", text[i:j], i))
            i = j
            continue
        if c in "+-*/^(),":
            toks.append(_Tok("op", c, i))
            i += 1
            continue
        if c in _UNICODE_OPS:
            toks.append(_Tok("op", _UNICODE_OPS[c], i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append(_Tok("end", "", n))
    return toks


# ----------------------------------------------------------------------------
# Parser (recursive descent)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def fail(self, message: str, tok: _Tok | None = None):
        tok = tok or self.tok
        if tok.kind == "end":
            # point at the last real token (e.g. a dangling comma)
            offset = self.toks[self.pos - 1].offset if self.pos > 0 else 0
            raise ParseError(f"unexpected end of input ({message})", offset)
        raise ParseError(f"{message}, found {tok.text!r}", tok.offset)

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def cpd(self) -> Head:
        t = self.tok
        nxt = self.toks[self.pos + 1]
        if t.kind == "id" and nxt.kind == "op" and nxt.text == "(":
            if t.text not in HEADS:
                raise ParseError(f"unknown distribution head {t.text!r}", t.offset)
            build, arities = HEADS[t.text]
            self.advance()
            open_tok = self.advance()
            args = [self.expr()]
            while self.at(","):
                self.advance()
                args.append(self.expr())
            if self.tok.kind == "end":
                raise ParseError("unbalanced parentheses", open_tok.offset)
            self.expect(")")
            if len(args) not in arities:
                raise ParseError(
                    f"{t.text} takes {' or '.join(map(str, arities))} argument(s), "
                    f"got {len(args)}", t.offset)
            head = build(args)
        else:
            head = Arithmetic(self.expr())
        if self.tok.kind != "end":
            if self.at(")"):
                raise ParseError("unbalanced parentheses", self.tok.offset)
            self.fail("expected end of input")
        return head

    def expr(self) -> Expr:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.at("-"):
            self.advance()
            operand = self.unary()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return BinOp("*", Const(-1.0), operand)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(t.value)
        if t.kind == "id":
            if self.toks[self.pos + 1].kind == "op" and self.toks[self.pos + 1].text == "(":
                if t.text in HEADS:
                    raise ParseError(f"distribution head {t.text!r} not allowed here", t.offset)
                raise ParseError(f"unknown distribution head {t.text!r}", t.offset)
            self.advance()
            return Var(t.text)
        if self.at("("):
            open_tok = self.advance()
            inner = self.expr()
            if self.tok.kind == "end":
                raise ParseError("unbalanced parentheses", open_tok.offset)
            self.expect(")")
            return inner
        if self.at(")"):
            raise ParseError("unbalanced parentheses", t.offset)
        self.fail("expected a number, identifier or '('")


def parse(text: str) -> ParsedCpdExpr:
    """Parse CPD text such as ``"Normal(0.3X + 0.1Y + Z, 1000)"``."""
    head = _Parser(text).cpd()
    if isinstance(head, Normal):
        _check_constant(head.variance, "Normal variance", text)
        if constant_value(head.variance) <= 0:
            raise ParseError("Normal variance must be positive", 0)
    return ParsedCpdExpr.of(head)


def parse_expr(text: str) -> Expr:
    """Parse a bare arithmetic expression (no distribution head)."""
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "end":
        if p.at(")"):
            raise ParseError("unbalanced parentheses", p.tok.offset)
        p.fail("expected end of input")
    return node


def _check_constant(ast: Expr, what: str, text: str):
    names = _vars_in_order(ast)
    if names:
        raise ParseError(f"{what} must be constant (references {names[0]!r})",
                         max(text.find(names[0]), 0))


# ----------------------------------------------------------------------------
# Printing


def _fmt_const(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return PRECEDENCE[node.op]
    return 4


def _unparse_ast(node: Expr, top: bool = True) -> str:
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        s = _fmt_const(node.value)
        if node.value < 0 or (node.value == 0 and math.copysign(1, node.value) < 0):
            s = s if s.startswith("-") else "-" + s
            return s if top else f"({s})"
        return s
    p = PRECEDENCE[node.op]
    left = _unparse_ast(node.left, top=False)
    right = _unparse_ast(node.right, top=False)
    if _prec(node.left) < p or (node.op == "^" and _prec(node.left) == p):
        left = f"({left})"
    if _prec(node.right) < p or (node.op != "^" and _prec(node.right) == p):
        right = f"({right})"
    if node.op in "*^":
        return f"{left}{node.op}{right}"
    return f"{left} {node.op} {right}"


def unparse(obj) -> str:
    """Canonical text: minimal parentheses, explicit ``*``."""
    if isinstance(obj, ParsedCpdExpr):
        obj = obj.head
    if isinstance(obj, (Normal, Arithmetic, Uniform, Student)):
        inner = ", ".join(_unparse_ast(a) for a in obj.args)
        return f"{head_name(obj)}({inner})"
    return _unparse_ast(obj)


# ----------------------------------------------------------------------------
# Queries and rewriting


def _vars_in_order(node, out=None) -> list:
    out = [] if out is None else out
    if isinstance(node, Var):
        if node.name not in out:
            out.append(node.name)
    elif isinstance(node, BinOp):
        _vars_in_order(node.left, out)
        _vars_in_order(node.right, out)
    return out


def free_vars(obj) -> tuple:
    """Referenced variable names in first-occurrence order."""
    if isinstance(obj, ParsedCpdExpr):
        return obj.free_vars
    if isinstance(obj, (Normal, Arithmetic, Uniform, Student)):
        out: list = []
        for a in obj.args:
            _vars_in_order(a, out)
        return tuple(out)
    return tuple(_vars_in_order(obj))


def constant_value(node: Expr) -> float:
    return float(evaluate(node, {}))


def substitute(ast, target, replacement):
    """Replace every occurrence of ``target`` in ``ast``.

    ``target`` is a variable name or a subtree; ``replacement`` an AST or a
    variable name. Works on bare ASTs and on distribution heads. Returns
    ``(new_ast, found)``; when ``found`` is False the input is returned as is.
    """
    if isinstance(target, str):
        target = Var(target)
    if isinstance(replacement, str):
        replacement = Var(replacement)

    found = False

    def walk(node):
        nonlocal found
        if node == target:
            found = True
            return replacement
        if isinstance(node, BinOp):
            left, right = walk(node.left), walk(node.right)
            if left is node.left and right is node.right:
                return node
            return BinOp(node.op, left, right)
        return node

    if isinstance(ast, ParsedCpdExpr):
        new_head, found = substitute(ast.head, target, replacement)
        return (ParsedCpdExpr.of(new_head) if found else ast), found
    if isinstance(ast, (Normal, Arithmetic, Uniform, Student)):
        new = rebuild(ast, [walk(a) for a in ast.args])
        return (new if found else ast), found
    new = walk(ast)
    return (new if found else ast), found


def evaluate(node: Expr, env: Mapping):
    """Evaluate on numpy arrays (broadcasting) or plain floats."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise KeyError(f"unbound variable {node.name!r}") from None
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.ndim(a) == 0 and np.ndim(b) == 0 and b == 0:
                return math.copysign(math.inf, a) if a != 0 else math.nan
            return np.true_divide(a, b)
        return np.power(np.asarray(a, dtype=float), b) if np.ndim(a) or np.ndim(b) \
            else _scalar_pow(a, b)


def _scalar_pow(a: float, b: float) -> float:
    try:
        r = a ** b
    except (OverflowError, ZeroDivisionError):
        return math.inf
    return r if isinstance(r, float) or isinstance(r, int) else math.nan


def lint(obj) -> list:
    """Warnings for division or power by a literal zero."""
    out = []

    def walk(node):
        if isinstance(node, BinOp):
            if node.op in "/^" and isinstance(node.right, Const) and node.right.value == 0:
                kind = "division" if node.op == "/" else "power"
                out.append(f"{kind} by constant zero in {unparse(node)!r}")
            walk(node.left)
            walk(node.right)

    args = obj.head.args if isinstance(obj, ParsedCpdExpr) else (
        obj.args if isinstance(obj, (Normal, Arithmetic, Uniform, Student)) else (obj,))
    for a in args:
        walk(a)
    return out


def count_ops(node: Expr) -> int:
    if isinstance(node, BinOp):
        return 1 + count_ops(node.left) + count_ops(node.right)
    return 0
