"""Lexer and recursive-descent parser for .ixl source files."""

from __future__ import annotations

import re
from typing import Optional

from .ast import (
    App,
    BinOp,
    Const,
    FunDef,
    If,
    IndexE,
    Let,
    Lambda,
    Loop,
    LoopParam,
    NotE,
    Param,
    Program,
    TArray,
    TBase,
    TFun,
    TTuple,
    TupleE,
    Type,
    VarE,
)
from .syms import FRESH_SIGIL


class ParseError(Exception):
    def __init__(self, pos, msg):
        super().__init__(f"{pos[0]}:{pos[1]}: {msg}")
        self.pos = pos
        self.msg = msg


class ScopeError(Exception):
    def __init__(self, pos, msg):
        super().__init__(f"{pos[0]}:{pos[1]}: {msg}")
        self.pos = pos
        self.msg = msg


class ArityError(ScopeError):
    pass


_TOKEN = re.compile(
    r"(?P<ws>\s+|--[^\n]*)"
    r"|(?P<num>\d+(?:\.\d+)?(?:[a-zA-Z]\w*)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9'.]*|%[\w.]*)"
    r"|(?P<op>->|\|\||&&|==|!=|<=|>=|[][(){},:.|\\<>=!+\-*/_])"
)

KEYWORDS = {
    "def",
    "let",
    "in",
    "if",
    "then",
    "else",
    "loop",
    "while",
    "for",
    "do",
    "true",
    "false",
    "inf",
}

BASE_TYPES = {"i64", "f64", "f32", "bool"}


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _lex(text: str, path: str):
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError((line, col), f"unexpected character {text[pos]!r}")
        chunk = m.group(0)
        if not m.group("ws"):
            kind = "num" if m.group("num") else ("name" if m.group("name") else "op")
            if kind == "name" and chunk.startswith(FRESH_SIGIL):
                raise ParseError(
                    (line, col), f"identifiers may not start with {FRESH_SIGIL!r}"
                )
            toks.append(_Tok(kind, chunk, (line, col)))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    toks.append(_Tok("eof", "", (line, col)))
    return toks


_CMP = ("==", "!=", "<=", ">=", "<", ">")


class Parser:
    def __init__(self, text: str, path: str = "<input>"):
        self.toks = _lex(text, path)
        self.i = 0
        self.path = path

    # -- token plumbing -----------------------------------------------------

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "eof"

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            raise ParseError(t.pos, f"expected {text!r}, got {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def name(self) -> str:
        t = self.peek()
        if t.kind != "name" or t.text in KEYWORDS:
            raise ParseError(t.pos, f"expected a name, got {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    # -- program ------------------------------------------------------------

    def program(self) -> Program:
        defs = []
        while self.peek().kind != "eof":
            defs.append(self.fundef())
        return Program(tuple(defs), self.path)

    def fundef(self) -> FunDef:
        t = self.peek()
        if not (self.accept("def") or self.accept("let")):
            raise ParseError(t.pos, "expected 'def'")
        fname = self.name()
        sizes = []
        while self.at("["):
            self.next()
            sizes.append(self.name())
            self.expect("]")
        params = []
        while self.at("("):
            params.append(self.param())
        self.expect(":")
        rtype = self.type_()
        post = None
        if self.accept("|"):
            post = self.post_lambda()
        self.expect("=")
        body = self.expr()
        return FunDef(fname, tuple(sizes), tuple(params), rtype, post, body, t.pos)

    def param(self) -> Param:
        t = self.expect("(")
        pname = self.name()
        self.expect(":")
        ptype = self.type_()
        pre = None
        if self.accept("|"):
            pre = self.expr()
        self.expect(")")
        return Param(pname, ptype, pre, t.pos)

    def post_lambda(self) -> Lambda:
        parens = self.accept("(")
        lam = self.lambda_()
        if parens:
            self.expect(")")
        return lam

    def type_(self) -> Type:
        t = self.peek()
        if self.accept("["):
            size = None
            if not self.at("]"):
                size = self.expr()
            self.expect("]")
            return TArray(size, self.type_())
        if self.accept("("):
            items = [self.type_()]
            while self.accept(","):
                items.append(self.type_())
            self.expect(")")
            base: Type = items[0] if len(items) == 1 else TTuple(tuple(items))
        else:
            nm = self.name()
            if nm not in BASE_TYPES:
                raise ParseError(t.pos, f"unknown type {nm!r}")
            base = TBase(nm)
        if self.accept("->"):
            return TFun(base, self.type_())
        return base

    # -- expressions --------------------------------------------------------

    def expr(self):
        t = self.peek()
        if self.at("let"):
            return self.let_chain()
        if self.at("loop"):
            return self.loop_()
        if self.accept("if"):
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return If(c, a, b, t.pos)
        if self.at("\\"):
            return self.lambda_()
        return self.or_expr()

    def let_chain(self):
        t = self.expect("let")
        names = self.pattern()
        self.expect("=")
        rhs = self.expr()
        if self.at("let") or self.at("loop"):
            body = self.expr()
        else:
            self.expect("in")
            body = self.expr()
        return Let(names, rhs, body, t.pos)

    def pattern(self) -> tuple:
        if self.accept("("):
            names = [self.pat_name()]
            while self.accept(","):
                names.append(self.pat_name())
            self.expect(")")
            return tuple(names)
        return (self.pat_name(),)

    def pat_name(self) -> str:
        if self.accept("_"):
            return "_"
        return self.name()

    def loop_(self):
        t = self.expect("loop")
        params = []
        if self.accept("("):
            params.append(self.loop_param())
            while self.accept(","):
                params.append(self.loop_param())
            self.expect(")")
        else:
            params.append(self.loop_param())
        self.expect("=")
        if self.accept("("):
            inits = [self.expr()]
            while self.accept(","):
                inits.append(self.expr())
            self.expect(")")
        else:
            inits = [self.or_expr()]
        if self.accept("for"):
            counter = self.name()
            self.expect("<")
            bound = self.expr()
            self.expect("do")
            body = self.expr()
            return Loop(
                tuple(params), tuple(inits), "for", None, counter, bound, body, t.pos
            )
        self.expect("while")
        cond = self.expr()
        self.expect("do")
        body = self.expr()
        return Loop(tuple(params), tuple(inits), "while", cond, None, None, body, t.pos)

    def loop_param(self) -> LoopParam:
        nm = self.name()
        ptype = None
        pre = None
        if self.accept(":"):
            ptype = self.type_()
        if self.accept("|"):
            pre = self.expr()
        return LoopParam(nm, ptype, pre)

    def lambda_(self) -> Lambda:
        t = self.expect("\\")
        params = []
        while not self.at("->"):
            if self.accept("("):
                params.append(self.pat_name())
                while self.accept(","):
                    params.append(self.pat_name())
                self.expect(")")
            else:
                params.append(self.pat_name())
        self.expect("->")
        return Lambda(tuple(params), self.expr(), t.pos)

    def or_expr(self):
        e = self.and_expr()
        while self.at("||"):
            t = self.next()
            e = BinOp("||", e, self.and_expr(), t.pos)
        return e

    def and_expr(self):
        e = self.cmp_expr()
        while self.at("&&"):
            t = self.next()
            e = BinOp("&&", e, self.cmp_expr(), t.pos)
        return e

    def cmp_expr(self):
        e = self.add_expr()
        if self.peek().text in _CMP and self.peek().kind == "op":
            t = self.next()
            return BinOp(t.text, e, self.add_expr(), t.pos)
        return e

    def add_expr(self):
        t = self.peek()
        if self.accept("-"):
            e: object = BinOp("-", Const(0, t.pos), self.mul_expr(), t.pos)
        else:
            e = self.mul_expr()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            t = self.next()
            e = BinOp(t.text, e, self.mul_expr(), t.pos)
        return e

    def mul_expr(self):
        e = self.app_expr()
        while self.at("*"):
            t = self.next()
            e = BinOp("*", e, self.app_expr(), t.pos)
        return e

    def app_expr(self):
        head = self.postfix()
        args = []
        while self._starts_atom():
            args.append(self.postfix())
        if args:
            return App(head, tuple(args), head.pos)
        return head

    def _starts_atom(self) -> bool:
        t = self.peek()
        if t.kind == "num":
            return True
        if t.kind == "name":
            return t.text not in KEYWORDS or t.text in ("true", "false", "inf")
        return t.text in ("(", "\\", "!")

    def postfix(self):
        e = self.atom()
        while self.at("["):
            t = self.next()
            idx = self.expr()
            self.expect("]")
            e = IndexE(e, idx, t.pos)
        return e

    def atom(self):
        t = self.peek()
        if t.kind == "num":
            self.next()
            body = re.match(r"\d+(\.\d+)?", t.text).group(0)
            if "." in body:
                return Const(float(body), t.pos)
            return Const(int(body), t.pos)
        if self.accept("true"):
            return Const(True, t.pos)
        if self.accept("false"):
            return Const(False, t.pos)
        if self.accept("inf"):
            return Const(float("inf"), t.pos)
        if self.accept("!"):
            return NotE(self.postfix(), t.pos)
        if self.accept("("):
            # operator section: exactly (op)
            if (
                self.peek().kind == "op"
                and self.peek().text in ("+", "-", "*")
                and self.toks[self.i + 1].text == ")"
            ):
                op = self.next().text
                self.expect(")")
                return Lambda(("%a", "%b"), BinOp(op, VarE("%a"), VarE("%b")), t.pos)
            if self.at("\\"):
                e: object = self.lambda_()
            else:
                e = self.expr()
            if self.accept(","):
                items = [e, self.expr()]
                while self.accept(","):
                    items.append(self.expr())
                self.expect(")")
                return TupleE(tuple(items), t.pos)
            self.expect(")")
            return e
        if t.kind == "name" and t.text not in KEYWORDS:
            self.next()
            return VarE(t.text, t.pos)
        raise ParseError(t.pos, f"unexpected {t.text or 'end of input'!r}")


def parse_program(text: str, path: str = "<input>") -> Program:
    return Parser(text, path).program()
