"""Parser for the textual index-function format produced by pretty.py."""

from __future__ import annotations

import re

from .syms import (
    DOR,
    FALSE,
    INF_SYM,
    Index,
    Inv,
    Poly,
    RECUR_SYM,
    TRUE,
    and_,
    cmp2,
    neg,
    or_,
    sum_poly,
)
from .ixfn import IndexFn, Linear, Mixed, Segmented

_TOKEN = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[%A-Za-z_][A-Za-z_0-9']*)"
    r"|(?P<op>\^-1|=>|/\\|<=|>=|==|!=|[][(){},.|<>=!+\-*]))"
)

_CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")


class IrParseError(Exception):
    pass


class _P:
    def __init__(self, text: str):
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                if text[pos:].strip():
                    raise IrParseError(f"bad token at {text[pos:pos+10]!r}")
                break
            pos = m.end()
            self.toks.append(m.group("int") or m.group("name") or m.group("op"))
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is None:
            raise IrParseError("unexpected end of input")
        self.i += 1
        return t

    def expect(self, t):
        got = self.next()
        if got != t:
            raise IrParseError(f"expected {t!r}, got {got!r}")

    def accept(self, t) -> bool:
        if self.peek() == t:
            self.i += 1
            return True
        return False

    # -- polynomials --------------------------------------------------------

    def poly(self) -> Poly:
        p = self.term()
        while self.peek() in ("+", "-"):
            if self.next() == "+":
                p = p + self.term()
            else:
                p = p - self.term()
        return p

    def term(self) -> Poly:
        sign = 1
        while self.peek() == "-":
            self.next()
            sign = -sign
        p = self.factor()
        while self.accept("*"):
            p = p * self.factor()
        return sign * p

    def factor(self) -> Poly:
        t = self.peek()
        if t is None:
            raise IrParseError("unexpected end of input")
        if t.isdigit():
            return Poly.const(int(self.next()))
        if t == "(":
            self.next()
            p = self.expr_or_bool()
            self.expect(")")
            return p
        if t == "{":
            self.next()
            names = []
            if self.peek() != "}":
                names.append(self.next())
                while self.accept("|"):
                    names.append(self.next())
            self.expect("}")
            self.expect("[")
            idx = self.poly()
            self.expect("]")
            return Poly.sym(Index(DOR(tuple(names)), idx))
        if t == "sum":
            self.next()
            binder = self.next()
            self.expect("in")
            self.expect("[")
            lo = self.poly()
            self.expect(",")
            hi = self.poly()
            self.expect("]")
            self.expect("(")
            body = self.expr_or_bool()
            self.expect(")")
            return sum_poly(binder, lo, hi, body)
        if t == "inf":
            self.next()
            return Poly.sym(INF_SYM)
        if t == "rec":
            self.next()
            return Poly.sym(RECUR_SYM)
        if t == "true":
            self.next()
            return Poly.sym(TRUE)
        if t == "false":
            self.next()
            return Poly.sym(FALSE)
        if re.match(r"[%A-Za-z_]", t):
            name = self.next()
            ref = name
            if self.accept("^-1"):
                ref = Inv(name)
            if self.accept("["):
                idx = self.poly()
                self.expect("]")
                return Poly.sym(Index(ref, idx))
            if isinstance(ref, Inv):
                raise IrParseError("inverse must be indexed")
            return Poly.var(name)
        raise IrParseError(f"unexpected token {t!r}")

    def expr_or_bool(self) -> Poly:
        """Inside parens: either arithmetic or a boolean expression."""
        s = self.bool_or()
        return s

    # -- booleans (parsed as 0/1 polys, extracted with .single_sym) ---------

    def bool_or(self) -> Poly:
        p = self.bool_and()
        while self.accept("or"):
            q = self.bool_and()
            p = Poly.sym(or_(_b(p), _b(q)))
        return p

    def bool_and(self) -> Poly:
        p = self.bool_atom()
        while self.accept("and"):
            q = self.bool_atom()
            p = Poly.sym(and_(_b(p), _b(q)))
        return p

    def bool_atom(self) -> Poly:
        if self.accept("!"):
            self.expect("(")
            p = self.bool_or()
            self.expect(")")
            return Poly.sym(neg(_b(p)))
        p = self.poly()
        if self.peek() in _CMP_OPS:
            op = self.next()
            rhs = self.poly()
            return Poly.sym(cmp2(p, op, rhs))
        return p

    # -- index functions ----------------------------------------------------

    def cases(self):
        out = [self.case()]
        while self.accept("/\\"):
            out.append(self.case())
        return tuple(out)

    def case(self):
        self.expect("(")
        g = _b(self.bool_or())
        self.expect("=>")
        v = self.poly()
        self.expect(")")
        return (g, v)

    def ixfn(self) -> IndexFn:
        t = self.next()
        if t == "for":
            it = self.next()
            self.expect("<")
            size = self.poly()
            self.expect(".")
            return IndexFn(Linear(it, size), self.cases())
        if t == "seg":
            k = self.next()
            self.expect("in")
            self.expect("[")
            self.expect("0")
            self.expect(",")
            last = self.poly()
            self.expect("]")
            self.expect(".")
            j = self.next()
            self.expect(">=")
            start = self.poly()
            self.expect(".")
            return IndexFn(Segmented(k, last, start, j), self.cases())
        if t == "mix":
            li = self.next()
            self.expect("<")
            size = self.poly()
            self.expect("U")
            self.expect("seg")
            k = self.next()
            self.expect("in")
            self.expect("[")
            self.expect("1")
            self.expect(",")
            last = self.poly()
            self.expect("]")
            self.expect(".")
            j = self.next()
            self.expect(">=")
            start = self.poly()
            self.expect(".")
            self.expect("cap")
            cap = self.poly()
            self.expect(".")
            return IndexFn(Mixed(li, size, k, last, start, cap, j), self.cases())
        raise IrParseError(f"expected index function, got {t!r}")


def _b(p: Poly):
    s = p.single_sym()
    if s is None:
        k = p.const_val()
        if k in (0, 1):
            return TRUE if k else FALSE
        raise IrParseError("expected a boolean expression")
    return s


def parse_poly(text: str) -> Poly:
    p = _P(text)
    out = p.bool_or()
    if p.peek() is not None:
        raise IrParseError(f"trailing input at {p.peek()!r}")
    return out


def parse_ixfn(text: str) -> IndexFn:
    p = _P(text)
    out = p.ixfn()
    if p.peek() is not None:
        raise IrParseError(f"trailing input at {p.peek()!r}")
    return out
