"""Canonical textual form for polynomials and index functions.

The format round-trips through irparse.parse_ixfn / parse_poly; golden
comparisons go through the parser and unification rather than string
equality.
"""

from __future__ import annotations

from .syms import (
    And,
    Bool,
    Cmp,
    DOR,
    Index,
    Infty,
    Inv,
    Not,
    Or,
    Poly,
    Prod,
    Recur,
    SliceSum,
    Symbol,
    Var,
)
from .ixfn import IndexFn, Linear, Mixed, Segmented


def poly_str(p: Poly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for t, c in p.items():
        factors = [_factor_str(s) for s in t]
        mag = abs(c)
        if mag != 1 or not factors:
            factors = [str(mag)] + factors
        txt = " * ".join(factors)
        parts.append(("-" if c < 0 else "+", txt))
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, txt in parts[1:]:
        out += f" {sign} {txt}"
    return out


def _factor_str(s: Symbol) -> str:
    if isinstance(s, (Cmp, Not, And, Or, Bool)):
        return f"({sym_str(s)})"
    return sym_str(s)


def _ref_str(ref) -> str:
    if isinstance(ref, str):
        return ref
    if isinstance(ref, DOR):
        return "{" + "|".join(ref.members) + "}"
    if isinstance(ref, Inv):
        return f"{ref.array}^-1"
    raise TypeError(ref)


def sym_str(s: Symbol) -> str:
    if isinstance(s, Var):
        return s.name
    if isinstance(s, Bool):
        return "true" if s.val else "false"
    if isinstance(s, Infty):
        return "inf"
    if isinstance(s, Recur):
        return "rec"
    if isinstance(s, Index):
        return f"{_ref_str(s.array)}[{poly_str(s.index)}]"
    if isinstance(s, SliceSum):
        body = poly_str(Poly.sym(s.body))
        return f"sum {s.binder} in [{poly_str(s.lo)}, {poly_str(s.hi)}] ({body})"
    if isinstance(s, Prod):
        return " * ".join(_factor_str(a) for a in s.args)
    if isinstance(s, Cmp):
        lhs, rhs = _split_sides(s.poly)
        return f"{poly_str(lhs)} {s.op} {poly_str(rhs)}"
    if isinstance(s, Not):
        return f"!({sym_str(s.arg)})"
    if isinstance(s, And):
        return " and ".join(_bool_atom_str(a) for a in s.args)
    if isinstance(s, Or):
        return " or ".join(_bool_atom_str(a) for a in s.args)
    raise TypeError(s)


def _bool_atom_str(s: Symbol) -> str:
    if isinstance(s, (And, Or)):
        return f"({sym_str(s)})"
    return sym_str(s)


def _split_sides(p: Poly):
    """Split p op 0 into lhs op rhs, moving negative terms right."""
    pos, negt = [], []
    for t, c in p.items():
        (pos if c > 0 else negt).append((t, c))
    return Poly(tuple(pos)), -Poly(tuple(negt))


def case_str(case) -> str:
    g, v = case
    return f"({sym_str(g)} => {poly_str(v)})"


def ixfn_str(f: IndexFn) -> str:
    cases = " /\\ ".join(case_str(c) for c in f.cases)
    dom = f.domain
    if isinstance(dom, Linear):
        return f"for {dom.iter} < {poly_str(dom.size)} . {cases}"
    if isinstance(dom, Segmented):
        return (
            f"seg {dom.seg_iter} in [0, {poly_str(dom.last)}]"
            f" . {dom.point_iter} >= {poly_str(dom.seg_start)} . {cases}"
        )
    if isinstance(dom, Mixed):
        return (
            f"mix {dom.lin_iter} < {poly_str(dom.lin_size)}"
            f" U seg {dom.seg_iter} in [1, {poly_str(dom.last)}]"
            f" . {dom.point_iter} >= {poly_str(dom.seg_start)}"
            f" . cap {poly_str(dom.cap)} . {cases}"
        )
    raise TypeError(dom)
