"""Surface-language AST: a small first-order data-parallel language.

Programs are lists of function definitions with optional pre/postcondition
annotations. Property annotations (Range, Inj, Bij, Mono, FiltPart,
InvFiltPart, OrthogPreds) are ordinary applications in condition position
and are recognized by name after parsing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Pos = tuple  # (line, col)


# -- types ------------------------------------------------------------------


@dataclass(frozen=True)
class TBase:
    name: str  # i64 | f64 | f32 | bool


@dataclass(frozen=True)
class TArray:
    size: Optional["Expr"]
    elem: "Type"


@dataclass(frozen=True)
class TTuple:
    items: tuple


@dataclass(frozen=True)
class TFun:
    arg: "Type"
    res: "Type"


Type = Union[TBase, TArray, TTuple, TFun]


# -- expressions ------------------------------------------------------------


@dataclass
class Const:
    value: object  # int | bool | float; "inf"/-"inf" use float("inf")
    pos: Pos = (0, 0)


@dataclass
class VarE:
    name: str
    pos: Pos = (0, 0)


@dataclass
class BinOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"
    pos: Pos = (0, 0)


@dataclass
class NotE:
    arg: "Expr"
    pos: Pos = (0, 0)


@dataclass
class IndexE:
    arr: "Expr"
    idx: "Expr"
    pos: Pos = (0, 0)


@dataclass
class If:
    cond: "Expr"
    then: "Expr"
    els: "Expr"
    pos: Pos = (0, 0)


@dataclass
class Let:
    names: tuple  # one or more bound names (tuple pattern)
    rhs: "Expr"
    body: "Expr"
    pos: Pos = (0, 0)


@dataclass
class TupleE:
    items: tuple
    pos: Pos = (0, 0)


@dataclass
class Lambda:
    params: tuple  # names; "_" allowed
    body: "Expr"
    pos: Pos = (0, 0)


@dataclass
class App:
    fun: "Expr"
    args: tuple
    pos: Pos = (0, 0)


@dataclass
class LoopParam:
    name: str
    type: Optional[Type] = None
    pre: Optional["Expr"] = None


@dataclass
class Loop:
    params: tuple  # LoopParam
    inits: tuple  # Expr, same arity
    kind: str  # "while" | "for"
    cond: Optional["Expr"]  # while
    counter: Optional[str]  # for
    bound: Optional["Expr"]  # for
    body: "Expr"
    pos: Pos = (0, 0)


Expr = Union[Const, VarE, BinOp, NotE, IndexE, If, Let, TupleE, Lambda, App, Loop]


@dataclass
class Param:
    name: str
    type: Type
    pre: Optional[Expr] = None
    pos: Pos = (0, 0)


@dataclass
class FunDef:
    name: str
    sizes: tuple
    params: tuple
    result_type: Type
    post: Optional[Lambda]
    body: Expr
    pos: Pos = (0, 0)


@dataclass
class Program:
    defs: tuple
    path: str = "<input>"


PROPERTY_HEADS = {
    "Range",
    "Equiv",
    "Mono",
    "Inj",
    "Bij",
    "FiltPart",
    "InvFiltPart",
    "OrthogPreds",
}

BUILTINS = {
    "map": 2,
    "map2": 3,
    "map3": 4,
    "scan": None,  # op, neutrals..., arrays...
    "scatter": 3,
    "hist": 5,
    "iota": 1,
    "replicate": 2,
    "length": 1,
    "i64.bool": 1,
    "i64.min": 2,
    "i64.max": 2,
}


# -- printing (diagnostics) -------------------------------------------------


def expr_str(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        if v is True:
            return "true"
        if v is False:
            return "false"
        return str(v)
    if isinstance(e, VarE):
        return e.name
    if isinstance(e, BinOp):
        return f"{expr_str(e.lhs)} {e.op} {expr_str(e.rhs)}"
    if isinstance(e, NotE):
        return f"!{expr_str(e.arg)}"
    if isinstance(e, IndexE):
        base = expr_str(e.arr)
        if not isinstance(e.arr, (VarE, IndexE)):
            base = f"({base})"
        return f"{base}[{expr_str(e.idx)}]"
    if isinstance(e, If):
        return f"if {expr_str(e.cond)} then {expr_str(e.then)} else {expr_str(e.els)}"
    if isinstance(e, Let):
        pat = e.names[0] if len(e.names) == 1 else "(" + ", ".join(e.names) + ")"
        return f"let {pat} = {expr_str(e.rhs)} in {expr_str(e.body)}"
    if isinstance(e, TupleE):
        return "(" + ", ".join(expr_str(x) for x in e.items) + ")"
    if isinstance(e, Lambda):
        return "\\" + " ".join(e.params) + " -> " + expr_str(e.body)
    if isinstance(e, App):
        parts = [expr_str(e.fun)] + [
            f"({expr_str(a)})" if not isinstance(a, (VarE, Const)) else expr_str(a)
            for a in e.args
        ]
        return " ".join(parts)
    if isinstance(e, Loop):
        return "loop ..."
    return repr(e)
