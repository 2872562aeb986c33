"""A-normalization and well-formedness checking for parsed programs.

Normalization let-binds every compound operand of ifs, loops, calls and
combinators so the converter only ever sees variables (or constants) in
those positions. Scalar arithmetic stays inline: it maps directly onto
polynomials later. map2/map3 become multi-array map, i64.bool becomes an
if-expression.
"""

from __future__ import annotations

from .ast import (
    App,
    BinOp,
    BUILTINS,
    Const,
    FunDef,
    If,
    IndexE,
    Lambda,
    Let,
    Loop,
    NotE,
    Param,
    Program,
    PROPERTY_HEADS,
    TArray,
    TBase,
    TFun,
    TTuple,
    TupleE,
    VarE,
)
from .parser import ArityError, ScopeError
from .syms import fresh


# ---------------------------------------------------------------------------
# normalization


def normalize(p: Program) -> Program:
    return Program(tuple(_norm_fun(f) for f in p.defs), p.path)


def _norm_fun(f: FunDef) -> FunDef:
    params = tuple(
        Param(q.name, q.type, _norm_block(q.pre) if q.pre else None, q.pos)
        for q in f.params
    )
    post = None
    if f.post is not None:
        post = Lambda(f.post.params, _norm_block(f.post.body), f.post.pos)
    return FunDef(f.name, f.sizes, params, f.result_type, post, _norm_block(f.body), f.pos)


def _norm_block(e):
    binds: list = []
    a = _norm(e, binds)
    for names, rhs, pos in reversed(binds):
        a = Let(names, rhs, a, pos)
    return a


def _atomize(e, binds):
    e = _norm(e, binds)
    if isinstance(e, (VarE, Const)):
        return e
    name = fresh("a")
    binds.append(((name,), e, getattr(e, "pos", (0, 0))))
    return VarE(name, getattr(e, "pos", (0, 0)))


def _norm(e, binds):
    if isinstance(e, (Const, VarE)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, _norm(e.lhs, binds), _norm(e.rhs, binds), e.pos)
    if isinstance(e, NotE):
        return NotE(_norm(e.arg, binds), e.pos)
    if isinstance(e, IndexE):
        return IndexE(_atomize(e.arr, binds), _norm(e.idx, binds), e.pos)
    if isinstance(e, If):
        return If(_atomize(e.cond, binds), _norm_block(e.then), _norm_block(e.els), e.pos)
    if isinstance(e, Let):
        rhs = _norm(e.rhs, binds)
        binds.append((e.names, rhs, e.pos))
        return _norm(e.body, binds)
    if isinstance(e, TupleE):
        return TupleE(tuple(_atomize(x, binds) for x in e.items), e.pos)
    if isinstance(e, Lambda):
        return Lambda(e.params, _norm_block(e.body), e.pos)
    if isinstance(e, Loop):
        inits = tuple(_atomize(x, binds) for x in e.inits)
        bound = _atomize(e.bound, binds) if e.bound is not None else None
        cond = _norm_block(e.cond) if e.cond is not None else None
        return Loop(
            e.params, inits, e.kind, cond, e.counter, bound, _norm_block(e.body), e.pos
        )
    if isinstance(e, App):
        return _norm_app(e, binds)
    raise TypeError(f"normalize: {e!r}")


def _norm_app(e: App, binds):
    head = e.fun
    if not isinstance(head, (VarE, Lambda)):
        head = _atomize(head, binds)
    if isinstance(head, VarE):
        nm = head.name
        if nm in ("map2", "map3"):
            args = tuple(_norm_arg(a, binds) for a in e.args)
            return App(VarE("map", head.pos), args, e.pos)
        if nm == "i64.bool":
            (b,) = e.args
            return If(
                _atomize(b, binds), Const(1, e.pos), Const(0, e.pos), e.pos
            )
        if nm in PROPERTY_HEADS:
            # annotation arguments keep their structure (tuples, lambdas)
            return App(head, tuple(_norm_prop_arg(a, binds) for a in e.args), e.pos)
    return App(
        head if isinstance(head, VarE) else _norm(head, binds),
        tuple(_norm_arg(a, binds) for a in e.args),
        e.pos,
    )


def _norm_arg(a, binds):
    if isinstance(a, Lambda):
        return Lambda(a.params, _norm_block(a.body), a.pos)
    if isinstance(a, VarE) and a.name == "i64.bool":
        x = fresh("b")
        return Lambda((x,), If(VarE(x, a.pos), Const(1, a.pos), Const(0, a.pos)), a.pos)
    return _atomize(a, binds)


def _norm_prop_arg(a, binds):
    if isinstance(a, Lambda):
        return Lambda(a.params, _norm_block(a.body), a.pos)
    if isinstance(a, TupleE):
        return TupleE(tuple(_norm(x, binds) for x in a.items), a.pos)
    return _norm(a, binds)


# ---------------------------------------------------------------------------
# well-formedness


def check_well_formed(p: Program) -> None:
    """Raise ScopeError/ArityError on the first problem found."""
    funs: dict = {}
    for f in p.defs:
        if f.name in funs:
            raise ScopeError(f.pos, f"duplicate definition of {f.name!r}")
        _check_fun(f, funs)
        funs[f.name] = f


def _result_names(f: FunDef) -> int:
    if isinstance(f.result_type, TTuple):
        return len(f.result_type.items)
    return 1


def _check_fun(f: FunDef, funs) -> None:
    scope = set(f.sizes)
    for q in f.params:
        if q.name in scope:
            raise ScopeError(q.pos, f"duplicate parameter {q.name!r}")
        scope.add(q.name)
    for q in f.params:
        if q.pre is not None:
            _check_expr(q.pre, scope, funs, f)
    _check_expr(f.body, set(scope), funs, f)
    if f.post is not None:
        n = _result_names(f)
        if len(f.post.params) != n:
            raise ArityError(
                f.post.pos,
                f"postcondition binds {len(f.post.params)} names, result has {n}",
            )
        inner = set(scope) | {x for x in f.post.params if x != "_"}
        _check_expr(f.post.body, inner, funs, f)


def _check_expr(e, scope, funs, f) -> None:
    if isinstance(e, Const):
        return
    if isinstance(e, VarE):
        if e.name not in scope and e.name not in funs and e.name not in BUILTINS:
            raise ScopeError(e.pos, f"unbound name {e.name!r}")
        return
    if isinstance(e, BinOp):
        _check_expr(e.lhs, scope, funs, f)
        _check_expr(e.rhs, scope, funs, f)
        return
    if isinstance(e, NotE):
        _check_expr(e.arg, scope, funs, f)
        return
    if isinstance(e, IndexE):
        _check_expr(e.arr, scope, funs, f)
        _check_expr(e.idx, scope, funs, f)
        return
    if isinstance(e, If):
        for x in (e.cond, e.then, e.els):
            _check_expr(x, scope, funs, f)
        return
    if isinstance(e, Let):
        _check_expr(e.rhs, scope, funs, f)
        _check_expr(e.body, scope | {n for n in e.names if n != "_"}, funs, f)
        return
    if isinstance(e, TupleE):
        for x in e.items:
            _check_expr(x, scope, funs, f)
        return
    if isinstance(e, Lambda):
        _check_expr(e.body, scope | {n for n in e.params if n != "_"}, funs, f)
        return
    if isinstance(e, Loop):
        for x in e.inits:
            _check_expr(x, scope, funs, f)
        if len(e.inits) != len(e.params):
            raise ArityError(e.pos, "loop initializer arity mismatch")
        inner = scope | {q.name for q in e.params}
        for q in e.params:
            if q.pre is not None:
                _check_expr(q.pre, inner, funs, f)
        if e.kind == "for":
            inner = inner | {e.counter}
            _check_expr(e.bound, scope, funs, f)
        else:
            _check_expr(e.cond, inner, funs, f)
        _check_expr(e.body, inner, funs, f)
        return
    if isinstance(e, App):
        _check_app(e, scope, funs, f)
        return
    raise TypeError(f"check: {e!r}")


def _check_app(e: App, scope, funs, f) -> None:
    for a in e.args:
        _check_expr(a, scope, funs, f)
    if isinstance(e.fun, Lambda):
        _check_expr(e.fun, scope, funs, f)
        return
    if not isinstance(e.fun, VarE):
        _check_expr(e.fun, scope, funs, f)
        return
    nm = e.fun.name
    if nm in PROPERTY_HEADS:
        _check_prop(e, scope)
        return
    if nm in ("map", "map2", "map3"):
        want = {"map": None, "map2": 3, "map3": 4}[nm]
        if want is not None and len(e.args) != want:
            raise ArityError(e.pos, f"{nm} expects {want} arguments")
        if len(e.args) < 2:
            raise ArityError(e.pos, f"{nm} expects a function and arrays")
        lam = e.args[0]
        if isinstance(lam, Lambda) and len(lam.params) != len(e.args) - 1:
            raise ArityError(e.pos, "map function arity mismatch")
        return
    if nm == "scan":
        rest = len(e.args) - 1
        if rest < 2 or rest % 2:
            raise ArityError(e.pos, "scan expects op, k neutrals, k arrays")
        k = rest // 2
        if isinstance(e.args[0], Lambda) and len(e.args[0].params) != 2 * k:
            raise ArityError(e.pos, "scan operator arity mismatch")
        return
    if nm in BUILTINS:
        want = BUILTINS[nm]
        if want is not None and len(e.args) != want:
            raise ArityError(e.pos, f"{nm} expects {want} arguments")
        return
    if nm in funs:
        fd = funs[nm]
        if len(e.args) != len(fd.params):
            raise ArityError(
                e.pos, f"{nm} expects {len(fd.params)} arguments, got {len(e.args)}"
            )
        return
    if nm in scope:
        return  # predicate parameter application
    raise ScopeError(e.pos, f"unbound function {nm!r}")


def _check_prop(e: App, scope) -> None:
    nm = e.fun.name
    arity = {
        "Range": 2,
        "Equiv": 2,
        "Mono": 2,
        "Inj": 2,
        "OrthogPreds": 2,
    }
    if nm in arity and len(e.args) != arity[nm]:
        raise ArityError(e.pos, f"{nm} annotation expects {arity[nm]} arguments")
    if nm == "FiltPart" and len(e.args) < 4:
        raise ArityError(e.pos, f"{nm} annotation is missing arguments")
    if nm in ("Bij", "InvFiltPart") and len(e.args) < 3:
        raise ArityError(e.pos, f"{nm} annotation is missing arguments")
    head = e.args[0]
    if not isinstance(head, VarE) or head.name not in scope:
        raise ScopeError(
            e.pos, f"{nm} annotation must name an in-scope variable"
        )
