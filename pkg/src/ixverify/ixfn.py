"""Iteration domains, guarded expressions, and index functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .syms import (
    ONE,
    TRUE,
    ZERO,
    Poly,
    Symbol,
    Var,
    cmp2,
    fresh,
    skey,
    subst_sym,
    substitute,
    _as_bool,
)


@dataclass(frozen=True)
class Linear:
    """for iter < size"""

    iter: str
    size: Poly


@dataclass(frozen=True)
class Segmented:
    """Union over seg_iter in [0, last] of points point_iter >= seg_start.

    seg_start is a poly in seg_iter; segment k covers
    [seg_start(k), seg_start(k+1)) and may be empty. Total size is
    seg_start(last + 1).
    """

    seg_iter: str
    last: Poly
    seg_start: Poly
    point_iter: str


@dataclass(frozen=True)
class Mixed:
    """A linear prefix [0, lin_size) followed by segments capped at cap.

    Segments run seg_iter = 1 .. last with starts seg_start (a poly in
    seg_iter, all >= lin_size); the final segment ends at cap.
    """

    lin_iter: str
    lin_size: Poly
    seg_iter: str
    last: Poly
    seg_start: Poly
    cap: Poly
    point_iter: str


Domain = Union[Linear, Segmented, Mixed]


def point_iter(dom: Domain) -> str:
    if isinstance(dom, Linear):
        return dom.iter
    return dom.point_iter


def domain_size(dom: Domain) -> Poly:
    if isinstance(dom, Linear):
        return dom.size
    if isinstance(dom, Segmented):
        return substitute(dom.seg_start, {dom.seg_iter: dom.last + 1})
    return dom.cap


def domain_facts(dom: Domain) -> list[Symbol]:
    """Boolean facts bounding the domain iterators."""
    if isinstance(dom, Linear):
        i = Poly.var(dom.iter)
        return [cmp2(ZERO, "<=", i), cmp2(i, "<=", dom.size - 1)]
    if isinstance(dom, Segmented):
        k = Poly.var(dom.seg_iter)
        j = Poly.var(dom.point_iter)
        nxt = substitute(dom.seg_start, {dom.seg_iter: k + 1})
        return [
            cmp2(ZERO, "<=", k),
            cmp2(k, "<=", dom.last),
            cmp2(dom.seg_start, "<=", j),
            cmp2(j, "<=", nxt - 1),
        ]
    k = Poly.var(dom.seg_iter)
    j = Poly.var(dom.point_iter)
    nxt = substitute(dom.seg_start, {dom.seg_iter: k + 1})
    # on the segmented part: 1 <= k <= last, start_k <= j < min(start_{k+1}, cap)
    return [
        cmp2(ONE, "<=", k),
        cmp2(k, "<=", dom.last),
        cmp2(dom.seg_start, "<=", j),
        cmp2(j, "<=", nxt - 1),
        cmp2(j, "<=", dom.cap - 1),
    ]


Case = tuple  # (guard: Symbol, value: Poly)


@dataclass(frozen=True)
class IndexFn:
    domain: Domain
    cases: tuple[Case, ...]

    def is_scalar(self) -> bool:
        return isinstance(self.domain, Linear) and self.domain.size == ONE

    def value_if_single(self) -> Optional[Poly]:
        if len(self.cases) == 1 and self.cases[0][0] == TRUE:
            return self.cases[0][1]
        return None

    def free_names(self) -> frozenset:
        out = set()
        dom = self.domain
        if isinstance(dom, Linear):
            out |= dom.size.free_names()
            iters = {dom.iter}
        elif isinstance(dom, Segmented):
            out |= dom.last.free_names() | dom.seg_start.free_names()
            iters = {dom.seg_iter, dom.point_iter}
        else:
            out |= (
                dom.lin_size.free_names()
                | dom.last.free_names()
                | dom.seg_start.free_names()
                | dom.cap.free_names()
            )
            iters = {dom.lin_iter, dom.seg_iter, dom.point_iter}
        for g, v in self.cases:
            out |= Poly.sym(g).free_names() | v.free_names()
        return frozenset(out - iters)


def scalar_fn(value: Poly) -> IndexFn:
    return IndexFn(Linear(fresh("pt"), ONE), ((TRUE, value),))


def subst_guard(g: Symbol, binding: dict) -> Symbol:
    return _as_bool(subst_sym(g, binding))


def map_cases(f: IndexFn, binding: dict) -> IndexFn:
    """Substitute into guards and values, leaving the domain unchanged."""
    cases = tuple(
        (subst_guard(g, binding), substitute(v, binding)) for g, v in f.cases
    )
    return IndexFn(f.domain, cases)


def rename_iter(f: IndexFn, new_iter: str) -> IndexFn:
    """Rename the point iterator of a linear-domain index function."""
    assert isinstance(f.domain, Linear)
    if f.domain.iter == new_iter:
        return f
    b = {f.domain.iter: Poly.var(new_iter)}
    return IndexFn(Linear(new_iter, f.domain.size), subst_cases_simple(f.cases, b))


def subst_cases_simple(cases, binding):
    return tuple(
        (subst_guard(g, binding), substitute(v, binding)) for g, v in cases
    )


def unify_ixfn(a: IndexFn, b: IndexFn) -> bool:
    """Equality up to iterator renaming and case order."""
    da, db = a.domain, b.domain
    if type(da) is not type(db):
        return False
    if isinstance(da, Linear):
        if da.size != db.size:
            return False
        b = rename_iter(b, da.iter)
    elif isinstance(da, Segmented):
        ren = {db.seg_iter: Poly.var(da.seg_iter), db.point_iter: Poly.var(da.point_iter)}
        last = substitute(db.last, ren)
        start = substitute(db.seg_start, ren)
        if last != da.last or start != da.seg_start:
            return False
        b = IndexFn(da, subst_cases_simple(b.cases, ren))
    else:
        ren = {
            db.lin_iter: Poly.var(da.lin_iter),
            db.seg_iter: Poly.var(da.seg_iter),
            db.point_iter: Poly.var(da.point_iter),
        }
        if (
            substitute(db.lin_size, ren) != da.lin_size
            or substitute(db.last, ren) != da.last
            or substitute(db.seg_start, ren) != da.seg_start
            or substitute(db.cap, ren) != da.cap
        ):
            return False
        b = IndexFn(da, subst_cases_simple(b.cases, ren))
    ka = sorted(((skey(g), skey(v)) for g, v in a.cases))
    kb = sorted(((skey(g), skey(v)) for g, v in b.cases))
    return ka == kb
