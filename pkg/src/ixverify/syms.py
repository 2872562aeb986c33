"""Symbols, terms, and normalized multivariate polynomials.

Everything below the frontend is expressed as polynomials over symbols:
variables, array indexing, sums over array slices, comparisons (booleans
are 0/1 valued), and a couple of special markers (infinity, the scan
recurrence). Polynomials map terms (multisets of symbols) to nonzero
integer coefficients, so structural equality is a normal form for the
variable-only fragment.

Sum binders are canonicalized on construction (de Bruijn style names
"%s0", "%s1", ...) so that alpha-equivalent sums are structurally equal.
The "%" sigil is reserved: the surface parser rejects identifiers that
start with it, which keeps generated names fresh by construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Union

FRESH_SIGIL = "%"

_fresh_counter = itertools.count()


def fresh(prefix: str = "v") -> str:
    """Return a globally fresh name carrying the reserved sigil."""
    return f"{FRESH_SIGIL}{prefix}{next(_fresh_counter)}"


def reset_fresh() -> None:
    global _fresh_counter
    _fresh_counter = itertools.count()


class BlowupExceeded(Exception):
    """DNF/CNF conversion exceeded the clause cap."""


# ---------------------------------------------------------------------------
# Symbols


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Bool:
    val: bool


TRUE = Bool(True)
FALSE = Bool(False)


@dataclass(frozen=True)
class DOR:
    """Disjunction of pairwise-disjoint boolean arrays; empty = const false."""

    members: tuple[str, ...]


@dataclass(frozen=True)
class Inv:
    """The inverse of a bijective array, usable as an array reference."""

    array: str


ArrayRef = Union[str, DOR, Inv]


@dataclass(frozen=True)
class Index:
    array: ArrayRef
    index: "Poly"


@dataclass(frozen=True)
class SliceSum:
    """sum of body for binder in [lo, hi]; empty when lo > hi."""

    binder: str
    lo: "Poly"
    hi: "Poly"
    body: "Symbol"


@dataclass(frozen=True)
class Prod:
    """Opaque product of symbols; only appears as a SliceSum body."""

    args: tuple["Symbol", ...]


@dataclass(frozen=True)
class Infty:
    pass


@dataclass(frozen=True)
class Recur:
    """The scan accumulator placeholder; never survives inference."""


INF_SYM = Infty()
RECUR_SYM = Recur()


@dataclass(frozen=True)
class Cmp:
    """poly op 0, with op restricted to <, <=, ==, != by construction."""

    poly: "Poly"
    op: str


@dataclass(frozen=True)
class Not:
    arg: "Symbol"


@dataclass(frozen=True)
class And:
    args: tuple["Symbol", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Symbol", ...]


Symbol = Union[Var, Bool, Index, SliceSum, Prod, Infty, Recur, Cmp, Not, And, Or]

_TAGS = {
    Bool: 0,
    Var: 1,
    Index: 2,
    SliceSum: 3,
    Prod: 4,
    Cmp: 5,
    Not: 6,
    And: 7,
    Or: 8,
    Infty: 9,
    Recur: 10,
}


@lru_cache(maxsize=None)
def skey(s):
    """Total order key for symbols / polys / array refs (nested tuples)."""
    if isinstance(s, Poly):
        return ("P",) + tuple((tkey(t), c) for t, c in s.items())
    if isinstance(s, str):
        return ("n", s)
    if isinstance(s, DOR):
        return ("d",) + s.members
    if isinstance(s, Inv):
        return ("i", s.array)
    tag = _TAGS[type(s)]
    if isinstance(s, Bool):
        return (tag, s.val)
    if isinstance(s, Var):
        return (tag, s.name)
    if isinstance(s, Index):
        return (tag, skey(s.array), skey(s.index))
    if isinstance(s, SliceSum):
        return (tag, s.binder, skey(s.lo), skey(s.hi), skey(s.body))
    if isinstance(s, Prod):
        return (tag,) + tuple(skey(a) for a in s.args)
    if isinstance(s, Cmp):
        return (tag, s.op, skey(s.poly))
    if isinstance(s, Not):
        return (tag, skey(s.arg))
    if isinstance(s, (And, Or)):
        return (tag,) + tuple(skey(a) for a in s.args)
    return (tag,)


def tkey(t: tuple) -> tuple:
    return tuple(skey(s) for s in t)


# ---------------------------------------------------------------------------
# Polynomials

Term = tuple  # sorted tuple of Symbol with multiplicity


class Poly:
    """Normalized polynomial: sorted (term, coeff) pairs, no zero coeffs."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms=()):
        acc: dict = {}
        for t, c in terms:
            if c:
                acc[t] = acc.get(t, 0) + c
        items = tuple(
            sorted(((t, c) for t, c in acc.items() if c), key=lambda tc: tkey(tc[0]))
        )
        object.__setattr__(self, "_terms", items)
        object.__setattr__(self, "_hash", hash(items))

    # -- construction -------------------------------------------------------

    @staticmethod
    def const(k: int) -> "Poly":
        return Poly((((), k),))

    @staticmethod
    def var(name: str) -> "Poly":
        return Poly((((Var(name),), 1),))

    @staticmethod
    def sym(s: Symbol) -> "Poly":
        return Poly((((s,), 1),))

    # -- inspection ---------------------------------------------------------

    def items(self):
        return self._terms

    def __iter__(self) -> Iterator:
        return iter(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_const(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and self._terms[0][0] == ())

    def const_val(self) -> Optional[int]:
        if not self._terms:
            return 0
        if len(self._terms) == 1 and self._terms[0][0] == ():
            return self._terms[0][1]
        return None

    def constant_part(self) -> int:
        for t, c in self._terms:
            if t == ():
                return c
        return 0

    def single_sym(self) -> Optional[Symbol]:
        """The symbol s if this poly is exactly 1*s, else None."""
        if len(self._terms) == 1:
            t, c = self._terms[0]
            if c == 1 and len(t) == 1:
                return t[0]
        return None

    def symbols(self) -> Iterator[Symbol]:
        """Top-level symbols (term factors), not nested ones."""
        seen = set()
        for t, _ in self._terms:
            for s in t:
                if s not in seen:
                    seen.add(s)
                    yield s

    def all_symbols(self) -> Iterator[Symbol]:
        """All symbols at any nesting depth."""
        for t, _ in self._terms:
            for s in t:
                yield from _sym_closure(s)

    def contains(self, s: Symbol) -> bool:
        return any(x == s for x in self.all_symbols())

    def free_names(self) -> frozenset:
        """Variable and array names occurring anywhere (binders excluded)."""
        out = set()
        binders = set()
        for s in self.all_symbols():
            if isinstance(s, Var):
                out.add(s.name)
            elif isinstance(s, Index):
                out.update(_ref_names(s.array))
            elif isinstance(s, SliceSum):
                binders.add(s.binder)
        return frozenset(out - binders)

    def degree_in(self, s: Symbol) -> int:
        d = 0
        for t, _ in self._terms:
            d = max(d, sum(1 for x in t if x == s))
        return d

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Poly":
        other = _coerce(other)
        return Poly(self._terms + other._terms)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(tuple((t, -c) for t, c in self._terms))

    def __sub__(self, other) -> "Poly":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Poly":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "Poly":
        other = _coerce(other)
        out = []
        for t1, c1 in self._terms:
            for t2, c2 in other._terms:
                out.append((tuple(sorted(t1 + t2, key=skey)), c1 * c2))
        return Poly(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Poly":
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    # -- equality -----------------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self._terms == other._terms

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        from .pretty import poly_str

        return f"Poly({poly_str(self)})"


ZERO = Poly.const(0)
ONE = Poly.const(1)
INF = Poly.sym(INF_SYM)
NEG_INF = -INF


def _coerce(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, int):
        return Poly.const(x)
    raise TypeError(f"cannot coerce {x!r} to Poly")


def is_inf(p: Poly) -> bool:
    return p == INF or p == NEG_INF


def _ref_names(ref: ArrayRef) -> tuple:
    if isinstance(ref, str):
        return (ref,)
    if isinstance(ref, DOR):
        return ref.members
    return (ref.array,)


def _sym_closure(s: Symbol) -> Iterator[Symbol]:
    yield s
    if isinstance(s, Index):
        yield from s.index.all_symbols()
    elif isinstance(s, SliceSum):
        yield from s.lo.all_symbols()
        yield from s.hi.all_symbols()
        yield from _sym_closure(s.body)
    elif isinstance(s, Prod):
        for a in s.args:
            yield from _sym_closure(a)
    elif isinstance(s, Cmp):
        yield from s.poly.all_symbols()
    elif isinstance(s, Not):
        yield from _sym_closure(s.arg)
    elif isinstance(s, (And, Or)):
        for a in s.args:
            yield from _sym_closure(a)


def free_names_sym(s: Symbol) -> frozenset:
    return Poly.sym(s).free_names()


# ---------------------------------------------------------------------------
# Boolean constructors (smart, normalizing)

_FLIP = {"<": "<=", "<=": "<", "==": "!=", "!=": "=="}


def cmp(p: Poly, op: str) -> Symbol:
    """Build the boolean symbol (p op 0), folding constants."""
    if op == ">":
        return cmp(-p, "<")
    if op == ">=":
        return cmp(-p, "<=")
    k = p.const_val()
    if k is not None:
        return Bool({"<": k < 0, "<=": k <= 0, "==": k == 0, "!=": k != 0}[op])
    if op in ("==", "!="):
        if skey(-p) < skey(p):
            p = -p
    return Cmp(p, op)


def cmp2(a: Poly, op: str, b: Poly) -> Symbol:
    """(a op b) with infinity endpoints short-circuited."""
    for p, q, rel in ((a, b, op), (b, a, _SWAP[op])):
        if is_inf(p):
            if is_inf(q):
                same = p == q
                if rel in ("==", "<=", ">="):
                    return Bool(same or (rel != "==" and _inf_order(p, q, rel)))
                if rel == "!=":
                    return Bool(not same)
                return Bool(_inf_order(p, q, rel))
            if p == INF:
                return Bool(rel in (">", ">=", "!="))
            return Bool(rel in ("<", "<=", "!="))
    return cmp(a - b, op)


_SWAP = {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "==": "==", "!=": "!="}


def _inf_order(p, q, rel):
    if p == NEG_INF and q == INF:
        return rel in ("<", "<=")
    if p == INF and q == NEG_INF:
        return rel in (">", ">=")
    return rel in ("<=", ">=")


def neg(c: Symbol) -> Symbol:
    if isinstance(c, Bool):
        return Bool(not c.val)
    if isinstance(c, Not):
        return c.arg
    if isinstance(c, Cmp):
        if c.op in ("==", "!="):
            return Cmp(c.poly, _FLIP[c.op])
        # not (p < 0) is (-p <= 0); not (p <= 0) is (-p < 0)
        return cmp(-c.poly, _FLIP[c.op])
    if isinstance(c, And):
        return or_(*(neg(a) for a in c.args))
    if isinstance(c, Or):
        return and_(*(neg(a) for a in c.args))
    return Not(c)


def and_(*cs: Symbol) -> Symbol:
    flat: list = []
    for c in cs:
        if isinstance(c, Bool):
            if not c.val:
                return FALSE
            continue
        if isinstance(c, And):
            flat.extend(c.args)
        else:
            flat.append(c)
    uniq = sorted(set(flat), key=skey)
    for c in uniq:
        if neg(c) in uniq:
            return FALSE
    if not uniq:
        return TRUE
    if len(uniq) == 1:
        return uniq[0]
    return And(tuple(uniq))


def or_(*cs: Symbol) -> Symbol:
    flat: list = []
    for c in cs:
        if isinstance(c, Bool):
            if c.val:
                return TRUE
            continue
        if isinstance(c, Or):
            flat.extend(c.args)
        else:
            flat.append(c)
    uniq = sorted(set(flat), key=skey)
    for c in uniq:
        if neg(c) in uniq:
            return TRUE
    if not uniq:
        return FALSE
    if len(uniq) == 1:
        return uniq[0]
    return Or(tuple(uniq))


DNF_CAP = 64


def to_dnf(c: Symbol, cap: int = DNF_CAP) -> list:
    """List of conjunction lists (atoms); raises BlowupExceeded past cap."""
    c = _push_neg(c)
    return _dnf(c, cap)


def to_cnf(c: Symbol, cap: int = DNF_CAP) -> list:
    """List of disjunction lists (atoms)."""
    dual = _push_neg(neg(c))
    return [[neg(a) for a in clause] for clause in _dnf(dual, cap)]


def _push_neg(c: Symbol) -> Symbol:
    if isinstance(c, Not):
        inner = neg(c.arg)
        return _push_neg(inner) if not isinstance(inner, Not) else inner
    if isinstance(c, And):
        return and_(*(_push_neg(a) for a in c.args))
    if isinstance(c, Or):
        return or_(*(_push_neg(a) for a in c.args))
    return c


def _dnf(c: Symbol, cap: int) -> list:
    if isinstance(c, Bool):
        return [[]] if c.val else []
    if isinstance(c, Or):
        out = []
        for a in c.args:
            out.extend(_dnf(a, cap))
            if len(out) > cap:
                raise BlowupExceeded(len(out))
        return out
    if isinstance(c, And):
        out = [[]]
        for a in c.args:
            sub = _dnf(a, cap)
            out = [x + y for x in out for y in sub]
            if len(out) > cap:
                raise BlowupExceeded(len(out))
        return out
    return [[c]]


# ---------------------------------------------------------------------------
# Sum construction with canonical binders

_SUM_BINDER = FRESH_SIGIL + "s"


def _binder_levels(s: Symbol) -> set:
    """Levels of sums *bound* inside s (binder name encodes the level)."""
    out = set()
    for x in _sym_closure(s):
        if isinstance(x, SliceSum) and x.binder.startswith(_SUM_BINDER):
            out.add(int(x.binder[len(_SUM_BINDER):]))
    return out


def make_sum(binder: str, lo: Poly, hi: Poly, body: Symbol) -> Symbol:
    """SliceSum with the binder renamed to its canonical level name.

    The level is one above the levels of all sums nested in the body (its
    "height"), a purely structural quantity, so alpha-equivalent sums get
    identical binder names no matter how they were built. References to
    enclosing binders always carry a strictly higher level, so renaming
    cannot capture.
    """
    levels = _binder_levels(body)
    level = max(levels) + 1 if levels else 0
    canon = f"{_SUM_BINDER}{level}"
    if binder != canon:
        body2 = subst_sym(body, {binder: Poly.var(canon)})
        if body2 is None:
            raise ValueError("sum body is not closed under renaming")
        body = body2
        lo = substitute(lo, {binder: Poly.var(canon)})
        hi = substitute(hi, {binder: Poly.var(canon)})
    return SliceSum(canon, lo, hi, body)


def sum_poly(binder: str, lo: Poly, hi: Poly, body: Poly) -> Poly:
    """Distribute a sum over a polynomial body, one SliceSum per open term.

    Constant (binder-free) terms contribute coeff * (hi - lo + 1). Terms
    with several binder-dependent factors fall back to a Prod body.
    """
    out = ZERO
    length = hi - lo + 1
    bvar = Var(binder)
    for t, c in body.items():
        dep = [s for s in t if Poly.sym(s).contains(bvar) or s == bvar]
        free = [s for s in t if not (Poly.sym(s).contains(bvar) or s == bvar)]
        scale = Poly((((tuple(sorted(free, key=skey))), c),))
        if not dep:
            out = out + scale * length
        else:
            inner: Symbol = dep[0] if len(dep) == 1 else Prod(tuple(dep))
            out = out + scale * Poly.sym(make_sum(binder, lo, hi, inner))
    return out


# ---------------------------------------------------------------------------
# Substitution (capture avoiding, renormalizing)


def substitute(p: Poly, binding: dict) -> Poly:
    """Substitute variables by polys throughout p (values may be Polys/ints)."""
    binding = {k: _coerce(v) for k, v in binding.items()}
    out = ZERO
    for t, c in p.items():
        term = Poly.const(c)
        for s in t:
            term = term * _subst_into(s, binding)
        out = out + term
    return out


def _subst_into(s: Symbol, binding: dict) -> Poly:
    if isinstance(s, Var):
        return binding.get(s.name, Poly.sym(s))
    r = subst_sym(s, binding)
    if isinstance(r, _PolyWrapper):
        return r.poly
    if isinstance(r, Poly):
        return r
    return Poly.sym(r)


def subst_sym(s: Symbol, binding: dict):
    """Substitute inside a symbol; returns a Symbol or (for Var hits) a Poly.

    Var targets may expand to full polynomials, everything else maps
    symbol to symbol.
    """
    binding = {k: _coerce(v) for k, v in binding.items()}
    if isinstance(s, Var):
        r = binding.get(s.name)
        return r if r is not None else s
    if isinstance(s, (Bool, Infty, Recur)):
        return s
    if isinstance(s, Index):
        return Index(s.array, substitute(s.index, binding))
    if isinstance(s, SliceSum):
        inner = {k: v for k, v in binding.items() if k != s.binder}
        lo = substitute(s.lo, inner)
        hi = substitute(s.hi, inner)
        # rename the binder through a throwaway name so substituted values
        # can never be captured, then re-canonicalize
        tmp = fresh("t")
        body = _subst_into(s.body, {**inner, s.binder: Poly.var(tmp)})
        return _resum(tmp, lo, hi, body)
    if isinstance(s, Prod):
        args = []
        for a in s.args:
            r = subst_sym(a, binding)
            if isinstance(r, Poly):
                sym = r.single_sym()
                if sym is None:
                    raise ValueError("Prod factor expanded to a polynomial")
                r = sym
            args.append(r)
        return Prod(tuple(args))
    if isinstance(s, Cmp):
        return cmp(substitute(s.poly, binding), s.op)
    if isinstance(s, Not):
        return neg(_as_bool(subst_sym(s.arg, binding)))
    if isinstance(s, And):
        return and_(*(_as_bool(subst_sym(a, binding)) for a in s.args))
    if isinstance(s, Or):
        return or_(*(_as_bool(subst_sym(a, binding)) for a in s.args))
    raise TypeError(f"subst_sym: {s!r}")


def _resum(binder: str, lo: Poly, hi: Poly, body) -> Symbol:
    """Rebuild a sum after substitution; the body may have become a Poly."""
    if isinstance(body, Poly):
        p = sum_poly(binder, lo, hi, body)
        s = p.single_sym()
        if s is not None:
            return s
        # the distributed sum is a genuine poly; callers via substitute()
        # handle that, symbol-position callers cannot
        return _PolyWrapper(p)
    return make_sum(binder, lo, hi, body)


class _PolyWrapper:
    """Internal marker letting _subst_into unwrap distributed sums."""

    __slots__ = ("poly",)

    def __init__(self, poly: Poly):
        self.poly = poly


def _as_bool(x) -> Symbol:
    if isinstance(x, _PolyWrapper):
        raise ValueError("boolean position received a polynomial")
    if isinstance(x, Poly):
        s = x.single_sym()
        if s is None:
            k = x.const_val()
            if k is not None:
                return Bool(bool(k))
            raise ValueError("boolean position received a polynomial")
        return s
    return x


def _mentions(p: Poly, name: str) -> bool:
    return p.contains(Var(name))


def rename_arrays(p: Poly, mapping: dict) -> Poly:
    """Rename array names (Index/Inv/DOR references) throughout p."""
    out = ZERO
    for t, c in p.items():
        term = Poly.const(c)
        for s in t:
            term = term * Poly.sym(_rename_sym(s, mapping))
        out = out + term
    return out


def _rename_ref(ref: ArrayRef, m: dict) -> ArrayRef:
    if isinstance(ref, str):
        return m.get(ref, ref)
    if isinstance(ref, DOR):
        return DOR(tuple(m.get(x, x) for x in ref.members))
    return Inv(m.get(ref.array, ref.array))


def _rename_sym(s: Symbol, m: dict) -> Symbol:
    if isinstance(s, Var):
        tgt = m.get(s.name)
        return Var(tgt) if tgt else s
    if isinstance(s, (Bool, Infty, Recur)):
        return s
    if isinstance(s, Index):
        return Index(_rename_ref(s.array, m), rename_arrays(s.index, m))
    if isinstance(s, SliceSum):
        return SliceSum(
            s.binder,
            rename_arrays(s.lo, m),
            rename_arrays(s.hi, m),
            _rename_sym(s.body, m),
        )
    if isinstance(s, Prod):
        return Prod(tuple(_rename_sym(a, m) for a in s.args))
    if isinstance(s, Cmp):
        return cmp(rename_arrays(s.poly, m), s.op)
    if isinstance(s, Not):
        return neg(_rename_sym(s.arg, m))
    if isinstance(s, And):
        return and_(*(_rename_sym(a, m) for a in s.args))
    if isinstance(s, Or):
        return or_(*(_rename_sym(a, m) for a in s.args))
    raise TypeError(f"rename: {s!r}")


# ---------------------------------------------------------------------------
# One-variable unification (structural matching)


def unify1(pattern: Poly, target: Poly, var: str) -> Optional[Poly]:
    """Find q with pattern{var -> q} == target, or None.

    Used by segmented substitution to eliminate the segment iterator: e.g.
    matching sum shp[0 .. k-1] against sum shp[0 .. 4] binds k to 5.
    """
    if not pattern.contains(Var(var)):
        return ZERO if pattern == target else None
    for cand in _candidates(pattern, target, var):
        if substitute(pattern, {var: cand}) == target:
            return cand
    return None


def _candidates(pat: Poly, tgt: Poly, var: str):
    seen = set()
    for c in _raw_candidates(pat, tgt, var):
        if c not in seen:
            seen.add(c)
            yield c


def _raw_candidates(pat: Poly, tgt: Poly, var: str):
    v = Var(var)
    # top-level linear occurrence: solve coeff*var = tgt - rest
    coeff = 0
    rest = ZERO
    linear = True
    for t, c in pat.items():
        k = sum(1 for s in t if s == v)
        if k == 0:
            if any(Poly.sym(s).contains(v) for s in t):
                linear = False
            rest = rest + Poly(((t, c),))
        elif k == 1 and len(t) == 1:
            coeff += c
        else:
            linear = False
    if linear and coeff:
        diff = tgt - rest
        scaled = _div_poly(diff, coeff)
        if scaled is not None:
            yield scaled
    # descend pairwise into matching structure
    pt, tt = pat.items(), tgt.items()
    if len(pt) == len(tt):
        for (t1, _), (t2, _) in zip(pt, tt):
            if len(t1) == len(t2):
                for s1, s2 in zip(t1, t2):
                    yield from _sym_candidates(s1, s2, var)


def _sym_candidates(a: Symbol, b: Symbol, var: str):
    if type(a) is not type(b):
        return
    if isinstance(a, Index) and a.array == b.array:
        yield from _raw_candidates(a.index, b.index, var)
    elif isinstance(a, SliceSum) and a.binder == b.binder and a.body == b.body:
        yield from _raw_candidates(a.lo, b.lo, var)
        yield from _raw_candidates(a.hi, b.hi, var)
    elif isinstance(a, Cmp) and a.op == b.op:
        yield from _raw_candidates(a.poly, b.poly, var)
    elif isinstance(a, Not):
        yield from _sym_candidates(a.arg, b.arg, var)
    elif isinstance(a, (And, Or, Prod)) and len(a.args) == len(b.args):
        for x, y in zip(a.args, b.args):
            yield from _sym_candidates(x, y, var)


def _div_poly(p: Poly, k: int) -> Optional[Poly]:
    if k == 1:
        return p
    out = []
    for t, c in p.items():
        if c % k:
            return None
        out.append((t, c // k))
    return Poly(tuple(out))
