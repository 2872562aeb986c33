"""The verification environment: everything the solver knows as facts.

One DeltaEnv instance accompanies the analysis of a function. It holds

  * triangular range and equivalence tables over solver symbols,
  * per-array element facts (element ranges, positivity, slice-sum caps),
  * classes of pairwise-disjoint boolean arrays (guard lowerings),
  * the verified/assumed high-level array properties,
  * a program-order counter used to break binding-candidate ties.

"Triangular" means the name-level dependency graph of the tables stays
acyclic: a symbol's bounds may only mention names that do not (transitively)
depend back on the symbol's own leading name. This is what guarantees that
bound replacement terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .syms import (
    DOR,
    Index,
    Inv,
    Poly,
    SliceSum,
    Symbol,
    Var,
    _ref_names,
)


@dataclass(frozen=True)
class RangeEntry:
    """max(lbs) <= k * sym <= min(ubs), with k a positive integer."""

    lbs: tuple
    k: int
    ubs: tuple


@dataclass(frozen=True)
class ElemInfo:
    """Facts about the elements of a named array."""

    lo: Optional[Poly] = None  # every element >= lo
    hi: Optional[Poly] = None  # every element <= hi
    strict: bool = False  # every element >= 1 (refines lo)


@dataclass(frozen=True)
class BijInfo:
    rcd: tuple  # (lo, hi) Polys
    segs: Optional[tuple]  # None (whole array) or segment descriptor
    img: tuple  # (lo, hi) Polys


@dataclass(frozen=True)
class FiltPartInfo:
    src: str
    filt: object  # predicate (closure over the analysis IR)
    parts: tuple


def leading_name(s: Symbol) -> Optional[str]:
    """The name a table entry for s is charged to."""
    if isinstance(s, Var):
        return s.name
    if isinstance(s, Index):
        return _ref_names(s.array)[0] if _ref_names(s.array) else None
    if isinstance(s, SliceSum):
        if isinstance(s.body, Index):
            names = _ref_names(s.body.array)
            return names[0] if names else None
    return None


class DeltaEnv:
    """Mutable fact store; cheap to copy for speculative sub-queries."""

    def __init__(self):
        self.ranges: dict = {}  # Symbol -> RangeEntry
        self.equiv: dict = {}  # Symbol -> Poly
        self.elem: dict = {}  # array name -> ElemInfo
        self.dor: dict = {}  # member name -> tuple of all class members
        self.sum_cap: dict = {}  # array name -> (lo, hi_idx, cap) Polys
        self.mono: dict = {}  # array name -> op in {"<", "<=", ">", ">="}
        self.inj: dict = {}  # array name -> (lo, hi) restricted-codomain
        self.bij: dict = {}  # array name -> BijInfo
        self.filtpart: dict = {}  # array name -> FiltPartInfo
        self.invfiltpart: dict = {}  # array name -> tuple of info
        self.orthog: set = set()  # frozensets of predicate identities
        self.order: dict = {}  # name -> introduction index
        self.deps: dict = {}  # name -> set of names its facts mention
        self.guard_arrays: dict = {}  # guard template Symbol -> array name
        self.mono_encodings: dict = {}  # array name -> (delta array, lo Poly)
        self.inverse_vars: dict = {}  # Symbol -> fresh var name
        self.contradiction = False
        self._order_counter = 0
        self._memo: dict = {}
        self.trace: Optional[list] = None

    # -- bookkeeping --------------------------------------------------------

    def copy(self) -> "DeltaEnv":
        out = DeltaEnv.__new__(DeltaEnv)
        out.ranges = dict(self.ranges)
        out.equiv = dict(self.equiv)
        out.elem = dict(self.elem)
        out.dor = dict(self.dor)
        out.sum_cap = dict(self.sum_cap)
        out.mono = dict(self.mono)
        out.inj = dict(self.inj)
        out.bij = dict(self.bij)
        out.filtpart = dict(self.filtpart)
        out.invfiltpart = dict(self.invfiltpart)
        out.orthog = set(self.orthog)
        out.order = dict(self.order)
        out.deps = {k: set(v) for k, v in self.deps.items()}
        out.guard_arrays = dict(self.guard_arrays)
        out.mono_encodings = dict(self.mono_encodings)
        out.inverse_vars = dict(self.inverse_vars)
        out.contradiction = self.contradiction
        out._order_counter = self._order_counter
        out._memo = {}
        out.trace = self.trace
        return out

    def note(self, msg: str) -> None:
        if self.trace is not None:
            self.trace.append(msg)

    def see(self, name: str) -> int:
        """Record (or look up) the program-order index of a name."""
        if name not in self.order:
            self.order[name] = self._order_counter
            self._order_counter += 1
        return self.order[name]

    def invalidate(self) -> None:
        self._memo.clear()

    # -- triangularity ------------------------------------------------------

    def name_closure(self, names) -> set:
        """Transitive closure of names through the dependency graph."""
        out = set()
        todo = list(names)
        while todo:
            n = todo.pop()
            if n in out:
                continue
            out.add(n)
            todo.extend(self.deps.get(n, ()))
        return out

    def would_cycle(self, sym: Symbol, bound_names) -> bool:
        lead = leading_name(sym)
        if lead is None:
            return False
        return lead in self.name_closure(bound_names)

    def add_dep(self, sym: Symbol, bound_names) -> None:
        lead = leading_name(sym)
        if lead is None:
            return
        self.see(lead)
        self.deps.setdefault(lead, set()).update(bound_names)
        for n in bound_names:
            self.see(n)

    # -- table insertion ----------------------------------------------------

    def add_range(self, sym: Symbol, lb: Optional[Poly], k: int, ub: Optional[Poly]):
        """Merge a bound max(lbs) <= k*sym <= min(ubs) into the table."""
        assert k > 0
        old = self.ranges.get(sym)
        if old is None:
            old = RangeEntry((), 1, ())
        if old.k != k:
            import math

            m = math.lcm(old.k, k)
            a, b = m // old.k, m // k
            old = RangeEntry(
                tuple(p * a for p in old.lbs), m, tuple(p * a for p in old.ubs)
            )
            lb = lb * b if lb is not None else None
            ub = ub * b if ub is not None else None
            k = m
        lbs = old.lbs + ((lb,) if lb is not None and lb not in old.lbs else ())
        ubs = old.ubs + ((ub,) if ub is not None and ub not in old.ubs else ())
        self.ranges[sym] = RangeEntry(lbs, k, ubs)
        names = set()
        for p in (lb, ub):
            if p is not None:
                names |= set(p.free_names())
        self.add_dep(sym, names)
        self.invalidate()

    def add_equiv(self, sym: Symbol, val: Poly) -> None:
        self.equiv[sym] = val
        self.add_dep(sym, set(val.free_names()))
        self.invalidate()

    def set_elem(self, name: str, lo=None, hi=None, strict=False) -> None:
        old = self.elem.get(name, ElemInfo())
        self.elem[name] = ElemInfo(
            lo if lo is not None else old.lo,
            hi if hi is not None else old.hi,
            strict or old.strict,
        )
        self.see(name)
        self.invalidate()

    def add_dor_class(self, members: tuple) -> None:
        for m in members:
            self.dor[m] = members
            self.set_elem(m, lo=Poly.const(0), hi=Poly.const(1))
        self.invalidate()

    def is_dor_member(self, name: str) -> bool:
        return name in self.dor
