"""Inequality and equality solving over the polynomial fact language.

The solver answers queries "antecedent implies consequent" where both sides
are boolean symbols over polynomials in variables, array indices and
slice sums. The pieces:

  * lowering: turns guards, monotone-array indexing and inverses into
    plain solver symbols, registering fresh arrays and their facts;
  * assume: extracts candidate range/equivalence bindings from a fact and
    inserts the acyclic ones (latest program order wins ties);
  * simplify: slice-sum normalization (empty-slice removal, end extension
    through known equivalences, merging/cancelling overlapping slices);
  * solve_leq0: Fourier-Motzkin style bound replacement, eliminating the
    most range-dependent symbol first, with integer scaling (k*s entries)
    so no rational arithmetic is needed;
  * prove: DNF split of the antecedent, CNF split of the consequent, with
    an equality pipeline (guide-equation substitution, transitive-equality
    closure, injectivity rewriting x[i]=x[j] -> i=j) for equations.
"""

from __future__ import annotations

from typing import Optional

from .env import DeltaEnv, leading_name
from .pretty import poly_str, sym_str
from .syms import (
    And,
    BlowupExceeded,
    Bool,
    Cmp,
    DOR,
    INF_SYM,
    Index,
    Inv,
    Not,
    ONE,
    Or,
    Poly,
    SliceSum,
    Symbol,
    Var,
    ZERO,
    _ref_names,
    and_,
    cmp,
    fresh,
    make_sum,
    neg,
    or_,
    skey,
    to_cnf,
    to_dnf,
)

DEPTH_CAP = 256
FANOUT_CAP = 64


class QueryResult:
    __slots__ = ("proved",)

    def __init__(self, proved: bool):
        self.proved = proved

    def __bool__(self) -> bool:
        return self.proved

    def __repr__(self) -> str:
        return "proved" if self.proved else "unknown"


PROVED = QueryResult(True)
UNKNOWN = QueryResult(False)


# ---------------------------------------------------------------------------
# small structural helpers


def slice_sum(ref, lo: Poly, hi: Poly) -> Symbol:
    """The canonical sum of ref[lo .. hi]."""
    b = fresh("q")
    return make_sum(b, lo, hi, Index(ref, Poly.var(b)))


def split_slice(s: Symbol):
    """(ref, lo, hi) if s is a sum of a plain slice of one array, else None."""
    if (
        isinstance(s, SliceSum)
        and isinstance(s.body, Index)
        and s.body.index == Poly.var(s.binder)
    ):
        return (s.body.array, s.lo, s.hi)
    return None


def replace_sym(p: Poly, src: Symbol, repl: Poly) -> Poly:
    """Replace every occurrence of the symbol src in p by the poly repl."""
    out = ZERO
    for t, c in p.items():
        term = Poly.const(c)
        for s in t:
            if s == src:
                term = term * repl
            else:
                term = term * Poly.sym(_replace_in(s, src, repl))
        out = out + term
    return out


def _replace_in(s: Symbol, src: Symbol, repl: Poly) -> Symbol:
    if isinstance(s, Index):
        return Index(s.array, replace_sym(s.index, src, repl))
    if isinstance(s, SliceSum):
        body = s.body
        r = repl.single_sym()
        if body == src and r is not None:
            body = r
        elif r is not None:
            body = _replace_in(body, src, repl)
        return make_sum(
            s.binder,
            replace_sym(s.lo, src, repl),
            replace_sym(s.hi, src, repl),
            body,
        )
    if isinstance(s, Cmp):
        return cmp(replace_sym(s.poly, src, repl), s.op)
    if isinstance(s, Not):
        return neg(_replace_in(s.arg, src, repl))
    if isinstance(s, And):
        return and_(*(_replace_in(a, src, repl) for a in s.args))
    if isinstance(s, Or):
        return or_(*(_replace_in(a, src, repl) for a in s.args))
    return s


# ---------------------------------------------------------------------------
# equivalence lookup (Eqv1 / Eqv2)


def _eqv(env: DeltaEnv, s: Symbol) -> Optional[Poly]:
    hit = env.equiv.get(s)
    if hit is not None:
        return hit
    if isinstance(s, Index) and isinstance(s.array, DOR):
        members = s.array.members
        if not members:
            return ZERO
        vals = [env.equiv.get(Index(m, s.index)) for m in members]
        if any(v == ONE for v in vals):
            return ONE
        if all(v == ZERO for v in vals):
            return ZERO
        if len(members) == 1 and vals[0] is not None:
            return vals[0]
    return None


def subst_equivs(env: DeltaEnv, p: Poly) -> Poly:
    for _ in range(16):
        p0 = p
        for s in list(p.symbols()):
            v = _eqv(env, s)
            if v is not None:
                p = replace_sym(p, s, v)
        if p == p0:
            return p
    return p


# ---------------------------------------------------------------------------
# side-condition entailment (kept light: no slice simplification inside)


def _holds(env: DeltaEnv, c: Symbol, depth: int = 0) -> bool:
    if isinstance(c, Bool):
        return c.val
    if isinstance(c, And):
        return all(_holds(env, a, depth) for a in c.args)
    if isinstance(c, Cmp):
        p = c.poly
        if c.op == "<=":
            return _solve(env, p, depth, do_simplify=False)
        if c.op == "<":
            return _solve(env, p + 1, depth, do_simplify=False)
        if c.op == "==":
            return _solve(env, p, depth, do_simplify=False) and _solve(
                env, -p, depth, do_simplify=False
            )
        if c.op == "!=":
            return _solve(env, p + 1, depth, do_simplify=False) or _solve(
                env, -p + 1, depth, do_simplify=False
            )
    return False


def _chain(env, *polys) -> Symbol:
    """p0 <= p1 <= ... as one conjunction."""
    return and_(*(cmp(a - b, "<=") for a, b in zip(polys, polys[1:])))


# ---------------------------------------------------------------------------
# ranges


def get_range(env: DeltaEnv, s: Symbol, depth: int = 0):
    """(lbs, k, ubs) with max(lbs) <= k*s <= min(ubs); lists may be empty."""
    entry = env.ranges.get(s)
    if entry is not None:
        lbs, k, ubs = list(entry.lbs), entry.k, list(entry.ubs)
    else:
        lbs, k, ubs = [], 1, []
    parts = split_slice(s)
    if parts is not None:
        ref, lo, hi = parts
        length = hi - lo + 1
        names = _ref_names(ref)
        infos = [env.elem.get(n) for n in names]
        if isinstance(ref, DOR):
            lbs.append(ZERO)
            if _solve(env, -length, depth + 1, do_simplify=False):
                ubs.append(length * k)
        elif len(names) == 1 and infos[0] is not None:
            info = infos[0]
            lo_k = info.lo.const_val() if info.lo is not None else None
            if lo_k is not None and lo_k >= 0:
                lbs.append(ZERO)
                if info.strict and _solve(env, -length, depth + 1, do_simplify=False):
                    lbs.append(length * k)
            cap = env.sum_cap.get(names[0])
            if cap is not None:
                cap_lo, cap_hi, cap_val = cap
                if _solve(env, cap_lo - lo, depth + 1, do_simplify=False) and _solve(
                    env, hi - cap_hi, depth + 1, do_simplify=False
                ):
                    ubs.append(cap_val * k)
    elif isinstance(s, Index):
        names = _ref_names(s.array)
        if len(names) == 1 and not isinstance(s.array, Inv):
            info = env.elem.get(names[0])
            if info is not None:
                if info.lo is not None:
                    lbs.append(info.lo * k)
                if info.strict:
                    lbs.append(ONE * k)
                if info.hi is not None:
                    ubs.append(info.hi * k)
    lbs = [p for p in set(lbs) if not p.contains(INF_SYM)]
    ubs = [p for p in set(ubs) if not p.contains(INF_SYM)]
    lbs.sort(key=skey)
    ubs.sort(key=skey)
    return lbs, k, ubs


def _dep_score(env: DeltaEnv, s: Symbol, depth: int) -> int:
    lbs, _, ubs = get_range(env, s, depth)
    names = set()
    for p in lbs + ubs:
        names |= set(p.free_names())
    return len(env.name_closure(names))


# ---------------------------------------------------------------------------
# Fourier-Motzkin bound replacement


def _fm_candidates(env: DeltaEnv, p: Poly, depth: int):
    syms = [
        s
        for s in p.symbols()
        if isinstance(s, (Var, Index, SliceSum)) and not isinstance(s, Bool)
    ]
    scored = []
    for s in syms:
        lead = leading_name(s)
        scored.append(
            (
                _dep_score(env, s, depth),
                p.degree_in(s),
                env.order.get(lead, -1),
                skey(s),
                s,
            )
        )
    scored.sort(key=lambda x: (-x[0], -x[1], -x[2], x[3]))
    return [x[4] for x in scored]


def _decompose(p: Poly, s: Symbol):
    """p = pa*s + pb; pa keeps any further occurrences of s."""
    pa = ZERO
    pb = ZERO
    for t, c in p.items():
        if s in t:
            rest = list(t)
            rest.remove(s)
            pa = pa + Poly(((tuple(rest), c),))
        else:
            pb = pb + Poly(((t, c),))
    return pa, pb


def _solve(
    env: DeltaEnv,
    p: Poly,
    depth: int = 0,
    do_simplify: bool = True,
    first: Optional[Symbol] = None,
    budget: Optional[list] = None,
) -> bool:
    """True iff p <= 0 was verified (False means unknown)."""
    if env.contradiction:
        return True
    key = (p, do_simplify, first)
    hit = env._memo.get(key)
    if hit is not None:
        return hit
    if budget is None:
        budget = [FANOUT_CAP * 4]
    if do_simplify:
        p = simplify(env, p, depth)
        p = peel_on_rng(env, p, depth)
    else:
        p = subst_equivs(env, p)
    res = _solve_core(env, p, depth, do_simplify, first, budget)
    env._memo[key] = res
    return res


def _solve_core(env, p, depth, do_simplify, first, budget) -> bool:
    k0 = p.const_val()
    if k0 is not None:
        return k0 <= 0
    if depth >= DEPTH_CAP or budget[0] <= 0:
        return False
    cands = _fm_candidates(env, p, depth)
    if first is not None:
        cands = [first]
    for s in cands:
        lbs, k, ubs = get_range(env, s, depth)
        if not lbs and not ubs:
            env.note(f"no range for {sym_str(s)}")
            continue
        pa, pb = _decompose(p, s)
        if pa.is_zero():
            continue
        env.note(f"eliminate {sym_str(s)} from {poly_str(p)} <= 0")
        for u in ubs or [None]:
            for l in lbs or [None]:
                budget[0] -= 1
                if budget[0] <= 0:
                    return False
                if u is not None:
                    if _solve(env, -pa, depth + 1, do_simplify, None, budget) and _solve(
                        env, u * pa + k * pb, depth + 1, do_simplify, None, budget
                    ):
                        return True
                if l is not None:
                    if _solve(env, pa, depth + 1, do_simplify, None, budget) and _solve(
                        env, l * pa + k * pb, depth + 1, do_simplify, None, budget
                    ):
                        return True
    return False


def solve_leq0(
    env: DeltaEnv, p: Poly, first: Optional[Symbol] = None
) -> QueryResult:
    env.note(f"query: {poly_str(p)} <= 0")
    r = _solve(env, p, 0, True, first)
    env.note("proved" if r else "unknown")
    return PROVED if r else UNKNOWN


# ---------------------------------------------------------------------------
# simplification (slice-sum normalization)


def _map_factors(p: Poly, f) -> Poly:
    out = ZERO
    changed = False
    for t, c in p.items():
        term = Poly.const(c)
        for s in t:
            r = f(s)
            if r is None:
                term = term * Poly.sym(s)
            else:
                changed = True
                term = term * r
        out = out + term
    return out if changed else p


def _zero_sum(env: DeltaEnv, p: Poly, depth: int) -> Poly:
    def f(s):
        if isinstance(s, SliceSum):
            if _holds(env, cmp(s.hi - s.lo + 1, "<="), depth + 1):
                return ZERO
        return None

    return _map_factors(p, f)


def _un_bef(env: DeltaEnv, p: Poly, depth: int) -> Optional[Poly]:
    """Extend a slice end through an element bound in Equiv (both ends)."""
    for s in p.symbols():
        parts = split_slice(s)
        if parts is None:
            continue
        ref, lo, hi = parts
        if _holds(env, cmp(lo - hi - 1, "<="), depth + 1):
            v = _eqv(env, Index(ref, lo - 1))
            if v is not None:
                repl = Poly.sym(slice_sum(ref, lo - 1, hi)) - v
                return replace_sym(p, s, repl)
            v = _eqv(env, Index(ref, hi + 1))
            if v is not None:
                repl = Poly.sym(slice_sum(ref, lo, hi + 1)) - v
                return replace_sym(p, s, repl)
    return None


def _un_aft(env: DeltaEnv, p: Poly, depth: int) -> Optional[Poly]:
    for s in p.symbols():
        v = _eqv(env, s)
        if v is not None:
            return replace_sym(p, s, v)
        if isinstance(s, Index) and isinstance(s.array, DOR) and not s.array.members:
            return replace_sym(p, s, ZERO)
        parts = split_slice(s)
        if parts is None:
            continue
        ref, lo, hi = parts
        if isinstance(ref, DOR) and not ref.members:
            return replace_sym(p, s, ZERO)
        if _holds(env, cmp(lo - hi, "=="), depth + 1):
            return replace_sym(p, s, Poly.sym(Index(ref, lo)))
        if _holds(env, cmp(lo - hi, "<="), depth + 1):
            v = _eqv(env, Index(ref, lo))
            if v is not None:
                repl = Poly.sym(slice_sum(ref, lo + 1, hi)) + v
                return replace_sym(p, s, repl)
            v = _eqv(env, Index(ref, hi))
            if v is not None:
                repl = Poly.sym(slice_sum(ref, lo, hi - 1)) + v
                return replace_sym(p, s, repl)
    return None


def _term_views(p: Poly):
    """(coeff, slice-or-index factor, rest-of-term) views of every term."""
    views = []
    for t, c in p.items():
        for idx, s in enumerate(t):
            if isinstance(s, (SliceSum, Index)):
                rest = t[:idx] + t[idx + 1 :]
                views.append((c, s, rest, t))
    return views


def _same_class(env: DeltaEnv, a: str, b: str) -> bool:
    return a == b or (env.dor.get(a) is not None and env.dor.get(a) == env.dor.get(b))


def _bin_step(env: DeltaEnv, p: Poly, depth: int) -> Optional[Poly]:
    views = _term_views(p)
    for i in range(len(views)):
        for j in range(len(views)):
            if i == j:
                continue
            c1, s1, r1, t1 = views[i]
            c2, s2, r2, t2 = views[j]
            if r1 != r2:
                continue
            rw = _bin_pair(env, c1, s1, c2, s2, depth)
            if rw is not None:
                scale = Poly(((r1, 1),)) if r1 else ONE
                out = (
                    p
                    - Poly(((t1, c1),))
                    - Poly(((t2, c2),))
                    + scale * rw
                )
                if out != p:
                    return out
    return None


def _chain_r(env: DeltaEnv, a, b, c, d, depth: int) -> bool:
    """a <= b <= c + 1 and c <= d: a slice split point, middle may be empty."""
    return (
        _holds(env, cmp(a - b, "<="), depth + 1)
        and _holds(env, cmp(b - c - 1, "<="), depth + 1)
        and _holds(env, cmp(c - d, "<="), depth + 1)
    )


def _bin_pair(env, k1, s1, k2, s2, depth) -> Optional[Poly]:
    """Rewrite of k1*s1 + k2*s2 (without the shared rest factor), or None."""
    p1 = split_slice(s1)
    # B2: slice extended by its successor element
    if p1 is not None and isinstance(s2, Index) and k1 == k2:
        x, b, e = p1
        if (
            s2.array == x
            and _holds(env, cmp(b - e - 1, "<="), depth + 1)
            and _holds(env, cmp(s2.index - e - 1, "=="), depth + 1)
        ):
            return Poly.sym(slice_sum(x, b, e + 1)) * k1
    p2 = split_slice(s2)
    if p1 is None or p2 is None:
        return None
    x1, b1, e1 = p1
    x2, b2, e2 = p2
    # B1: adjacent slices of one array merge
    if x1 == x2 and k1 == k2 and _holds(env, cmp(e1 + 1 - b2, "=="), depth + 1):
        if _holds(env, cmp(b1 - e1 - 1, "<="), depth + 1) or _holds(
            env, cmp(b2 - e2 - 1, "<="), depth + 1
        ):
            return Poly.sym(slice_sum(x1, b1, e2)) * k1
    # B4 family: subtracted overlapping slices of the same array
    if x1 == x2 and k1 == -k2:
        # containment: [b2,e2] inside [b1,e1]; the inner slice may be empty
        if _chain_r(env, b1, b2, e2, e1, depth):
            return (
                Poly.sym(slice_sum(x1, b1, b2 - 1))
                + Poly.sym(slice_sum(x1, e2 + 1, e1))
            ) * k1
        # partial overlap: b2 <= b1 <= e2 + 1, e2 <= e1
        if _chain_r(env, b2, b1, e2, e1, depth):
            return Poly.sym(slice_sum(x1, e2 + 1, e1)) * k1 + Poly.sym(
                slice_sum(x1, b2, b1 - 1)
            ) * k2
    # B3 family: same-class DOR slices with disjoint member sets, added
    if (
        isinstance(x1, DOR)
        and isinstance(x2, DOR)
        and x1.members
        and x2.members
        and k1 == k2
        and not set(x1.members) & set(x2.members)
        and _same_class(env, x1.members[0], x2.members[0])
    ):
        zs = DOR(tuple(sorted(set(x1.members) | set(x2.members))))
        # b1 <= b2 <= e1 + 1, e1 <= e2: prefix of x1, joint middle, suffix of x2
        if _chain_r(env, b1, b2, e1, e2, depth):
            return (
                Poly.sym(slice_sum(x1, b1, b2 - 1))
                + Poly.sym(slice_sum(zs, b2, e1))
                + Poly.sym(slice_sum(x2, e1 + 1, e2))
            ) * k1
        # mirror, [b2,e2] inside [b1,e1]; the inner slice may be empty
        if _chain_r(env, b1, b2, e2, e1, depth):
            return (
                Poly.sym(slice_sum(x1, b1, b2 - 1))
                + Poly.sym(slice_sum(zs, b2, e2))
                + Poly.sym(slice_sum(x1, e2 + 1, e1))
            ) * k1
    # B5: subtracted DOR slices with a common member subset
    if (
        isinstance(x1, DOR)
        and isinstance(x2, DOR)
        and k1 == -k2
        and set(x1.members) & set(x2.members)
        and set(x1.members) != set(x2.members)
        and _same_class(env, x1.members[0], x2.members[0])
    ):
        zs = tuple(sorted(set(x1.members) & set(x2.members)))
        xr = tuple(sorted(set(x1.members) - set(zs)))
        yr = tuple(sorted(set(x2.members) - set(zs)))
        z = DOR(zs)
        inner = _bin_pair(
            env, k1, slice_sum(z, b1, e1), k2, slice_sum(z, b2, e2), depth
        )
        if inner is None:
            # splitting without a rewrite of the common part just undoes B3
            return None
        return (
            Poly.sym(slice_sum(DOR(xr), b1, e1)) * k1
            + Poly.sym(slice_sum(DOR(yr), b2, e2)) * k2
            + inner
        )
    return None


def simplify(env: DeltaEnv, p: Poly, depth: int = 0) -> Poly:
    for _ in range(8):
        p0 = p
        p = subst_equivs(env, p)
        p = _zero_sum(env, p, depth)
        for _ in range(8):
            q = _un_bef(env, p, depth)
            if q is None:
                break
            p = q
        for _ in range(32):
            q = _bin_step(env, p, depth)
            if q is None:
                break
            p = q
        p = _zero_sum(env, p, depth)
        for _ in range(16):
            q = _un_aft(env, p, depth)
            if q is None:
                break
            p = q
        if p == p0:
            break
    return p


def peel_on_rng(env: DeltaEnv, p: Poly, depth: int = 0) -> Poly:
    """Split off an end element that has its own (sharper) range entry."""
    for _ in range(8):
        done = True
        for s in p.symbols():
            parts = split_slice(s)
            if parts is None:
                continue
            ref, lo, hi = parts
            if Index(ref, hi) in env.ranges and _holds(
                env, cmp(lo - hi, "<="), depth + 1
            ):
                repl = Poly.sym(slice_sum(ref, lo, hi - 1)) + Poly.sym(Index(ref, hi))
                p = replace_sym(p, s, repl)
                done = False
                break
        if done:
            break
    return p


# ---------------------------------------------------------------------------
# assuming facts


def assume(env: DeltaEnv, c: Symbol) -> None:
    """Record a boolean fact in the tables (best effort, never unsound)."""
    if isinstance(c, Bool):
        if not c.val:
            env.contradiction = True
        return
    if isinstance(c, And):
        atoms = list(c.args)
        batch: dict = {}
        for a in atoms:
            _assume_atom(env, a, batch)
        _close_batch(env, batch)
        return
    if isinstance(c, Not):
        d = neg(c)
        if not isinstance(d, Not):
            assume(env, d)
        else:
            env.note(f"dropped fact {sym_str(c)}")
        return
    if isinstance(c, Cmp):
        batch: dict = {}
        _assume_atom(env, c, batch)
        _close_batch(env, batch)
        return
    env.note(f"dropped fact {sym_str(c)}")


def _close_batch(env: DeltaEnv, batch: dict) -> None:
    """From lb <= k*s and k*s <= ub in one batch, also record lb <= ub."""
    for s, (lbs, ubs) in batch.items():
        for l in lbs:
            for u in ubs:
                _assume_atom(env, cmp(l - u, "<="), {})


_BOUND_SYMS = (Var, Index, SliceSum)


def _assume_atom(env: DeltaEnv, a: Symbol, batch: dict) -> None:
    if isinstance(a, Bool):
        if not a.val:
            env.contradiction = True
        return
    if isinstance(a, (And, Or, Not)):
        assume(env, a)
        return
    if not isinstance(a, Cmp):
        env.note(f"dropped fact {sym_str(a)}")
        return
    p = a.poly
    if p.contains(INF_SYM):
        env.note(f"dropped fact {sym_str(a)}")
        return
    if a.op == "==":
        _assume_eq(env, p)
        return
    if a.op == "!=":
        eq = _bool_ne_to_eq(env, p)
        if eq is not None:
            _assume_eq(env, eq)
            return
        env.note(f"dropped fact {sym_str(a)}")
        return
    q = p + 1 if a.op == "<" else p
    # q <= 0: pick one linear symbol occurrence to bound
    cands = []
    for t, c in q.items():
        if len(t) == 1 and isinstance(t[0], _BOUND_SYMS):
            s = t[0]
            rest = q - Poly(((t, c),))
            if rest.contains(s) or q.degree_in(s) > 1:
                continue
            if c > 0:
                bound = ("ub", s, c, -rest)
            else:
                bound = ("lb", s, -c, rest)
            if bound[3].contains(INF_SYM):
                continue
            if env.would_cycle(s, bound[3].free_names()):
                continue
            cands.append(bound)
    if not cands:
        env.note(f"dropped fact {sym_str(a)}")
        return
    for _, s, _, _ in cands:
        ln = leading_name(s)
        if ln is not None:
            env.see(ln)
    cands.sort(key=lambda b: (-env.order.get(leading_name(b[1]), -1), skey(b[1])))
    kind, s, k, bound = cands[0]
    if kind == "ub":
        env.add_range(s, None, k, bound)
    else:
        env.add_range(s, bound, k, None)
    ent = batch.setdefault(s, ([], []))
    entk = env.ranges[s].k
    ent[0 if kind == "lb" else 1].append(bound * (entk // k))


def _bool_ne_to_eq(env: DeltaEnv, p: Poly) -> Optional[Poly]:
    """s != r over a 0/1-valued array pins s to the other value."""
    syms = [t[0] for t, c in p.items() if t]
    if len(syms) != 1 or not isinstance(syms[0], Index):
        return None
    s = syms[0]
    arr = s.array
    members = arr.members if isinstance(arr, DOR) else (arr,) if isinstance(arr, str) else ()
    if not members:
        return None
    for m in members:
        info = env.elem.get(m)
        if info is None or info.lo != ZERO or info.hi != ONE:
            return None
    sp = Poly.sym(s)
    for r in (0, 1):
        if p == sp - Poly.const(r) or p == Poly.const(r) - sp:
            return sp - Poly.const(1 - r)
    return None


def _assume_eq(env: DeltaEnv, p: Poly) -> None:
    cands = []
    for t, c in p.items():
        if len(t) == 1 and c in (1, -1) and isinstance(t[0], _BOUND_SYMS):
            s = t[0]
            rest = p - Poly(((t, c),))
            val = -rest if c == 1 else rest
            if val.contains(s) or val.contains(INF_SYM):
                continue
            if env.would_cycle(s, val.free_names()):
                continue
            cands.append((s, val))
    for s, _ in cands:
        ln = leading_name(s)
        if ln is not None:
            env.see(ln)
    cands.sort(key=lambda b: (-env.order.get(leading_name(b[0]), -1), skey(b[0])))
    if cands:
        s, val = cands[0]
        if isinstance(s, Index) and isinstance(s.array, DOR) and len(s.array.members) == 1:
            s = Index(s.array.members[0], s.index)
        env.add_equiv(s, val)
        _dor_sibling_zeros(env, s, val)
        return
    # no placeable equivalence: keep the information as two bounds
    _assume_atom(env, cmp(p, "<="), {})
    _assume_atom(env, cmp(-p, "<="), {})


def _dor_sibling_zeros(env: DeltaEnv, s: Symbol, val: Poly) -> None:
    """A true member of a disjoint-or class zeroes its siblings there."""
    if val != ONE or not (isinstance(s, Index) and isinstance(s.array, str)):
        return
    cls = env.dor.get(s.array)
    if cls is None:
        return
    for m in cls:
        if m != s.array and env.equiv.get(Index(m, s.index)) is None:
            env.add_equiv(Index(m, s.index), ZERO)


# ---------------------------------------------------------------------------
# proving


def _expand_ne(env: DeltaEnv, c: Symbol) -> Symbol:
    """Split p != 0 antecedents into p < 0 or p > 0 (integer reasoning).

    Boolean-array disequalities are kept: assume() turns them into
    equalities directly.
    """
    if isinstance(c, Cmp) and c.op == "!=":
        if _bool_ne_to_eq(env, c.poly) is not None:
            return c
        return or_(cmp(c.poly + 1, "<="), cmp(-c.poly + 1, "<="))
    if isinstance(c, And):
        return and_(*(_expand_ne(env, a) for a in c.args))
    if isinstance(c, Or):
        return or_(*(_expand_ne(env, a) for a in c.args))
    if isinstance(c, Not):
        d = neg(c)
        if not isinstance(d, Not):
            return neg(_expand_ne(env, d))
        return c
    return c


def prove(env: DeltaEnv, antecedent: Symbol, consequent: Symbol) -> QueryResult:
    env.note(f"prove: {sym_str(antecedent)} => {sym_str(consequent)}")
    try:
        disjuncts = to_dnf(_expand_ne(env, antecedent))
    except BlowupExceeded:
        return UNKNOWN
    if not disjuncts:
        return PROVED  # antecedent is false
    for atoms in disjuncts:
        e2 = env.copy()
        assume(e2, and_(*atoms))
        if e2.contradiction:
            continue
        if not _prove_under(e2, atoms, consequent):
            env.note("unknown")
            return UNKNOWN
    env.note("proved")
    return PROVED


def prove_true(env: DeltaEnv, consequent: Symbol) -> QueryResult:
    return prove(env, Bool(True), consequent)


def _prove_under(env: DeltaEnv, atoms, c: Symbol) -> bool:
    try:
        clauses = to_cnf(c)
    except BlowupExceeded:
        return False
    return all(any(_prove_atom(env, lit, atoms) for lit in clause) for clause in clauses)


def _prove_atom(env: DeltaEnv, lit: Symbol, atoms) -> bool:
    if isinstance(lit, Bool):
        return lit.val
    if isinstance(lit, And):
        return all(_prove_atom(env, a, atoms) for a in lit.args)
    if isinstance(lit, Or):
        return any(_prove_atom(env, a, atoms) for a in lit.args)
    if isinstance(lit, Not):
        d = neg(lit)
        if not isinstance(d, Not):
            return _prove_atom(env, d, atoms)
        return False
    if not isinstance(lit, Cmp):
        # bare boolean symbol: holds when equivalent to 1
        v = _eqv(env, lit)
        return v == ONE
    p = lit.poly
    if lit.op == "<=":
        return bool(_solve(env, p))
    if lit.op == "<":
        return bool(_solve(env, p + 1))
    if lit.op == "!=":
        return bool(_solve(env, p + 1)) or bool(_solve(env, -p + 1))
    return _prove_eq_full(env, p, atoms)


def _prove_eq_full(env: DeltaEnv, p: Poly, atoms) -> bool:
    if bool(_solve(env, p)) and bool(_solve(env, -p)):
        return True
    eqs = [a.poly for a in atoms if isinstance(a, Cmp) and a.op == "=="]
    if not eqs:
        return False
    guides: list = [None]
    for q in eqs:
        for t, c in q.items():
            if len(t) == 1 and c in (1, -1) and isinstance(t[0], _BOUND_SYMS):
                s = t[0]
                rhs = Poly.sym(s) - (q if c == 1 else -q)
                if not rhs.contains(s):
                    guides.append((q, s, rhs))
    for guide in guides:
        if _eq_pipeline(env, p, eqs, guide):
            return True
    return False


def _eq_pipeline(env: DeltaEnv, target: Poly, eqs, guide) -> bool:
    if guide is not None:
        gq, gs, grhs = guide
        eqs = [replace_sym(q, gs, grhs) for q in eqs if q != gq] + [gq]
    uf: dict = {}

    def find(x):
        while uf.get(x, x) != x:
            uf[x] = uf.get(uf[x], uf[x])
            x = uf[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            uf[rx] = ry

    nodes: set = set()

    def add_node(q: Poly):
        if q in nodes:
            return
        nodes.add(q)
        for s in q.all_symbols():
            if isinstance(s, Index):
                add_node(Poly.sym(s))
                add_node(s.index)

    for q in eqs:
        # split q == 0 into sides: single symbol with unit coefficient vs rest
        for t, c in q.items():
            if len(t) == 1 and c in (1, -1):
                lhs = Poly.sym(t[0])
                rhs = lhs - (q if c == 1 else -q)
                add_node(lhs)
                add_node(rhs)
                union(lhs, rhs)
                break
    # close under injectivity: x[i] = x[j] gives i = j inside the record
    for _ in range(8):
        changed = False
        idx = [
            (q, s) for q in nodes for s in [q.single_sym()] if isinstance(s, Index)
        ]
        for q1, s1 in idx:
            for q2, s2 in idx:
                if q1 is q2 or s1.array != s2.array:
                    continue
                if find(q1) != find(q2):
                    # congruence: equal indices make equal elements
                    if find(s1.index) == find(s2.index) and s1.index in nodes:
                        union(q1, q2)
                        changed = True
                    continue
                if not isinstance(s1.array, str):
                    continue
                rcd = env.inj.get(s1.array)
                if rcd is None:
                    continue
                lo, hi = rcd
                ok = True
                for ix in (s1.index, s2.index):
                    if not lo.contains(INF_SYM) and not bool(_solve(env, lo - ix)):
                        ok = False
                    if not hi.contains(INF_SYM) and not bool(_solve(env, ix - hi)):
                        ok = False
                if ok and find(s1.index) != find(s2.index):
                    env.note(
                        f"injectivity of {s1.array}: "
                        f"{sym_str(s1)} = {sym_str(s2)} gives index equality"
                    )
                    union(s1.index, s2.index)
                    changed = True
        if not changed:
            break
    e3 = env.copy()
    groups: dict = {}
    for q in nodes:
        groups.setdefault(find(q), []).append(q)
    for members in groups.values():
        rep = members[0]
        for q in members[1:]:
            c = cmp(q - rep, "==")
            if isinstance(c, Cmp):
                _assume_eq(e3, c.poly)
    return bool(_solve(e3, target)) and bool(_solve(e3, -target))


# ---------------------------------------------------------------------------
# lowering of analysis-level polynomials into solver facts


def lower_poly(env: DeltaEnv, p: Poly) -> Poly:
    out = ZERO
    for t, c in p.items():
        term = Poly.const(c)
        for s in t:
            term = term * _lower_sym(env, s)
        out = out + term
    return out


def _lower_sym(env: DeltaEnv, s: Symbol) -> Poly:
    if isinstance(s, Var):
        return Poly.sym(s)
    if isinstance(s, (Cmp, Not, And, Or, Bool)):
        return lower_guard(env, s, None)
    if isinstance(s, Index):
        idx = lower_poly(env, s.index)
        if isinstance(s.array, Inv):
            key = Index(s.array, idx)
            name = env.inverse_vars.get(key)
            if name is None:
                name = fresh("inv")
                env.inverse_vars[key] = name
                info = env.bij.get(s.array.array)
                v = Var(name)
                if info is not None:
                    lo, hi = info.rcd
                    if not lo.contains(INF_SYM):
                        env.add_range(v, lo, 1, None)
                    if not hi.contains(INF_SYM):
                        env.add_range(v, None, 1, hi)
            return Poly.var(name)
        if isinstance(s.array, str) and s.array in env.mono:
            return _mono_index(env, s.array, idx)
        return Poly.sym(Index(s.array, idx))
    if isinstance(s, SliceSum):
        lo = lower_poly(env, s.lo)
        hi = lower_poly(env, s.hi)
        body = s.body
        if isinstance(body, Index) and body.index == Poly.var(s.binder):
            if isinstance(body.array, str) and env.is_dor_member(body.array):
                return Poly.sym(slice_sum(DOR((body.array,)), lo, hi))
            return Poly.sym(slice_sum(body.array, lo, hi))
        if isinstance(body, (Cmp, Not, And, Or, Index)):
            g = lower_guard(env, body, s.binder)
            from .syms import sum_poly

            return sum_poly(s.binder, lo, hi, g)
        return Poly.sym(make_sum(s.binder, lo, hi, body))
    return Poly.sym(s)


def _mono_index(env: DeltaEnv, name: str, idx: Poly) -> Poly:
    """Monotone array access as base plus a slice sum of differences."""
    enc = env.mono_encodings.get(name)
    if enc is None:
        op, lo, hi, length = env.mono[name]
        delta = fresh("d")
        base = lo if lo is not None and not lo.contains(INF_SYM) else Poly.var(
            fresh("base")
        )
        env.set_elem(delta, lo=ZERO, strict=op in ("<", ">"))
        if (
            hi is not None
            and lo is not None
            and length is not None
            and not hi.contains(INF_SYM)
            and not lo.contains(INF_SYM)
        ):
            env.sum_cap[delta] = (ZERO, length - 1, hi - lo)
        enc = (delta, base, op)
        env.mono_encodings[name] = enc
    delta, base, op = enc
    if op in (">", ">="):
        return base - Poly.sym(slice_sum(delta, ZERO, idx))
    return base + Poly.sym(slice_sum(delta, ZERO, idx))


def lower_guard(env: DeltaEnv, g: Symbol, binder: Optional[str]) -> Poly:
    """A boolean as a 0/1 poly over guard arrays indexed by the binder."""
    if isinstance(g, Bool):
        return ONE if g.val else ZERO
    if isinstance(g, Not):
        return ONE - lower_guard(env, g.arg, binder)
    if isinstance(g, And):
        out = ONE
        for a in g.args:
            out = out * lower_guard(env, a, binder)
        return out
    if isinstance(g, Or):
        # 1 - prod(1 - gi): guards in one case set are disjoint, but that
        # is not assumed here
        out = ONE
        for a in g.args:
            out = out * (ONE - lower_guard(env, a, binder))
        return ONE - out
    if isinstance(g, Index):
        idx = lower_poly(env, g.index)
        name = g.array if isinstance(g.array, str) else None
        if name is not None:
            if not env.is_dor_member(name):
                env.add_dor_class((name,))
            return Poly.sym(Index(DOR((name,)), idx))
        return Poly.sym(Index(g.array, idx))
    # comparison template: abstract the binder, share one fresh array
    hole = Var("%hole")
    if binder is not None:
        key = _replace_in(g, Var(binder), Poly.sym(hole))
    else:
        key = g
    arr = env.guard_arrays.get(key)
    if arr is None:
        arr = fresh("g")
        env.guard_arrays[key] = arr
        env.add_dor_class((arr,))
    at = Poly.var(binder) if binder is not None else ZERO
    return Poly.sym(Index(DOR((arr,)), at))


def lower_bool(env: DeltaEnv, c: Symbol) -> Symbol:
    if isinstance(c, Bool):
        return c
    if isinstance(c, Cmp):
        return cmp(lower_poly(env, c.poly), c.op)
    if isinstance(c, Not):
        return neg(lower_bool(env, c.arg))
    if isinstance(c, And):
        return and_(*(lower_bool(env, a) for a in c.args))
    if isinstance(c, Or):
        return or_(*(lower_bool(env, a) for a in c.args))
    if isinstance(c, Index):
        return cmp(lower_guard(env, c, None) - 1, "==")
    return c
