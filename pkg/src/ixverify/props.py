"""Verification and propagation of high-level array properties.

Properties (Range, Equiv, Mono, Inj, Bij, FiltPart, InvFiltPart,
OrthogPreds) are verified against the index functions inferred for the
annotated arrays. Every check reduces to solver queries; outcomes are
two-valued: proved or unknown. A proved property is recorded in the
environment so later obligations can use it.

The caller supplies gamma (name -> IndexFn) and a `conv` callback that
runs the index-function rewrite engine, so this module stays independent
of the inference pass.
"""

from __future__ import annotations

import itertools
from typing import Callable, Optional

from .env import BijInfo, DeltaEnv, FiltPartInfo
from .ixfn import (
    IndexFn,
    Linear,
    Mixed,
    Segmented,
    domain_facts,
    domain_size,
    point_iter,
    subst_cases_simple,
    unify_ixfn,
)
from .pretty import ixfn_str, sym_str
from .solver import lower_bool, prove
from .syms import (
    Bool,
    INF_SYM,
    Index,
    Inv,
    Poly,
    Symbol,
    TRUE,
    Var,
    and_,
    cmp2,
    fresh,
    neg,
    or_,
    substitute,
)

MAX_PERM_GUARDS = 6

Conv = Callable[[IndexFn], IndexFn]


def _ident(f: IndexFn) -> IndexFn:
    return f


def _q(env: DeltaEnv, facts, consequent: Symbol) -> bool:
    ante = lower_bool(env, and_(*facts))
    cons = lower_bool(env, consequent)
    return bool(prove(env, ante, cons))


def _in_iv(val: Poly, lo: Poly, hi: Poly) -> Symbol:
    parts = []
    if not lo.contains(INF_SYM):
        parts.append(cmp2(lo, "<=", val))
    if not hi.contains(INF_SYM):
        parts.append(cmp2(val, "<=", hi))
    return and_(*parts)


def _is_inf_case(value: Poly) -> bool:
    return value.contains(INF_SYM)


def _subset(env: DeltaEnv, facts, iv1, iv2) -> bool:
    """[lo1,hi1] subset of [lo2,hi2]: empty or contained at both ends."""
    lo1, hi1 = iv1
    lo2, hi2 = iv2
    goal = or_(
        cmp2(hi1, "<", lo1),
        and_(cmp2(lo2, "<=", lo1), cmp2(hi1, "<=", hi2)),
    )
    return _q(env, facts, goal)


# ---------------------------------------------------------------------------
# guarded-expression helpers


def _rename_pt(cases, old: str, new: str):
    return subst_cases_simple(cases, {old: Poly.var(new)})


def mon_ge(env: DeltaEnv, facts, cases, op: str, i: str, j: str, trace=None):
    """Monotonicity across guarded cases; returns the sorting order or None.

    Within each case, values at i and j (i < j) must compare by op; across
    consecutive cases of the returned order, values must strictly increase
    regardless of index order.
    """
    if len(cases) > MAX_PERM_GUARDS:
        return None
    lt = cmp2(Poly.var(i), "<", Poly.var(j))
    for g, v in cases:
        g2, v2 = _rename_pt(((g, v),), i, j)[0]
        if not _q(env, facts + [lt, g, g2], cmp2(v, op, v2)):
            return None
    ne = or_(
        cmp2(Poly.var(i), "<", Poly.var(j)), cmp2(Poly.var(j), "<", Poly.var(i))
    )
    if len(cases) == 1:
        return (0,)
    for perm in itertools.permutations(range(len(cases))):
        ok = True
        for a, b in zip(perm, perm[1:]):
            ga, va = _rename_pt((cases[a],), i, j)[0]
            gb, vb = cases[b]
            if not _q(env, facts + [ne, ga, gb], cmp2(va, "<", vb)):
                ok = False
                break
        if ok:
            if trace is not None:
                trace.append(f"sorting order {perm}")
            return perm
    return None


def inj_ge(env: DeltaEnv, facts, cases, i: str, j: str) -> bool:
    """Value equality forces index equality, via the equality solver."""
    eq_goal = cmp2(Poly.var(i), "==", Poly.var(j))
    for gh, vh in cases:
        for gl, vl in cases:
            gl2, vl2 = _rename_pt(((gl, vl),), i, j)[0]
            ante = facts + [cmp2(vh, "==", vl2), gh, gl2]
            if not _q(env, ante, eq_goal):
                return False
    return True


def cmp_ge(env: DeltaEnv, facts, cases1, cases2, op: str) -> bool:
    """All value pairs across the two case lists compare by op."""
    for g1, v1 in cases1:
        for g2, v2 in cases2:
            if op == "!=":
                if not (
                    _q(env, facts + [g1, g2], cmp2(v1, "<", v2))
                    or _q(env, facts + [g1, g2], cmp2(v1, ">", v2))
                ):
                    return False
            elif not _q(env, facts + [g1, g2], cmp2(v1, op, v2)):
                return False
    return True


# ---------------------------------------------------------------------------
# injectivity


def _live_cases(f: IndexFn):
    return tuple((g, v) for g, v in f.cases if not _is_inf_case(v))


def _refuted(env: DeltaEnv, facts, g: Symbol) -> bool:
    """The guard cannot hold: every DNF disjunct has a refutable atom
    under the remaining atoms of that disjunct."""
    from .syms import BlowupExceeded, to_dnf

    try:
        disjuncts = to_dnf(g)
    except BlowupExceeded:
        return False
    for atoms in disjuncts:
        atoms = list(atoms)
        hit = False
        for a in range(len(atoms)):
            rest = atoms[:a] + atoms[a + 1 :]
            if _q(env, facts + rest, neg(atoms[a])):
                hit = True
                break
        if not hit:
            return False
    return True


def _drop_implied(env: DeltaEnv, facts, g: Symbol) -> Symbol:
    """Remove conjuncts of g that follow from the facts and the rest."""
    from .syms import And

    if not isinstance(g, And):
        return g
    args = list(g.args)
    i = 0
    while i < len(args):
        rest = args[:i] + args[i + 1 :]
        if _q(env, facts + rest, args[i]):
            args = rest
        else:
            i += 1
    return and_(*args)


def _prune(env: DeltaEnv, f: IndexFn) -> IndexFn:
    """Drop cases whose guard is refuted by the domain facts."""
    facts = domain_facts(f.domain)
    kept = []
    for g, v in f.cases:
        if g == Bool(False):
            continue
        if _refuted(env, facts, g):
            continue
        kept.append((g, v))
    return IndexFn(f.domain, tuple(kept))


def verify_inj_ixfn(
    env: DeltaEnv, f: IndexFn, use_eq: bool = True, mon_op: str = "!=", trace=None
) -> bool:
    """Injectivity of the non-masked values of f."""
    cases = _live_cases(f)
    if not cases:
        return True
    dom = f.domain
    if isinstance(dom, Linear):
        i = dom.iter
        j = fresh("j")
        facts = domain_facts(dom) + [
            cmp2(Poly.const(0), "<=", Poly.var(j)),
            cmp2(Poly.var(j), "<=", dom.size - 1),
        ]
        if use_eq and inj_ge(env, facts, cases, i, j):
            if trace is not None:
                trace.append("injective by value-equality reasoning")
            return True
        if mon_ge(env, facts, cases, mon_op, i, j, trace) is not None:
            if trace is not None:
                trace.append("injective by piecewise monotonicity")
            return True
        return False
    if isinstance(dom, Segmented):
        k, jv = dom.seg_iter, dom.point_iter
        j2 = fresh("j")
        nxt = substitute(dom.seg_start, {k: Poly.var(k) + 1})
        within = domain_facts(dom) + [
            cmp2(dom.seg_start, "<=", Poly.var(j2)),
            cmp2(Poly.var(j2), "<=", nxt - 1),
        ]
        ok = (use_eq and inj_ge(env, within, cases, jv, j2)) or mon_ge(
            env, within, cases, mon_op, jv, j2, trace
        ) is not None
        if not ok:
            return False
        # different segments must produce different values
        k2 = fresh("k")
        start2 = substitute(dom.seg_start, {k: Poly.var(k2)})
        nxt2 = substitute(dom.seg_start, {k: Poly.var(k2) + 1})
        cases2 = subst_cases_simple(
            _rename_pt(cases, jv, j2), {k: Poly.var(k2)}
        )
        cross = domain_facts(dom) + [
            cmp2(Poly.var(k), "<", Poly.var(k2)),
            cmp2(Poly.var(k2), "<=", dom.last),
            cmp2(start2, "<=", Poly.var(j2)),
            cmp2(Poly.var(j2), "<=", nxt2 - 1),
        ]
        op = "<" if mon_op == "<" else "!="
        return cmp_ge(env, cross, cases, cases2, op)
    return False


def verify_inj(
    env: DeltaEnv, x: str, rcd, gamma: dict, conv: Conv = _ident, trace=None
) -> bool:
    lo, hi = rcd
    prev = env.inj.get(x)
    if prev is not None and _subset(env, [], rcd, prev):
        if trace is not None:
            trace.append(f"Inj {x}: already known on a wider co-domain")
        return True
    fp = env.filtpart.get(x)
    if fp is not None and fp.src in gamma:
        src = gamma[fp.src]
        i = point_iter(src.domain)
        val = Poly.sym(Index(fp.src, Poly.var(i)))
        filt = TRUE
        if fp.filt is not None:
            filt = _rename_pred(fp.filt[1], fp.filt[0], i)
        guard = and_(filt, _in_iv(val, lo, hi))
        f = IndexFn(
            Linear(i, domain_size(src.domain)),
            ((guard, val), (neg(guard), Poly.sym(INF_SYM))),
        )
    elif x in gamma:
        base = gamma[x]
        i = point_iter(base.domain)
        cases = []
        for g, v in base.cases:
            if _is_inf_case(v):
                cases.append((g, v))
                continue
            inside = _in_iv(v, lo, hi)
            cases.append((and_(g, inside), v))
            out = and_(g, neg(inside))
            if out != Bool(False):
                cases.append((out, Poly.sym(INF_SYM)))
        f = IndexFn(base.domain, tuple(cases))
    else:
        return False
    f = _prune(env, conv(f))
    if trace is not None:
        trace.append(f"Inj {x}: checking {ixfn_str(f)}")
    if verify_inj_ixfn(env, f, trace=trace):
        env.inj[x] = rcd
        return True
    return False


# ---------------------------------------------------------------------------
# bijectivity


def _seg_parts(dom):
    """(k, last, start, next_start, point) of a segmented-ish domain."""
    if isinstance(dom, Segmented):
        nxt = substitute(dom.seg_start, {dom.seg_iter: Poly.var(dom.seg_iter) + 1})
        return dom.seg_iter, dom.last, dom.seg_start, nxt, dom.point_iter
    return None


def _cardinality_goal(env, facts, f: IndexFn, lo, hi, per_segment: bool) -> bool:
    """|[lo,hi]| equals the number of domain points with a live guard.

    The guards of an index function are exclusive and complete, so the
    live count is the domain (or segment) size minus the sum of the
    masked guards.
    """
    from .syms import sum_poly

    dom = f.domain
    inf_guards = [g for g, v in f.cases if _is_inf_case(v)]
    if per_segment:
        parts = _seg_parts(dom)
        if parts is None:
            return False
        k, last, start, nxt, j = parts
        live = nxt - start
        for g in inf_guards:
            live = live - sum_poly(j, start, nxt - 1, lower_guard_poly(env, g, j))
    elif isinstance(dom, Linear):
        live = dom.size
        for g in inf_guards:
            live = live - sum_poly(
                dom.iter, Poly.const(0), dom.size - 1, lower_guard_poly(env, g, dom.iter)
            )
    else:
        parts = _seg_parts(dom)
        if parts is None:
            return False
        k, last, start, nxt, j = parts
        live = domain_size(dom)
        for g in inf_guards:
            inner = sum_poly(j, start, nxt - 1, lower_guard_poly(env, g, j))
            live = live - sum_poly(k, Poly.const(0), last, inner)
    return _q(env, facts, cmp2(hi + 1 - lo, "==", live))


def lower_guard_poly(env: DeltaEnv, g: Symbol, binder: str) -> Poly:
    from .solver import lower_guard

    return lower_guard(env, g, binder)


def verify_bij_ixfn(env: DeltaEnv, f: IndexFn, k2: Optional[str], img, trace=None):
    """Bijectivity of f onto img; returns the recorded (sgm, img) or None."""
    lo, hi = img
    cases = _live_cases(f)
    dom = f.domain
    img_seg = k2 is not None and (
        lo.contains(Var(k2)) or hi.contains(Var(k2))
    )
    facts = domain_facts(dom)
    parts = _seg_parts(dom)
    if parts is not None and img_seg:
        # per-segment image: rename the image binder to the domain's
        k, last, start, nxt, j = parts
        ren = {k2: Poly.var(k)}
        lo, hi = substitute(lo, ren), substitute(hi, ren)
    elif parts is not None and not img_seg:
        k, last, start, nxt, j = parts
    guards_ok = all(
        _q(env, facts + [g], _in_iv(v, lo, hi)) for g, v in cases
    )
    if not guards_ok:
        # footnoted special case: image is the whole domain and each
        # segment permutes its own index interval
        if parts is not None and not img_seg:
            k, last, start, nxt, j = parts
            total = domain_size(dom)
            if _q(env, [], and_(cmp2(lo, "==", Poly.const(0)), cmp2(hi, "==", total - 1))):
                if trace is not None:
                    trace.append("trying per-segment permutation image")
                return verify_bij_ixfn(env, f, k, (start, nxt - 1), trace)
        return None
    if not verify_inj_ixfn(env, f, trace=trace):
        return None
    if parts is not None and img_seg:
        # cardinality within each segment
        k, last, start, nxt, j = parts
        if not _cardinality_goal(env, facts, f, lo, hi, per_segment=True):
            return None
        sgm = (last, k, start)
    else:
        if not _cardinality_goal(env, [], f, lo, hi, per_segment=False):
            return None
        sgm = None
    if trace is not None:
        trace.append("bijective onto the queried image")
    return (sgm, (lo, hi))


def verify_bij(
    env: DeltaEnv,
    x: str,
    rcd,
    img_spec,
    gamma: dict,
    conv: Conv = _ident,
    trace=None,
) -> bool:
    k2, img = img_spec
    prev = env.bij.get(x)
    if prev is not None:
        # existing binding: images unify, and img2 subset rcd1 subset rcd2
        plo, phi = prev.img
        facts = []
        if prev.segs is not None:
            last, k, start = prev.segs
            if k2 is not None:
                ren = {k2: Poly.var(k)}
                img = (substitute(img[0], ren), substitute(img[1], ren))
            facts = [
                cmp2(Poly.const(0), "<=", Poly.var(k)),
                cmp2(Poly.var(k), "<=", last),
            ]
        if plo == img[0] and phi == img[1]:
            if _subset(env, facts, prev.img, rcd) and _subset(
                env, facts, rcd, prev.rcd
            ):
                return True
    if x not in gamma:
        return False
    base = gamma[x]
    i = point_iter(base.domain)
    lo, hi = rcd
    cases = []
    for g, v in base.cases:
        if _is_inf_case(v):
            cases.append((g, v))
            continue
        inside = _in_iv(v, lo, hi)
        cases.append((and_(g, inside), v))
        out = and_(g, neg(inside))
        if out != Bool(False):
            cases.append((out, Poly.sym(INF_SYM)))
    f = _prune(env, conv(IndexFn(base.domain, tuple(cases))))
    if trace is not None:
        trace.append(f"Bij {x}: checking {ixfn_str(f)}")
    got = verify_bij_ixfn(env, f, k2, img, trace)
    if got is None:
        return False
    sgm, img2 = got
    env.bij[x] = BijInfo(rcd, sgm, img2)
    return True


# ---------------------------------------------------------------------------
# range / monotonicity / equivalence / orthogonality


def verify_range(env: DeltaEnv, x: str, lo, hi, gamma: dict, trace=None) -> bool:
    if x not in gamma:
        return False
    f = gamma[x]
    facts = domain_facts(f.domain)
    for g, v in f.cases:
        if _is_inf_case(v):
            continue
        if not _q(env, facts + [g], _in_iv(v, lo, hi)):
            if trace is not None:
                trace.append(f"Range {x}: case value escapes the interval")
            return False
    env.set_elem(x, lo=None if lo.contains(INF_SYM) else lo,
                 hi=None if hi.contains(INF_SYM) else hi)
    return True


_MONO_OPS = {"le": "<=", "lt": "<", "ge": ">=", "gt": ">"}


def verify_mono(env: DeltaEnv, x: str, op: str, gamma: dict, trace=None) -> bool:
    sop = _MONO_OPS.get(op, op)
    if x not in gamma:
        return False
    f = gamma[x]
    dom = f.domain
    if not isinstance(dom, Linear):
        return False
    j = fresh("j")
    facts = domain_facts(dom) + [
        cmp2(Poly.const(0), "<=", Poly.var(j)),
        cmp2(Poly.var(j), "<=", dom.size - 1),
    ]
    got = mon_ge(env, facts, _live_cases(f), sop, dom.iter, j, trace)
    if got is None:
        return False
    info = env.elem.get(x)
    env.mono[x] = (
        sop,
        info.lo if info else None,
        info.hi if info else None,
        dom.size,
    )
    return True


def verify_equiv(env: DeltaEnv, x: str, rhs: IndexFn, gamma: dict, trace=None) -> bool:
    if x not in gamma:
        return False
    f = gamma[x]
    if unify_ixfn(f, rhs):
        return True
    va, vb = f.value_if_single(), rhs.value_if_single()
    if va is not None and vb is not None:
        facts = domain_facts(f.domain)
        if type(f.domain) is type(rhs.domain):
            ren = {point_iter(rhs.domain): Poly.var(point_iter(f.domain))}
            vb = substitute(vb, ren)
            return _q(env, facts, cmp2(va, "==", vb))
    return False


def verify_orthog(env: DeltaEnv, dom, preds, trace=None) -> bool:
    """No domain point may satisfy two of the predicates."""
    facts = domain_facts(dom)
    for a in range(len(preds)):
        for b in range(a + 1, len(preds)):
            # contrapositive form: assuming one, refute the other
            if not _q(env, facts + [preds[a]], neg(preds[b])):
                if trace is not None:
                    trace.append(f"predicates {a} and {b} may overlap")
                return False
    return True


# ---------------------------------------------------------------------------
# filtering-partitioning


def _inv_pattern(f: IndexFn):
    """(x, is) when f is `for i < e . true => x[is^-1[i]]`."""
    if not isinstance(f.domain, Linear):
        return None
    v = f.value_if_single()
    if v is None:
        return None
    s = v.single_sym()
    if not isinstance(s, Index) or not isinstance(s.array, str):
        return None
    inner = s.index.single_sym()
    if (
        isinstance(inner, Index)
        and isinstance(inner.array, Inv)
        and inner.index == Poly.var(f.domain.iter)
    ):
        return s.array, inner.array.array
    return None


def verify_ifp(
    env: DeltaEnv, is_name: str, img, gamma: dict, conv: Conv = _ident, trace=None
) -> bool:
    """Inverse filtering-partitioning of is_name onto the image interval.

    Bijectivity machinery with value-equality reasoning disabled and
    monotonicity checks requiring strict increase; the guards of the
    simplified index function yield the predicates.
    """
    if is_name in env.invfiltpart:
        return True
    if is_name not in gamma:
        return False
    base = gamma[is_name]
    lo, hi = img
    i = point_iter(base.domain)
    cases = []
    for g, v in base.cases:
        if _is_inf_case(v):
            cases.append((g, v))
            continue
        inside = _in_iv(v, lo, hi)
        keep = and_(g, inside)
        drop = and_(g, neg(inside))
        cases.append((keep, v))
        if drop != Bool(False):
            cases.append((drop, Poly.sym(INF_SYM)))
    f = _prune(env, conv(IndexFn(base.domain, tuple(cases))))
    if trace is not None:
        trace.append(f"InvFiltPart {is_name}: checking {ixfn_str(f)}")
    live = _live_cases(f)
    if not live:
        return False
    dom = f.domain
    facts = domain_facts(dom)
    if not all(_q(env, facts + [g], _in_iv(v, lo, hi)) for g, v in live):
        return False
    if not verify_inj_ixfn(env, f, use_eq=False, mon_op="<", trace=trace):
        return False
    if not _cardinality_goal(env, [], f, lo, hi, per_segment=False):
        return False
    # order the partition predicates by the monotone sorting permutation
    if isinstance(dom, Linear):
        j = fresh("j")
        f2 = domain_facts(dom) + [
            cmp2(Poly.const(0), "<=", Poly.var(j)),
            cmp2(Poly.var(j), "<=", dom.size - 1),
        ]
        perm = mon_ge(env, f2, live, "<", point_iter(dom), j)
    else:
        perm = tuple(range(len(live)))
    if perm is None:
        return False
    dfacts = domain_facts(dom)
    inf_guards = [g for g, v in f.cases if _is_inf_case(v)]
    filt = (
        _drop_implied(env, dfacts, neg(or_(*inf_guards))) if inf_guards else TRUE
    )
    # partition predicates are relative to the filtered subset
    parts = tuple(_drop_implied(env, dfacts + [filt], live[h][0]) for h in perm)
    env.invfiltpart[is_name] = (img, None, (i, filt), tuple((i, p) for p in parts))
    return True


def verify_filtpart(
    env: DeltaEnv, y: str, gamma: dict, conv: Conv = _ident, trace=None
) -> bool:
    if y in env.filtpart:
        return True
    if y not in gamma:
        return False
    hit = _inv_pattern(gamma[y])
    if hit is None:
        if trace is not None:
            trace.append(f"FiltPart {y}: no inverse-permutation shape")
        return False
    x, is_name = hit
    size = gamma[y].domain.size
    if not verify_ifp(env, is_name, (Poly.const(0), size - 1), gamma, conv, trace):
        return False
    img, sgm, filt, parts = env.invfiltpart[is_name]
    env.filtpart[y] = FiltPartInfo(x, filt, parts)
    return True


# ---------------------------------------------------------------------------
# high-level propagation


def propagate_binding(env: DeltaEnv, y: str, gamma: dict) -> None:
    """Transfers after `let y = ...` once y's properties are known."""
    fp = env.filtpart.get(y)
    if fp is None:
        return
    # a pure partitioning (filter true) inherits bijectivity
    if fp.filt and fp.filt[1] == TRUE:
        src_bij = env.bij.get(fp.src)
        if src_bij is not None and y not in env.bij:
            env.bij[y] = src_bij
    # filtering preserves injectivity and monotonicity, and ranges carry over
    if fp.src in env.inj and y not in env.inj:
        env.inj[y] = env.inj[fp.src]
    src_info = env.elem.get(fp.src)
    if src_info is not None:
        env.set_elem(y, lo=src_info.lo, hi=src_info.hi, strict=src_info.strict)


def merge_if(env: DeltaEnv, cond: Symbol, y: str, x1: str, x2: str) -> None:
    """Unify properties of the two branch results into the if result."""
    f1, f2 = env.filtpart.get(x1), env.filtpart.get(x2)
    if f1 is not None and f2 is not None and f1.src == f2.src:
        if len(f1.parts) == len(f2.parts):
            pairs = [(f1.filt, f2.filt)] + list(zip(f1.parts, f2.parts))
            merged = []
            ok = True
            for p1, p2 in pairs:
                m = _pred_union(cond, p1, p2)
                if m is None:
                    ok = False
                    break
                merged.append(m)
            if ok:
                env.filtpart[y] = FiltPartInfo(f1.src, merged[0], tuple(merged[1:]))
        else:
            env.filtpart[y] = FiltPartInfo(f1.src, None, ())
    b1, b2 = env.bij.get(x1), env.bij.get(x2)
    if b1 is not None and b2 is not None and b1.segs == b2.segs:
        if b1.img == b2.img:
            if _subset(env, [], b1.rcd, b2.rcd):
                env.bij[y] = BijInfo(b1.rcd, b1.segs, b1.img)
            elif _subset(env, [], b2.rcd, b1.rcd):
                env.bij[y] = BijInfo(b2.rcd, b1.segs, b1.img)


def _pred_union(cond: Symbol, p1, p2):
    if p1 is None or p2 is None:
        return None
    i1, e1 = p1
    i2, e2 = p2
    if e1 == Bool(False) or e2 == Bool(False):
        return (i1, Bool(False))
    e2r = _rename_pred(e2, i2, i1)
    return (i1, or_(and_(cond, e1), and_(neg(cond), e2r)))


def _rename_pred(e: Symbol, old: str, new: str) -> Symbol:
    from .solver import _replace_in

    if old == new:
        return e
    return _replace_in(e, Var(old), Poly.var(new))
