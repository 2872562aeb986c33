"""Index-function inference for the source language.

Each function body is analyzed top to bottom. Let-bound variables get
index functions built by converting combinator expressions and running
the rewrite engine to a fixpoint. Array indexing emits bounds-check
obligations, scatter emits safety obligations, and annotations are
assumed (preconditions) or verified (postconditions).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ast import (
    App,
    BinOp,
    Const,
    FunDef,
    If,
    IndexE,
    Lambda,
    Let,
    Loop,
    NotE,
    Program,
    PROPERTY_HEADS,
    TArray,
    TBase,
    TFun,
    TTuple,
    TupleE,
    VarE,
    expr_str,
)
from .env import BijInfo, DeltaEnv, FiltPartInfo
from .ixfn import (
    IndexFn,
    Linear,
    Mixed,
    Segmented,
    domain_facts,
    domain_size,
    point_iter,
    scalar_fn,
    subst_cases_simple,
    unify_ixfn,
)
from .pretty import ixfn_str, poly_str, sym_str
from . import props
from .props import verify_bij, verify_filtpart, verify_ifp, verify_inj
from .solver import assume, lower_bool, prove, simplify, solve_leq0
from .syms import (
    And,
    Bool,
    BlowupExceeded,
    Cmp,
    DOR,
    FALSE,
    INF,
    INF_SYM,
    Index,
    Inv,
    NEG_INF,
    Not,
    ONE,
    Or,
    Poly,
    RECUR_SYM,
    Recur,
    SliceSum,
    Symbol,
    TRUE,
    Var,
    ZERO,
    and_,
    cmp,
    cmp2,
    fresh,
    neg,
    or_,
    rename_arrays,
    subst_sym,
    substitute,
    sum_poly,
    to_cnf,
    unify1,
)

MAX_CASES = 64


class InferError(Exception):
    def __init__(self, pos, msg):
        super().__init__(f"{pos[0]}:{pos[1]}: {msg}")
        self.pos = pos
        self.msg = msg


class UnsafeIndexing(InferError):
    def __init__(self, pos, expr_text, ante_text, cons_text):
        msg = (
            f"Unsafe indexing: {expr_text} "
            f"(failed to show: {ante_text} => {cons_text})"
        )
        super().__init__(pos, msg)
        self.expr_text = expr_text
        self.ante_text = ante_text
        self.cons_text = cons_text


class ScatterUnsafe(InferError):
    pass


class UnsupportedConstruct(InferError):
    pass


class PreconditionFailed(InferError):
    pass


class PostconditionFailed(InferError):
    pass


class LoopInvariantViolated(InferError):
    pass


@dataclass
class Obligation:
    kind: str  # bounds | scatter-safety | precondition | postcondition | loop-invariant
    pos: tuple
    text: str
    proved: bool


@dataclass
class FunInfo:
    fundef: FunDef
    gamma: dict
    env: DeltaEnv
    results: tuple  # IndexFn per result component
    result_names: tuple  # postcondition binder names (or fresh)
    internal_order: tuple  # let-bound names, program order
    obligations: list = field(default_factory=list)


def _guard_sym(p: Poly) -> Symbol:
    """A polynomial used in boolean position, as a guard symbol."""
    s = p.single_sym()
    if s is not None:
        return s
    if p == ONE:
        return TRUE
    if p.is_zero():
        return FALSE
    return cmp(p - 1, "==")


def _sym_poly(s: Symbol) -> Poly:
    """A boolean symbol used in integer position (0/1)."""
    if s == TRUE:
        return ONE
    if s == FALSE:
        return ZERO
    return Poly.sym(s)


class Analyzer:
    def __init__(self, program: Program, max_rewrites: int = 1000, trace=None):
        self.program = program
        self.funs = {f.name: f for f in program.defs}
        self.max_rewrites = max_rewrites
        self.trace = trace
        self.infos: dict = {}

    # -- driver -------------------------------------------------------------

    def analyze(self) -> dict:
        for f in self.program.defs:
            self.infos[f.name] = self.analyze_fun(f)
        return self.infos

    def analyze_fun(self, f: FunDef) -> FunInfo:
        env = DeltaEnv()
        if self.trace is not None:
            env.trace = self.trace
        gamma: dict = {}
        self.env = env
        self.gamma = gamma
        self.obligations: list = []
        self.order: list = []
        self.rewrites_left = self.max_rewrites
        self.opaque: set = set()  # arrays read by name, never expanded
        self.canon: dict = {}  # defining value -> canonical opaque array
        self.predicates: set = set()  # uninterpreted predicate parameters
        self.prop_src: dict = {}  # id(IndexFn) -> name holding its env facts
        self.check_bounds = True
        for s in f.sizes:
            env.see(s)
            assume(env, cmp2(ZERO, "<=", Poly.var(s)))
        for q in f.params:
            self._bind_param(q)
        for q in f.params:
            if q.pre is not None:
                self._assume_cond(q.pre)
        results = self._to_tuple(self.convert(f.body))
        names = None
        if f.post is not None:
            names = tuple(
                n if n != "_" else fresh("r") for n in f.post.params
            )
        if names is None or len(names) != len(results):
            names = tuple(fresh("r") for _ in results)
        for n, r in zip(names, results):
            gamma[n] = r
            self._alias_props(self.prop_src.get(id(r)), n)
            self._register_length(n, r)
        if f.post is not None:
            self._verify_cond(f.post.body, f.pos)
        return FunInfo(
            f, gamma, env, results, names, tuple(self.order), self.obligations
        )

    def _to_tuple(self, r):
        return r if isinstance(r, tuple) else (r,)

    def _bind_param(self, q) -> None:
        t = q.type
        if isinstance(t, TFun):
            # predicate parameter: applications become Index symbols
            self.predicates.add(q.name)
            return
        if isinstance(t, TArray):
            size = self._size_poly(t.size)
            i = fresh("i")
            self.gamma[q.name] = IndexFn(
                Linear(i, size),
                ((TRUE, Poly.sym(Index(q.name, Poly.var(i)))),),
            )
            if isinstance(t.elem, TBase) and t.elem.name == "bool":
                self.env.add_dor_class((q.name,))
                self.env.set_elem(q.name, lo=ZERO, hi=ONE)
            self.prop_src[id(self.gamma[q.name])] = q.name
            self.env.see(q.name)
        else:
            self.gamma[q.name] = scalar_fn(Poly.var(q.name))
            self.env.see(q.name)

    def _size_poly(self, e) -> Poly:
        if e is None:
            n = fresh("n")
            self.env.see(n)
            assume(self.env, cmp2(ZERO, "<=", Poly.var(n)))
            return Poly.var(n)
        cases = self.scalar(e, {})
        if len(cases) == 1:
            return cases[0][1]
        raise UnsupportedConstruct(getattr(e, "pos", (0, 0)), "conditional size")

    def _register_length(self, name: str, f: IndexFn) -> None:
        pass

    # -- annotations --------------------------------------------------------

    def _cond_conjuncts(self, e):
        if isinstance(e, BinOp) and e.op == "&&":
            return self._cond_conjuncts(e.lhs) + self._cond_conjuncts(e.rhs)
        return [e]

    def _assume_cond(self, e) -> None:
        for c in self._cond_conjuncts(e):
            if isinstance(c, App) and isinstance(c.fun, VarE) and c.fun.name in PROPERTY_HEADS:
                self._assume_prop(c)
            else:
                sym = self._bool_sym(c)
                assume(self.env, lower_bool(self.env, sym))

    def _interval(self, e):
        if not isinstance(e, TupleE) or len(e.items) != 2:
            raise UnsupportedConstruct(getattr(e, "pos", (0, 0)), "expected interval")
        return (self._scalar_value(e.items[0]), self._scalar_value(e.items[1]))

    def _scalar_value(self, e) -> Poly:
        cases = self.scalar(e, {})
        if len(cases) != 1:
            raise UnsupportedConstruct(
                getattr(e, "pos", (0, 0)), "conditional annotation argument"
            )
        return cases[0][1]

    def _assume_prop(self, c: App) -> None:
        head = c.fun.name
        x = c.args[0].name
        env = self.env
        if head == "Range":
            lo, hi = self._interval(c.args[1])
            if x in self.gamma and self.gamma[x].is_scalar():
                v = self.gamma[x].cases[0][1]
                if not lo.contains(INF_SYM):
                    assume(env, cmp2(lo, "<=", v))
                if not hi.contains(INF_SYM):
                    assume(env, cmp2(v, "<=", hi))
            env.set_elem(
                x,
                lo=None if lo.contains(INF_SYM) else lo,
                hi=None if hi.contains(INF_SYM) else hi,
            )
        elif head == "Inj":
            env.inj[x] = self._interval(c.args[1])
        elif head == "Mono":
            op = c.args[1].name if isinstance(c.args[1], VarE) else c.args[1]
            sop = {"le": "<=", "lt": "<", "ge": ">=", "gt": ">"}[op]
            f = self.gamma.get(x)
            size = domain_size(f.domain) if f is not None else Poly.var(fresh("n"))
            info = env.elem.get(x)
            env.mono[x] = (
                sop,
                info.lo if info else None,
                info.hi if info else None,
                size,
            )
        elif head == "Bij":
            rcd = self._interval(c.args[1])
            img = self._interval(c.args[-1])
            env.bij[x] = BijInfo(rcd, None, img)
        elif head == "Equiv":
            rhs = self.convert(c.args[1])
            f = self.gamma.get(x)
            if f is not None and isinstance(rhs, IndexFn):
                va, vb = f.value_if_single(), rhs.value_if_single()
                if va is not None and vb is not None and f.is_scalar():
                    assume(env, cmp(va - vb, "=="))
        else:
            raise UnsupportedConstruct(c.pos, f"cannot assume {head}")

    def _verify_cond(self, e, pos) -> None:
        while isinstance(e, Let):
            vals = self._to_tuple(self.convert(e.rhs))
            for n, v in zip(e.names, vals):
                if n == "_":
                    continue
                v = self.rewrite_fixpoint(v, allow_sum=True)
                v = self._canonicalize(n, v)
                self.gamma[n] = v
                self.env.see(n)
            e = e.body
        for c in self._cond_conjuncts(e):
            if isinstance(c, App) and isinstance(c.fun, VarE) and c.fun.name in PROPERTY_HEADS:
                ok, text = self._verify_prop(c)
            else:
                ok = self._prove_bool(c)
                text = expr_str(c)
            self.obligations.append(
                Obligation("postcondition", getattr(c, "pos", pos), text, ok)
            )
            if not ok:
                raise PostconditionFailed(
                    getattr(c, "pos", pos), f"cannot prove postcondition: {text}"
                )

    def _prove_bool(self, c) -> bool:
        """A scalar boolean condition, proved case by case."""
        env = self.env
        for g, s in self._bool_cases(c, {}):
            if props._refuted(env, [], g):
                continue
            if not bool(prove(env, lower_bool(env, g), lower_bool(env, s))):
                return False
        return True

    def _pred_lambda_sym(self, lam, binder: str) -> Symbol:
        """A predicate argument (lambda or predicate name) as a guard symbol."""
        if isinstance(lam, Lambda):
            sub = {}
            if lam.params and lam.params[0] != "_":
                sub[lam.params[0]] = Poly.var(binder)
            saved = self.check_bounds
            self.check_bounds = False
            try:
                cases = self.scalar(lam.body, sub)
            finally:
                self.check_bounds = saved
            if len(cases) == 1:
                return _guard_sym(cases[0][1])
            disj = [and_(g, _guard_sym(v)) for g, v in cases]
            return or_(*disj)
        if isinstance(lam, VarE):
            return Index(lam.name, Poly.var(binder))
        raise UnsupportedConstruct(getattr(lam, "pos", (0, 0)), "bad predicate")

    def _pred_equiv(self, facts, a: Symbol, b: Symbol) -> bool:
        if a == b:
            return True
        env = self.env
        return props._q(env, list(facts) + [a], b) and props._q(
            env, list(facts) + [b], a
        )

    def _verify_prop(self, c: App):
        head = c.fun.name
        x = c.args[0].name
        env, gamma = self.env, self.gamma
        conv = self.rewrite_fixpoint
        text = expr_str(c)
        if head == "Range":
            lo, hi = self._interval(c.args[1])
            return props.verify_range(env, x, lo, hi, gamma), text
        if head == "Inj":
            rcd = self._interval(c.args[1])
            return verify_inj(env, x, rcd, gamma, conv), text
        if head == "Mono":
            op = c.args[1].name
            return props.verify_mono(env, x, op, gamma), text
        if head == "Bij":
            rcd = self._interval(c.args[1])
            img = self._interval(c.args[-1])
            return verify_bij(env, x, rcd, (fresh("k"), img), gamma, conv), text
        if head == "FiltPart":
            src = c.args[1].name if isinstance(c.args[1], VarE) else None
            if src is None or not verify_filtpart(env, x, gamma, conv):
                return False, text
            info = env.filtpart[x]
            if info.src != src:
                return False, text
            dom = gamma[x].domain
            facts = list(domain_facts(dom))
            # the final equivalence class may be left implicit
            if len(c.args) - 3 not in (len(info.parts), len(info.parts) - 1):
                return False, text
            preds = [(info.filt, c.args[2], [])] if info.filt else []
            flt = [info.filt[1]] if info.filt else []
            preds += [(d, g, flt) for d, g in zip(info.parts, c.args[3:])]
            for (binder, derived), given, extra in preds:
                g = self._canon_sym(self._pred_lambda_sym(given, binder), binder)
                if not self._pred_equiv(facts + extra, derived, g):
                    return False, text
            return True, text
        if head == "InvFiltPart":
            f = gamma.get(x)
            if f is None:
                return False, text
            img = self._interval(c.args[1])
            if not verify_ifp(env, x, img, gamma, conv):
                return False, text
            stored_img, segs, filt, parts = env.invfiltpart[x]
            facts = list(domain_facts(f.domain))
            preds = [(filt, c.args[2], [])]
            preds += [(d, g, [filt[1]]) for d, g in zip(parts, c.args[3:])]
            for (binder, derived), given, extra in preds:
                g = self._canon_sym(self._pred_lambda_sym(given, binder), binder)
                if not self._pred_equiv(facts + extra, derived, g):
                    return False, text
            return True, text
        if head == "OrthogPreds":
            f = gamma.get(x)
            if f is None:
                return False, text
            i = point_iter(f.domain)
            preds = [self._pred_lambda_sym(p, i) for p in c.args[1:]]
            return props.verify_orthog(env, f.domain, preds), text
        if head == "Equiv":
            rhs = self.convert(c.args[1])
            if isinstance(rhs, tuple):
                return False, text
            rhs = self.rewrite_fixpoint(rhs)
            return props.verify_equiv(env, x, rhs, gamma), text
        return False, text

    # -- scalar conversion --------------------------------------------------

    def scalar(self, e, sub: dict, dom_facts=()):
        """Guarded polynomial cases for a scalar expression.

        sub maps in-scope lambda/let names to case lists or polynomials.
        """
        if isinstance(e, Const):
            v = e.value
            if v is True:
                return [(TRUE, ONE)]
            if v is False:
                return [(TRUE, ZERO)]
            if isinstance(v, int):
                return [(TRUE, Poly.const(v))]
            if isinstance(v, float):
                if v == float("inf"):
                    return [(TRUE, INF)]
                if v == float("-inf"):
                    return [(TRUE, NEG_INF)]
                return [(TRUE, Poly.var(fresh("fl")))]
            raise UnsupportedConstruct(e.pos, f"constant {v!r}")
        if isinstance(e, VarE):
            x = e.name
            if x in sub:
                got = sub[x]
                return got if isinstance(got, list) else [(TRUE, got)]
            f = self.gamma.get(x)
            if f is not None:
                if f.is_scalar():
                    return list(f.cases)
                raise UnsupportedConstruct(e.pos, f"array {x} in scalar position")
            return [(TRUE, Poly.var(x))]
        if isinstance(e, BinOp):
            if e.op in ("+", "-", "*"):
                ls = self.scalar(e.lhs, sub, dom_facts)
                rs = self.scalar(e.rhs, sub, dom_facts)
                op = e.op
                out = []
                for gl, vl in ls:
                    for gr, vr in rs:
                        v = (
                            vl + vr
                            if op == "+"
                            else vl - vr if op == "-" else vl * vr
                        )
                        out.append((and_(gl, gr), v))
                return self._cap_cases(out, e.pos)
            if e.op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
                return [(g, _sym_poly(s)) for g, s in self._bool_cases(e, sub, dom_facts)]
            raise UnsupportedConstruct(e.pos, f"operator {e.op}")
        if isinstance(e, NotE):
            return [(g, _sym_poly(s)) for g, s in self._bool_cases(e, sub, dom_facts)]
        if isinstance(e, IndexE):
            return self._index_cases(e, sub, dom_facts)
        if isinstance(e, If):
            cond = self._bool_cases(e.cond, sub, dom_facts)
            out = []
            for gc, c in cond:
                # each branch is checked under its own guard
                ts = self.scalar(e.then, sub, dom_facts + (and_(gc, c),))
                fs = self.scalar(e.els, sub, dom_facts + (and_(gc, neg(c)),))
                for g, v in ts:
                    out.append((and_(gc, c, g), v))
                for g, v in fs:
                    out.append((and_(gc, neg(c), g), v))
            return self._cap_cases(out, e.pos)
        if isinstance(e, Let):
            if len(e.names) != 1:
                raise UnsupportedConstruct(e.pos, "tuple binding in scalar context")
            rhs = self.scalar(e.rhs, sub, dom_facts)
            sub2 = dict(sub)
            sub2[e.names[0]] = rhs
            return self.scalar(e.body, sub2, dom_facts)
        if isinstance(e, App):
            return self._scalar_app(e, sub, dom_facts)
        raise UnsupportedConstruct(
            getattr(e, "pos", (0, 0)), f"scalar conversion of {type(e).__name__}"
        )

    def _cap_cases(self, cases, pos):
        cases = [(g, v) for g, v in cases if g != FALSE]
        if len(cases) > MAX_CASES:
            raise UnsupportedConstruct(pos, "guard explosion")
        return cases

    def _bool_cases(self, e, sub, dom_facts=()):
        """Cases whose payload is a boolean guard symbol."""
        if isinstance(e, BinOp) and e.op in ("==", "!=", "<", "<=", ">", ">="):
            ls = self.scalar(e.lhs, sub, dom_facts)
            rs = self.scalar(e.rhs, sub, dom_facts)
            out = []
            for gl, vl in ls:
                for gr, vr in rs:
                    out.append((and_(gl, gr), cmp2(vl, e.op, vr)))
            return out
        if isinstance(e, BinOp) and e.op in ("&&", "||"):
            ls = self._bool_cases(e.lhs, sub, dom_facts)
            rs = self._bool_cases(e.rhs, sub, dom_facts)
            mk = and_ if e.op == "&&" else or_
            return [
                (and_(gl, gr), mk(sl, sr)) for gl, sl in ls for gr, sr in rs
            ]
        if isinstance(e, NotE):
            return [(g, neg(s)) for g, s in self._bool_cases(e.arg, sub, dom_facts)]
        if isinstance(e, App) and isinstance(e.fun, VarE):
            nm = e.fun.name
            if nm not in self.funs and nm not in self.gamma and nm not in sub:
                # uninterpreted predicate application
                (arg,) = e.args
                out = []
                for g, v in self.scalar(arg, sub, dom_facts):
                    out.append((g, Index(nm, v)))
                return out
            if isinstance(self.gamma.get(nm), IndexFn) and isinstance(
                self.funs.get(nm), type(None)
            ):
                pass
        cases = self.scalar(e, sub, dom_facts)
        return [(g, _guard_sym(v)) for g, v in cases]

    def _bool_sym(self, e, sub=None) -> Symbol:
        cases = self._bool_cases(e, sub or {})
        disj = [and_(g, s) for g, s in cases]
        return or_(*disj)

    def _index_cases(self, e: IndexE, sub, dom_facts):
        if not isinstance(e.arr, VarE):
            raise UnsupportedConstruct(e.pos, "computed array expression")
        x = e.arr.name
        idx = self.scalar(e.idx, sub, dom_facts)
        out = []
        for g, ip in idx:
            self._bounds_check(e, x, ip, g, dom_facts)
            out.extend(
                (and_(g, g2), v2) for g2, v2 in self._subst_index(x, ip)
            )
        return self._cap_cases(out, e.pos)

    def _bounds_check(self, e: IndexE, x: str, ip: Poly, g: Symbol, dom_facts):
        if not self.check_bounds:
            return
        f = self.gamma.get(x)
        if f is None:
            raise UnsupportedConstruct(e.pos, f"indexing unknown array {x}")
        n = domain_size(f.domain)
        ante = and_(*(tuple(dom_facts) + (g,)))
        lo_ante = lower_bool(self.env, ante)
        idx_txt = expr_str(e.idx)
        ante_txt = "True" if ante == TRUE else sym_str(ante)
        for goal, txt in (
            (cmp2(ZERO, "<=", ip), f"0 ≤ {idx_txt}"),
            (cmp2(ip, "<", n), f"{idx_txt} < {poly_str(n)}"),
        ):
            ok = bool(prove(self.env, lo_ante, lower_bool(self.env, goal)))
            self.obligations.append(
                Obligation("bounds", e.pos, f"{expr_str(e)}: {txt}", ok)
            )
            if not ok:
                raise UnsafeIndexing(e.pos, expr_str(e), ante_txt, txt)

    def _subst_index(self, x: str, ip: Poly):
        """The value cases of x[ip], substituting x's index function."""
        f = self.gamma.get(x)
        if f is None or x in self.opaque:
            return [(TRUE, Poly.sym(Index(x, ip)))]
        dom = f.domain
        if isinstance(dom, Linear):
            if f.is_scalar():
                return list(f.cases)
            binding = {dom.iter: ip}
            return list(subst_cases_simple(f.cases, binding))
        if isinstance(dom, Segmented):
            # eliminate the segment iterator by unifying with the bounds
            k, j = dom.seg_iter, dom.point_iter
            start = dom.seg_start
            nxt = substitute(start, {k: Poly.var(k) + 1})
            for target in (start, nxt - 1):
                got = unify1(target, ip, k)
                if got is not None:
                    binding = {k: got, j: ip}
                    return list(subst_cases_simple(f.cases, binding))
            ii = self._ii_array(x)
            binding = {k: Poly.sym(Index(ii, ip)), j: ip}
            return list(subst_cases_simple(f.cases, binding))
        return [(TRUE, Poly.sym(Index(x, ip)))]

    def _ii_array(self, x: str) -> str:
        """Segment-index array for a segmented binding, synthesized on demand."""
        key = f"ii_{x}"
        if key not in self.gamma:
            f = self.gamma[x]
            dom = f.domain
            i = fresh("i")
            self.gamma[key] = IndexFn(
                Linear(i, domain_size(dom)), ((TRUE, Poly.sym(Index(key, Poly.var(i)))),)
            )
            self.env.set_elem(key, lo=ZERO, hi=dom.last)
            self.env.mono[key] = ("<=", ZERO, dom.last, domain_size(dom))
        return key

    def _scalar_app(self, e: App, sub, dom_facts):
        if not isinstance(e.fun, VarE):
            raise UnsupportedConstruct(e.pos, "higher-order application")
        nm = e.fun.name
        if nm == "length":
            (a,) = e.args
            f = self.gamma.get(a.name) if isinstance(a, VarE) else None
            if f is None:
                raise UnsupportedConstruct(e.pos, "length of unknown array")
            return [(TRUE, domain_size(f.domain))]
        if nm not in self.funs and nm not in self.gamma:
            # uninterpreted predicate in scalar (boolean) position
            return [(g, _sym_poly(s)) for g, s in self._bool_cases(e, sub, dom_facts)]
        if nm in self.funs:
            got = self.apply_fun(e)
            if isinstance(got, IndexFn) and got.is_scalar():
                return [(g, self._expand_sums(v)) for g, v in got.cases]
        raise UnsupportedConstruct(e.pos, f"call of {nm} in scalar position")

    # -- expression conversion ---------------------------------------------

    def convert(self, e):
        if isinstance(e, VarE) and e.name in self.gamma:
            return self.gamma[e.name]
        if isinstance(e, Let):
            vals = self.convert(e.rhs)
            vals = self._to_tuple(vals)
            if len(e.names) != len(vals):
                if len(e.names) == 1:
                    raise UnsupportedConstruct(e.pos, "tuple arity mismatch")
                raise UnsupportedConstruct(e.pos, "tuple arity mismatch")
            for n, v in zip(e.names, vals):
                if n == "_":
                    continue
                src = self.prop_src.get(id(v))
                v = self.rewrite_fixpoint(v, allow_sum=True)
                self._no_recur(v, e.pos, n)
                v = self._canonicalize(n, v)
                self.gamma[n] = v
                self._alias_props(src, n)
                self.prop_src[id(v)] = n
                self.order.append(n)
                self.env.see(n)
                self._note_binding(n, v)
            return self.convert(e.body)
        if isinstance(e, TupleE):
            out = []
            for item in e.items:
                got = self.convert(item)
                out.extend(self._to_tuple(got))
            return tuple(out)
        if isinstance(e, If):
            return self._convert_if(e)
        if isinstance(e, Loop):
            return self.convert_loop(e)
        if isinstance(e, App) and isinstance(e.fun, VarE):
            nm = e.fun.name
            if nm == "map":
                return self.convert_map(e)
            if nm == "iota":
                size = self._scalar_value(e.args[0])
                i = fresh("i")
                return IndexFn(Linear(i, size), ((TRUE, Poly.var(i)),))
            if nm == "replicate":
                size = self._scalar_value(e.args[0])
                cases = self.scalar(e.args[1], {})
                i = fresh("i")
                return IndexFn(Linear(i, size), tuple(cases))
            if nm == "scan":
                return self.convert_scan(e)
            if nm == "scatter":
                return self.convert_scatter(e)
            if nm == "hist":
                return self._convert_hist(e)
            if nm in self.funs:
                return self.apply_fun(e)
        # scalar expression
        cases = self.scalar(e, {})
        return IndexFn(Linear(fresh("i"), ONE), tuple(cases))

    def _alias_props(self, src: Optional[str], new: str) -> None:
        """Make env facts recorded under src visible under the alias new."""
        if src is None or src == new:
            return
        env = self.env
        if src in env.elem and new not in env.elem:
            env.elem[new] = env.elem[src]
        for table in (env.inj, env.mono, env.bij, env.filtpart, env.invfiltpart):
            if src in table and new not in table:
                table[new] = table[src]

    def _note_binding(self, n: str, f: IndexFn) -> None:
        if self.trace is not None:
            self.trace.append(f"{n} | {ixfn_str(f)}")

    def _canonicalize(self, n: str, f: IndexFn) -> IndexFn:
        """Keep irreducible reads (predicate applications) behind the
        binding's own name, sharing one name per distinct value."""
        if f.is_scalar() or not isinstance(f.domain, Linear):
            return f
        v = f.value_if_single()
        if v is None or not self._irreducible(v):
            return f
        it = f.domain.iter
        key = substitute(v, {it: Poly.var("%canon")})
        prior = self.canon.get(key)
        if prior is not None:
            return IndexFn(
                f.domain, ((TRUE, Poly.sym(Index(prior, Poly.var(it)))),)
            )
        self.canon[key] = n
        self.opaque.add(n)
        if self._boolean_value(v):
            self._add_bool_array(n, v.single_sym())
        return f

    def _add_bool_array(self, n: str, defn: Optional[Symbol]) -> None:
        """A 0/1 array; a conjunct !other[i] makes it disjoint with other."""
        cls = (n,)
        if isinstance(defn, And):
            for a in defn.args:
                if (
                    isinstance(a, Not)
                    and isinstance(a.arg, Index)
                    and isinstance(a.arg.array, str)
                    and self.env.is_dor_member(a.arg.array)
                ):
                    prev = self.env.dor[a.arg.array]
                    cls = tuple(prev) + (n,)
                    break
        self.env.add_dor_class(cls)
        self.env.set_elem(n, lo=ZERO, hi=ONE)

    def _irreducible(self, v: Poly) -> bool:
        s = v.single_sym()
        if isinstance(s, Index) and isinstance(s.array, str):
            return s.array in self.predicates
        if isinstance(s, (And, Or, Not)):
            return self._pred_atoms_only(s)
        return False

    def _pred_atoms_only(self, s: Symbol) -> bool:
        if isinstance(s, Not):
            return self._pred_atoms_only(s.arg)
        if isinstance(s, (And, Or)):
            return all(self._pred_atoms_only(a) for a in s.args)
        if isinstance(s, Index) and isinstance(s.array, str):
            return s.array in self.predicates or self.env.is_dor_member(s.array)
        return False

    def _boolean_value(self, v: Poly) -> bool:
        s = v.single_sym()
        if isinstance(s, (Cmp, Not, And, Or)):
            return True
        if isinstance(s, Index) and isinstance(s.array, str):
            return s.array in self.predicates or self.env.is_dor_member(s.array)
        return v == ZERO or v == ONE

    def _canon_sym(self, s: Symbol, binder: str) -> Symbol:
        """Replace a predicate application by its canonical array read."""
        hit = self._canon_hit(s, binder)
        if hit is not None:
            return hit
        out = s
        if isinstance(s, Not):
            out = neg(self._canon_sym(s.arg, binder))
        elif isinstance(s, And):
            out = and_(*(self._canon_sym(a, binder) for a in s.args))
        elif isinstance(s, Or):
            out = or_(*(self._canon_sym(a, binder) for a in s.args))
        if out is not s:
            # canonical subterms may expose a known composite predicate
            hit = self._canon_hit(out, binder)
            if hit is not None:
                return hit
        return out

    def _canon_hit(self, s: Symbol, binder: str) -> Optional[Symbol]:
        p = _sym_poly(s) if s in (TRUE, FALSE) else Poly.sym(s)
        key = substitute(p, {binder: Poly.var("%canon")})
        prior = self.canon.get(key)
        if prior is not None:
            return Index(prior, Poly.var(binder))
        return None

    def _no_recur(self, f: IndexFn, pos, name) -> None:
        for g, v in f.cases:
            if v.contains(RECUR_SYM) or Poly.sym(g).contains(RECUR_SYM):
                raise UnsupportedConstruct(
                    pos, f"irreducible recurrence in {name}"
                )

    def _convert_if(self, e: If):
        cond = self._bool_sym(e.cond)
        env0 = self.env
        self.env = env0.copy()
        try:
            assume(self.env, lower_bool(self.env, cond))
            t = self.convert(e.then)
        finally:
            self.env = env0
        self.env = env0.copy()
        try:
            assume(self.env, lower_bool(self.env, neg(cond)))
            f = self.convert(e.els)
        finally:
            self.env = env0
        ts, fs = self._to_tuple(t), self._to_tuple(f)
        if len(ts) != len(fs):
            raise UnsupportedConstruct(e.pos, "branch arity mismatch")
        out = []
        for a, b in zip(ts, fs):
            if a.is_scalar() and b.is_scalar():
                cases = tuple(
                    (and_(cond, g), v) for g, v in a.cases
                ) + tuple((and_(neg(cond), g), v) for g, v in b.cases)
                out.append(IndexFn(a.domain, cases))
            else:
                # array-typed branches: keep the branch matching the
                # condition when it is decidable, else give up
                if bool(prove(self.env, TRUE, lower_bool(self.env, cond))):
                    out.append(a)
                elif bool(prove(self.env, TRUE, lower_bool(self.env, neg(cond)))):
                    out.append(b)
                else:
                    n = fresh("x")
                    da = a.domain
                    out.append(
                        IndexFn(
                            da,
                            ((TRUE, Poly.sym(Index(n, Poly.var(point_iter(da))))),),
                        )
                    )
        return tuple(out) if len(out) != 1 else out[0]

    def convert_map(self, e: App):
        lam = e.args[0]
        arrs = e.args[1:]
        if not isinstance(lam, Lambda):
            x = fresh("x")
            lam = Lambda((x,), App(lam, (VarE(x),), e.pos), e.pos)
        fs = []
        for a in arrs:
            if not isinstance(a, VarE) or a.name not in self.gamma:
                raise UnsupportedConstruct(e.pos, "map over unknown array")
            fs.append((a.name, self.gamma[a.name]))
        dom = fs[0][1].domain
        if isinstance(dom, Linear) and dom.size == ONE:
            raise UnsupportedConstruct(e.pos, "map over scalar")
        i = point_iter(dom)
        sub = {}
        for p, (name, f) in zip(lam.params, fs):
            if p == "_":
                continue
            fd = f.domain
            if name in self.opaque:
                sub[p] = [(TRUE, Poly.sym(Index(name, Poly.var(i))))]
            elif type(fd) is type(dom) and point_iter(fd) == i:
                sub[p] = [(g, v) for g, v in f.cases]
            else:
                sub[p] = self._subst_index(name, Poly.var(i))
        facts = domain_facts(dom)
        env0 = self.env
        self.env = env0.copy()
        for c in facts:
            assume(self.env, lower_bool(self.env, c))
        try:
            cases = self.scalar(lam.body, sub, tuple(facts))
        finally:
            self.env = env0
        return IndexFn(dom, tuple(cases))

    # -- scan ---------------------------------------------------------------

    def convert_scan(self, e: App):
        args = e.args
        lam = args[0]
        rest = args[1:]
        k = len(rest) // 2
        neutrals = rest[:k]
        arrays = rest[k:]
        if not isinstance(lam, Lambda):
            raise UnsupportedConstruct(e.pos, "scan operator must be a lambda")
        seg = self._segmented_sum(e, lam, neutrals, arrays)
        if seg is not None:
            return seg
        if k != 1:
            return self._opaque_like(arrays, e.pos)
        (arr,) = arrays
        if not isinstance(arr, VarE) or arr.name not in self.gamma:
            raise UnsupportedConstruct(e.pos, "scan over unknown array")
        f = self.gamma[arr.name]
        dom = f.domain
        if not isinstance(dom, Linear):
            return self._opaque_like(arrays, e.pos)
        i = dom.iter
        acc, elt = lam.params[0], lam.params[1]
        sub = {elt: [(g, v) for g, v in f.cases], acc: Poly.sym(RECUR_SYM)}
        facts = domain_facts(dom)
        env0 = self.env
        self.env = env0.copy()
        for c in facts:
            assume(self.env, lower_bool(self.env, c))
        try:
            cases = self.scalar(lam.body, sub, tuple(facts))
        finally:
            self.env = env0
        out = IndexFn(dom, tuple(cases))
        out = self.rewrite_fixpoint(out, allow_sum=True)
        for g, v in out.cases:
            if v.contains(RECUR_SYM) or Poly.sym(g).contains(RECUR_SYM):
                return self._opaque_like(arrays, e.pos)
        return out

    def _opaque_like(self, arrays, pos):
        """An opaque fresh array matching the first operand's domain."""
        out = []
        for a in arrays:
            f = self.gamma.get(a.name) if isinstance(a, VarE) else None
            if f is None:
                raise UnsupportedConstruct(pos, "scan over unknown array")
            n = fresh("sc")
            i = fresh("i")
            dom = Linear(i, domain_size(f.domain))
            out.append(IndexFn(dom, ((TRUE, Poly.sym(Index(n, Poly.var(i)))),)))
        return tuple(out) if len(out) > 1 else out[0]

    def _segmented_sum(self, e, lam, neutrals, arrays):
        """Recognize the segmented-sum scan operator

            \\f1 v1 f2 v2 -> (f1 || f2, if f2 then v2 else v2 + v1)

        over (flags, values)."""
        if len(arrays) != 2 or len(lam.params) != 4:
            return None
        f1, v1, f2, v2 = lam.params
        body = lam.body
        while isinstance(body, Let):
            return None  # normalized bodies keep the tuple at the end
        if not isinstance(body, TupleE) or len(body.items) != 2:
            return None
        flag_e, val_e = body.items
        okf = (
            isinstance(flag_e, BinOp)
            and flag_e.op == "||"
            and {getattr(flag_e.lhs, "name", None), getattr(flag_e.rhs, "name", None)}
            == {f1, f2}
        )
        okv = (
            isinstance(val_e, If)
            and getattr(val_e.cond, "name", None) == f2
            and getattr(val_e.then, "name", None) == v2
            and isinstance(val_e.els, BinOp)
            and val_e.els.op == "+"
            and {getattr(val_e.els.lhs, "name", None), getattr(val_e.els.rhs, "name", None)}
            == {v1, v2}
        )
        if not (okf and okv):
            return None
        flags_a, vals_a = arrays
        return self._convert_sgm_sum(e, flags_a, vals_a)

    def _convert_sgm_sum(self, e, flags_a, vals_a):
        """Segmented sum: within each flag-delimited segment, prefix sums."""
        if not (isinstance(flags_a, VarE) and isinstance(vals_a, VarE)):
            raise UnsupportedConstruct(e.pos, "segmented scan over unknown arrays")
        fv = self.gamma.get(vals_a.name)
        ff = self.gamma.get(flags_a.name)
        if fv is None or ff is None:
            raise UnsupportedConstruct(e.pos, "segmented scan over unknown arrays")
        vd = fv.domain
        if isinstance(vd, Segmented) and self._flags_mark_segments(ff, vd):
            k, j = vd.seg_iter, vd.point_iter
            start = vd.seg_start
            jj = fresh("j")
            body = self._slice_sum_of(vals_a.name, jj, start, Poly.var(j))
            flags_out = self._opaque_like((flags_a,), e.pos)
            return (flags_out, IndexFn(vd, ((TRUE, body),)))
        return self._to_tuple(self._opaque_like((flags_a, vals_a), e.pos))

    def _flags_mark_segments(self, ff: IndexFn, vd: Segmented) -> bool:
        """True when the flag array is true exactly at segment starts."""
        fd = ff.domain
        if not isinstance(fd, Segmented):
            return False
        return unify_ixfn(
            IndexFn(fd, ()), IndexFn(vd, ())
        ) is not None or fd == vd

    def _slice_sum_of(self, name, binder, lo, hi) -> Poly:
        cases = self._subst_index(name, Poly.var(binder))
        if len(cases) == 1 and cases[0][0] == TRUE:
            return sum_poly(binder, lo, hi, cases[0][1])
        total = ZERO
        for g, v in cases:
            total = total + sum_poly(
                binder, lo, hi, self._lower_guarded(g, v, binder)
            )
        return total

    def _lower_guarded(self, g, v, binder) -> Poly:
        from .solver import lower_guard

        return lower_guard(self.env, g, binder) * v

    # -- scatter ------------------------------------------------------------

    def convert_scatter(self, e: App):
        dest, inds, vals = e.args
        for a in (dest, inds, vals):
            if not isinstance(a, VarE) or a.name not in self.gamma:
                raise UnsupportedConstruct(e.pos, "scatter operand must be bound")
        fdest = self.gamma[dest.name]
        finds = self.gamma[inds.name]
        fvals = self.gamma[vals.name]
        n = domain_size(fdest.domain)
        m = domain_size(finds.domain)
        safe, how = self._scatter_safe(dest.name, inds.name, vals.name, n)
        self.obligations.append(
            Obligation("scatter-safety", e.pos, f"scatter via {how}" if safe else "scatter", safe)
        )
        if not safe:
            raise ScatterUnsafe(
                e.pos,
                "unsafe scatter: cannot show injective indices or "
                "position-independent values",
            )
        # Sc1: indices bijective onto [0, n)
        got = self._scatter_bij(inds.name, n)
        if got is not None:
            i = fresh("i")
            val = Poly.sym(
                Index(vals.name, Poly.sym(Index(Inv(inds.name), Poly.var(i))))
            )
            lo, hi = got
            inside = props._in_iv(Poly.var(i), lo, hi)
            if bool(
                prove(
                    self.env,
                    lower_bool(self.env, and_(cmp2(ZERO, "<=", Poly.var(i)), cmp2(Poly.var(i), "<=", n - 1))),
                    lower_bool(self.env, inside),
                )
            ):
                return IndexFn(Linear(i, n), ((TRUE, val),))
            dst = Poly.sym(Index(dest.name, Poly.var(i)))
            return IndexFn(
                Linear(i, n),
                ((inside, val), (neg(inside), dst)),
            )
        # Sc2: monotone indices produce a mixed domain
        out = self._scatter_monotone(e, dest.name, inds.name, vals.name, n, m)
        if out is not None:
            return out
        raise ScatterUnsafe(e.pos, "unsafe scatter: no conversion rule applies")

    def _scatter_safe(self, dest, inds, vals, n):
        env, gamma = self.env, self.gamma
        # Ss1: injective indices on [0, len dest)
        if verify_inj(env, inds, (ZERO, n - 1), gamma, self.rewrite_fixpoint):
            return True, "Ss1"
        fvals = gamma[vals]
        v = fvals.value_if_single()
        if v is not None and isinstance(fvals.domain, Linear):
            if not v.contains(Var(fvals.domain.iter)):
                return True, "Ss2"
        info = env.elem.get(vals)
        if info is not None and info.lo is not None and info.hi is not None:
            if bool(prove(env, TRUE, lower_bool(env, cmp2(info.lo, "==", info.hi)))):
                return True, "Ss3"
        return False, ""

    def _scatter_bij(self, inds, n):
        env = self.env
        b = env.bij.get(inds)
        rcd = (ZERO, n - 1)
        if b is not None and b.segs is None:
            lo, hi = b.img
            ok = props._subset(env, [], b.img, rcd) and props._subset(
                env, [], rcd, b.rcd
            )
            if ok:
                return b.img
        if verify_bij(env, inds, rcd, (fresh("k"), rcd), self.gamma, self.rewrite_fixpoint):
            return self.env.bij[inds].img
        return None

    def _scatter_monotone(self, e, dest, inds, vals, n, m):
        """Sc2: is (masked out of bounds) monotone non-decreasing."""
        env, gamma = self.env, self.gamma
        base = gamma[inds]
        if not isinstance(base.domain, Linear):
            return None
        it = base.domain.iter
        cases = []
        for g, v in base.cases:
            inside = and_(cmp2(ZERO, "<=", v), cmp2(v, "<", n))
            cases.append((and_(g, inside), v))
            out = and_(g, neg(inside))
            if out != FALSE:
                cases.append((out, Poly.sym(INF_SYM)))
        fis = self.rewrite_fixpoint(IndexFn(base.domain, tuple(cases)))
        fis = props._prune(env, fis)
        live = props._live_cases(fis)
        if len(live) != 1:
            return None
        c, ev = live[0]
        # monotone: 0 <= e{k1} <= e{k2} <= n for k1 < k2
        k1, k2 = fresh("k"), fresh("k")
        e1 = substitute(ev, {it: Poly.var(k1)})
        e2 = substitute(ev, {it: Poly.var(k2)})
        facts = [
            cmp2(ZERO, "<=", Poly.var(k1)),
            cmp2(Poly.var(k1), "<", Poly.var(k2)),
            cmp2(Poly.var(k2), "<", m),
        ]
        goal = and_(cmp2(ZERO, "<=", e1), cmp2(e1, "<=", e2), cmp2(e2, "<=", n))
        if not bool(
            prove(env, lower_bool(env, and_(*facts)), lower_bool(env, goal))
        ):
            return None
        e0 = substitute(ev, {it: ZERO})
        k = fresh("k")
        j = fresh("j")
        ek = substitute(ev, {it: Poly.var(k) - 1})
        ck = props._drop_implied(
            env, domain_facts(base.domain), subst_sym(c, {it: Poly.var(k) - 1})
        )
        vk = self._subst_index(vals, Poly.var(k) - 1)
        dstj = self._subst_index(dest, Poly.var(j))
        # guard omission: c implied by the segment being non-empty
        if self._ck_implied(ev, c, it, m, n):
            ck = TRUE
        at = cmp2(Poly.var(j), "==", ek)
        after = cmp2(Poly.var(j), ">", ek)
        seg_cases = []
        for gv, vv in vk:
            seg_cases.append((and_(at, ck, gv), vv))
        for gd, vd in dstj:
            if ck == TRUE:
                seg_cases.append((and_(after, gd), vd))
            else:
                seg_cases.append(
                    (and_(or_(neg(at), neg(ck)), gd), vd)
                )
        dom = Mixed(fresh("i"), self._simp(e0), k, m, ek, n, j)
        lin = self._subst_index(dest, Poly.var(dom.lin_iter))
        f = IndexFn(dom, tuple((and_(TRUE, g), v) for g, v in lin) + tuple(seg_cases))
        return self._normalize_mixed(f)

    def _ck_implied(self, ev, c, it, m, n) -> bool:
        env = self.env
        nxt = substitute(ev, {it: Poly.var(it) + 1})
        facts = [
            cmp2(ZERO, "<=", Poly.var(it)),
            cmp2(Poly.var(it), "<", m),
        ]
        q1 = bool(
            prove(
                env,
                lower_bool(env, and_(*(facts + [cmp2(nxt - ev, ">", ZERO)]))),
                lower_bool(env, c),
            )
        )
        if not q1:
            return False
        facts2 = [cmp2(Poly.var(it), "==", m - 1)]
        q2 = bool(
            prove(
                env,
                lower_bool(env, and_(*(facts2 + [cmp2(n - ev, ">", ZERO)]))),
                lower_bool(env, c),
            )
        )
        return q2

    def _simp(self, p: Poly) -> Poly:
        return simplify(self.env, p)

    def _normalize_mixed(self, f: IndexFn) -> IndexFn:
        """Collapse a mixed domain with empty linear prefix to segmented."""
        dom = f.domain
        if not isinstance(dom, Mixed):
            return f
        if bool(prove(self.env, TRUE, lower_bool(self.env, cmp2(dom.lin_size, "==", ZERO)))):
            # prefix empty: segments from k = 0 with start e_k (e_0 = 0)
            start = dom.seg_start
            seg_cases = tuple(
                (g, v) for g, v in f.cases[len(f.cases) - len(f.cases) :]
            )
            # drop the linear-prefix cases: they are those mentioning lin_iter
            keep = []
            for g, v in f.cases:
                names = Poly.sym(g).free_names() | v.free_names()
                if dom.lin_iter in names:
                    continue
                keep.append((g, v))
            if bool(
                prove(
                    self.env,
                    TRUE,
                    lower_bool(
                        self.env,
                        cmp2(substitute(start, {dom.seg_iter: ZERO}), "==", ZERO),
                    ),
                )
            ):
                sdom = Segmented(dom.seg_iter, dom.last, start, dom.point_iter)
                return IndexFn(sdom, tuple(keep))
        return f

    # -- hist / loop / apply ------------------------------------------------

    def _convert_hist(self, e: App):
        op, ne, destlen, inds, vals = e.args
        size = self._scalar_value(destlen)
        nm = fresh("h")
        i = fresh("i")
        return IndexFn(
            Linear(i, size), ((TRUE, Poly.sym(Index(nm, Poly.var(i)))),)
        )

    def convert_loop(self, e: Loop):
        env = self.env
        # verify annotated properties on initializers, then assume on params
        for q, init in zip(e.params, e.inits):
            fi = self.convert(init)
            if isinstance(fi, tuple):
                raise UnsupportedConstruct(e.pos, "tuple loop parameter")
            name_tmp = fresh("init")
            self.gamma[name_tmp] = fi
            if q.pre is not None:
                for c in self._cond_conjuncts(q.pre):
                    if (
                        isinstance(c, App)
                        and isinstance(c.fun, VarE)
                        and c.fun.name in PROPERTY_HEADS
                    ):
                        c2 = App(c.fun, (VarE(name_tmp),) + c.args[1:], c.pos)
                        ok, text = self._verify_prop(c2)
                        self.obligations.append(
                            Obligation("loop-invariant", c.pos, text, ok)
                        )
                        if not ok:
                            raise LoopInvariantViolated(
                                c.pos,
                                f"loop invariant fails on initializer: {text}",
                            )
        # bind parameters opaquely with assumed properties
        for q in e.params:
            self._bind_loop_param(q)
        if e.kind == "for":
            bound = self._scalar_value(e.bound)
            self.gamma[e.counter] = scalar_fn(Poly.var(e.counter))
            assume(env, cmp2(ZERO, "<=", Poly.var(e.counter)))
            assume(env, cmp2(Poly.var(e.counter), "<=", bound - 1))
        else:
            if e.cond is not None:
                self._assume_cond_soft(e.cond)
        body = self.convert(e.body)
        bodies = self._to_tuple(body)
        # re-verify invariants on the body results
        for q, bf in zip(e.params, bodies):
            name_tmp = fresh("step")
            self.gamma[name_tmp] = bf
            if q.pre is not None:
                for c in self._cond_conjuncts(q.pre):
                    if (
                        isinstance(c, App)
                        and isinstance(c.fun, VarE)
                        and c.fun.name in PROPERTY_HEADS
                    ):
                        c2 = App(c.fun, (VarE(name_tmp),) + c.args[1:], c.pos)
                        ok, text = self._verify_prop(c2)
                        self.obligations.append(
                            Obligation("loop-invariant", c.pos, text, ok)
                        )
                        if not ok:
                            raise LoopInvariantViolated(
                                c.pos, f"loop invariant fails on body: {text}"
                            )
        # the loop result is opaque, carrying the parameter properties
        out = []
        for q, bf in zip(e.params, bodies):
            nm = fresh("lp")
            dom = bf.domain
            i = point_iter(dom)
            out.append(
                IndexFn(dom, ((TRUE, Poly.sym(Index(nm, Poly.var(i)))),))
                if not bf.is_scalar()
                else scalar_fn(Poly.var(nm))
            )
        return tuple(out) if len(out) > 1 else out[0]

    def _bind_loop_param(self, q) -> None:
        self.gamma[q.name] = scalar_fn(Poly.var(q.name))
        self.env.see(q.name)
        if q.pre is not None:
            self._assume_cond_soft(q.pre)

    def _assume_cond_soft(self, e) -> None:
        for c in self._cond_conjuncts(e):
            if (
                isinstance(c, App)
                and isinstance(c.fun, VarE)
                and c.fun.name in PROPERTY_HEADS
            ):
                self._assume_prop(c)
            else:
                try:
                    assume(self.env, lower_bool(self.env, self._bool_sym(c)))
                except UnsupportedConstruct:
                    pass

    def apply_fun(self, e: App):
        nm = e.fun.name
        info = self.infos.get(nm)
        if info is None:
            raise UnsupportedConstruct(e.pos, f"call of unanalyzed function {nm}")
        callee = info.fundef
        # formal -> actual renaming
        ren: dict = {}
        arg_names = []
        for q, a in zip(callee.params, e.args):
            if isinstance(a, VarE):
                ren[q.name] = a.name
                arg_names.append(a.name)
            elif isinstance(a, Const) and isinstance(a.value, int):
                tmp = fresh("c")
                self.gamma[tmp] = scalar_fn(Poly.const(a.value))
                ren[q.name] = tmp
                arg_names.append(tmp)
            elif isinstance(a, Lambda):
                tmp = fresh("pf")
                # predicate arguments become uninterpreted arrays; remember
                # the lambda for annotation-level reasoning
                ren[q.name] = tmp
                arg_names.append(tmp)
            else:
                raise UnsupportedConstruct(e.pos, "call argument not in ANF")
        # unify size parameters against actual domains
        for q, a in zip(callee.params, e.args):
            if isinstance(q.type, TArray) and isinstance(a, VarE):
                fa = self.gamma.get(a.name)
                if fa is None:
                    continue
                fsize = info.gamma.get(q.name)
                if fsize is None:
                    continue
                formal_n = domain_size(fsize.domain)
                s = formal_n.single_sym()
                if isinstance(s, Var) and s.name not in ren:
                    ren[s.name] = domain_size(fa.domain)
        # check preconditions on actuals
        for q, a in zip(callee.params, e.args):
            if q.pre is None:
                continue
            for c in self._cond_conjuncts(q.pre):
                ok, text = self._check_pre_on_actual(c, ren, a)
                self.obligations.append(
                    Obligation("precondition", e.pos, f"{nm}: {text}", ok)
                )
                if not ok:
                    raise PreconditionFailed(
                        e.pos, f"precondition of {nm} fails: {text}"
                    )
        imp = _Importer(self, info, ren)
        outs = tuple(imp.import_ixfn(r) for r in info.results)
        imp.import_result_props(info.result_names, outs)
        return outs if len(outs) > 1 else outs[0]

    def _check_pre_on_actual(self, c, ren, a):
        if (
            isinstance(c, App)
            and isinstance(c.fun, VarE)
            and c.fun.name in PROPERTY_HEADS
        ):
            head = c.fun.name
            formal = c.args[0].name
            actual = ren.get(formal, formal)
            if not isinstance(actual, str):
                return False, expr_str(c)
            c2 = App(c.fun, (VarE(actual),) + tuple(self._ren_expr(x, ren) for x in c.args[1:]), c.pos)
            return self._verify_prop(c2)
        ok = self._prove_bool(self._ren_expr(c, ren))
        return ok, expr_str(c)

    def _ren_expr(self, e, ren):
        if isinstance(e, VarE):
            got = ren.get(e.name)
            if isinstance(got, str):
                return VarE(got, e.pos)
            return e
        if isinstance(e, BinOp):
            return BinOp(e.op, self._ren_expr(e.lhs, ren), self._ren_expr(e.rhs, ren), e.pos)
        if isinstance(e, NotE):
            return NotE(self._ren_expr(e.arg, ren), e.pos)
        if isinstance(e, IndexE):
            return IndexE(self._ren_expr(e.arr, ren), self._ren_expr(e.idx, ren), e.pos)
        if isinstance(e, If):
            return If(
                self._ren_expr(e.cond, ren),
                self._ren_expr(e.then, ren),
                self._ren_expr(e.els, ren),
                e.pos,
            )
        if isinstance(e, TupleE):
            return TupleE(tuple(self._ren_expr(x, ren) for x in e.items), e.pos)
        if isinstance(e, App):
            return App(
                self._ren_expr(e.fun, ren),
                tuple(self._ren_expr(x, ren) for x in e.args),
                e.pos,
            )
        return e

    # -- rewrite engine -----------------------------------------------------

    def rewrite_fixpoint(self, f: IndexFn, allow_sum: bool = False) -> IndexFn:
        prev = None
        while f != prev and self.rewrites_left > 0:
            prev = f
            self.rewrites_left -= 1
            f = self._rewrite_once(f, allow_sum)
        return f

    def _rewrite_once(self, f: IndexFn, allow_sum: bool) -> IndexFn:
        f = self._subst_refs(f)
        if allow_sum:
            f = self._recur_rules(f)
        f = self._guard_rules(f)
        return f

    def _subst_refs(self, f: IndexFn) -> IndexFn:
        """Substitute let-bound arrays referenced in guards and values."""
        out = []
        changed = False
        for g, v in f.cases:
            v2 = self._expand_sums(v)
            if v2 != v:
                changed = True
                v = v2
            expanded = self._expand_case(g, v)
            if expanded is not None:
                out.extend(expanded)
                changed = True
            else:
                out.append((g, v))
        if not changed:
            return f
        if len(out) > MAX_CASES:
            return f
        return IndexFn(f.domain, tuple(out))

    def _expand_sums(self, v: Poly) -> Poly:
        """Distribute sums over the guarded cases of the summed array."""
        from .solver import replace_sym

        for s in list(v.all_symbols()):
            if not isinstance(s, SliceSum):
                continue
            b = s.body
            if not (
                isinstance(b, Index)
                and isinstance(b.array, str)
                and b.index == Poly.var(s.binder)
            ):
                continue
            x = b.array
            if x not in self.gamma or x in self.opaque or self._is_self_ref(
                Index(x, Poly.var(s.binder))
            ):
                continue
            repl = self._slice_sum_of(x, s.binder, s.lo, s.hi)
            v = replace_sym(v, s, repl)
        return v

    def _find_ref(self, p: Poly):
        for s in p.all_symbols():
            got = self._find_ref_sym(s)
            if got is not None:
                return got
        return None

    def _find_ref_sym(self, s: Symbol):
        if isinstance(s, Index) and isinstance(s.array, str):
            inner = self._find_ref(s.index)
            if inner is not None:
                return inner
            if (
                s.array in self.gamma
                and s.array not in self.opaque
                and not self._is_self_ref(s)
            ):
                return s
            return None
        if isinstance(s, Var):
            f = self.gamma.get(s.name)
            if f is not None and f.is_scalar():
                if f.value_if_single() == Poly.var(s.name):
                    return None
                return s
            return None
        if isinstance(s, SliceSum):
            for p in (s.lo, s.hi):
                got = self._find_ref(p)
                if got is not None:
                    return got
            return None  # the body binder is not in scope here
        if isinstance(s, Cmp):
            return self._find_ref(s.poly)
        if isinstance(s, Not):
            return self._find_ref_sym(s.arg)
        if isinstance(s, (And, Or)):
            for a in s.args:
                got = self._find_ref_sym(a)
                if got is not None:
                    return got
            return None
        return None

    def _is_self_ref(self, s: Index) -> bool:
        """x[i] where gamma(x) is the trivial `for i<n . true => x[i]`."""
        f = self.gamma.get(s.array)
        if f is None or not isinstance(f.domain, Linear):
            return True
        v = f.value_if_single()
        if v is None:
            return False
        vs = v.single_sym()
        return (
            isinstance(vs, Index)
            and vs.array == s.array
            and vs.index == Poly.var(f.domain.iter)
        )

    def _expand_case(self, g: Symbol, v: Poly):
        ref = self._find_ref(v)
        where = "v"
        if ref is None:
            ref = self._find_ref_sym(g)
            where = "g"
        if ref is None:
            return None
        if isinstance(ref, Var):
            repl = self.gamma[ref.name].cases
        else:
            repl = self._subst_index(ref.array, ref.index)
        from .solver import _replace_in, replace_sym

        out = []
        for ch, eh in repl:
            if where == "v":
                g2 = and_(g, ch)
                v2 = replace_sym(v, ref, eh)
            else:
                g2 = and_(self._subst_guard_atom(g, ref, eh), ch)
                v2 = v
            out.append((g2, v2))
        return out

    def _subst_guard_atom(self, g: Symbol, ref: Symbol, eh: Poly) -> Symbol:
        """Replace ref in guard g: as a boolean atom or inside comparisons."""
        from .solver import replace_sym

        if g == ref:
            return _guard_sym(eh)
        if isinstance(g, Not):
            return neg(self._subst_guard_atom(g.arg, ref, eh))
        if isinstance(g, And):
            return and_(*(self._subst_guard_atom(a, ref, eh) for a in g.args))
        if isinstance(g, Or):
            return or_(*(self._subst_guard_atom(a, ref, eh) for a in g.args))
        if isinstance(g, Cmp):
            return cmp(replace_sym(g.poly, ref, eh), g.op)
        return g

    def _recur_rules(self, f: IndexFn) -> IndexFn:
        dom = f.domain
        if not isinstance(dom, Linear):
            return f
        i = dom.iter
        # G.BoolToInt: flatten a full case split over recurrence values
        if len(f.cases) > 1 and any(
            v.contains(RECUR_SYM) for _, v in f.cases
        ):
            total = ZERO
            ok = True
            for g, v in f.cases:
                gp = _sym_poly(g) if not isinstance(g, (And, Or, Not)) else None
                if g == TRUE:
                    gp = ONE
                elif isinstance(g, (Index, Cmp)):
                    gp = Poly.sym(g)
                elif isinstance(g, Not):
                    inner = g.arg
                    if isinstance(inner, (Index, Cmp)):
                        gp = ONE - Poly.sym(inner)
                    else:
                        ok = False
                        break
                else:
                    ok = False
                    break
                total = total + gp * v
            if ok:
                f = IndexFn(dom, ((TRUE, total),))
        # I.Carry
        if len(f.cases) == 2:
            (g1, v1), (g2, v2) = f.cases
            if (
                v2 == Poly.sym(RECUR_SYM)
                and not v1.contains(RECUR_SYM)
                and g1 == cmp(Poly.var(i), "==")
                and g2 == cmp(Poly.var(i), "!=")
            ):
                f = IndexFn(dom, ((TRUE, substitute(v1, {i: ZERO})),))
        # I.Sum
        if len(f.cases) == 1 and f.cases[0][0] == TRUE:
            v = f.cases[0][1]
            r = Poly.sym(RECUR_SYM)
            if v.contains(RECUR_SYM):
                e0 = v - r
                if not e0.contains(RECUR_SYM) and self._linear(e0):
                    j = fresh("j")
                    body = substitute(e0, {i: Poly.var(j)})
                    f = IndexFn(
                        dom,
                        ((TRUE, sum_poly(j, ZERO, Poly.var(i), body)),),
                    )
        return f

    def _linear(self, p: Poly) -> bool:
        for t, c in p.items():
            if len(t) > 1:
                return False
        return True

    def _guard_rules(self, f: IndexFn) -> IndexFn:
        env0 = self.env
        env = env0.copy()
        facts = domain_facts(f.domain)
        for c in facts:
            assume(env, lower_bool(env, c))
        cases = list(f.cases)
        # value simplification; guard equalities on the iterator substitute
        it = point_iter(f.domain)
        out = []
        for g, v in cases:
            eq = self._guard_iter_eq(g, it)
            if eq is not None:
                v = substitute(v, {it: eq})
            if not v.contains(RECUR_SYM) and not v.contains(INF_SYM):
                v = simplify(env, v)
            out.append((self._simplify_guard(env, g), v))
        cases = out
        # G.Falsify
        out = []
        for g, v in cases:
            if g == FALSE:
                continue
            if self._falsify(env, g):
                continue
            out.append((g, v))
        cases = out
        # G.Join
        merged = True
        while merged and len(cases) > 1:
            merged = False
            for a in range(len(cases)):
                for b in range(len(cases)):
                    if a == b:
                        continue
                    ga, va = cases[a]
                    gb, vb = cases[b]
                    # absorb b into a: the values must agree where b holds
                    if va == vb or bool(
                        prove(
                            env,
                            lower_bool(env, gb),
                            lower_bool(env, cmp(va - vb, "==")),
                        )
                    ):
                        cases[a] = (or_(ga, gb), va)
                        del cases[b if b > a else b]
                        merged = True
                        break
                if merged:
                    break
        if not cases:
            return f
        return IndexFn(f.domain, tuple(cases))

    def _guard_iter_eq(self, g: Symbol, it: str) -> Optional[Poly]:
        """An equality `it == e` pinned by the guard, if present."""
        atoms = g.args if isinstance(g, And) else (g,)
        for a in atoms:
            if isinstance(a, Cmp) and a.op == "==":
                p = a.poly
                for t, c in p.items():
                    if t == (Var(it),) and c in (1, -1):
                        rest = p - Poly(((t, c),))
                        e = -rest if c == 1 else rest
                        if not e.contains(Var(it)):
                            return e
        return None

    def _simplify_guard(self, env, g: Symbol) -> Symbol:
        if isinstance(g, And):
            return and_(*(self._simplify_guard(env, a) for a in g.args))
        if isinstance(g, Or):
            return or_(*(self._simplify_guard(env, a) for a in g.args))
        if isinstance(g, Not):
            return neg(self._simplify_guard(env, g.arg))
        if isinstance(g, Cmp):
            # E.Query: discharge provable comparisons
            if bool(prove(env, TRUE, lower_bool(env, g))):
                return TRUE
            if bool(prove(env, TRUE, lower_bool(env, neg(g)))):
                return FALSE
            return Cmp(simplify(env, g.poly), g.op)
        return g

    def _falsify(self, env, g: Symbol) -> bool:
        try:
            conj = to_cnf(g)
        except BlowupExceeded:
            return False
        if not conj:
            return False
        if len(conj) == 1:
            return bool(
                prove(env, TRUE, lower_bool(env, neg(or_(*conj[0]))))
            )
        for h in range(len(conj)):
            rest = [or_(*c) for a, c in enumerate(conj) if a != h]
            env2 = env.copy()
            try:
                for r in rest:
                    assume(env2, lower_bool(env2, r))
            except Exception:
                continue
            if bool(prove(env2, TRUE, lower_bool(env2, neg(or_(*conj[h]))))):
                return True
        return False


class _Importer:
    """Inlines a callee's results into the caller under fresh names."""

    def __init__(self, caller: Analyzer, info: FunInfo, ren: dict):
        self.caller = caller
        self.info = info
        self.ren = dict(ren)  # callee name -> caller name or Poly

    def _map_name(self, n: str) -> str:
        got = self.ren.get(n)
        if isinstance(got, str):
            return got
        if got is None:
            nn = fresh(n.lstrip("%") or "t")
            self.ren[n] = nn
            self._import_binding(n, nn)
            return nn
        return n

    def _name_map_for(self, names):
        return {n: self._map_name(n) for n in names}

    def _var_subst(self):
        out = {}
        for k, v in self.ren.items():
            if isinstance(v, Poly):
                out[k] = v
            elif isinstance(v, str) and v != k:
                out[k] = Poly.var(v)
        return out

    def import_poly(self, p: Poly) -> Poly:
        names = p.free_names()
        arr = {}
        for s in p.all_symbols():
            self._collect_refs(s, arr)
        amap = {n: self._map_name(n) for n in arr}
        p = rename_arrays(p, amap)
        p = substitute(p, self._var_subst())
        return p

    def _collect_refs(self, s: Symbol, out: dict) -> None:
        if isinstance(s, Index):
            ref = s.array
            if isinstance(ref, str):
                out[ref] = True
            elif isinstance(ref, DOR):
                for m in ref.members:
                    out[m] = True
            elif isinstance(ref, Inv):
                out[ref.array] = True
            for x in s.index.all_symbols():
                self._collect_refs(x, out)
        elif isinstance(s, SliceSum):
            for p in (s.lo, s.hi):
                for x in p.all_symbols():
                    self._collect_refs(x, out)
            self._collect_refs(s.body, out)
        elif isinstance(s, Cmp):
            for x in s.poly.all_symbols():
                self._collect_refs(x, out)
        elif isinstance(s, Not):
            self._collect_refs(s.arg, out)
        elif isinstance(s, (And, Or)):
            for a in s.args:
                self._collect_refs(a, out)

    def import_sym(self, s: Symbol) -> Symbol:
        p = self.import_poly(Poly.sym(s))
        got = p.single_sym()
        return got if got is not None else _guard_sym(p)

    def import_ixfn(self, f: IndexFn) -> IndexFn:
        dom = f.domain
        if isinstance(dom, Linear):
            dom2 = Linear(dom.iter, self.import_poly(dom.size))
        elif isinstance(dom, Segmented):
            dom2 = Segmented(
                dom.seg_iter,
                self.import_poly(dom.last),
                self.import_poly(dom.seg_start),
                dom.point_iter,
            )
        else:
            dom2 = Mixed(
                dom.lin_iter,
                self.import_poly(dom.lin_size),
                dom.seg_iter,
                self.import_poly(dom.last),
                self.import_poly(dom.seg_start),
                self.import_poly(dom.cap),
                dom.point_iter,
            )
        cases = tuple(
            (self.import_sym(g), self.import_poly(v)) for g, v in f.cases
        )
        return IndexFn(dom2, cases)

    def _import_binding(self, old: str, new: str) -> None:
        """Copy the callee's facts about `old` into the caller as `new`."""
        cinfo, caller = self.info, self.caller
        f = cinfo.gamma.get(old)
        if f is not None:
            caller.gamma[new] = self.import_ixfn(f)
        env_c, env = cinfo.env, caller.env
        if old in env_c.elem:
            info = env_c.elem[old]
            env.set_elem(
                new,
                lo=self.import_poly(info.lo) if info.lo is not None else None,
                hi=self.import_poly(info.hi) if info.hi is not None else None,
                strict=info.strict,
            )
        if old in env_c.dor:
            env.add_dor_class(tuple(self._map_name(m) for m in env_c.dor[old]))
        if old in env_c.inj:
            lo, hi = env_c.inj[old]
            env.inj[new] = (self.import_poly(lo), self.import_poly(hi))
        if old in env_c.mono:
            op, lo, hi, length = env_c.mono[old]
            env.mono[new] = (
                op,
                self.import_poly(lo) if lo is not None else None,
                self.import_poly(hi) if hi is not None else None,
                self.import_poly(length) if length is not None else None,
            )
        if old in env_c.bij:
            b = env_c.bij[old]
            env.bij[new] = BijInfo(
                tuple(self.import_poly(p) for p in b.rcd),
                b.segs,
                tuple(self.import_poly(p) for p in b.img),
            )
        if old in env_c.invfiltpart:
            img, segs, filt, parts = env_c.invfiltpart[old]
            env.invfiltpart[new] = (
                tuple(self.import_poly(p) for p in img),
                segs,
                (filt[0], self.import_sym(filt[1])),
                tuple((b, self.import_sym(p)) for b, p in parts),
            )
        if old in env_c.filtpart:
            fp = env_c.filtpart[old]
            env.filtpart[new] = FiltPartInfo(
                self._map_name(fp.src),
                (fp.filt[0], self.import_sym(fp.filt[1])) if fp.filt else None,
                tuple((b, self.import_sym(p)) for b, p in fp.parts),
            )

    def import_result_props(self, names, outs) -> None:
        for old, f in zip(names, outs):
            new = fresh("res")
            self.ren[old] = new
            self.caller.gamma[new] = f
            self.caller.prop_src[id(f)] = new
            self._import_binding_props_only(old, new)

    def _import_binding_props_only(self, old, new) -> None:
        saved = self.info.gamma
        self.info = FunInfo(
            self.info.fundef,
            {},
            self.info.env,
            self.info.results,
            self.info.result_names,
            self.info.internal_order,
            self.info.obligations,
        )
        try:
            self._import_binding(old, new)
        finally:
            self.info = FunInfo(
                self.info.fundef,
                saved,
                self.info.env,
                self.info.results,
                self.info.result_names,
                self.info.internal_order,
                self.info.obligations,
            )


def analyze_program(program: Program, max_rewrites: int = 1000, trace=None):
    a = Analyzer(program, max_rewrites=max_rewrites, trace=trace)
    a.analyze()
    return a
