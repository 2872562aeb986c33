"""Reference dynamic semantics: interpreter, index-function evaluation,
and brute-force property checkers. Ground truth for all tests."""

from __future__ import annotations

import random
from typing import Callable, Optional

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
    TArray,
    TBase,
    TFun,
    TTuple,
    TupleE,
    VarE,
    expr_str,
)
from .ixfn import IndexFn, Linear, Mixed, Segmented
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
    Var,
    is_inf,
    INF,
    NEG_INF,
)


class OracleError(Exception):
    pass


class OutOfBounds(OracleError):
    def __init__(self, site, pos=None):
        super().__init__(f"out of bounds: {site}")
        self.site = site
        self.pos = pos


class NonIdempotentScatter(OracleError):
    def __init__(self, pos=None):
        super().__init__("scatter writes conflicting values to one index")
        self.pos = pos


class StepBudgetExceeded(OracleError):
    pass


class GuardPartitionViolation(OracleError):
    pass


class UnboundFree(OracleError):
    pass


class _InfValue:
    """Distinct infinity marker produced by index functions."""

    def __repr__(self):
        return "INF"


INFV = _InfValue()


# ---------------------------------------------------------------------------
# interpreter


class Closure:
    def __init__(self, lam: Lambda, env: dict, interp: "Interp"):
        self.lam = lam
        self.env = env
        self.interp = interp

    def __call__(self, *args):
        if len(args) != len(self.lam.params):
            raise OracleError("lambda arity mismatch")
        env = dict(self.env)
        for name, v in zip(self.lam.params, args):
            if name != "_":
                env[name] = v
        return self.interp.eval(self.lam.body, env)


def _i64_min(a, b):
    return min(a, b)


_NAMED_OPS = {"i64.min": _i64_min, "i64.max": max}


class Interp:
    def __init__(self, program: Program, step_budget: int = 10**6):
        self.funs = {f.name: f for f in program.defs}
        self.budget = step_budget

    def _tick(self):
        self.budget -= 1
        if self.budget <= 0:
            raise StepBudgetExceeded()

    def call(self, name: str, args: list):
        f = self.funs[name]
        if len(args) != len(f.params):
            raise OracleError(f"{name} expects {len(f.params)} arguments")
        env = {}
        for p, v in zip(f.params, args):
            env[p.name] = v
        self._bind_sizes(f, args, env)
        return self.eval(f.body, env)

    def _bind_sizes(self, f: FunDef, args, env):
        for p, v in zip(f.params, args):
            t = p.type
            while isinstance(t, TArray):
                if t.size is not None and isinstance(t.size, VarE):
                    nm = t.size.name
                    if nm not in env:
                        env[nm] = len(v)
                t = t.elem
        for s in f.sizes:
            if s not in env:
                # size used only via expressions like [n+1]; recover when
                # a matching simple form exists
                for p, v in zip(f.params, args):
                    t = p.type
                    if isinstance(t, TArray) and isinstance(t.size, BinOp):
                        b = t.size
                        if (
                            b.op == "+"
                            and isinstance(b.lhs, VarE)
                            and b.lhs.name == s
                            and isinstance(b.rhs, Const)
                        ):
                            env[s] = len(v) - b.rhs.value
                            break

    def eval(self, e, env):
        self._tick()
        if isinstance(e, Const):
            return e.value
        if isinstance(e, VarE):
            if e.name in env:
                return env[e.name]
            if e.name in _NAMED_OPS:
                return _NAMED_OPS[e.name]
            raise UnboundFree(e.name)
        if isinstance(e, BinOp):
            return self._binop(e, env)
        if isinstance(e, NotE):
            return not self.eval(e.arg, env)
        if isinstance(e, IndexE):
            arr = self.eval(e.arr, env)
            idx = self.eval(e.idx, env)
            if not isinstance(arr, list):
                raise OracleError(f"indexing a non-array: {expr_str(e)}")
            if not 0 <= idx < len(arr):
                raise OutOfBounds(expr_str(e), e.pos)
            return arr[idx]
        if isinstance(e, If):
            return (
                self.eval(e.then, env)
                if self.eval(e.cond, env)
                else self.eval(e.els, env)
            )
        if isinstance(e, Let):
            v = self.eval(e.rhs, env)
            env = dict(env)
            if len(e.names) == 1:
                if e.names[0] != "_":
                    env[e.names[0]] = v
            else:
                if not isinstance(v, tuple) or len(v) != len(e.names):
                    raise OracleError("tuple pattern arity mismatch")
                for n, x in zip(e.names, v):
                    if n != "_":
                        env[n] = x
            return self.eval(e.body, env)
        if isinstance(e, TupleE):
            return tuple(self.eval(x, env) for x in e.items)
        if isinstance(e, Lambda):
            return Closure(e, env, self)
        if isinstance(e, Loop):
            return self._loop(e, env)
        if isinstance(e, App):
            return self._app(e, env)
        raise TypeError(f"eval: {e!r}")

    def _binop(self, e: BinOp, env):
        op = e.op
        if op == "&&":
            return bool(self.eval(e.lhs, env)) and bool(self.eval(e.rhs, env))
        if op == "||":
            return bool(self.eval(e.lhs, env)) or bool(self.eval(e.rhs, env))
        a = self.eval(e.lhs, env)
        b = self.eval(e.rhs, env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        raise OracleError(f"unknown operator {op}")

    def _loop(self, e: Loop, env):
        vals = [self.eval(x, env) for x in e.inits]
        env = dict(env)
        if e.kind == "for":
            bound = self.eval(e.bound, env)
            for j in range(bound):
                env[e.counter] = j
                for p, v in zip(e.params, vals):
                    env[p.name] = v
                r = self.eval(e.body, env)
                vals = list(r) if len(e.params) > 1 else [r]
        else:
            while True:
                for p, v in zip(e.params, vals):
                    env[p.name] = v
                if not self.eval(e.cond, env):
                    break
                r = self.eval(e.body, env)
                vals = list(r) if len(e.params) > 1 else [r]
                self._tick()
        return tuple(vals) if len(vals) > 1 else vals[0]

    def _fn(self, v):
        if callable(v):
            return v
        raise OracleError(f"not a function: {v!r}")

    def _app(self, e: App, env):
        if isinstance(e.fun, Lambda):
            f = Closure(e.fun, env, self)
            return f(*[self.eval(a, env) for a in e.args])
        name = e.fun.name if isinstance(e.fun, VarE) else None
        if name == "map":
            f = self._fn(self.eval(e.args[0], env))
            arrs = [self.eval(a, env) for a in e.args[1:]]
            n = len(arrs[0])
            if any(len(a) != n for a in arrs):
                raise OracleError("map arrays disagree on length")
            return [f(*[a[i] for a in arrs]) for i in range(n)]
        if name == "scan":
            k = (len(e.args) - 1) // 2
            f = self._fn(self.eval(e.args[0], env))
            acc = [self.eval(a, env) for a in e.args[1 : 1 + k]]
            arrs = [self.eval(a, env) for a in e.args[1 + k :]]
            n = len(arrs[0])
            outs: list = [[] for _ in range(k)]
            for i in range(n):
                r = f(*acc, *[a[i] for a in arrs])
                acc = list(r) if k > 1 else [r]
                for j in range(k):
                    outs[j].append(acc[j])
            return tuple(outs) if k > 1 else outs[0]
        if name == "scatter":
            dst = list(self.eval(e.args[0], env))
            inds = self.eval(e.args[1], env)
            vals = self.eval(e.args[2], env)
            written: dict = {}
            for i, v in zip(inds, vals):
                if isinstance(i, int) and 0 <= i < len(dst):
                    if i in written and written[i] != v:
                        raise NonIdempotentScatter(e.pos)
                    written[i] = v
                    dst[i] = v
            return dst
        if name == "hist":
            op = self._fn(self.eval(e.args[0], env))
            ne = self.eval(e.args[1], env)
            dlen = self.eval(e.args[2], env)
            inds = self.eval(e.args[3], env)
            vals = self.eval(e.args[4], env)
            dst = [ne] * dlen
            for i, v in zip(inds, vals):
                if 0 <= i < dlen:
                    dst[i] = op(dst[i], v)
            return dst
        if name == "iota":
            return list(range(self.eval(e.args[0], env)))
        if name == "replicate":
            n = self.eval(e.args[0], env)
            v = self.eval(e.args[1], env)
            return [v] * n
        if name == "length":
            return len(self.eval(e.args[0], env))
        if name in self.funs:
            return self.call(name, [self.eval(a, env) for a in e.args])
        # predicate/operator value bound in the environment
        f = self._fn(self.eval(e.fun, env))
        return f(*[self.eval(a, env) for a in e.args])


def eval_program(program: Program, fun: str, args: list, step_budget: int = 10**6):
    return Interp(program, step_budget).call(fun, args)


# ---------------------------------------------------------------------------
# index-function evaluation


def eval_poly(p: Poly, env: dict):
    if p == INF:
        return INFV
    total = 0
    for t, c in p.items():
        prod = c
        for s in t:
            prod *= eval_sym(s, env)
        total += prod
    return total


def eval_sym(s, env: dict):
    if isinstance(s, Var):
        if s.name not in env:
            raise UnboundFree(s.name)
        return env[s.name]
    if isinstance(s, Bool):
        return int(s.val)
    if isinstance(s, Index):
        idx = eval_poly(s.index, env)
        return _index_ref(s.array, idx, env)
    if isinstance(s, SliceSum):
        lo = eval_poly(s.lo, env)
        hi = eval_poly(s.hi, env)
        total = 0
        inner = dict(env)
        for j in range(lo, hi + 1):
            inner[s.binder] = j
            total += eval_sym(s.body, inner)
        return total
    if isinstance(s, Prod):
        out = 1
        for a in s.args:
            out *= eval_sym(a, env)
        return out
    if isinstance(s, Cmp):
        v = eval_poly(s.poly, env)
        return int({"<": v < 0, "<=": v <= 0, "==": v == 0, "!=": v != 0}[s.op])
    if isinstance(s, Not):
        return 1 - eval_sym(s.arg, env)
    if isinstance(s, And):
        return int(all(eval_sym(a, env) for a in s.args))
    if isinstance(s, Or):
        return int(any(eval_sym(a, env) for a in s.args))
    if isinstance(s, Infty):
        raise OracleError("infinity inside arithmetic")
    if isinstance(s, Recur):
        raise OracleError("recurrence symbol evaluated")
    raise TypeError(f"eval_sym: {s!r}")


def _index_ref(ref, idx, env):
    if isinstance(ref, str):
        a = env.get(ref)
        if a is None:
            raise UnboundFree(ref)
        if callable(a):
            return int(bool(a(idx)))
        if not 0 <= idx < len(a):
            raise OutOfBounds(f"{ref}[{idx}]")
        return int(a[idx])
    if isinstance(ref, DOR):
        return int(any(_index_ref(m, idx, env) for m in ref.members))
    if isinstance(ref, Inv):
        a = env.get(ref.array)
        if a is None:
            raise UnboundFree(ref.array)
        for j, v in enumerate(a):
            if v == idx:
                return j
        raise OracleError(f"no inverse image of {idx} in {ref.array}")
    raise TypeError(ref)


def _domain_points(f: IndexFn, env: dict):
    """Yield (flat position, binding dict) for each domain point."""
    dom = f.domain
    if isinstance(dom, Linear):
        n = eval_poly(dom.size, env)
        for i in range(n):
            yield i, {dom.iter: i}
        return
    if isinstance(dom, Segmented):
        last = eval_poly(dom.last, env)
        for k in range(last + 1):
            s0 = eval_poly(dom.seg_start, {**env, dom.seg_iter: k})
            s1 = eval_poly(dom.seg_start, {**env, dom.seg_iter: k + 1})
            for j in range(s0, s1):
                yield j, {dom.seg_iter: k, dom.point_iter: j}
        return
    if isinstance(dom, Mixed):
        nlin = eval_poly(dom.lin_size, env)
        cap = eval_poly(dom.cap, env)
        for i in range(nlin):
            yield i, {dom.lin_iter: i, dom.point_iter: i}
        last = eval_poly(dom.last, env)
        for k in range(1, last + 1):
            s0 = eval_poly(dom.seg_start, {**env, dom.seg_iter: k})
            s1 = (
                eval_poly(dom.seg_start, {**env, dom.seg_iter: k + 1})
                if k < last
                else cap
            )
            for j in range(s0, min(s1, cap)):
                yield j, {dom.seg_iter: k, dom.point_iter: j}
        return
    raise TypeError(dom)


def eval_ixfn(f: IndexFn, env: dict) -> list:
    out = []
    for pos, binding in _domain_points(f, env):
        local = {**env, **binding}
        hits = [
            (g, v) for g, v in f.cases if eval_sym(g, local)
        ]
        if len(hits) != 1:
            raise GuardPartitionViolation(
                f"{len(hits)} true guards at point {binding}"
            )
        _, v = hits[0]
        out.append(INFV if v == INF else eval_poly(v, local))
        assert len(out) == pos + 1, "non-contiguous domain"
    return out


# ---------------------------------------------------------------------------
# concrete property checks (Fig.-style semantics by enumeration)


def _in_iv(v, iv) -> bool:
    """Inclusive interval membership; None endpoints mean unbounded."""
    lo, hi = iv
    if v is INFV:
        return hi is None
    lo_ok = lo is None or v >= lo
    hi_ok = hi is None or v <= hi
    return lo_ok and hi_ok


def chk_range(xs, lo, hi) -> bool:
    return all(_in_iv(v, (lo, hi)) for v in xs)


def chk_mono(xs, op: str) -> bool:
    import operator

    f = {"<=": operator.le, "<": operator.lt, ">=": operator.ge, ">": operator.gt}[op]
    return all(f(a, b) for a, b in zip(xs, xs[1:]))


def chk_inj(xs, lo=None, hi=None) -> bool:
    kept = [v for v in xs if v is not INFV and _in_iv(v, (lo, hi))]
    return len(kept) == len(set(kept))


def _segments(segs, n):
    """segs: list of starts with a final end, or None for one segment."""
    if segs is None:
        return [(0, n)]
    return list(zip(segs, segs[1:]))


def chk_bij(xs, rcd, segs, imgs) -> bool:
    """imgs: one inclusive interval (lo, hi) per segment."""
    if not chk_inj(xs, *rcd):
        return False
    spans = _segments(segs, len(xs))
    if len(spans) != len(imgs):
        return False
    for (a, b), (lo, hi) in zip(spans, imgs):
        got = {v for v in xs[a:b] if v is not INFV and _in_iv(v, rcd)}
        want = set(range(lo, hi + 1)) if hi >= lo else set()
        if got != want:
            return False
    return True


def chk_orthog(segs, n, preds) -> bool:
    for a, b in _segments(segs, n):
        for i in range(a, b):
            if sum(1 for p in preds if p(i)) > 1:
                return False
    return True


def filtpart_reference(x, segs, pf, pps) -> list:
    """filter then v-way partition within each segment, flattened.

    The user supplies v-1 predicates; the last class is the complement of
    their disjunction.
    """
    full = list(pps) + [lambda j: not any(p(j) for p in pps)]
    out = []
    for a, b in _segments(segs, len(x)):
        kept = [i for i in range(a, b) if pf(i)]
        for p in full:
            out.extend(x[i] for i in kept if p(i))
    return out


def chk_filtpart(y, x, segs, pf, pps) -> bool:
    if not chk_orthog(segs, len(x), pps):
        return False
    return list(y) == filtpart_reference(x, segs, pf, pps)


def chk_invfiltpart(z, img, segs, pf, pps) -> bool:
    """The four clauses: bijectivity, cardinality, monotone classes,
    cross-class/segment ordering. img is inclusive (lo, hi)."""
    spans = _segments(segs, len(z))
    if not chk_orthog(segs, len(z), pps):
        return False
    if not chk_bij(z, img, None, [img]):
        return False
    lo, hi = img
    card = hi - lo + 1 if hi >= lo else 0
    passing = [
        [j for j in range(a, b) if pf(j)] for a, b in spans
    ]
    if sum(len(p) for p in passing) != card:
        return False

    def val(j):
        return z[j]

    # cross-segment ordering
    for k1 in range(len(spans)):
        for k2 in range(k1 + 1, len(spans)):
            for j1 in passing[k1]:
                for j2 in passing[k2]:
                    if not (val(j1) is not INFV and val(j2) is not INFV and val(j1) < val(j2)):
                        return False
    full = list(pps) + [lambda j: not any(p(j) for p in pps)]
    for k, (a, b) in enumerate(spans):
        # within-class monotonicity
        for p in full:
            sel = [j for j in passing[k] if p(j)]
            for j1, j2 in zip(sel, sel[1:]):
                if not val(j1) < val(j2):
                    return False
        # cross-class ordering
        for h1 in range(len(full)):
            for h2 in range(h1 + 1, len(full)):
                for j1 in passing[k]:
                    for j2 in passing[k]:
                        if full[h1](j1) and full[h2](j2):
                            if not val(j1) < val(j2):
                                return False
    return True


# ---------------------------------------------------------------------------
# random argument generation


def _rand_elem(rng: random.Random, band):
    lo, hi = band
    return rng.randint(lo, hi)


def gen_args(f: FunDef, rng: random.Random, interp: Interp, max_tries: int = 200):
    """Random type-correct, precondition-satisfying arguments, or None."""
    for _ in range(max_tries):
        sizes = {s: rng.randint(0, 12) for s in f.sizes}
        env: dict = dict(sizes)
        args = []
        ok = True
        for p in f.params:
            v = _gen_value(p.type, rng, env, interp)
            if v is None:
                ok = False
                break
            env[p.name] = v
            args.append(v)
        if not ok:
            continue
        if _pres_hold(f, env, interp):
            return args
    return None


def _type_len(t: TArray, env, interp) -> Optional[int]:
    if t.size is None:
        return None
    try:
        return interp.eval(t.size, env)
    except OracleError:
        return None


def _band_for(pre, env, interp):
    """Element band from a Range annotation when present, else default."""
    from .ast import App as _App

    band = (-3, 12)
    if pre is None:
        return band
    for atom in _conjuncts(pre):
        if (
            isinstance(atom, _App)
            and isinstance(atom.fun, VarE)
            and atom.fun.name == "Range"
            and isinstance(atom.args[1], TupleE)
        ):
            lo_e, hi_e = atom.args[1].items
            try:
                lo = interp.eval(lo_e, env)
                hi = interp.eval(hi_e, env)
            except OracleError:
                continue
            if lo == float("inf") or lo != lo:
                lo = -3
            if isinstance(lo, float):
                lo = -3 if lo == float("-inf") else int(lo)
            if isinstance(hi, float):
                hi = int(hi) if hi != float("inf") else 12
            if hi < lo:
                hi = lo
            band = (lo, min(hi, lo + 24))
    return band


def _conjuncts(e):
    if isinstance(e, BinOp) and e.op == "&&":
        yield from _conjuncts(e.lhs)
        yield from _conjuncts(e.rhs)
    else:
        yield e


def _gen_value(t, rng, env, interp, pre=None):
    if isinstance(t, TBase):
        if t.name == "bool":
            return rng.random() < 0.5
        if t.name in ("f32", "f64"):
            return round(rng.uniform(-4, 9), 2)
        return _rand_elem(rng, (-2, 12))
    if isinstance(t, TArray):
        n = _type_len(t, env, interp)
        if n is None:
            n = rng.randint(0, 12)
        if n < 0:
            return None
        return [_gen_value(t.elem, rng, env, interp) for _ in range(n)]
    if isinstance(t, TFun):
        thr = rng.randint(-2, 9)
        mode = rng.randrange(3)
        if mode == 0:
            return lambda x, thr=thr: x < thr
        if mode == 1:
            return lambda x, thr=thr: x > thr
        table: dict = {}
        return lambda x, table=table, rng2=random.Random(rng.getrandbits(32)): table.setdefault(
            x, rng2.random() < 0.5
        )
    if isinstance(t, TTuple):
        return tuple(_gen_value(x, rng, env, interp) for x in t.items)
    raise TypeError(t)


def _pres_hold(f: FunDef, env, interp) -> bool:
    for p in f.params:
        if p.pre is None:
            continue
        for atom in _conjuncts(p.pre):
            if not _check_pre_atom(atom, p, env, interp):
                return False
    return True


def _check_pre_atom(atom, p, env, interp) -> bool:
    if isinstance(atom, App) and isinstance(atom.fun, VarE):
        head = atom.fun.name
        if head == "Range":
            x = env[atom.args[0].name]
            lo_e, hi_e = atom.args[1].items
            lo = interp.eval(lo_e, env)
            hi = interp.eval(hi_e, env)
            vals = x if isinstance(x, list) else [x]
            return all(lo <= v <= hi for v in vals)
        if head == "Inj":
            x = env[atom.args[0].name]
            return chk_inj(x)
        if head == "Mono":
            x = env[atom.args[0].name]
            ops = {"le": "<=", "lt": "<", "ge": ">=", "gt": ">"}
            nm = atom.args[1].name if isinstance(atom.args[1], VarE) else "le"
            return chk_mono(x, ops.get(nm, "<="))
        return True  # other annotation kinds: assumed by generator
    try:
        return bool(interp.eval(atom, env))
    except OracleError:
        return False
