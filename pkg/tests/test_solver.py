"""Solver unit tests: ranges, bound replacement, slice simplification,
and the equality pipeline."""

import pytest

from ixverify.env import DeltaEnv
from ixverify.solver import (
    assume,
    get_range,
    lower_bool,
    prove,
    simplify,
    slice_sum,
    solve_leq0,
)
from ixverify.syms import (
    DOR,
    Index,
    NEG_INF,
    INF,
    Poly,
    Var,
    and_,
    cmp,
    cmp2,
)


def v(name):
    return Poly.var(name)


def leq(a, b):
    return cmp2(a if isinstance(a, Poly) else Poly.const(a), "<=", b)


def _legal_ranges_env():
    # 3 <= n <= inf, n <= 3i <= {5n, n*n}, i+n <= j <= i*i
    env = DeltaEnv()
    n, i, j = v("n"), v("i"), v("j")
    assume(env, leq(3, n))
    assume(env, leq(n, 3 * i))
    assume(env, leq(3 * i, 5 * n))
    assume(env, leq(3 * i, n * n))
    assume(env, leq(i + n, j))
    assume(env, leq(j, i * i))
    return env, n, i, j


def test_legal_ranges_are_triangular():
    env, n, i, j = _legal_ranges_env()
    lbs, k, ubs = get_range(env, Var("n"))
    assert Poly.const(3) in lbs and k == 1 and not ubs
    lbs, k, ubs = get_range(env, Var("i"))
    assert k == 3 and v("n") in lbs and 5 * v("n") in ubs and v("n") * v("n") in ubs
    lbs, k, ubs = get_range(env, Var("j"))
    assert k == 1 and (v("i") + v("n")) in lbs and v("i") * v("i") in ubs


def test_quadratic_query_proved():
    env, n, i, j = _legal_ranges_env()
    p = n * n + 3 * n - j * j - j
    assert solve_leq0(env, p).proved


def test_quadratic_query_elimination_order():
    env, n, i, j = _legal_ranges_env()
    env.trace = []
    p = n * n + 3 * n - j * j - j
    assert solve_leq0(env, p).proved
    elims = [t for t in env.trace if t.startswith("eliminate ")]
    assert elims[0].startswith("eliminate j ")


def test_quadratic_query_n_first_unknown():
    env, n, i, j = _legal_ranges_env()
    p = n * n + 3 * n - j * j - j
    assert not solve_leq0(env, p, first=Var("n")).proved


def test_constant_base_case():
    env = DeltaEnv()
    assert solve_leq0(env, Poly.const(-5)).proved
    assert not solve_leq0(env, Poly.const(2)).proved


def test_illegal_range_rejection():
    # i <= n <= i*i with i introduced before n: if n's candidate would
    # close a cycle it must be rejected and the fact bound elsewhere
    env = DeltaEnv()
    n, i = v("n"), v("i")
    env.see("n")
    env.see("i")  # i is later in program order
    assume(env, leq(i, n))
    # i (latest) got the upper bound n
    lbs, k, ubs = get_range(env, Var("i"))
    assert n in ubs
    assume(env, leq(n, i * i))
    # n <= i*i cannot bind n (i depends on n) nor i (degree 2): dropped
    lbs, k, ubs = get_range(env, Var("n"))
    assert not ubs
    # the tables stayed acyclic
    assert "n" not in env.name_closure(["n"]) - {"n"}


def test_unplaceable_mixed_set_never_cycles():
    # {i <= n <= i*i, n <= 2i <= 2n-5} as a whole is unsatisfiable as a
    # triangular table; whatever subset is kept must be acyclic
    env = DeltaEnv()
    n, i = v("n"), v("i")
    env.see("n")
    env.see("i")
    assume(env, leq(i, n))
    assume(env, leq(n, i * i))
    assume(env, leq(n, 2 * i))
    assume(env, leq(2 * i, 2 * n - 5))
    for name in ("n", "i"):
        deps = env.name_closure(env.deps.get(name, set()))
        assert name not in deps


def _partition_env():
    # context of the partition bounds query: 0 <= j < i < n,
    # with c[i] known true and c[j] known false
    env = DeltaEnv()
    env.add_dor_class(("c",))
    n, i, j = v("n"), v("i"), v("j")
    assume(env, and_(leq(0, j), leq(j, i - 1), leq(i, n - 1)))
    assume(env, cmp(Poly.sym(Index("c", i)) - 1, "=="))
    assume(env, cmp(Poly.sym(Index("c", j)), "=="))
    return env, n, i, j


def test_partition_simplify_worked_example():
    env, n, i, j = _partition_env()
    C = DOR(("c",))
    p = (
        j
        + Poly.sym(slice_sum(C, j + 1, n - 1))
        - Poly.sym(slice_sum(C, Poly.const(0), i - 1))
    )
    q = simplify(env, p)
    expect = (
        j
        + Poly.sym(slice_sum(C, i + 1, n - 1))
        - Poly.sym(slice_sum(C, Poly.const(0), j - 1))
        + 1
    )
    assert q == expect


def test_partition_bounds_query_proved():
    env, n, i, j = _partition_env()
    C = DOR(("c",))
    p = (
        j
        + Poly.sym(slice_sum(C, j + 1, n - 1))
        - Poly.sym(slice_sum(C, Poly.const(0), i - 1))
    )
    # p > 0, i.e. 1 - p <= 0
    assert solve_leq0(env, 1 - p).proved


def test_empty_slice_sum_is_zero():
    env = DeltaEnv()
    s = Poly.sym(slice_sum("x", Poly.const(5), Poly.const(4)))
    assert simplify(env, s) == Poly.const(0)


def test_slice_extended_by_next_element():
    env = DeltaEnv()
    a, b = v("a"), v("b")
    assume(env, leq(a, b + 1))
    p = Poly.sym(slice_sum("x", a, b)) + Poly.sym(Index("x", b + 1))
    assert simplify(env, p) == Poly.sym(slice_sum("x", a, b + 1))


def test_adjacent_slices_merge():
    env = DeltaEnv()
    a, b, c = v("a"), v("b"), v("c")
    assume(env, and_(leq(a, b + 1), leq(b + 1, c)))
    p = Poly.sym(slice_sum("x", a, b)) + Poly.sym(slice_sum("x", b + 1, c))
    assert simplify(env, p) == Poly.sym(slice_sum("x", a, c))


def test_contained_slice_subtraction():
    env = DeltaEnv()
    a, b, c, d = v("a"), v("b"), v("c"), v("d")
    assume(env, and_(leq(a, b), leq(b, c), leq(c, d)))
    p = Poly.sym(slice_sum("x", a, d)) - Poly.sym(slice_sum("x", b, c))
    q = simplify(env, p)
    expect = Poly.sym(slice_sum("x", a, b - 1)) + Poly.sym(slice_sum("x", c + 1, d))
    assert q == expect


def _matching_env(with_inj):
    env = DeltaEnv()
    n, i, j = v("n"), v("i"), v("j")
    if with_inj:
        env.inj["is"] = (NEG_INF, INF)
    ante = and_(
        leq(0, i),
        leq(i, n - 1),
        leq(0, j),
        leq(j, n - 1),
        cmp(Poly.sym(Index("es", i)) - Poly.sym(Index("es", j)), "=="),
        cmp(
            Poly.sym(Index("H", Poly.sym(Index("is", Poly.sym(Index("es", i))))))
            - Poly.sym(Index("is", i)),
            "==",
        ),
        cmp(
            Poly.sym(Index("H", Poly.sym(Index("is", Poly.sym(Index("es", j))))))
            - Poly.sym(Index("is", j)),
            "==",
        ),
    )
    return env, ante, cmp(i - j, "==")


def test_equality_via_injectivity():
    env, ante, goal = _matching_env(with_inj=True)
    assert prove(env, ante, goal).proved


def test_equality_without_injectivity_unknown():
    env, ante, goal = _matching_env(with_inj=False)
    assert not prove(env, ante, goal).proved


def test_prove_trivial_identity():
    env = DeltaEnv()
    x = v("x")
    assert prove(env, cmp2(Poly.const(0), "==", Poly.const(0)), cmp(x - x, "==")).proved


def test_prove_false_antecedent():
    env = DeltaEnv()
    assert prove(env, cmp2(Poly.const(1), "==", Poly.const(2)), cmp(v("x"), "==")).proved


def test_strict_positive_sum_lower_bound():
    env = DeltaEnv()
    env.set_elem("a", lo=Poly.const(0), strict=True)
    n = v("n")
    assume(env, leq(1, n))
    s = Poly.sym(slice_sum("a", Poly.const(0), n - 1))
    # sum of n strictly positive entries is at least n
    assert solve_leq0(env, n - s).proved


def test_dor_sum_upper_bound():
    env = DeltaEnv()
    env.add_dor_class(("c",))
    n = v("n")
    assume(env, leq(1, n))
    s = Poly.sym(slice_sum(DOR(("c",)), Poly.const(0), n - 1))
    assert solve_leq0(env, s - n).proved
    assert solve_leq0(env, -s).proved
