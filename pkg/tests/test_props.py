"""Property verifier tests: injectivity, bijectivity, ranges,
monotonicity, orthogonality, and inverse filtering-partitioning."""

from ixverify.env import DeltaEnv
from ixverify.ixfn import IndexFn, Linear
from ixverify.props import (
    verify_bij,
    verify_filtpart,
    verify_ifp,
    verify_inj,
    verify_mono,
    verify_orthog,
    verify_range,
)
from ixverify.solver import assume, slice_sum
from ixverify.syms import (
    DOR,
    INF,
    Index,
    Inv,
    NEG_INF,
    Not,
    Poly,
    TRUE,
    and_,
    cmp2,
)


def v(name):
    return Poly.var(name)


FULL = (NEG_INF, INF)


def _base_env():
    env = DeltaEnv()
    assume(env, cmp2(Poly.const(1), "<=", v("n")))
    return env


def test_inj_from_wider_known_codomain():
    env = DeltaEnv()
    env.inj["x"] = (NEG_INF, INF)
    assert verify_inj(env, "x", (Poly.const(0), Poly.const(10)), {})


def test_inj_not_implied_by_narrower_codomain():
    env = DeltaEnv()
    env.inj["x"] = (Poly.const(0), Poly.const(5))
    assert not verify_inj(env, "x", (Poly.const(0), Poly.const(10)), {})


def test_inj_strided_values():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"x": IndexFn(Linear("i", n), ((TRUE, 2 * i),))}
    assert verify_inj(env, "x", FULL, gamma)
    assert env.inj["x"] == FULL


def test_inj_constant_values_unknown():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"x": IndexFn(Linear("i", n), ((TRUE, i * 0),))}
    assert not verify_inj(env, "x", FULL, gamma)


def test_bij_identity_permutation():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"x": IndexFn(Linear("i", n), ((TRUE, i),))}
    rcd = (Poly.const(0), n - 1)
    assert verify_bij(env, "x", rcd, ("k", rcd), gamma)
    assert env.bij["x"].img == rcd
    # second query hits the recorded binding
    assert verify_bij(env, "x", rcd, ("k2", rcd), gamma)


def test_bij_constant_values_unknown():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"x": IndexFn(Linear("i", n), ((TRUE, i * 0),))}
    rcd = (Poly.const(0), n - 1)
    assert not verify_bij(env, "x", rcd, ("k", rcd), gamma)


def test_bij_shifted_values_wrong_image_unknown():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"x": IndexFn(Linear("i", n), ((TRUE, i + 1),))}
    rcd = (Poly.const(0), n - 1)
    assert not verify_bij(env, "x", rcd, ("k", rcd), gamma)


def test_range_identity():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"x": IndexFn(Linear("i", n), ((TRUE, i),))}
    assert verify_range(env, "x", Poly.const(0), n - 1, gamma)
    assert not verify_range(env, "x", Poly.const(1), n, gamma)


def test_mono_strictly_increasing():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"x": IndexFn(Linear("i", n), ((TRUE, 2 * i),))}
    assert verify_mono(env, "x", "lt", gamma)
    assert env.mono["x"][0] == "<"
    assert not verify_mono(env, "x", "gt", gamma)


def test_orthogonal_predicates():
    env = _base_env()
    i, m = v("i"), v("m")
    dom = Linear("i", v("n"))
    p1 = cmp2(i, "<", m)
    p2 = cmp2(m, "<=", i)
    assert verify_orthog(env, dom, [p1, p2])
    assert not verify_orthog(env, dom, [p1, p1])


def _partition_gamma_env():
    # two-way partition of [0,n) by boolean array c: the true class is
    # written first, in order, followed by the false class in order
    env = _base_env()
    env.add_dor_class(("c",))
    n, i = v("n"), v("i")
    C = DOR(("c",))
    gtrue = Index("c", i)
    vtrue = Poly.sym(slice_sum(C, Poly.const(0), i)) - 1
    vfalse = i + Poly.sym(slice_sum(C, i + 1, n - 1))
    gamma = {
        "is": IndexFn(
            Linear("i", n), ((gtrue, vtrue), (Not(gtrue), vfalse))
        )
    }
    return env, gamma, n


def test_ifp_two_way_partition():
    env, gamma, n = _partition_gamma_env()
    assert verify_ifp(env, "is", (Poly.const(0), n - 1), gamma)
    img, segs, filt, parts = env.invfiltpart["is"]
    # nothing filtered, two partition classes with the true class first
    assert filt[1] == TRUE
    assert len(parts) == 2
    assert parts[0][1] == Index("c", v("i"))


def test_filtpart_of_scattered_result():
    env, gamma, n = _partition_gamma_env()
    yval = Poly.sym(Index("x", Poly.sym(Index(Inv("is"), v("j")))))
    gamma["y"] = IndexFn(Linear("j", n), ((TRUE, yval),))
    assert verify_filtpart(env, "y", gamma)
    info = env.filtpart["y"]
    assert info.src == "x"
    assert len(info.parts) == 2


def test_ifp_non_injective_indices_unknown():
    env = _base_env()
    n, i = v("n"), v("i")
    gamma = {"is": IndexFn(Linear("i", n), ((TRUE, i * 0),))}
    assert not verify_ifp(env, "is", (Poly.const(0), n - 1), gamma)
