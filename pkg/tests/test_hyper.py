import pytest
from hypothesis import given, settings, strategies as st

from hyperverify.hyper import (
    FinMap,
    HyperStore,
    NotDisjoint,
    OverlapConflict,
    Reindexing,
    disjoint_union,
    hyper_bigstep_enumerate,
    reindex_finmap,
    union,
)
from hyperverify.lang import EnumConfig, Store, mods_term, parse_term

CFG = EnumConfig(domain=(0, 1), fuel=64)


def fm(**kw):
    return FinMap({int(k): v for k, v in kw.items()})


def test_union_overlap_agreeing():
    t1, t2, t3 = parse_term("skip"), parse_term("x := 1"), parse_term("y := 2")
    m = union(FinMap({1: t1, 2: t2}), FinMap({2: t2, 3: t3}))
    assert m == FinMap({1: t1, 2: t2, 3: t3})


def test_union_neutral():
    m = fm(**{"1": 5})
    assert union(m, FinMap()) == m and union(FinMap(), m) == m


def test_union_conflict():
    with pytest.raises(OverlapConflict) as e:
        union(FinMap({1: parse_term("skip")}), FinMap({1: parse_term("x := 1")}))
    assert e.value.index == 1


def test_disjoint_union():
    assert disjoint_union(fm(**{"1": 7}), fm(**{"2": 8})) == FinMap({1: 7, 2: 8})
    assert disjoint_union(FinMap(), FinMap()) == FinMap()
    with pytest.raises(NotDisjoint) as e:
        disjoint_union(fm(**{"1": 7}), fm(**{"1": 7}))
    assert e.value.indices == {1}


def test_reindex_examples():
    r = FinMap({1: 5, 2: 7})
    assert reindex_finmap(r, Reindexing.of({2: 1})) == FinMap({1: 5, 2: 5})
    assert reindex_finmap(r, Reindexing.identity()) == r
    assert reindex_finmap(r, Reindexing.of({1: 2, 2: 1})) == FinMap({1: 7, 2: 5})


def test_bijectivity():
    assert Reindexing.of({1: 2, 2: 1}).is_bijective()
    assert Reindexing.identity().is_bijective()
    assert not Reindexing.of({2: 1}).is_bijective()


def test_hyper_bigstep_preserves_untouched():
    ms = HyperStore((1, 2))
    outs, trunc = hyper_bigstep_enumerate(FinMap({1: parse_term("x := 1")}), ms, CFG)
    assert not trunc
    assert outs == {
        (FinMap({1: 1}), ms.with_store(1, Store({"x": 1})))
    }


def test_hyper_bigstep_empty():
    ms = HyperStore((1,), {1: Store({"x": 3})})
    outs, trunc = hyper_bigstep_enumerate(FinMap(), ms, CFG)
    assert outs == {(FinMap(), ms)} and not trunc


def test_hyper_bigstep_product():
    ms = HyperStore((1, 2))
    star = parse_term("*")
    outs, trunc = hyper_bigstep_enumerate(FinMap({1: star, 2: star}), ms, CFG)
    assert len(outs) == 4 and not trunc


# --- properties ---------------------------------------------------------------

idxs = st.integers(1, 4)
vals = st.integers(-2, 2)
fmaps = st.dictionaries(idxs, vals, max_size=3).map(FinMap)


@given(fmaps, fmaps)
@settings(max_examples=80, deadline=None)
def test_union_commutative_where_defined(m1, m2):
    try:
        a = union(m1, m2)
    except OverlapConflict:
        with pytest.raises(OverlapConflict):
            union(m2, m1)
        return
    assert a == union(m2, m1)


@given(fmaps, fmaps, fmaps)
@settings(max_examples=80, deadline=None)
def test_union_associative_where_defined(m1, m2, m3):
    def u(*ms):
        acc = ms[0]
        for m in ms[1:]:
            acc = union(acc, m)
        return acc

    try:
        left = u(u(m1, m2), m3)
    except OverlapConflict:
        return
    assert left == u(m1, u(m2, m3))


reixs = st.dictionaries(idxs, idxs, max_size=3).map(Reindexing.of)


@given(fmaps, reixs, reixs)
@settings(max_examples=80, deadline=None)
def test_reindex_composition(a, pi, rho):
    lhs = reindex_finmap(reindex_finmap(a, pi), rho)
    rhs = reindex_finmap(a, pi.compose(rho))
    assert lhs == rhs


term_srcs = st.sampled_from(
    ["skip", "x := 1", "x := *", "x := x + 1", "if * then x := 1 else skip", "*"]
)


@given(st.dictionaries(idxs, term_srcs, max_size=3))
@settings(max_examples=50, deadline=None)
def test_hyper_product_law_and_frame(d):
    mt = FinMap({i: parse_term(s) for i, s in d.items()})
    ms = HyperStore((1, 2, 3, 4), {1: Store({"x": 1})})
    outs, trunc = hyper_bigstep_enumerate(mt, ms, CFG)
    if not trunc:
        from hyperverify.lang import bigstep_enumerate

        expect = 1
        for i, t in mt.items():
            expect *= len(bigstep_enumerate(t, ms.store_at(i), CFG).outcomes)
        assert len(outs) == expect
    for ret, ms2 in outs:
        assert ret.supp() == mt.supp()
        for i in (1, 2, 3, 4):
            if i not in mt.supp():
                assert ms2.store_at(i) == ms.store_at(i)
            else:
                for y in ("x", "y"):
                    if y not in mods_term(mt.get(i)):
                        assert ms2.store_at(i).get(y) == ms.store_at(i).get(y)
