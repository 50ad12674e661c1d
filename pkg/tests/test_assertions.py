import pytest
from hypothesis import given, settings, strategies as st

from hyperverify.assertions import (
    FALSE,
    TRUE,
    UNKNOWN,
    And,
    Cmp,
    Const,
    EMPTY_ENV,
    Env,
    Exists,
    FalseA,
    Implies,
    LogicVar,
    Not,
    Or,
    PVarAt,
    PolarityError,
    PostAssertion,
    Proj,
    Projectable,
    ReindexA,
    RetAt,
    ScopeError,
    TrueA,
    WPA,
    alpha_eq,
    check_wellformed,
    eval_assertion,
    free_logic_vars,
    idx_over,
    parse_assertion,
    parse_post,
    pretty_assertion,
    pvar_over,
    reindex_assertion,
    subst_rets,
)
from hyperverify.hyper import FinMap, HyperStore, Reindexing
from hyperverify.lang import EnumConfig, Store, parse_term

CFG = EnumConfig(domain=(0, 1, 2, 3), fuel=64)


def hs(universe=(1, 2, 3), **stores):
    return HyperStore(universe, {int(k[1:]): Store(v) for k, v in stores.items()})


def ev(src, ms, env=EMPTY_ENV, cfg=CFG, logic=frozenset()):
    return eval_assertion(parse_assertion(src, logic=logic), ms, env, cfg)


# --- parsing ------------------------------------------------------------------


def test_parse_atoms():
    assert parse_assertion("x@1 = x@2") == Cmp("=", PVarAt("x", 1), PVarAt("x", 2))


def test_parse_proj():
    p = parse_assertion("proj{2}. (x@1 < x@2 /\\ x@2 < x@3)")
    assert isinstance(p, Proj) and p.indices == {2}


def test_parse_wp_ret():
    p = parse_assertion("wp [1: x := 1] ret r. r@1 = 1")
    assert isinstance(p, WPA)
    assert p.mt == FinMap({1: parse_term("x := 1")})
    assert p.body == Cmp("=", RetAt("r", 1), Const(1))


def test_parse_polarity_rejects_negated_ret():
    with pytest.raises(PolarityError):
        parse_assertion("wp [1: skip] ret r. not (r@1 = 0)")
    # negation outside the wp is fine: the binder's own atoms stay positive
    p = parse_assertion("not (wp [1: skip] ret r. r@1 = 0)")
    assert isinstance(p, Not)


def test_parse_scope_errors():
    with pytest.raises((ScopeError, Exception)):
        parse_assertion("v = 0")  # unbound logic variable
    with pytest.raises(Exception):
        parse_assertion("wp [1: skip] ret r. r@2 = 0")  # no component 2


def test_parse_at_macro():
    p = parse_assertion("at{1,2}(x@_ = 0)")
    assert p == And(Cmp("=", PVarAt("x", 1), Const(0)), Cmp("=", PVarAt("x", 2), Const(0)))


def test_parse_neq_sugar():
    p = parse_assertion("x@1 != 0")
    assert p == Or(Cmp("<", PVarAt("x", 1), Const(0)), Cmp("<", Const(0), PVarAt("x", 1)))


def test_parse_reindex_suffix():
    p = parse_assertion("(x@1 = 0)[2->1]")
    assert isinstance(p, ReindexA) and p.pi == Reindexing.of({2: 1})


def test_round_trip_pretty():
    srcs = [
        "x@1 = x@2",
        "proj{2}. (x@1 < x@2 /\\ x@2 < x@3)",
        "wp [1: x := 1] ret r. r@1 = 1",
        "exists v. x@1 = v /\\ (wp [1: x := x + 1] ret r. x@1 = v + 1)",
        "forall v w. x@1 = v => (x@2 = w \\/ not (x@3 <= v))",
        "projectable [1: while * do skip]",
        "refines{1}(skip, x := 0)",
        "(x@1 = 0)[2->1]",
        "projpost{2}. r@1 = r@2",
    ]
    for src in srcs:
        if "projpost" in src:
            p = parse_post("ret r. " + src)
            q = parse_post(pretty_assertion(p))
            assert alpha_eq(p, q)
        else:
            p = parse_assertion(src)
            assert parse_assertion(pretty_assertion(p)) == p


# --- evaluation ---------------------------------------------------------------


def test_eval_proj_spec_example():
    # proj-out the middle of a chain: equivalent to x@1 + 1 < x@3
    src = "proj{2}. (x@1 < x@2 /\\ x@2 < x@3)"
    assert ev(src, hs(s1={"x": 0}, s3={"x": 2})) == TRUE
    assert ev(src, hs(s1={"x": 0}, s3={"x": 1})) == FALSE


def test_eval_wp_simple():
    assert ev("wp [1: x := x + 1] ret r. x@1 = 1", hs(s1={"x": 0})) == TRUE
    assert ev("wp [1: x := x + 1] ret r. x@1 = 2", hs(s1={"x": 0})) == FALSE


def test_eval_wp_vacuous_divergence():
    src = "wp [1: skip, 2: while 1 do skip] ret r. false"
    assert ev(src, hs()) == TRUE


def test_eval_projectable():
    assert ev("projectable [1: while * do skip]", hs()) == TRUE
    assert ev("projectable [1: while 1 do skip]", hs()) == FALSE
    assert ev("projectable []", hs()) == TRUE


def test_eval_unknown_from_truncation():
    cfg = EnumConfig(domain=(0, 1), fuel=8)
    src = "wp [1: while 1 do x := x + 1] ret r. true"
    assert ev(src, hs(), cfg=cfg) == UNKNOWN


def test_eval_ret_undefined_is_false():
    p = WPA(FinMap({1: parse_term("skip")}), "r", Cmp("=", RetAt("r", 1), Const(0)))
    q = PostAssertion("q", Cmp("=", RetAt("q", 2), Const(0)))
    # q@2 undefined under a hyper-term with support {1}: comparison is False
    from hyperverify.hyper import FinMap as FM

    env = EMPTY_ENV.bind_ret("q", FM({1: 0}))
    assert eval_assertion(q.body, hs(), env, CFG) == FALSE
    assert eval_assertion(p, hs(), EMPTY_ENV, CFG) == TRUE


def test_eval_refines():
    assert ev("refines{1}(x := 1, x := *)", hs(), cfg=EnumConfig(domain=(0, 1), fuel=16)) == TRUE
    assert ev("refines{1}(x := *, x := 1)", hs(), cfg=EnumConfig(domain=(0, 1), fuel=16)) == FALSE


def test_eval_loop_unfold_equivalence():
    w = "while x < 2 do x := x + 1"
    unf = "if x < 2 then (x := x + 1; while x < 2 do x := x + 1) else skip"
    assert ev(f"refines{{1}}({w}, {unf})", hs()) == TRUE
    assert ev(f"refines{{1}}({unf}, {w})", hs()) == TRUE


# --- idx / pvar ----------------------------------------------------------------


def test_idx_over_examples():
    assert idx_over(parse_assertion("(x@1 = y@2) \\/ z@3 = 0")) == {1, 2, 3}
    assert idx_over(TrueA()) == frozenset()
    assert idx_over(parse_assertion("proj{2}. (x@1 < x@2 /\\ x@2 < x@3)")) == {1, 3}


def test_pvar_over_examples():
    assert pvar_over(parse_assertion("x@1 = y@2")) == {("x", 1), ("y", 2)}
    assert pvar_over(parse_assertion("wp [1: x := y] ret r. x@1 = 0")) == {
        ("x", 1),
        ("y", 1),
    }
    assert pvar_over(TrueA()) == frozenset()


def test_reindex_examples():
    p = parse_assertion("5 <= x@1 /\\ x@2 <= x@3")
    q = reindex_assertion(p, Reindexing.of({1: 2}))
    assert q == parse_assertion("5 <= x@2 /\\ x@2 <= x@3")
    assert reindex_assertion(p, Reindexing.identity()) == p
    r = parse_assertion("x@1 = 0")
    assert reindex_assertion(r, Reindexing.of({2: 1})) == r


# --- semantic properties --------------------------------------------------------

atoms = st.sampled_from(
    [
        "x@1 = x@2",
        "x@1 < y@2",
        "y@1 <= 1",
        "x@2 = 0",
        "true",
        "false",
        "x@3 = y@3",
    ]
)


def assertions_strategy():
    def extend(sub):
        return st.one_of(
            st.tuples(sub, sub).map(lambda t: f"({t[0]}) /\\ ({t[1]})"),
            st.tuples(sub, sub).map(lambda t: f"({t[0]}) \\/ ({t[1]})"),
            st.tuples(sub, sub).map(lambda t: f"({t[0]}) => ({t[1]})"),
            sub.map(lambda s: f"not ({s})"),
            sub.map(lambda s: f"proj{{2}}. ({s})"),
            sub.map(lambda s: f"({s})[1->2]"),
            sub.map(lambda s: f"wp [1: x := x + 1] ret r. ({s})"),
        )

    return st.recursive(atoms, extend, max_leaves=4)


stores_strategy = st.fixed_dictionaries(
    {
        1: st.fixed_dictionaries({"x": st.integers(0, 2), "y": st.integers(0, 2)}),
        2: st.fixed_dictionaries({"x": st.integers(0, 2), "y": st.integers(0, 2)}),
        3: st.fixed_dictionaries({"x": st.integers(0, 2)}),
    }
)


def mk_ms(d):
    return HyperStore((1, 2, 3, 4), {i: Store(v) for i, v in d.items()})


@given(assertions_strategy(), stores_strategy, st.integers(0, 2))
@settings(max_examples=120, deadline=None)
def test_idx_soundness_perturbation(src, d, newx):
    p = parse_assertion(src)
    ms = mk_ms(d)
    out = idx_over(p)
    for i in (1, 2, 3, 4):
        if i not in out:
            ms2 = ms.with_store(i, Store({"x": newx, "y": 2 - newx}))
            a = eval_assertion(p, ms, EMPTY_ENV, CFG)
            b = eval_assertion(p, ms2, EMPTY_ENV, CFG)
            if a != UNKNOWN and b != UNKNOWN:
                assert a == b


@given(assertions_strategy(), stores_strategy, st.integers(0, 2))
@settings(max_examples=120, deadline=None)
def test_pvar_soundness_perturbation(src, d, v):
    p = parse_assertion(src)
    ms = mk_ms(d)
    pv = pvar_over(p)
    for x, i in [("x", 1), ("y", 2), ("x", 3), ("y", 4)]:
        if (x, i) not in pv:
            ms2 = ms.with_store(i, ms.store_at(i).set(x, v))
            a = eval_assertion(p, ms, EMPTY_ENV, CFG)
            b = eval_assertion(p, ms2, EMPTY_ENV, CFG)
            if a != UNKNOWN and b != UNKNOWN:
                assert a == b


@given(assertions_strategy(), stores_strategy)
@settings(max_examples=100, deadline=None)
def test_reindex_semantics(src, d):
    p = parse_assertion(src)
    ms = mk_ms(d)
    for pi in (Reindexing.of({1: 2}), Reindexing.of({1: 2, 2: 1}), Reindexing.of({3: 1})):
        a = eval_assertion(reindex_assertion(p, pi), ms, EMPTY_ENV, CFG)
        b = eval_assertion(p, ms.reindex(pi), EMPTY_ENV, CFG)
        if a != UNKNOWN and b != UNKNOWN:
            assert a == b


@given(stores_strategy, st.integers(0, 3), st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_upward_closure_of_posts(d, v1, vextra):
    # positive-polarity post: extending the hyper-return preserves truth
    post = parse_post("ret q. q@1 = 0 \\/ (q@1 < 2 /\\ x@1 <= q@2)")
    ms = mk_ms(d)
    base = EMPTY_ENV.bind_ret("q", FinMap({1: v1}))
    ext = EMPTY_ENV.bind_ret("q", FinMap({1: v1, 2: vextra}))
    a = eval_assertion(post.body, ms, base, CFG)
    b = eval_assertion(post.body, ms, ext, CFG)
    if a == TRUE:
        assert b == TRUE


@given(assertions_strategy(), stores_strategy)
@settings(max_examples=80, deadline=None)
def test_kleene_monotone_in_fuel(src, d):
    p = parse_assertion(src)
    ms = mk_ms(d)
    lo = eval_assertion(p, ms, EMPTY_ENV, EnumConfig(domain=(0, 1, 2, 3), fuel=6))
    hi = eval_assertion(p, ms, EMPTY_ENV, EnumConfig(domain=(0, 1, 2, 3), fuel=64))
    if lo != UNKNOWN:
        assert lo == hi


def test_subst_rets_shadowing():
    p = parse_assertion(
        "wp [1: skip] ret r. r@1 = 0 /\\ (wp [1: skip] ret r. r@1 = 0)"
    )
    q = subst_rets(p.body, "r", lambda i: Const(7))
    # outer r replaced, inner r untouched
    inner = parse_assertion("wp [1: skip] ret r. r@1 = 0")
    assert q == And(Cmp("=", Const(7), Const(0)), inner)


def test_free_logic_vars():
    p = parse_assertion("exists v. x@1 = v /\\ x@2 = w", logic={"w"})
    assert free_logic_vars(p) == {"w"}
