import pytest
from hypothesis import given, settings, strategies as st

from hyperverify.lang import (
    Assign,
    BinOp,
    EnumConfig,
    If,
    IntLit,
    Outcome,
    ParseError,
    Seq,
    Skip,
    Star,
    Store,
    Var,
    While,
    bigstep_enumerate,
    empty_store,
    mods_term,
    parse_term,
    pretty_term,
    pvar_term,
    range_domain,
    subst,
)

CFG = EnumConfig(domain=range_domain(-1, 1), fuel=64)


def t(src):
    return parse_term(src)


# --- parsing ----------------------------------------------------------------


def test_parse_seq_assign():
    got = t("x := 1; x := x + 1")
    want = Seq(Assign("x", IntLit(1)), Assign("x", BinOp("+", Var("x"), IntLit(1))))
    assert got == want


def test_parse_while_one_skip():
    assert t("while 1 do skip") == While(IntLit(1), Skip())


def test_parse_nested_if_star():
    got = t("if x = 0 then (if * then x := 1 else x := 2) else skip")
    want = If(
        BinOp("=", Var("x"), IntLit(0)),
        If(Star(), Assign("x", IntLit(1)), Assign("x", IntLit(2))),
        Skip(),
    )
    assert got == want


def test_parse_if_without_else_defaults_to_skip():
    assert t("if x = 0 then x := 1") == If(
        BinOp("=", Var("x"), IntLit(0)), Assign("x", IntLit(1)), Skip()
    )


def test_parse_star_positions():
    assert t("* * *") == BinOp("*", Star(), Star())
    assert t("x := *") == Assign("x", Star())


def test_parse_precedence():
    assert t("a + b * c < d") == BinOp(
        "<", BinOp("+", Var("a"), BinOp("*", Var("b"), Var("c"))), Var("d")
    )


def test_parse_seq_right_assoc():
    got = t("a := 1; b := 2; c := 3")
    assert isinstance(got, Seq) and isinstance(got.second, Seq)


def test_parse_errors_have_position():
    with pytest.raises(ParseError) as e:
        parse_term("x := ;")
    assert e.value.line == 1 and e.value.col >= 1
    with pytest.raises(ParseError):
        parse_term("if x = 0 skip")  # missing `then`
    with pytest.raises(ParseError):
        parse_term("x + ")


def test_parse_macro_expansion():
    macros = {"f": (("u", "v"), parse_term("while i < u do (r := r + v; i := i + 1)"))}
    got = parse_term("f(a, c)", macros=macros)
    assert got == parse_term("while i < a do (r := r + c; i := i + 1)")


# --- static functions -------------------------------------------------------


def test_pvar_examples():
    assert pvar_term(Skip()) == frozenset()
    assert pvar_term(t("x := y + 1")) == {"x", "y"}
    assert pvar_term(t("while i < a do r := c")) == {"i", "a", "r", "c"}


def test_mods_examples():
    assert mods_term(t("x + y")) == frozenset()
    assert mods_term(t("x := 1; y := x")) == {"x", "y"}
    assert mods_term(t("c < a + b")) == frozenset()


def test_subst_examples():
    assert subst(t("x + y"), "x", 3) == BinOp("+", IntLit(3), Var("y"))
    assert subst(Skip(), "x", 3) == Skip()
    assert subst(t("y := x"), "x", 0) == Assign("y", IntLit(0))


# --- big-step enumeration ---------------------------------------------------


def run(src, store=None, cfg=CFG):
    return bigstep_enumerate(t(src), store or empty_store(), cfg)


def test_bigstep_straight_line():
    out = run("x := 1; x := x + 1")
    assert not out.truncated
    assert out.outcomes == {Outcome(2, empty_store().set("x", 2))}


def test_bigstep_while_one_skip_conclusive_divergence():
    out = run("while 1 do skip")
    assert out.outcomes == frozenset() and not out.truncated


def test_bigstep_star_over_domain():
    out = run("*")
    assert out.outcomes == {Outcome(v, empty_store()) for v in (-1, 0, 1)}
    assert not out.truncated


def test_bigstep_while_star_skip():
    out = run("while * do skip")
    assert out.outcomes == {Outcome(0, empty_store())} and not out.truncated


def test_bigstep_counts_fuel_truncation():
    # state changes every iteration: cycle detection never fires, fuel cuts it
    out = run("while 1 do x := x + 1", cfg=EnumConfig(domain=(0,), fuel=30))
    assert out.outcomes == frozenset() and out.truncated


def test_bigstep_terminating_loop():
    s = empty_store()
    out = run("while x < 3 do x := x + 1", s, EnumConfig(domain=(0,), fuel=64))
    assert out.outcomes == {Outcome(0, s.set("x", 3))} and not out.truncated


def test_bigstep_binop_threads_store_left_to_right():
    # (x := 1) + (x := x + 1) evaluates left then right
    out = run("(x := 1) + (x := x + 1)")
    assert out.outcomes == {Outcome(3, empty_store().set("x", 2))}


def test_bigstep_conventions():
    assert run("skip").outcomes == {Outcome(0, empty_store())}
    assert run("x := 5").outcomes == {Outcome(5, empty_store().set("x", 5))}
    assert run("skip; 7").outcomes == {Outcome(7, empty_store())}
    assert run("while 0 do skip").outcomes == {Outcome(0, empty_store())}


# --- property tests ----------------------------------------------------------

names = st.sampled_from(["x", "y"])


def terms(max_depth=4, loops=True):
    base = st.one_of(
        st.integers(-2, 2).map(IntLit),
        names.map(Var),
        st.just(Star()),
        st.just(Skip()),
    )

    def extend(sub):
        opts = [
            st.tuples(st.sampled_from(["+", "-", "*", "<", "<=", "="]), sub, sub).map(
                lambda a: BinOp(*a)
            ),
            st.tuples(names, sub).map(lambda a: Assign(*a)),
            st.tuples(sub, sub).map(lambda a: Seq(*a)),
            st.tuples(sub, sub, sub).map(lambda a: If(*a)),
        ]
        if loops:
            opts.append(st.tuples(sub, sub).map(lambda a: While(*a)))
        return st.one_of(opts)

    return st.recursive(base, extend, max_leaves=max_depth * 2)


@given(terms())
@settings(max_examples=150, deadline=None)
def test_pretty_parse_round_trip(term):
    assert parse_term(pretty_term(term)) == term


@given(terms(loops=False), st.lists(st.tuples(names, st.integers(-1, 1)), max_size=2))
@settings(max_examples=80, deadline=None)
def test_starfree_loopfree_deterministic(term, binds):
    if any(isinstance(n, Star) for n in _walk(term)):
        return
    out = bigstep_enumerate(term, Store(dict(binds)), CFG)
    assert not out.truncated
    assert len(out.outcomes) == 1


def _walk(term):
    yield term
    for f in getattr(term, "__dataclass_fields__", {}):
        v = getattr(term, f)
        if hasattr(v, "__dataclass_fields__"):
            yield from _walk(v)


@given(terms(), st.lists(st.tuples(names, st.integers(-1, 1)), max_size=2))
@settings(max_examples=100, deadline=None)
def test_frame_of_unmodified_vars(term, binds):
    s = Store(dict(binds))
    out = bigstep_enumerate(term, s, EnumConfig(domain=(-1, 0, 1), fuel=40))
    mods = mods_term(term)
    for v, s2 in out.outcomes:
        for y in ("x", "y", "zunused"):
            if y not in mods:
                assert s2.get(y) == s.get(y)


@given(terms(), st.lists(st.tuples(names, st.integers(-1, 1)), max_size=2))
@settings(max_examples=60, deadline=None)
def test_fuel_monotonic(term, binds):
    s = Store(dict(binds))
    lo = bigstep_enumerate(term, s, EnumConfig(domain=(-1, 0, 1), fuel=12))
    hi = bigstep_enumerate(term, s, EnumConfig(domain=(-1, 0, 1), fuel=48))
    assert lo.outcomes <= hi.outcomes
    if not lo.truncated:
        assert lo.outcomes == hi.outcomes and not hi.truncated


@given(terms(), st.lists(st.tuples(names, st.integers(-1, 1)), max_size=2))
@settings(max_examples=60, deadline=None)
def test_domain_monotonic(term, binds):
    s = Store(dict(binds))
    small = bigstep_enumerate(term, s, EnumConfig(domain=(0, 1), fuel=40))
    big = bigstep_enumerate(term, s, EnumConfig(domain=(-1, 0, 1, 2), fuel=40))
    assert small.outcomes <= big.outcomes
