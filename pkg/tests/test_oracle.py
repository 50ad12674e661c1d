import itertools

import pytest
from hypothesis import given, settings, strategies as st

from hyperverify.assertions import (
    FALSE,
    TRUE,
    TrueA,
    FalseA,
    parse_assertion,
    parse_post,
)
from hyperverify.hyper import FinMap, HyperStore
from hyperverify.lang import EnumConfig, Store, parse_term, range_domain
from hyperverify.oracle import (
    Footprint,
    Truncated,
    check_entailment,
    check_projectable,
    check_refinement,
    check_triple,
    falsify,
    iter_assignments,
    revalidate_witness,
    strongest_post,
)

CFG = EnumConfig(domain=range_domain(-2, 2), fuel=64)
SMALL = EnumConfig(domain=range_domain(0, 2), fuel=64)


def ht(*pairs):
    return FinMap({i: parse_term(src) for i, src in pairs})


# --- entailment ---------------------------------------------------------------


def test_entailment_proj_chain():
    # x@1 = x@2 entails proj{3}.(x@1 = x@2 /\ x@2 = x@3)
    g = parse_assertion("x@1 = x@2")
    p = parse_assertion("proj{3}. (x@1 = x@2 /\\ x@2 = x@3)")
    assert check_entailment([g], p, SMALL).status == "valid"


def test_entailment_axiom():
    p = parse_assertion("x@1 = x@2")
    assert check_entailment([p], p, SMALL).status == "valid"


def test_entailment_invalid_first_witness():
    g = parse_assertion("x@1 = 0")
    p = parse_assertion("x@1 = 1")
    v = check_entailment([g], p, SMALL)
    assert v.status == "invalid"
    assert v.witness_store.store_at(1).get("x") == 0
    assert revalidate_witness(v, [g], p, SMALL)


# --- triples ------------------------------------------------------------------


def brute_force_incr_pair():
    # independent oracle: enumerate all 25 input pairs for x:=x+1 vs x:=x+1
    dom = range(-2, 3)
    for a, b in itertools.product(dom, dom):
        if a == b and not (a + 1 == b + 1):
            return False
    return True


def test_triple_lockstep_incr():
    assert brute_force_incr_pair()
    v = check_triple(
        parse_assertion("x@1 = x@2"),
        ht((1, "x := x + 1"), (2, "x := x + 1")),
        parse_post("ret r. x@1 = x@2"),
        CFG,
    )
    assert v.status == "valid"


def test_triple_star_invalid():
    v = check_triple(
        TrueA(), ht((1, "x := *")), parse_post("ret r. r@1 = 0"), SMALL
    )
    assert v.status == "invalid"
    assert v.witness_ret is not None


def test_triple_vacuous_divergence():
    v = check_triple(
        TrueA(),
        ht((1, "skip"), (2, "while 1 do skip")),
        parse_post("ret r. false"),
        SMALL,
    )
    assert v.status == "valid"


IDEM_BRANCH = "if x = 0 then (if * then x := 1 else x := 2) else skip"


def idem_triple(term_src, seq=False):
    if seq:
        pre = parse_assertion("x@1 = x@2")
        mt = ht((1, term_src), (2, f"({term_src}); ({term_src})"))
        post = parse_post("ret r. x@1 = x@2")
    else:
        pre = parse_assertion("x@2 = v", logic={"v"})
        mt = ht((1, term_src), (2, term_src))
        post = parse_post("ret r. x@1 = v => x@2 = v", logic={"v"})
    return pre, mt, post


def test_branch_program_idem_but_not_idemseq():
    pre, mt, post = idem_triple(IDEM_BRANCH)
    assert check_triple(pre, mt, post, SMALL).status == "valid"
    pre, mt, post = idem_triple(IDEM_BRANCH, seq=True)
    v = check_triple(pre, mt, post, SMALL)
    assert v.status == "invalid"
    outs = {i: v.witness_out.store_at(i).get("x") for i in (1, 2)}
    assert outs[1] != outs[2] and {outs[1], outs[2]} <= {1, 2}


# --- refinement ---------------------------------------------------------------


def test_refinement_reflexive():
    t = parse_term("x := x + 1")
    assert check_refinement(t, t, SMALL).status == "valid"


def test_refinement_loop_unfold_both_ways():
    w = parse_term("while x < 2 do x := x + 1")
    u = parse_term("if x < 2 then (x := x + 1; while x < 2 do x := x + 1) else skip")
    assert check_refinement(w, u, SMALL).status == "valid"
    assert check_refinement(u, w, SMALL).status == "valid"


def test_refinement_invalid():
    v = check_refinement(parse_term("x := 1"), parse_term("x := 2"), SMALL)
    assert v.status == "invalid"


# --- projectability -----------------------------------------------------------


def test_projectable_examples():
    ms = HyperStore((1,))
    assert check_projectable(ht((1, "while 1 do skip")), ms, SMALL) == FALSE
    assert check_projectable(ht((1, "while * do skip")), ms, SMALL) == TRUE
    assert check_projectable(FinMap(), ms, SMALL) == TRUE


# --- strongest post -----------------------------------------------------------


def test_strongest_post_table():
    rows = strongest_post(parse_term("x := x + 1"), Store({"x": 0}), SMALL)
    assert rows == [(1, Store({"x": 1}))]
    rows = strongest_post(parse_term("*"), Store({}), EnumConfig(domain=(0, 1), fuel=8))
    assert [v for v, _s in rows] == [0, 1]
    # enumerate both Star branches of the branching assignment
    rows = strongest_post(
        parse_term("if * then x := 1 else x := 2"), Store({"x": 0}), SMALL
    )
    assert {(v, s.get("x")) for v, s in rows} == {(1, 1), (2, 2)}


def test_strongest_post_truncation():
    with pytest.raises(Truncated):
        strongest_post(
            parse_term("while 1 do x := x + 1"), Store({}), EnumConfig(domain=(0,), fuel=10)
        )


# --- witness determinism and enumeration order --------------------------------


def test_iter_assignments_order_with_pins():
    fp = Footprint(((1, "x"), (1, "y"), (2, "x")), (1, 2), ())
    ctx = [parse_assertion("y@1 = x@2")]
    seen = [
        (ms.store_at(1).get("x"), ms.store_at(1).get("y"), ms.store_at(2).get("x"))
        for ms, _l in iter_assignments(fp, EnumConfig(domain=(0, 1), fuel=8), ctx)
    ]
    full = [
        t
        for t in itertools.product((0, 1), repeat=3)
        if t[1] == t[2]
    ]
    assert seen == full


def test_verdict_stability():
    args = (
        parse_assertion("x@1 = x@2"),
        ht((1, IDEM_BRANCH), (2, IDEM_BRANCH)),
        parse_post("ret r. x@1 = x@2"),
        SMALL,
    )
    v1, v2 = check_triple(*args), check_triple(*args)
    assert v1 == v2


@given(
    st.sampled_from(["x := x + 1", "x := x * 2", "skip", "x := 0 - x", "if x < 0 then x := 0 - x else skip"]),
    st.sampled_from(["x := x + 1", "x := x * 2", "skip", "x := *"]),
    st.sampled_from(["x := x + 1", "skip", "x := *", "x := x - 1"]),
)
@settings(max_examples=30, deadline=None)
def test_refinement_transitive(a, b, c):
    t1, t2, t3 = parse_term(a), parse_term(b), parse_term(c)
    cfg = EnumConfig(domain=(-1, 0, 1), fuel=32)
    r12 = check_refinement(t1, t2, cfg)
    r23 = check_refinement(t2, t3, cfg)
    if r12.status == "valid" and r23.status == "valid":
        assert check_refinement(t1, t3, cfg).status == "valid"


def test_domain_monotone_invalid_never_flips_valid():
    pre, mt, post = idem_triple(IDEM_BRANCH, seq=True)
    small = check_triple(pre, mt, post, SMALL)
    big = check_triple(pre, mt, post, EnumConfig(domain=range_domain(-1, 3), fuel=64))
    assert small.status == "invalid" and big.status == "invalid"


def test_appendix_accumulator_separation():
    # z := z + y; y := 0 with relevant vector (z): IdemSeq holds, Idem fails.
    # IdemSeq compares t against t;t started from equal full stores; the
    # relevant vector only scopes the postcondition.
    term = "z := z + y; y := 0"
    pre = parse_assertion("z@1 = z@2 /\\ y@1 = y@2")
    mt = ht((1, term), (2, f"({term}); ({term})"))
    post = parse_post("ret r. z@1 = z@2")
    assert check_triple(pre, mt, post, SMALL).status == "valid"

    pre = parse_assertion("z@2 = v", logic={"v"})
    mt = ht((1, term), (2, term))
    post = parse_post("ret r. z@1 = v => z@2 = v", logic={"v"})
    v = check_triple(pre, mt, post, SMALL)
    assert v.status == "invalid"
    assert v.witness_store.store_at(2).get("y") != 0 or v.witness_store.store_at(1).get("y") != 0
