import pytest

from hyperverify.assertions import (
    And,
    Cmp,
    Const,
    Exists,
    FalseA,
    Implies,
    LogicVar,
    PVarAt,
    PostAssertion,
    Proj,
    ProjRet,
    Projectable,
    ReindexA,
    RetAt,
    TrueA,
    WPA,
    parse_assertion,
    parse_post,
)
from hyperverify.hyper import FinMap, Reindexing
from hyperverify.kernel import (
    CheckReport,
    Derivation,
    Hypothesis,
    Judgment,
    NEGATIVE_RULES,
    ShapeMismatch,
    SideConditionViolated,
    apply_rule,
    auto_prove_loopfree,
    check_derivation,
    derived_rule_expand,
    elaborate,
    fill_holes,
    hole,
    judgment,
)
from hyperverify.lang import EnumConfig, parse_term
from hyperverify.oracle import NotValid, check_triple

CFG = EnumConfig(domain=(-1, 0, 1), fuel=64)


def ht(*pairs):
    return FinMap({i: parse_term(src) for i, src in pairs})


def wp(mt, binder, body):
    return WPA(mt, binder, body)


def test_wp_nest_fwd_premise_shape():
    t1, t2 = parse_term("x := 1"), parse_term("y := 2")
    q = parse_post("ret r. r@1 = 1 /\\ r@2 = 2")
    goal = judgment([], wp(FinMap({1: t1, 2: t2}), "r", q.body))
    [prem] = apply_rule(
        "wp-nest", {"dir": "fwd", "left": frozenset((1,)), "binders": ("v", "w")}, goal
    )
    want = wp(
        FinMap({1: t1}),
        "v",
        wp(FinMap({2: t2}), "w", And(Cmp("=", RetAt("v", 1), Const(1)), Cmp("=", RetAt("w", 2), Const(2)))),
    )
    assert prem.goal == want


def test_wp_nest_roundtrip():
    t1, t2 = parse_term("x := 1"), parse_term("y := 2")
    q = parse_post("ret r. x@1 = y@2")
    goal = judgment([], wp(FinMap({1: t1, 2: t2}), "r", q.body))
    [nested] = apply_rule(
        "wp-nest", {"dir": "fwd", "left": frozenset((1,)), "binders": ("r", "w")}, goal
    )
    [merged] = apply_rule("wp-nest", {"dir": "bwd", "binder": "r"}, nested)
    assert merged == goal


def test_wp_conj_side_condition():
    # Q1 mentions an index in supp(t2) \ supp(t1): rejected
    mt = ht((1, "x := 1"), (2, "x := 2"))
    body = And(parse_assertion("x@2 = 2"), parse_assertion("x@2 = 2"))
    goal = judgment([], wp(mt, "r", body))
    with pytest.raises(SideConditionViolated):
        apply_rule("wp-conj", {"left": frozenset((1,)), "right": frozenset((2,))}, goal)
    ok_body = And(parse_assertion("x@1 = 1"), parse_assertion("x@2 = 2"))
    goal2 = judgment([], wp(mt, "r", ok_body))
    p1, p2 = apply_rule("wp-conj", {"left": frozenset((1,)), "right": frozenset((2,))}, goal2)
    assert p1.goal.mt.supp() == {1} and p2.goal.mt.supp() == {2}


def test_wp_proj_premise_carries_projectability():
    mt2 = ht((1, "skip"))
    mt1 = ht((2, "while 1 do skip"))
    goal = judgment([], wp(mt2, "r", ProjRet(frozenset((2,)), "r", FalseA())))
    [prem] = apply_rule("wp-proj", {"hyperterm": mt1}, goal)
    assert isinstance(prem.goal, Proj)
    body = prem.goal.body
    assert isinstance(body, Implies) and isinstance(body.left, Projectable)
    assert isinstance(body.right, And) and isinstance(body.right.left, Projectable)


def test_unsound_proj_drops_conjunct():
    mt2 = ht((1, "skip"))
    mt1 = ht((2, "while 1 do skip"))
    goal = judgment([], wp(mt2, "r", ProjRet(frozenset((2,)), "r", FalseA())))
    [prem] = apply_rule("UNSOUND-proj-no-side-condition", {"hyperterm": mt1}, goal)
    assert isinstance(prem.goal, Proj) and isinstance(prem.goal.body, WPA)


def test_wp_while_premises():
    mt = ht((1, "while x < 2 do x := x + 1"), (2, "while x < 2 do x := x + 1"))
    inv = parse_assertion("x@1 = x@2")
    goal = judgment([inv], wp(mt, "r", inv))
    p1, p2 = apply_rule(
        "wp-while", {"invariant": inv, "binder": "g", "body_binder": "b"}, goal
    )
    assert p1 == judgment([inv], inv)
    assert p2.context == (inv,)
    assert isinstance(p2.goal, WPA)


def test_wp_refine_unfold_and_oracle():
    w = "while x < 2 do x := x + 1"
    u = "if x < 2 then (x := x + 1; while x < 2 do x := x + 1) else skip"
    goal = judgment([], wp(ht((1, w)), "r", parse_assertion("x@1 = 2 \\/ 2 <= x@1")))
    [prem] = apply_rule("wp-refine", {"index": 1, "term": parse_term(u), "via": "unfold"}, goal)
    assert prem.goal.mt.get(1) == parse_term(u)
    goal2 = judgment([], wp(ht((1, "x := 1")), "r", TrueA()))
    [prem2] = apply_rule(
        "wp-refine", {"index": 1, "term": parse_term("x := *"), "via": "oracle"}, goal2, CFG
    )
    with pytest.raises(SideConditionViolated):
        apply_rule(
            "wp-refine", {"index": 1, "term": parse_term("x := 2"), "via": "oracle"},
            goal2, CFG,
        )


def test_wp_idx_post_reindexes_post():
    mt = ht((2, "x := x + 1"))
    q = parse_post("ret r. x@3 = x@2")
    goal_post = parse_post("ret r. x@2 = x@2").body  # [3->2] applied
    goal = judgment([], wp(mt, "r", goal_post))
    [prem] = apply_rule("wp-idx-post", {"i": 2, "j": 3, "post": q}, goal)
    assert prem.goal == wp(mt, "r", q.body)
    # side condition: j must not appear in the context
    bad = judgment([parse_assertion("x@3 = 0")], wp(mt, "r", goal_post))
    with pytest.raises(SideConditionViolated):
        apply_rule("wp-idx-post", {"i": 2, "j": 3, "post": q}, bad)


def test_wp_idx_swap_premise():
    mt = ht((2, "x := x + 1"))
    q = parse_post("ret r. x@3 = 0")
    goal = judgment([], wp(ht((3, "x := x + 1")) if False else mt, "r", parse_assertion("x@2 = 0")))
    # goal has component at 2; premise moves it to 3 under [3->2]
    [prem] = apply_rule("wp-idx-swap", {"i": 2, "j": 3, "post": q}, goal)
    assert isinstance(prem.goal, ReindexA)
    assert prem.goal.pi == Reindexing.of({3: 2})
    assert prem.goal.body.mt.supp() == {3}


def test_axiom_and_cut_and_weaken():
    p = parse_assertion("x@1 = 0")
    g = judgment([p], p)
    assert apply_rule("axiom", {}, g) == []
    c1, c2 = apply_rule("cut", {"lemma": TrueA()}, g)
    assert c1 == judgment([p], TrueA()) and c2 == judgment([p, TrueA()], p)
    [w] = apply_rule("weaken", {"keep": [0]}, judgment([p, TrueA()], p))
    assert w == judgment([p], p)


def test_proj_store_shape():
    goal_src = "proj{3}. exists v. (x@1 = v /\\ x@2 = v) /\\ x@3 = v"
    goal = judgment([], parse_assertion(goal_src))
    [prem] = apply_rule("proj-store", {"index": 3}, goal)
    assert prem.goal == parse_assertion("exists v. x@1 = v /\\ x@2 = v")


def test_check_derivation_example_flow():
    # {x@1 = x@2} [1: x+1, 2: x+1] {x@1 = x@2} via wp-assign + wp-cons + oracle
    pre = parse_assertion("x@1 = x@2")
    mt = ht((1, "x := x + 1"), (2, "x := x + 1"))
    goal = judgment([pre], wp(mt, "r", pre))
    qmid = PostAssertion(
        "r",
        And(
            Cmp("=", RetAt("r", 1), RetAt("r", 2)),
            And(
                Cmp("=", RetAt("r", 1), PVarAt("x", 1)),
                Cmp("=", RetAt("r", 2), PVarAt("x", 2)),
            ),
        ),
    )
    tree = (
        "wp-cons",
        {"post": qmid, "names": ["a", "b"]},
        [
            (
                "wp-assign",
                {},
                [("oracle", {}, [])],
            ),
            ("oracle", {}, []),
        ],
    )
    d = elaborate(goal, tree, {}, CFG)
    rep = check_derivation(d, {}, CFG)
    assert rep.ok, rep.errors
    assert rep.domain_relative


def test_check_derivation_rejects_negative_rules():
    mt2 = ht((1, "skip"))
    goal = judgment([], wp(mt2, "r", ProjRet(frozenset((2,)), "r", FalseA())))
    d = Derivation(goal, "UNSOUND-proj-no-side-condition",
                   {"hyperterm": ht((2, "while 1 do skip"))},
                   [Derivation(judgment([], TrueA()), "oracle")])
    rep = check_derivation(d, {}, CFG)
    assert not rep.ok


def test_hypothesis_matching_with_renaming_and_args():
    # scheme: Det(a, b): |- wp [1: r0 := a + b, 2: r0 := a + b] ret r. r@1 = r@2
    j = judgment(
        [],
        parse_assertion(
            "wp [1: r0 := a + b, 2: r0 := a + b] ret r. r@1 = r@2"
        ),
    )
    hyp = Hypothesis("Det", ("a", "b"), j)
    # use at indices (3, 1) with arguments (y, 1)
    use = judgment(
        [],
        parse_assertion(
            "wp [3: r0 := y + 1, 1: r0 := y + 1] ret q. q@3 = q@1"
        ),
    )
    d = Derivation(use, "hypothesis", {"name": "Det", "args": {"a": PVarAt("y", 0), "b": Const(1)}})
    rep = check_derivation(d, {"Det": hyp}, CFG)
    assert rep.ok, rep.errors
    assert rep.assumptions_used == ["Det"]


def test_hypothesis_mismatch_reports():
    j = judgment([], parse_assertion("wp [1: skip] ret r. true"))
    hyp = Hypothesis("H", (), j)
    use = judgment([], parse_assertion("wp [1: x := 1] ret r. true"))
    d = Derivation(use, "hypothesis", {"name": "H"})
    rep = check_derivation(d, {"H": hyp}, CFG)
    assert not rep.ok


def test_check_derivation_deterministic():
    pre = parse_assertion("x@1 = 0")
    goal = judgment([pre], wp(ht((1, "x := x + 1")), "r", parse_assertion("x@1 = 1")))
    d = Derivation(goal, "oracle")
    r1 = check_derivation(d, {}, CFG)
    r2 = check_derivation(d, {}, CFG)
    assert r1 == r2 and r1.ok


# --- derived rule expansions ---------------------------------------------------


def expand_and_check(rule_id, params, goal, fills, cfg=CFG):
    skel = derived_rule_expand(rule_id, params, goal, cfg)
    premises = apply_rule(rule_id, params, goal, cfg)
    assert len(fills) == len(premises)
    filled = fill_holes(skel, fills)
    rep = check_derivation(filled, {}, cfg)
    assert rep.ok, rep.errors
    # primitive rules only
    def rules_used(d):
        yield d.rule
        for c in d.premises:
            yield from rules_used(c)
    from hyperverify.kernel import DERIVED_RULES
    assert not any(r in DERIVED_RULES for r in rules_used(filled))
    return filled


def test_expand_wp_empty_intro():
    p = parse_assertion("x@1 = 0")
    goal = judgment([p], wp(FinMap(), "r", p))
    [prem] = apply_rule("wp-empty", {"dir": "intro"}, goal)
    expand_and_check("wp-empty", {"dir": "intro"}, goal, [Derivation(prem, "axiom")])


def test_expand_wp_empty_elim():
    p = parse_assertion("x@1 = 0")
    goal = judgment([wp(FinMap(), "r", p)], p)
    [prem] = apply_rule("wp-empty", {"dir": "elim", "binder": "r"}, goal)
    expand_and_check(
        "wp-empty", {"dir": "elim", "binder": "r"}, goal, [Derivation(prem, "axiom")]
    )


def test_expand_wp_skip():
    q = parse_assertion("x@2 = 1")
    mt = ht((1, "skip"), (2, "x := 1"))
    goal = judgment([], wp(mt, "r", q))
    [prem] = apply_rule("wp-skip", {"dir": "fwd", "index": 1}, goal)
    assert prem.goal == wp(ht((2, "x := 1")), "r", q)
    expand_and_check(
        "wp-skip", {"dir": "fwd", "index": 1}, goal, [Derivation(prem, "oracle")]
    )


def test_expand_wp_rename():
    pre = parse_assertion("x@1 = 0")
    inner = judgment([pre], wp(ht((1, "x := x + 1")), "r", parse_assertion("x@1 = 1")))
    pi = Reindexing.of({1: 2, 2: 1})
    goal = judgment(
        [parse_assertion("x@2 = 0")],
        wp(ht((2, "x := x + 1")), "r", parse_assertion("x@2 = 1")),
    )
    [prem] = apply_rule("wp-rename", {"pi": pi, "judgment": inner}, goal)
    assert prem == inner
    expand_and_check(
        "wp-rename", {"pi": pi, "judgment": inner}, goal, [Derivation(inner, "oracle")]
    )


def test_expand_wp_impl_l():
    mt = ht((1, "x := x + 1"))
    q = parse_assertion("x@1 = 1")
    p = parse_assertion("y@2 = 0")
    goal = judgment([p], Implies(wp(mt, "r", q), p))
    prems = apply_rule("wp-impl-l", {"post": PostAssertion("r", q)}, goal)
    fills = [Derivation(pr, "oracle") for pr in prems]
    expand_and_check("wp-impl-l", {"post": PostAssertion("r", q)}, goal, fills)


def test_expand_wp_seq_plus():
    mt = ht((1, "x := 1; x := x + 1"), (2, "y := 2"))
    q = parse_assertion("x@1 = 2")
    goal = judgment([], wp(mt, "r", q))
    params = {"seqs": frozenset((1,)), "extras": frozenset((2,)), "binder": "s"}
    [prem] = apply_rule("wp-seq-plus", params, goal)
    # premise: wp [1: x:=1] ++ [2: y:=2] { wp [1: x:=x+1] { Q } }
    assert prem.goal.mt.supp() == {1, 2}
    expand_and_check("wp-seq-plus", params, goal, [Derivation(prem, "oracle")])


def test_expand_wp_indirect():
    # Idem-style: t1 = t2 = abs-value program, A(v) = (x@_ = v)
    t = "if x < 0 then x := 0 - x else skip"
    q = parse_post("ret r. x@2 = v", logic={"v"})
    a_hole = Cmp("=", PVarAt("x", -1), LogicVar("v"))
    inner_post = ReindexA(
        ProjRet(frozenset((2,)), "r", parse_post("ret r. x@2 = v", logic={"v"}).body),
        Reindexing.of({3: 2}),
    )
    from hyperverify.assertions import reindex_assertion, _fill_hole

    want_inner = reindex_assertion(
        ProjRet(frozenset((2,)), "r", q.body), Reindexing.of({3: 2})
    )
    body = Exists(
        ("v",),
        And(_fill_hole(a_hole, 2), WPA(ht((2, t)), "r", want_inner)),
    )
    goal = judgment([], WPA(ht((2, t)), "r", body))
    params = {"i": 2, "j": 3, "vars": ("v",), "cond": a_hole, "post": q}
    prems = apply_rule("wp-indirect", params, goal)
    assert len(prems) == 2
    fills = [Derivation(pr, "oracle") for pr in prems]
    expand_and_check("wp-indirect", params, goal, fills, cfg=EnumConfig(domain=(-1, 0, 1), fuel=64))


# --- auto-prover -----------------------------------------------------------------


def test_auto_prove_valid_triple():
    pre = parse_assertion("x@1 = x@2")
    mt = ht((1, "x := x + 1"), (2, "x := x + 1"))
    post = parse_post("ret r. x@1 = x@2")
    d = auto_prove_loopfree(pre, mt, post, CFG)
    rep = check_derivation(d, {}, CFG)
    assert rep.ok, rep.errors[:4]


def test_auto_prove_empty_hyperterm():
    pre = parse_assertion("x@1 = 0")
    d = auto_prove_loopfree(pre, FinMap(), parse_post("ret r. x@1 = 0"), CFG)
    rep = check_derivation(d, {}, CFG)
    assert rep.ok, rep.errors[:4]


def test_auto_prove_invalid_raises_with_witness():
    pre = TrueA()
    mt = ht((1, "x := *"))
    post = parse_post("ret r. r@1 = 0")
    with pytest.raises(NotValid) as e:
        auto_prove_loopfree(pre, mt, post, CFG)
    assert e.value.verdict.status == "invalid"


def test_auto_prove_star_nondet():
    pre = parse_assertion("x@1 = 0")
    mt = ht((1, "if * then x := 1 else x := 2"))
    post = parse_post("ret r. x@1 = 1 \\/ x@1 = 2")
    d = auto_prove_loopfree(pre, mt, post, CFG)
    rep = check_derivation(d, {}, CFG)
    assert rep.ok, rep.errors[:4]
