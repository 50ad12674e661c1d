"""Randomized semantic validation of every rule in the kernel catalog.

For each rule we generate well-formed instances satisfying its side
conditions, then check with the bounded oracle that all premises being valid
forces the conclusion to be valid.  Instances whose premises are invalid are
vacuous and retried; inconclusive sweeps are counted separately and never
treated as pass or fail.  The two negative-catalog rules must instead yield
counterexamples (their generators lead with the canonical shapes).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .lang import (
    Assign,
    BinOp,
    EnumConfig,
    If,
    IntLit,
    MetaVal,
    Seq,
    Skip,
    Star,
    Term,
    Var,
    While,
    mods_term,
    pretty_term,
    pvar_term,
)
from .hyper import FinMap, Reindexing, disjoint_union, mods_hyper, reindex_finmap, union
from .assertions import (
    And,
    Cmp,
    Const,
    Exists,
    FalseA,
    Forall,
    Implies,
    LogicVar,
    Not,
    Or,
    PVarAt,
    PostAssertion,
    Proj,
    ProjRet,
    Projectable,
    ReindexA,
    RetAt,
    TrueA,
    WPA,
    and_all,
    idx_over,
    pretty_assertion,
    pvar_over,
    reindex_assertion,
)
from .kernel import (
    Judgment,
    NEGATIVE_RULES,
    RULES,
    ShapeMismatch,
    SideConditionViolated,
    apply_rule,
    judgment,
)
from .oracle import INVALID, VALID, check_entailment


class CoverageError(Exception):
    pass


@dataclass
class Counterexample:
    goal: Judgment
    params_note: str
    premise_status: list
    shape: dict

    def to_json(self):
        return {
            "goal": self.goal.pretty(),
            "params": self.params_note,
            "premises": self.premise_status,
            "shape": self.shape,
        }


@dataclass
class FuzzReport:
    rule: str
    seed: int
    requested: int
    conclusive: int = 0
    passed: int = 0
    inconclusive: int = 0
    vacuous: int = 0
    attempts: int = 0
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        if self.rule in NEGATIVE_RULES:
            return bool(self.counterexamples)
        return not self.counterexamples and self.conclusive >= self.requested

    def to_json(self):
        return {
            "rule": self.rule,
            "seed": self.seed,
            "requested": self.requested,
            "conclusive": self.conclusive,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "vacuous": self.vacuous,
            "attempts": self.attempts,
            "counterexamples": [c.to_json() for c in self.counterexamples],
        }


# ---------------------------------------------------------------------------
# Generation helpers


class G:
    """Pocket generator state: rng plus the instance-size discipline."""

    def __init__(self, rng: random.Random, cfg: EnumConfig):
        self.rng = rng
        self.cfg = cfg
        self.vars = ("x", "y")
        self.indices = (1, 2, 3, 4)

    def choice(self, xs):
        return self.rng.choice(list(xs))

    def var(self):
        return self.choice(self.vars)

    def val(self):
        return self.choice(self.cfg.domain)

    def index(self):
        return self.choice(self.indices)

    def some_indices(self, k):
        return tuple(sorted(self.rng.sample(list(self.indices), k)))

    def expr(self, depth=2) -> Term:
        if depth <= 0 or self.rng.random() < 0.45:
            return self.choice(
                [IntLit(self.val()), Var(self.var()), Star(), IntLit(self.val())]
            )
        op = self.choice(["+", "-", "*", "<", "<=", "="])
        return BinOp(op, self.expr(depth - 1), self.expr(depth - 1))

    def loopfree_term(self, depth=3) -> Term:
        r = self.rng.random()
        if depth <= 0 or r < 0.3:
            return self.choice([Skip(), Assign(self.var(), self.expr(1)), self.expr(1)])
        if r < 0.55:
            return Assign(self.var(), self.expr(depth - 1))
        if r < 0.75:
            return Seq(self.loopfree_term(depth - 1), self.loopfree_term(depth - 1))
        if r < 0.9:
            return If(
                self.expr(1), self.loopfree_term(depth - 1), self.loopfree_term(depth - 1)
            )
        return Skip()

    def term(self, depth=3, allow_loop=True) -> Term:
        if allow_loop and self.rng.random() < 0.18:
            return self.loop_term()
        return self.loopfree_term(depth)

    def loop_term(self) -> Term:
        x = self.var()
        c = self.val()
        kind = self.rng.random()
        if kind < 0.4:
            # counts up to a bound: always terminates
            return While(BinOp("<", Var(x), IntLit(c)), Assign(x, BinOp("+", Var(x), IntLit(1))))
        if kind < 0.6:
            return While(IntLit(0), self.loopfree_term(1))
        if kind < 0.8:
            return While(IntLit(1), Skip())  # conclusively diverges
        return While(Star(), Skip())

    def iexpr_at(self, i, binder=None, supp=(), depth=1):
        r = self.rng.random()
        if binder is not None and supp and r < 0.3:
            return RetAt(binder, self.choice(supp))
        if r < 0.55:
            return PVarAt(self.var(), i)
        if r < 0.8:
            return Const(self.val())
        return PVarAt(self.var(), i)

    def store_atom(self, idxs, binder=None, supp=()) -> Cmp:
        i = self.choice(idxs)
        k = self.choice(idxs)
        op = self.choice(["=", "<", "<="])
        return Cmp(op, self.iexpr_at(i, binder, supp), self.iexpr_at(k, binder, supp))

    def assertion(self, idxs, depth=2, binder=None, supp=()) -> "HAssertion":
        if depth <= 0 or self.rng.random() < 0.45:
            r = self.rng.random()
            if r < 0.08:
                return TrueA()
            if r < 0.12:
                return FalseA()
            return self.store_atom(idxs, binder, supp)
        r = self.rng.random()
        a = self.assertion(idxs, depth - 1, binder, supp)
        b = self.assertion(idxs, depth - 1, binder, supp)
        if r < 0.4:
            return And(a, b)
        if r < 0.7:
            return Or(a, b)
        if r < 0.85 and binder is None:
            return Implies(a, b)
        if binder is None:
            return Not(a)
        return Or(a, b)

    def post(self, mt: FinMap, binder: str, depth=2):
        return self.assertion(
            tuple(sorted(mt.supp())) or (self.index(),), depth, binder, tuple(sorted(mt.supp()))
        )

    def tautology(self, idxs):
        a = self.store_atom(idxs)
        return Or(a, Not(a))

    def implied_by(self, gamma):
        """An assertion entailed by the context element."""
        r = self.rng.random()
        if r < 0.3:
            return gamma
        if r < 0.55:
            return Or(gamma, self.assertion((self.index(),), 1))
        if r < 0.75:
            return Or(self.assertion((self.index(),), 1), gamma)
        return TrueA()

    def hyper_term(self, k=None, allow_loop=False) -> FinMap:
        k = k if k is not None else self.choice([1, 1, 2, 2, 3])
        idxs = self.some_indices(k)
        return FinMap({i: self.term(2, allow_loop) for i in idxs})

    def valid_judgment(self) -> Judgment:
        """Small judgment templates that are valid by construction (verified)."""
        r = self.rng.random()
        if r < 0.2:
            a = self.assertion((1, 2), 1)
            return judgment([a], a)
        if r < 0.35:
            return judgment([], self.tautology((1, 2)))
        if r < 0.5:
            mt = self.hyper_term(allow_loop=True)
            return judgment([], WPA(mt, "r", TrueA()))
        if r < 0.7:
            a = self.assertion((1, 2), 1)
            return judgment([a], Or(a, self.assertion((1, 3), 1)))
        # determinism of a star-free loop-free term
        t = self.loopfree_term(2)
        while any(isinstance(n, Star) for n in _subterms(t)):
            t = self.loopfree_term(2)
        i, k = self.some_indices(2)
        pre = and_all(
            [Cmp("=", PVarAt(x, i), PVarAt(x, k)) for x in sorted(pvar_term(t) | {"x"})]
        )
        x0 = sorted(pvar_term(t) | {"x"})[0]
        return judgment([pre], WPA(FinMap({i: t, k: t}), "r",
                                   Cmp("=", PVarAt(x0, i), PVarAt(x0, k))))


def _subterms(t):
    yield t
    for f in getattr(t, "__dataclass_fields__", {}):
        v = getattr(t, f)
        if isinstance(v, Term):
            yield from _subterms(v)


# ---------------------------------------------------------------------------
# Per-rule instance generators: return (goal, params) or None to skip


def _ctx_trick(premise_assertions, goal_assertion, extra_ctx=()):
    """Premises become axioms; the conclusion then tests exactly the law."""
    return judgment(tuple(extra_ctx) + tuple(premise_assertions), goal_assertion)


GENERATORS = {}


def gen(name):
    def deco(fn):
        GENERATORS[name] = fn
        return fn

    return deco


@gen("axiom")
def g_axiom(g: G):
    a = g.assertion((1, 2), 1)
    return judgment([g.assertion((1, 2), 1), a], a), {}


@gen("cut")
def g_cut(g: G):
    a = g.assertion((1, 2), 1)
    lemma = g.implied_by(a)
    goal = g.implied_by(lemma)
    return judgment([a], goal), {"lemma": lemma}


@gen("impl-intro")
def g_impl_intro(g: G):
    a = g.assertion((1, 2), 1)
    b = g.implied_by(a)
    return judgment([g.assertion((1, 3), 1)], Implies(a, b)), {}


@gen("impl-elim")
def g_impl_elim(g: G):
    a = g.assertion((1, 2), 1)
    b = g.implied_by(a)
    return judgment([a], b), {"hyp": a}


@gen("ex-elim")
def g_ex_elim(g: G):
    i = g.index()
    r0 = g.assertion((1, 2), 1)
    body = And(Cmp("=", PVarAt(g.var(), i), LogicVar("v")), r0)
    goal = Or(r0, g.assertion((3,), 1))
    return judgment([Exists(("v",), body)], goal), {"pos": 0, "names": ["w"]}


@gen("and-intro")
def g_and_intro(g: G):
    a = g.assertion((1, 2), 1)
    return judgment([a], And(g.implied_by(a), g.implied_by(a))), {}


@gen("or-elim")
def g_or_elim(g: G):
    a = g.assertion((1, 2), 1)
    b = g.assertion((1, 2), 1)
    goal = Or(a, Or(b, g.assertion((3,), 1)))
    return judgment([Or(a, b)], goal), {"pos": 0}


@gen("weaken")
def g_weaken(g: G):
    a = g.assertion((1, 2), 1)
    extra = g.assertion((1, 3), 1)
    return judgment([extra, a], g.implied_by(a)), {"keep": [1]}


@gen("lift-forall")
def g_lift_forall(g: G):
    i = g.index()
    a = Cmp("=", PVarAt(g.var(), i), LogicVar("v"))
    body = g.choice([Or(a, g.assertion((i,), 1)), Implies(a, Or(a, g.assertion((i,), 1)))])
    return judgment([g.assertion((2,), 1)], Forall(("v",), body)), {}


@gen("idx")
def g_idx(g: G):
    prem = g.valid_judgment()
    pi = Reindexing.of({g.index(): g.index()})
    goal = judgment(
        [reindex_assertion(c, pi) for c in prem.context],
        reindex_assertion(prem.goal, pi),
    )
    return goal, {"pi": pi, "judgment": prem}


def _g_idx_law(g: G, make_body):
    pi = Reindexing.of({g.index(): g.index()})
    body = make_body()
    d = g.choice(["fwd", "bwd"])
    wrapped = ReindexA(body, pi)
    try:
        distributed_prem = apply_rule(
            _g_idx_law.rule, {"dir": "bwd"}, judgment([wrapped], wrapped), None
        )
    except Exception:
        pass
    if d == "bwd":
        goal = judgment([wrapped], wrapped)
        [prem] = apply_rule(_g_idx_law.rule, {"dir": "bwd"}, goal, None)
        return judgment([prem.goal], wrapped), {"dir": "bwd"}
    # fwd: goal is the distributed form
    probe = apply_rule(
        _g_idx_law.rule, {"dir": "bwd"}, judgment([wrapped], wrapped), None
    )[0].goal
    return judgment([wrapped], probe), {"dir": "fwd", "pi": pi, "body": body}


@gen("idx-pvar")
def g_idx_pvar(g: G):
    _g_idx_law.rule = "idx-pvar"
    return _g_idx_law(g, lambda: g.store_atom((1, 2, 3)))


@gen("idx-ex")
def g_idx_ex(g: G):
    _g_idx_law.rule = "idx-ex"
    return _g_idx_law(
        g,
        lambda: Exists(("v",), Cmp("=", PVarAt(g.var(), g.index()), LogicVar("v"))),
    )


@gen("idx-conj")
def g_idx_conj(g: G):
    _g_idx_law.rule = "idx-conj"
    return _g_idx_law(g, lambda: And(g.store_atom((1, 2)), g.store_atom((2, 3))))


@gen("idx-impl")
def g_idx_impl(g: G):
    _g_idx_law.rule = "idx-impl"
    return _g_idx_law(g, lambda: Implies(g.store_atom((1, 2)), g.store_atom((2, 3))))


@gen("idx-irrel")
def g_idx_irrel(g: G):
    body = g.store_atom((1, 2))
    free = sorted(set(g.indices) - idx_over(body))
    if not free:
        return None
    moved = g.choice(free)
    tgt = g.index()
    pi = Reindexing.of({moved: tgt} if moved != tgt else {})
    if any(pi.apply(i) != i for i in idx_over(body)):
        return None
    d = g.choice(["fwd", "bwd"])
    if d == "bwd":
        wrapped = ReindexA(body, pi)
        return judgment([body], wrapped), {"dir": "bwd"}
    return judgment([ReindexA(body, pi)], body), {"dir": "fwd", "pi": pi}


@gen("proj")
def g_proj(g: G):
    prem = g.valid_judgment()
    idxs = frozenset(g.some_indices(g.choice([1, 2])))
    goal = judgment(
        [Proj(idxs, c) for c in prem.context], Proj(idxs, prem.goal)
    )
    return goal, {"indices": idxs}


@gen("proj-intro")
def g_proj_intro(g: G):
    a = g.assertion((1, 2), 1)
    idxs = frozenset(g.some_indices(1))
    return judgment([a], Proj(idxs, g.implied_by(a))), {}


@gen("proj-merge")
def g_proj_merge(g: G):
    body = g.assertion((1, 2, 3), 1)
    i1 = frozenset(g.some_indices(1))
    i2 = frozenset(g.some_indices(g.choice([1, 2])))
    d = g.choice(["fwd", "bwd"])
    if d == "bwd":
        wrapped = Proj(i1, Proj(i2, body))
        return judgment([wrapped], wrapped), {"dir": "bwd"}
    merged = Proj(i1 | i2, body)
    return judgment([Proj(i1, Proj(i2, merged.body))], merged), {
        "dir": "fwd",
        "split": i1,
    }


@gen("proj-irrel")
def g_proj_irrel(g: G):
    p = g.store_atom((1, 2))
    free = sorted(set(g.indices) - idx_over(p))
    if not free:
        return None
    idxs = frozenset([g.choice(free)])
    return judgment([Proj(idxs, p)], p), {"indices": idxs}


@gen("proj-store")
def g_proj_store(g: G):
    i = 3
    x = g.var()
    p = Cmp("=", PVarAt(x, 1), LogicVar("v"))
    goal = Proj(
        frozenset((i,)), Exists(("v",), And(p, Cmp("=", PVarAt(x, i), LogicVar("v"))))
    )
    return judgment([Exists(("v",), p)], goal), {"index": i}


@gen("wp-triv")
def g_wp_triv(g: G):
    mt = g.hyper_term(allow_loop=True)
    return judgment([], WPA(mt, "r", TrueA())), {}


@gen("wp-cons")
def g_wp_cons(g: G):
    mt = g.hyper_term()
    q = self_post = g.post(mt, "r")
    weaker = Or(q, g.post(mt, "r", 1)) if g.rng.random() < 0.7 else TrueA()
    wp_strong = WPA(mt, "r", q)
    goal = judgment([wp_strong], WPA(mt, "r", weaker))
    return goal, {"post": PostAssertion("r", q)}


@gen("wp-all")
def g_wp_all(g: G):
    mt = g.hyper_term(1)
    i = next(iter(mt.supp()))
    body = Or(Cmp("=", LogicVar("v"), LogicVar("v")), g.post(mt, "r"))
    d = g.choice(["fwd", "bwd"])
    if d == "fwd":
        a = WPA(mt, "r", Forall(("v",), body))
        return judgment([Forall(("v",), WPA(mt, "r", body))], a), {"dir": "fwd"}
    a = Forall(("v",), WPA(mt, "r", body))
    return judgment([WPA(mt, "r", Forall(("v",), body))], a), {"dir": "bwd"}


@gen("wp-frame")
def g_wp_frame(g: G):
    mt = g.hyper_term()
    mods = mods_hyper(mt)
    # frame over slots the hyper-term does not modify
    candidates = [
        (x, i) for x in g.vars for i in g.indices if (x, i) not in mods
    ]
    x, i = g.choice(candidates)
    f = Cmp(g.choice(["=", "<", "<="]), PVarAt(x, i), Const(g.val()))
    q = g.post(mt, "r")
    goal = judgment([And(f, WPA(mt, "r", q))], WPA(mt, "r", And(f, q)))
    return goal, {"frame": f}


@gen("wp-impl-r")
def g_wp_impl_r(g: G):
    mt = g.hyper_term()
    mods = mods_hyper(mt)
    candidates = [(x, i) for x in g.vars for i in g.indices if (x, i) not in mods]
    x, i = g.choice(candidates)
    f = Cmp("=", PVarAt(x, i), Const(g.val()))
    q = g.post(mt, "r")
    d = g.choice(["fwd", "bwd"])
    if d == "fwd":
        goal = judgment([Implies(f, WPA(mt, "r", q))], WPA(mt, "r", Implies(f, q)))
    else:
        goal = judgment([WPA(mt, "r", Implies(f, q))], Implies(f, WPA(mt, "r", q)))
    return goal, {"dir": d}


@gen("wp-subst")
def g_wp_subst(g: G):
    x = g.var()
    other = "y" if x == "x" else "x"
    t = g.choice(
        [
            Assign(other, BinOp("+", Var(x), IntLit(g.val()))),
            BinOp("+", Var(x), Var(other)),
            Seq(Assign(other, Var(x)), Assign(other, BinOp("*", Var(other), Var(x)))),
        ]
    )
    i = g.index()
    rest_i = g.choice([k for k in g.indices if k != i])
    mt = FinMap({i: t}) if g.rng.random() < 0.5 else FinMap({i: t, rest_i: Skip()})
    v = Const(g.val())
    from .lang import subst

    t2 = subst(t, x, v.value)
    q = g.post(mt, "r")
    prem = And(Cmp("=", PVarAt(x, i), v), WPA(mt.set(i, t2), "r", q))
    return judgment([prem], WPA(mt, "r", q)), {"index": i, "var": x, "value": v}


@gen("wp-idx")
def g_wp_idx(g: G):
    mt = g.hyper_term()
    perm_base = sorted(set(g.indices))
    perm = list(perm_base)
    g.rng.shuffle(perm)
    pi = Reindexing.of(dict(zip(perm_base, perm)))
    q = g.post(mt, "r")
    goal = judgment(
        [ReindexA(WPA(mt, "r", q), pi)],
        WPA(reindex_finmap(mt, pi.inverse()), "r", reindex_assertion(q, pi)),
    )
    return goal, {"pi": pi, "hyperterm": mt, "post": PostAssertion("r", q)}


@gen("wp-seq")
def g_wp_seq(g: G):
    k = g.choice([1, 2])
    idxs = g.some_indices(k)
    firsts = {i: g.loopfree_term(2) for i in idxs}
    seconds = {i: g.loopfree_term(2) for i in idxs}
    seqs = FinMap({i: Seq(firsts[i], seconds[i]) for i in idxs})
    q = g.post(seqs, "r")
    d = g.choice(["fwd", "bwd"])
    if d == "fwd":
        goal = judgment(
            [WPA(FinMap(firsts), "s", WPA(FinMap(seconds), "r", q))],
            WPA(seqs, "r", q),
        )
        return goal, {"dir": "fwd", "binder": "s"}
    goal = judgment(
        [WPA(seqs, "r", q)],
        WPA(FinMap(firsts), "s", WPA(FinMap(seconds), "r", q)),
    )
    return goal, {"dir": "bwd"}


@gen("wp-assign")
def g_wp_assign(g: G):
    k = g.choice([1, 2])
    idxs = g.some_indices(k)
    assigns = {i: Assign(g.var(), g.expr(2)) for i in idxs}
    mt = FinMap(assigns)
    # q over return values and unassigned slots only
    q0 = g.rng.random()
    if q0 < 0.4:
        q = Cmp("=", RetAt("r", idxs[0]), RetAt("r", idxs[-1]))
    elif q0 < 0.7:
        q = Or(Cmp("<", RetAt("r", idxs[0]), Const(g.val())), TrueA())
    else:
        q = TrueA()
    for i in idxs:
        if (assigns[i].name, i) in pvar_over(q):
            return None
    eqs = [Cmp("=", RetAt("r", i), PVarAt(assigns[i].name, i)) for i in sorted(idxs)]
    goal_post = and_all([q] + eqs)
    prem = WPA(FinMap({i: assigns[i].rhs for i in idxs}), "r", q)
    return judgment([prem], WPA(mt, "r", goal_post)), {}


@gen("wp-if")
def g_wp_if(g: G):
    from .kernel import _if_case_split

    k = g.choice([1, 2])
    idxs = g.some_indices(k)
    ifs = {
        i: If(g.expr(1), g.loopfree_term(1), g.loopfree_term(1)) for i in idxs
    }
    mt = FinMap(ifs)
    q = g.post(mt, "r")
    split = _if_case_split(ifs, "gb", "r", q)
    guards = FinMap({i: t.guard for i, t in ifs.items()})
    d = g.choice(["fwd", "bwd"])
    if d == "fwd":
        goal = judgment([WPA(guards, "gb", split)], WPA(mt, "r", q))
        return goal, {"dir": "fwd", "binder": "gb"}
    goal = judgment([WPA(mt, "r", q)], WPA(guards, "gb", split))
    return goal, {"dir": "bwd", "hyperterm": mt}


@gen("wp-while")
def g_wp_while(g: G):
    k = g.choice([1, 2])
    idxs = g.some_indices(k)
    style = g.rng.random()
    if style < 0.45:
        # constant guards: all loops agree trivially
        c = g.choice([0, 1])
        loops = {i: While(IntLit(c), g.loopfree_term(1)) for i in idxs}
        inv = TrueA()
        post = TrueA()
    else:
        x = g.var()
        c = g.val()
        body = Assign(x, BinOp("+", Var(x), IntLit(1)))
        loops = {i: While(BinOp("<", Var(x), IntLit(c)), body) for i in idxs}
        inv = and_all(
            [Cmp("=", PVarAt(x, idxs[0]), PVarAt(x, i)) for i in idxs[1:]]
        ) if len(idxs) > 1 else Cmp("<=", PVarAt(x, idxs[0]), PVarAt(x, idxs[0]))
        post = inv
    mt = FinMap(loops)
    return judgment([inv], WPA(mt, "r", post)), {
        "invariant": inv,
        "binder": "gb",
        "body_binder": "bb",
    }


@gen("wp-refine")
def g_wp_refine(g: G):
    style = g.rng.random()
    x = g.var()
    if style < 0.3:
        w = While(BinOp("<", Var(x), IntLit(g.val())), Assign(x, BinOp("+", Var(x), IntLit(1))))
        t1, t2, via = w, If(w.guard, Seq(w.body, w), Skip()), "unfold"
        if g.rng.random() < 0.5:
            t1, t2 = t2, t1
    elif style < 0.6:
        t = g.loopfree_term(2)
        t1, t2, via = t, t, "oracle"
    else:
        t1, t2, via = Assign(x, IntLit(g.val())), Assign(x, Star()), "oracle"
    i = g.index()
    rest = g.choice([None, g.choice([k for k in g.indices if k != i])])
    mt = FinMap({i: t1}) if rest is None else FinMap({i: t1, rest: Skip()})
    q = g.post(mt, "r")
    prem = WPA(mt.set(i, t2), "r", q)
    return judgment([prem], WPA(mt, "r", q)), {"index": i, "term": t2, "via": via}


@gen("wp-nest")
def g_wp_nest(g: G):
    k = g.choice([2, 3])
    idxs = g.some_indices(k)
    mt = FinMap({i: g.loopfree_term(2) for i in idxs})
    q = g.post(mt, "r")
    left = frozenset(idxs[: g.choice([1, k - 1])])
    d = g.choice(["fwd", "bwd"])
    goal0 = judgment([], WPA(mt, "r", q))
    if d == "fwd":
        [prem] = apply_rule(
            "wp-nest", {"dir": "fwd", "left": left, "binders": ("n1", "n2")}, goal0
        )
        return judgment([prem.goal], WPA(mt, "r", q)), {
            "dir": "fwd",
            "left": left,
            "binders": ("n1", "n2"),
        }
    [nested] = apply_rule(
        "wp-nest", {"dir": "fwd", "left": left, "binders": ("n1", "n2")}, goal0
    )
    return judgment([WPA(mt, "r", q)], nested.goal), {"dir": "bwd", "binder": "r"}


@gen("wp-conj")
def g_wp_conj(g: G):
    k = g.choice([2, 3])
    idxs = g.some_indices(k)
    mt = FinMap({i: g.loopfree_term(2) for i in idxs})
    cutpoint = g.choice(range(1, k))
    overlap = g.rng.random() < 0.4
    left = frozenset(idxs[: cutpoint + (1 if overlap and cutpoint < k else 0)])
    right = frozenset(idxs[cutpoint:]) | (left & frozenset(idxs[cutpoint:]))
    right = frozenset(idxs[cutpoint:])
    if overlap:
        right = right | frozenset([idxs[cutpoint - 1]])
    mt1, mt2 = mt.restrict(left), mt.restrict(right)
    q1 = g.assertion(tuple(sorted(left)), 1, "r", tuple(sorted(left)))
    q2 = g.assertion(tuple(sorted(right)), 1, "r", tuple(sorted(right)))
    goal = judgment(
        [WPA(mt1, "r", q1), WPA(mt2, "r", q2)], WPA(mt, "r", And(q1, q2))
    )
    return goal, {"left": left, "right": right}


@gen("wp-proj")
def g_wp_proj(g: G, canonical=False):
    if canonical:
        mt1 = FinMap({2: While(IntLit(1), Skip())})
        mt2 = FinMap({1: Skip()})
        q = FalseA()
    else:
        k1 = g.choice([1, 2])
        idxs = g.some_indices(k1 + 1)
        proj_out = idxs[:k1]
        keep = idxs[k1:]
        mt1 = FinMap({i: g.term(2, allow_loop=True) for i in proj_out})
        mt2 = FinMap({i: g.loopfree_term(2) for i in keep})
        q = g.assertion(idxs, 1, "r", idxs)
        if g.rng.random() < 0.25:
            q = FalseA()
    I = mt1.supp()
    prem = Proj(
        I,
        Implies(
            Projectable(mt2),
            And(Projectable(mt1), WPA(disjoint_union(mt1, mt2), "r", q)),
        ),
    )
    goal = judgment([prem], WPA(mt2, "r", ProjRet(I, "r", q)))
    return goal, {"hyperterm": mt1}


@gen("wp-idx-post")
def g_wp_idx_post(g: G):
    i = g.choice([1, 2])
    j = g.choice([3, 4])
    x = g.var()
    t = g.choice(
        [
            Assign(x, BinOp("+", Var(x), IntLit(1))),
            Assign(x, IntLit(g.val())),
            Skip(),
        ]
    )
    mt = FinMap({i: t})
    # premise post: a genuinely valid post about component i, plus a
    # tautological conjunct mentioning index j so the reindexing bites
    taut = g.tautology((j,))
    if isinstance(t, Assign) and isinstance(t.rhs, IntLit):
        core = Cmp("=", PVarAt(x, i), Const(t.rhs.value))
    else:
        core = TrueA()
    q = And(core, taut)
    pre = TrueA()
    goal = judgment(
        [pre], WPA(mt, "r", reindex_assertion(q, Reindexing.of({j: i})))
    )
    return goal, {"i": i, "j": j, "post": PostAssertion("r", q)}


def _g_idx_family(g: G, rule):
    i = g.choice([1, 2])
    j = g.choice([3, 4])
    x = g.var()
    t = g.choice([Assign(x, BinOp("+", Var(x), IntLit(1))), Skip(), Assign(x, Star())])
    q = g.assertion((i, j), 1, "r", (i,) if rule != "wp-idx-pass" else ())
    pi = Reindexing.of({j: i})
    if rule == "wp-idx-swap":
        mt_goal = FinMap({i: t})
        mt_prem = FinMap({j: t})
        q = g.assertion((j,), 1, "r", (j,))  # i must not be relevant to Q
        if i in idx_over(PostAssertion("r", q)):
            return None
        prem = ReindexA(WPA(mt_prem, "r", q), pi)
        goal = judgment([prem], WPA(mt_goal, "r", reindex_assertion(q, pi)))
        return goal, {"i": i, "j": j, "post": PostAssertion("r", q)}
    if rule == "wp-idx-pass":
        others = [k for k in g.indices if k not in (i, j)]
        mt = FinMap({g.choice(others): t})
        q = g.assertion((i, j), 1)
        prem = ReindexA(WPA(mt, "r", q), pi)
        goal = judgment([prem], WPA(mt, "r", reindex_assertion(q, pi)))
        return goal, {"i": i, "j": j, "post": PostAssertion("r", q)}
    # wp-idx-merge
    mt_goal = FinMap({i: t})
    mt_prem = FinMap({i: t, j: t})
    q = g.assertion((i, j), 1, "r", (i, j))
    prem = ReindexA(WPA(mt_prem, "r", q), pi)
    goal = judgment([prem], WPA(mt_goal, "r", reindex_assertion(q, pi)))
    return goal, {"i": i, "j": j, "post": PostAssertion("r", q)}


@gen("wp-idx-swap")
def g_wp_idx_swap(g: G):
    return _g_idx_family(g, "wp-idx-swap")


@gen("wp-idx-pass")
def g_wp_idx_pass(g: G):
    return _g_idx_family(g, "wp-idx-pass")


@gen("wp-idx-merge")
def g_wp_idx_merge(g: G):
    return _g_idx_family(g, "wp-idx-merge")


@gen("wp-prim-eval")
def g_wp_prim_eval(g: G):
    i = g.index()
    t = BinOp(g.choice(["+", "-", "*", "<"]), g.expr(1), g.expr(1))
    mt = FinMap({i: t})
    q = g.post(mt, "r")
    goal0 = judgment([], WPA(mt, "r", q))
    [prem] = apply_rule("wp-prim-eval", {"binders": ("e1", "e2")}, goal0)
    return judgment([prem.goal], WPA(mt, "r", q)), {"binders": ("e1", "e2")}


@gen("wp-prim-op")
def g_wp_prim_op(g: G):
    i = g.index()
    a, b = g.val(), g.val()
    op = g.choice(["+", "-", "*", "<", "<=", "="])
    from .kernel import _OPFUNS

    t = BinOp(op, IntLit(a), IntLit(b))
    goal = judgment(
        [], WPA(FinMap({i: t}), "r", Cmp("=", RetAt("r", i), Const(_OPFUNS[op](a, b))))
    )
    return goal, {}


@gen("wp-val")
def g_wp_val(g: G):
    i = g.index()
    v = g.val()
    goal = judgment(
        [], WPA(FinMap({i: IntLit(v)}), "r", Cmp("=", RetAt("r", i), Const(v)))
    )
    return goal, {}


@gen("wp-var")
def g_wp_var(g: G):
    i = g.index()
    x = g.var()
    goal = judgment(
        [], WPA(FinMap({i: Var(x)}), "r", Cmp("=", RetAt("r", i), PVarAt(x, i)))
    )
    return goal, {}


@gen("proj-elim")
def g_proj_elim(g: G):
    mt = g.hyper_term(allow_loop=True)
    q = g.post(mt, "r")
    wp = WPA(mt, "r", q)
    return judgment([Implies(Projectable(mt), wp)], wp), {}


@gen("wp-elim")
def g_wp_elim(g: G):
    mt = g.hyper_term(allow_loop=True)
    mods = mods_hyper(mt)
    candidates = [(x, i) for x in g.vars for i in g.indices if (x, i) not in mods]
    x, i = g.choice(candidates)
    p = Cmp(g.choice(["=", "<="]), PVarAt(x, i), Const(g.val()))
    d = g.choice(["fwd", "bwd"])
    if d == "fwd":
        goal = judgment([Implies(Projectable(mt), p)], WPA(mt, "r", p))
        return goal, {"dir": "fwd"}
    goal = judgment([WPA(mt, "r", p)], Implies(Projectable(mt), p))
    return goal, {"dir": "bwd", "binder": "r"}


@gen("wp-skip")
def g_wp_skip(g: G):
    k = g.choice([1, 2])
    idxs = g.some_indices(k + 1)
    i = idxs[0]
    mt_rest = FinMap({k2: g.loopfree_term(2) for k2 in idxs[1:]})
    q = g.assertion(idxs[1:], 1, "r", idxs[1:])
    d = g.choice(["fwd", "bwd"])
    if d == "fwd":
        goal = judgment(
            [WPA(mt_rest, "r", q)], WPA(mt_rest.set(i, Skip()), "r", q)
        )
        return goal, {"dir": "fwd", "index": i}
    goal = judgment(
        [WPA(mt_rest.set(i, Skip()), "r", q)], WPA(mt_rest, "r", q)
    )
    return goal, {"dir": "bwd", "index": i}


@gen("wp-empty")
def g_wp_empty(g: G):
    p = g.assertion((1, 2), 2)
    d = g.choice(["intro", "elim"])
    if d == "intro":
        return judgment([p], WPA(FinMap(), "r", p)), {"dir": "intro"}
    return judgment([WPA(FinMap(), "r", p)], p), {"dir": "elim", "binder": "r"}


@gen("wp-impl-l")
def g_wp_impl_l(g: G):
    mt = g.hyper_term()
    mods = mods_hyper(mt)
    candidates = [(x, i) for x in g.vars for i in g.indices if (x, i) not in mods]
    x, i = g.choice(candidates)
    p = Cmp("=", PVarAt(x, i), Const(g.val()))
    q = g.post(mt, "r")
    ctx = [Projectable(mt), WPA(mt, "r", Implies(q, p))]
    goal = judgment(ctx, Implies(WPA(mt, "r", q), p))
    return goal, {"post": PostAssertion("r", q)}


@gen("wp-rename")
def g_wp_rename(g: G):
    prem = g.valid_judgment()
    if not isinstance(prem.goal, WPA):
        mt = g.hyper_term()
        prem = judgment([WPA(mt, "r", g.post(mt, "r"))], WPA(mt, "r", g.post(mt, "r")))
        prem = judgment([prem.goal], prem.goal)
    perm_base = sorted(set(g.indices))
    perm = list(perm_base)
    g.rng.shuffle(perm)
    pi = Reindexing.of(dict(zip(perm_base, perm)))
    pw = prem.goal
    goal = judgment(
        [reindex_assertion(c, pi) for c in prem.context],
        WPA(reindex_finmap(pw.mt, pi.inverse()), pw.binder, reindex_assertion(pw.body, pi)),
    )
    return goal, {"pi": pi, "judgment": prem}


@gen("wp-seq-plus")
def g_wp_seq_plus(g: G):
    idxs = g.some_indices(g.choice([2, 3]))
    seq_idx = idxs[:1]
    rest = idxs[1:]
    terms = {i: Seq(g.loopfree_term(1), g.loopfree_term(1)) for i in seq_idx}
    for i in rest:
        terms[i] = g.loopfree_term(1)
    mt = FinMap(terms)
    extras1 = frozenset(rest[:1])
    q = g.post(mt, "r")
    goal0 = judgment([], WPA(mt, "r", q))
    params = {"seqs": frozenset(seq_idx), "extras": extras1, "binder": "s"}
    [prem] = apply_rule("wp-seq-plus", params, goal0)
    return judgment([prem.goal], WPA(mt, "r", q)), params


IDEMPOTENT_TERMS = (
    "skip",
    "x := 0",
    "if x < 0 then x := 0 - x else skip",
    "if x < 1 then x := 1 else skip",
)


@gen("wp-indirect")
def g_wp_indirect(g: G):
    from .lang import parse_term
    from .assertions import _fill_hole

    t = parse_term(g.choice(IDEMPOTENT_TERMS))
    i, j = 2, 3
    a_hole = Cmp("=", PVarAt("x", -1), LogicVar("v"))
    q = PostAssertion("r", Cmp("=", PVarAt("x", j), LogicVar("v")))
    inner_post = reindex_assertion(
        ProjRet(frozenset((i,)), "r", q.body), Reindexing.of({j: i})
    )
    body = Exists(
        ("v",), And(_fill_hole(a_hole, i), WPA(FinMap({i: t}), "r", inner_post))
    )
    goal = judgment([], WPA(FinMap({i: t}), "r", body))
    return goal, {"i": i, "j": j, "vars": ("v",), "cond": a_hole, "post": q}


DIVERGENT = While(IntLit(1), Skip())


@gen("UNSOUND-proj-no-side-condition")
def g_unsound_proj(g: G, canonical=False):
    if canonical:
        mt1 = FinMap({2: DIVERGENT})
        mt2 = FinMap({1: Skip()})
        q = FalseA()
    else:
        proj_out, keep = g.some_indices(2)
        mt1 = FinMap(
            {proj_out: g.choice([DIVERGENT, While(IntLit(1), Assign("x", Star())), g.loopfree_term(1)])}
        )
        mt2 = FinMap({keep: g.choice([Skip(), Assign("x", IntLit(g.val()))])})
        q = g.choice([FalseA(), Cmp("=", PVarAt("x", keep), Const(g.val() + 10))])
    I = mt1.supp()
    prem = Proj(I, WPA(disjoint_union(mt1, mt2), "r", q))
    goal = judgment([prem], WPA(mt2, "r", ProjRet(I, "r", q)))
    return goal, {"hyperterm": mt1}


@gen("UNSOUND-idx-pass-overlapping")
def g_unsound_idx_pass(g: G, canonical=False):
    if canonical:
        i, j, x = 1, 2, "x"
        t = Assign(x, IntLit(1))
        q = And(Cmp("=", PVarAt(x, i), Const(1)), Cmp("=", PVarAt(x, j), Const(0)))
        pre = Cmp("=", PVarAt(x, j), Const(0))
    else:
        i = g.choice([1, 2])
        j = g.choice([3, 4])
        x = g.var()
        t = Assign(x, IntLit(g.val()))
        q = And(
            Cmp("=", PVarAt(x, i), t.rhs if isinstance(t.rhs, Const) else Const(t.rhs.value)),
            Cmp("=", PVarAt(x, j), Const(g.val())),
        )
        pre = q.right
    mt = FinMap({i: t})
    pi = Reindexing.of({j: i})
    prem = ReindexA(WPA(mt, "r", q), pi)
    # reindex the precondition as the motivating derivation does
    pre2 = reindex_assertion(pre, pi)
    goal = judgment([pre2, prem], WPA(mt, "r", reindex_assertion(q, pi)))
    return goal, {"i": i, "j": j, "post": PostAssertion("r", q)}


# ---------------------------------------------------------------------------
# The fuzz loop


def _shape_of(rule_id, goal, params, cfg):
    """Shape fingerprint of a counterexample, for the paper-shape checks."""
    shape = {}
    if rule_id == "UNSOUND-proj-no-side-condition":
        mt1 = params["hyperterm"]
        from .lang import bigstep_enumerate, empty_store

        div = all(
            not bigstep_enumerate(t, empty_store(), cfg).outcomes
            for _i, t in mt1.items()
        )
        shape["projected_component_diverges"] = div
        shape["post_is_false"] = isinstance(goal.goal.body.body, FalseA)
    if rule_id == "UNSOUND-idx-pass-overlapping":
        mt = goal.goal.mt
        terms = [t for _i, t in mt.items()]
        shape["term_is_assignment"] = all(isinstance(t, Assign) for t in terms)
        body = goal.goal.body
        shape["post_reindexed_to_clash"] = isinstance(body, And)
    return shape


def fuzz_rule(rule_id: str, samples: int, seed: int, cfg: EnumConfig,
              max_attempts: int = None) -> FuzzReport:
    """Randomized soundness check of one catalog rule."""
    if rule_id not in RULES:
        raise ShapeMismatch(f"unknown rule {rule_id!r}")
    gen_fn = GENERATORS.get(rule_id)
    if gen_fn is None:
        raise CoverageError(f"no generator for rule {rule_id!r}")
    rng = random.Random(f"{seed}|{rule_id}")
    g = G(rng, cfg)
    report = FuzzReport(rule_id, seed, samples)
    budget = max_attempts or max(60, samples * 40)
    canonical_first = rule_id in NEGATIVE_RULES

    while report.conclusive < samples and report.attempts < budget:
        report.attempts += 1
        try:
            if canonical_first and report.attempts == 1:
                inst = gen_fn(g, canonical=True)
            else:
                inst = gen_fn(g)
        except TypeError:
            inst = gen_fn(g)
        if inst is None:
            continue
        goal, params = inst
        try:
            premises = apply_rule(rule_id, params, goal, cfg)
        except SideConditionViolated:
            continue
        except ShapeMismatch:
            continue
        statuses = []
        bad = False
        inconclusive = False
        for prem in premises:
            v = check_entailment(list(prem.context), prem.goal, cfg)
            statuses.append(v.status)
            if v.status == INVALID:
                bad = True
                break
            if v.status != VALID:
                inconclusive = True
        if bad:
            report.vacuous += 1
            continue
        if inconclusive:
            report.inconclusive += 1
            continue
        cv = check_entailment(list(goal.context), goal.goal, cfg)
        if cv.status == VALID:
            report.conclusive += 1
            report.passed += 1
        elif cv.status == INVALID:
            report.conclusive += 1
            report.counterexamples.append(
                Counterexample(
                    goal,
                    _params_note(params),
                    statuses,
                    _shape_of(rule_id, goal, params, cfg),
                )
            )
            if rule_id in NEGATIVE_RULES and len(report.counterexamples) >= 3:
                break
        else:
            report.inconclusive += 1

    if report.conclusive < samples and not (
        rule_id in NEGATIVE_RULES and report.counterexamples
    ):
        raise CoverageError(
            f"{rule_id}: only {report.conclusive}/{samples} conclusive instances "
            f"within {report.attempts} attempts"
        )
    return report


def _params_note(params: dict) -> str:
    bits = []
    for k in sorted(params):
        v = params[k]
        if isinstance(v, FinMap):
            from .assertions import pretty_hyper_term

            bits.append(f"{k}={pretty_hyper_term(v)}")
        elif isinstance(v, PostAssertion):
            bits.append(f"{k}=({pretty_assertion(v)})")
        elif isinstance(v, Reindexing):
            bits.append(f"{k}={v.pretty()}")
        elif isinstance(v, Term):
            bits.append(f"{k}={pretty_term(v)}")
        elif isinstance(v, Judgment):
            bits.append(f"{k}=({v.pretty()})")
        else:
            bits.append(f"{k}={v!r}")
    return ", ".join(bits)


def catalog_rules():
    """Every fuzzable rule, positives first, stable order."""
    names = sorted(GENERATORS)
    pos = [n for n in names if n not in NEGATIVE_RULES]
    neg = [n for n in names if n in NEGATIVE_RULES]
    return pos + neg
