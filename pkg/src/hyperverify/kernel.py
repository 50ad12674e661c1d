"""Proof kernel: judgments, the rule catalog, derivation checking, auto-proving.

A derivation node names a rule and its explicit parameters; `apply_rule`
recomputes the premises a rule application demands, so checking a tree never
searches (the only search is the bounded bijective-renaming match for
hypothesis leaves).  Semantic side conditions are discharged either by the
bounded oracle (stamping the report domain-relative) or by sub-derivations.
"""

from __future__ import annotations

import itertools
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
    is_loop_free,
    mods_term,
    pvar_term,
)
from .hyper import (
    FinMap,
    NotDisjoint,
    OverlapConflict,
    Reindexing,
    disjoint_union,
    mods_hyper,
    reindex_finmap,
    union,
)
from .assertions import (
    And,
    Cmp,
    Const,
    Exists,
    FalseA,
    Forall,
    HAssertion,
    Implies,
    LogicVar,
    Not,
    Or,
    PVarAt,
    PostAssertion,
    Proj,
    ProjRet,
    Projectable,
    Refines,
    ReindexA,
    RetAt,
    TrueA,
    WPA,
    and_all,
    alpha_eq,
    check_wellformed,
    flatten_and,
    free_logic_vars,
    idx_over,
    neq,
    or_all,
    pretty_assertion,
    pvar_over,
    reindex_assertion,
    rename_ret_binder,
    subst_logic_vars,
    subst_params,
    subst_rets,
    transform,
)
from .oracle import (
    INVALID,
    VALID,
    NotValid,
    check_entailment,
    check_refinement,
    check_triple,
    falsify,
    state_assertion,
    strongest_post,
    strongest_post_assertion,
)


class ShapeMismatch(Exception):
    pass


class SideConditionViolated(Exception):
    def __init__(self, name, detail=""):
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name
        self.detail = detail


@dataclass(frozen=True)
class Judgment:
    context: tuple
    goal: HAssertion

    def pretty(self) -> str:
        ctx = ", ".join(pretty_assertion(g) for g in self.context)
        return f"{ctx} |- {pretty_assertion(self.goal)}" if ctx else f"|- {pretty_assertion(self.goal)}"


def judgment(context, goal) -> Judgment:
    return Judgment(tuple(context), goal)


@dataclass
class Derivation:
    conclusion: Judgment
    rule: str
    params: dict = field(default_factory=dict)
    premises: list = field(default_factory=list)

    def is_leaf(self):
        return self.rule in ("axiom", "oracle", "hypothesis", "hole")


@dataclass
class CheckReport:
    ok: bool
    errors: list
    domain_relative: bool
    assumptions_used: list

    def to_json(self):
        return {
            "ok": self.ok,
            "errors": [{"path": p, "message": m} for p, m in self.errors],
            "domainRelative": self.domain_relative,
            "assumptionsUsed": sorted(self.assumptions_used),
        }


@dataclass(frozen=True)
class Hypothesis:
    name: str
    params: tuple  # parameter names acting as program variables in the scheme
    judgment: Judgment


# ---------------------------------------------------------------------------
# Helpers


def free_ret_binders(p: HAssertion) -> frozenset:
    acc = set()

    def walk(p, bound):
        if isinstance(p, Cmp):
            for e in (p.left, p.right):
                _walk_ie(e, bound)
            return
        if isinstance(p, (And, Or, Implies)):
            walk(p.left, bound)
            walk(p.right, bound)
            return
        if isinstance(p, Not):
            walk(p.body, bound)
            return
        if isinstance(p, (Exists, Forall)):
            walk(p.body, bound)
            return
        if isinstance(p, (Proj,)):
            walk(p.body, bound)
            return
        if isinstance(p, ProjRet):
            if p.binder not in bound:
                acc.add(p.binder)
            walk(p.body, bound)
            return
        if isinstance(p, ReindexA):
            walk(p.body, bound)
            return
        if isinstance(p, WPA):
            for _i, t in p.mt.items():
                _walk_t(t, bound)
            walk(p.body, bound | {p.binder})
            return
        if isinstance(p, Projectable):
            for _i, t in p.mt.items():
                _walk_t(t, bound)
            return

    def _walk_ie(e, bound):
        if isinstance(e, RetAt) and e.binder not in bound:
            acc.add(e.binder)
        elif hasattr(e, "left"):
            _walk_ie(e.left, bound)
            _walk_ie(e.right, bound)

    def _walk_t(t, bound):
        from .lang import meta_leaves

        for leaf in meta_leaves(t):
            if leaf.kind == "ret" and leaf.name not in bound:
                acc.add(leaf.name)

    walk(p, frozenset())
    return frozenset(acc)


def _fresh(base: str, used) -> str:
    if base not in used:
        return base
    k = 2
    while f"{base}{k}" in used:
        k += 1
    return f"{base}{k}"


def _expect_wpa(goal: Judgment) -> WPA:
    if not isinstance(goal.goal, WPA):
        raise ShapeMismatch(f"goal is not a WP assertion: {pretty_assertion(goal.goal)}")
    return goal.goal


def _reindex_ctx(ctx, pi):
    return tuple(reindex_assertion(g, pi) for g in ctx)


def _post_of(params, key="post") -> PostAssertion:
    q = params.get(key)
    if not isinstance(q, PostAssertion):
        raise ShapeMismatch(f"rule needs a post-assertion parameter {key!r}")
    return q


def ret_sub_map(body: HAssertion, binder: str, mapping: dict) -> HAssertion:
    """RetAt(binder, i) -> RetAt(mapping[i], i) for split/merge of nests."""
    return subst_rets(body, binder, lambda i: RetAt(mapping[i], i))


def post_reindexed(body: HAssertion, pi: Reindexing) -> HAssertion:
    return reindex_assertion(body, pi)


def guards_zero(binder: str, indices) -> HAssertion:
    return and_all([Cmp("=", RetAt(binder, i), Const(0)) for i in sorted(indices)])


def guards_nonzero(binder: str, indices) -> HAssertion:
    return and_all([neq(RetAt(binder, i), Const(0)) for i in sorted(indices)])


# ---------------------------------------------------------------------------
# Rule catalog

RULES = {}
PARAM_SCHEMAS = {}
NEGATIVE_RULES = ("UNSOUND-proj-no-side-condition", "UNSOUND-idx-pass-overlapping")
EQUIV_DIRS = ("fwd", "bwd")


def rule(name, schema=None):
    def deco(fn):
        RULES[name] = fn
        PARAM_SCHEMAS[name] = schema or {}
        return fn

    return deco


def apply_rule(rule_id: str, params: dict, goal: Judgment, cfg: EnumConfig = None):
    """Premise judgments demanded by applying rule_id (with params) to goal."""
    fn = RULES.get(rule_id)
    if fn is None:
        raise ShapeMismatch(f"unknown rule {rule_id!r}")
    return fn(params, goal, cfg)


# --- basic entailment laws (Fig. 3 selection plus or-elim / weaken) ----------


@rule("axiom")
def _axiom(params, goal, cfg):
    if goal.goal not in goal.context:
        raise ShapeMismatch("goal assertion is not among the assumptions")
    return []


@rule("cut", {"lemma": "assertion"})
def _cut(params, goal, cfg):
    lemma = params["lemma"]
    return [
        Judgment(goal.context, lemma),
        Judgment(goal.context + (lemma,), goal.goal),
    ]


@rule("impl-intro")
def _impl_intro(params, goal, cfg):
    if not isinstance(goal.goal, Implies):
        raise ShapeMismatch("goal is not an implication")
    return [Judgment(goal.context + (goal.goal.left,), goal.goal.right)]


@rule("impl-elim", {"hyp": "assertion"})
def _impl_elim(params, goal, cfg):
    a = params["hyp"]
    return [
        Judgment(goal.context, Implies(a, goal.goal)),
        Judgment(goal.context, a),
    ]


@rule("ex-elim", {"pos": "int", "names": "names"})
def _ex_elim(params, goal, cfg):
    pos = params["pos"]
    if not (0 <= pos < len(goal.context)) or not isinstance(goal.context[pos], Exists):
        raise ShapeMismatch("ex-elim position is not an existential assumption")
    ex = goal.context[pos]
    names = tuple(params.get("names") or ex.names)
    if len(names) != len(ex.names):
        raise ShapeMismatch("ex-elim witness name count mismatch")
    used = set()
    for g in goal.context + (goal.goal,):
        used |= free_logic_vars(g)
    clashes = [n for n in names if n in used]
    if clashes:
        raise SideConditionViolated("ex-elim freshness", f"names {clashes} not fresh")
    body = subst_logic_vars(ex.body, {o: LogicVar(n) for o, n in zip(ex.names, names)})
    ctx = goal.context[:pos] + (body,) + goal.context[pos + 1 :]
    return [Judgment(ctx, goal.goal)]


@rule("and-intro")
def _and_intro(params, goal, cfg):
    if not isinstance(goal.goal, And):
        raise ShapeMismatch("goal is not a conjunction")
    return [
        Judgment(goal.context, goal.goal.left),
        Judgment(goal.context, goal.goal.right),
    ]


@rule("or-elim", {"pos": "int"})
def _or_elim(params, goal, cfg):
    pos = params["pos"]
    if not (0 <= pos < len(goal.context)) or not isinstance(goal.context[pos], Or):
        raise ShapeMismatch("or-elim position is not a disjunctive assumption")
    d = goal.context[pos]
    left = goal.context[:pos] + (d.left,) + goal.context[pos + 1 :]
    right = goal.context[:pos] + (d.right,) + goal.context[pos + 1 :]
    return [Judgment(left, goal.goal), Judgment(right, goal.goal)]


@rule("weaken", {"keep": "intlist"})
def _weaken(params, goal, cfg):
    keep = params["keep"]
    if any(not (0 <= k < len(goal.context)) for k in keep):
        raise ShapeMismatch("weaken keeps an assumption that does not exist")
    ctx = tuple(goal.context[k] for k in keep)
    return [Judgment(ctx, goal.goal)]


# --- reindexing / projection laws (Fig. 4) -----------------------------------


@rule("idx", {"pi": "reindex", "judgment": "judgment"})
def _idx(params, goal, cfg):
    pi = params["pi"]
    prem = params["judgment"]
    want_ctx = _reindex_ctx(prem.context, pi)
    want_goal = reindex_assertion(prem.goal, pi)
    if tuple(goal.context) != want_ctx or goal.goal != want_goal:
        raise ShapeMismatch(
            "conclusion is not the reindexing of the given premise judgment"
        )
    return [prem]


def _idx_law(params, goal, cfg, match, distribute):
    """Shared shape for the idx distribution laws.

    bwd: goal is the wrapped form ReindexA(inner, pi); premise distributes one
    step.  fwd: goal is the distributed form; premise is the wrapped form
    (pi from params when not inferable).
    """
    d = params.get("dir", "bwd")
    if d == "bwd":
        if not isinstance(goal.goal, ReindexA) or not match(goal.goal.body):
            raise ShapeMismatch("goal is not a reindexed assertion of the right shape")
        return [Judgment(goal.context, distribute(goal.goal.body, goal.goal.pi))]
    pi = params.get("pi")
    inner = params.get("body")
    if pi is None or inner is None:
        raise ShapeMismatch("fwd direction needs pi and body parameters")
    if not match(inner):
        raise ShapeMismatch("body parameter has the wrong shape")
    if goal.goal != distribute(inner, pi):
        raise ShapeMismatch("goal is not the one-step distribution of body")
    return [Judgment(goal.context, ReindexA(inner, pi))]


@rule("idx-pvar", {"dir": "choice", "pi": "reindex", "body": "assertion"})
def _idx_pvar(params, goal, cfg):
    from .assertions import _reindex_iexpr

    return _idx_law(
        params,
        goal,
        cfg,
        lambda b: isinstance(b, Cmp),
        lambda b, pi: Cmp(b.op, _reindex_iexpr(b.left, pi), _reindex_iexpr(b.right, pi)),
    )


@rule("idx-ex", {"dir": "choice", "pi": "reindex", "body": "assertion"})
def _idx_ex(params, goal, cfg):
    return _idx_law(
        params,
        goal,
        cfg,
        lambda b: isinstance(b, Exists),
        lambda b, pi: Exists(b.names, ReindexA(b.body, pi)),
    )


@rule("idx-conj", {"dir": "choice", "pi": "reindex", "body": "assertion"})
def _idx_conj(params, goal, cfg):
    return _idx_law(
        params,
        goal,
        cfg,
        lambda b: isinstance(b, And),
        lambda b, pi: And(ReindexA(b.left, pi), ReindexA(b.right, pi)),
    )


@rule("idx-impl", {"dir": "choice", "pi": "reindex", "body": "assertion"})
def _idx_impl(params, goal, cfg):
    return _idx_law(
        params,
        goal,
        cfg,
        lambda b: isinstance(b, Implies),
        lambda b, pi: Implies(ReindexA(b.left, pi), ReindexA(b.right, pi)),
    )


@rule("idx-irrel", {"dir": "choice", "pi": "reindex"})
def _idx_irrel(params, goal, cfg):
    d = params.get("dir", "bwd")
    if d == "bwd":
        if not isinstance(goal.goal, ReindexA):
            raise ShapeMismatch("goal is not a reindexed assertion")
        body, pi = goal.goal.body, goal.goal.pi
    else:
        pi = params.get("pi")
        if pi is None:
            raise ShapeMismatch("fwd direction needs the pi parameter")
        body = goal.goal
    bad = [i for i in sorted(idx_over(body)) if pi.apply(i) != i]
    if bad:
        raise SideConditionViolated("idx-irrel", f"pi moves relevant indices {bad}")
    prem = body if d == "bwd" else ReindexA(body, pi)
    return [Judgment(goal.context, prem)]


@rule("proj", {"indices": "indexset"})
def _proj(params, goal, cfg):
    idxs = params["indices"]
    if not isinstance(goal.goal, Proj) or goal.goal.indices != idxs:
        raise ShapeMismatch("goal is not a projection over the given indices")
    ctx = []
    for g in goal.context:
        if not isinstance(g, Proj) or g.indices != idxs:
            raise ShapeMismatch("every assumption must be projected over the same indices")
        ctx.append(g.body)
    return [Judgment(tuple(ctx), goal.goal.body)]


@rule("proj-intro")
def _proj_intro(params, goal, cfg):
    if not isinstance(goal.goal, Proj):
        raise ShapeMismatch("goal is not a projection")
    return [Judgment(goal.context, goal.goal.body)]


@rule("proj-merge", {"dir": "choice", "split": "indexset"})
def _proj_merge(params, goal, cfg):
    d = params.get("dir", "bwd")
    if d == "bwd":
        g = goal.goal
        if not (isinstance(g, Proj) and isinstance(g.body, Proj)):
            raise ShapeMismatch("goal is not a nested projection")
        return [Judgment(goal.context, Proj(g.indices | g.body.indices, g.body.body))]
    split = params.get("split")
    g = goal.goal
    if not isinstance(g, Proj) or split is None or not split <= g.indices:
        raise ShapeMismatch("goal is not a projection containing the split")
    return [Judgment(goal.context, Proj(split, Proj(g.indices, g.body)))]


@rule("proj-irrel", {"indices": "indexset"})
def _proj_irrel(params, goal, cfg):
    idxs = params["indices"]
    overlap = idx_over(goal.goal) & idxs
    if overlap:
        raise SideConditionViolated(
            "idx(P) inter I = empty", f"indices {sorted(overlap)} are relevant to the goal"
        )
    return [Judgment(goal.context, Proj(idxs, goal.goal))]


@rule("proj-store", {"index": "int"})
def _proj_store(params, goal, cfg):
    i = params["index"]
    g = goal.goal
    if not (isinstance(g, Proj) and g.indices == frozenset((i,)) and isinstance(g.body, Exists)):
        raise ShapeMismatch("goal must be proj{i}. exists vs. (P /\\ pins)")
    ex = g.body
    parts = flatten_and(ex.body)
    pins = []
    rest = []
    names = list(ex.names)
    for a in parts:
        if (
            isinstance(a, Cmp)
            and a.op == "="
            and isinstance(a.left, PVarAt)
            and a.left.index == i
            and isinstance(a.right, LogicVar)
            and a.right.name in names
        ):
            pins.append(a)
        else:
            rest.append(a)
    pinned_vars = [a.right.name for a in pins]
    if sorted(pinned_vars) != sorted(names) or len(set(pinned_vars)) != len(names):
        raise ShapeMismatch("each quantified variable must pin exactly one x@i")
    body = and_all(rest) if rest else TrueA()
    prem = Exists(ex.names, body)
    if i in idx_over(prem):
        raise SideConditionViolated("i not in idx(P)", f"index {i} relevant to the body")
    return [Judgment(goal.context, prem)]


# --- structural WP rules (Fig. 5) ---------------------------------------------


@rule("wp-triv")
def _wp_triv(params, goal, cfg):
    w = _expect_wpa(goal)
    if not isinstance(w.body, TrueA):
        raise ShapeMismatch("wp-triv needs postcondition true")
    return []


@rule("wp-cons", {"post": "post", "names": "names"})
def _wp_cons(params, goal, cfg):
    w = _expect_wpa(goal)
    q = _post_of(params)
    supp = sorted(w.mt.supp())
    names = params.get("names")
    if names is None:
        used = set(free_logic_vars(q.body) | free_logic_vars(w.body))
        for g in goal.context:
            used |= free_logic_vars(g)
        names = []
        for i in supp:
            names.append(_fresh(f"_v{i}", used))
            used.add(names[-1])
    if len(names) != len(supp):
        raise ShapeMismatch("wp-cons needs one variable per component")
    vmap = {i: LogicVar(n) for i, n in zip(supp, names)}
    strong = subst_rets(rename_ret_binder(q.body, q.binder, w.binder), w.binder,
                        lambda i: vmap[i])
    weak = subst_rets(w.body, w.binder, lambda i: vmap[i])
    return [
        Judgment(goal.context, WPA(w.mt, q.binder, q.body)),
        Judgment((strong,), weak),
    ]


@rule("wp-all", {"dir": "choice"})
def _wp_all(params, goal, cfg):
    d = params.get("dir", "fwd")
    g = goal.goal
    if d == "fwd":
        if not (isinstance(g, WPA) and isinstance(g.body, Forall)):
            raise ShapeMismatch("goal is not wp {forall ...}")
        return [Judgment(goal.context, Forall(g.body.names, WPA(g.mt, g.binder, g.body.body)))]
    if not (isinstance(g, Forall) and isinstance(g.body, WPA)):
        raise ShapeMismatch("goal is not forall ... wp")
    w = g.body
    return [Judgment(goal.context, WPA(w.mt, w.binder, Forall(g.names, w.body)))]


@rule("wp-frame", {"frame": "assertion"})
def _wp_frame(params, goal, cfg):
    w = _expect_wpa(goal)
    f = params["frame"]
    if not (isinstance(w.body, And) and w.body.left == f):
        raise ShapeMismatch("goal postcondition must be frame /\\ Q")
    if w.binder in free_ret_binders(f):
        raise ShapeMismatch("frame must not mention the return binder")
    clash = {(x, i) for x, i in pvar_over(f)} & mods_hyper(w.mt)
    if clash:
        raise SideConditionViolated(
            "pvar(P) inter mods(t) = empty", f"frame reads modified slots {sorted(clash)}"
        )
    return [Judgment(goal.context, And(f, WPA(w.mt, w.binder, w.body.right)))]


@rule("wp-impl-r", {"dir": "choice"})
def _wp_impl_r(params, goal, cfg):
    d = params.get("dir", "fwd")
    g = goal.goal
    if d == "fwd":
        if not (isinstance(g, WPA) and isinstance(g.body, Implies)):
            raise ShapeMismatch("goal is not wp {P => Q}")
        w, f = g, g.body.left
        prem = Implies(f, WPA(w.mt, w.binder, w.body.right))
    else:
        if not (isinstance(g, Implies) and isinstance(g.right, WPA)):
            raise ShapeMismatch("goal is not P => wp")
        w, f = g.right, g.left
        prem = WPA(w.mt, w.binder, Implies(f, w.body))
    if w.binder in free_ret_binders(f):
        raise ShapeMismatch("hypothesis side must not mention the return binder")
    clash = {(x, i) for x, i in pvar_over(f)} & mods_hyper(w.mt)
    if clash:
        raise SideConditionViolated(
            "pvar(P) inter mods(t) = empty", f"hypothesis reads modified slots {sorted(clash)}"
        )
    return [Judgment(goal.context, prem)]


@rule("wp-subst", {"index": "int", "var": "name", "value": "iexpr"})
def _wp_subst(params, goal, cfg):
    w = _expect_wpa(goal)
    i, x, v = params["index"], params["var"], params["value"]
    t = w.mt.get(i)
    if t is None:
        raise ShapeMismatch(f"no component {i} in the hyper-term")
    if not isinstance(v, (Const, LogicVar)):
        raise ShapeMismatch("substituted value must be a literal or logic variable")
    if x in mods_term(t):
        raise SideConditionViolated("x not in mods(t)", f"{x} is modified by component {i}")
    from .lang import subst, subst_term_map

    t2 = subst(t, x, v.value) if isinstance(v, Const) else subst_term_map(
        t, {x: MetaVal("var", v.name)}
    )
    prem = And(Cmp("=", PVarAt(x, i), v), WPA(w.mt.set(i, t2), w.binder, w.body))
    return [Judgment(goal.context, prem)]


@rule("wp-idx", {"pi": "reindex", "hyperterm": "hyperterm", "post": "post"})
def _wp_idx(params, goal, cfg):
    w = _expect_wpa(goal)
    pi = params["pi"]
    mt = params["hyperterm"]
    q = _post_of(params)
    if not pi.is_bijective():
        raise SideConditionViolated("pi bijective", pi.pretty())
    # components move forward (k to pi(k)); as a map that is mt[pi^-1]
    if reindex_finmap(mt, pi.inverse()) != w.mt:
        raise ShapeMismatch("goal hyper-term is not the reindexing of the parameter")
    body = rename_ret_binder(q.body, q.binder, w.binder)
    if reindex_assertion(body, pi) != w.body:
        raise ShapeMismatch("goal postcondition is not the reindexing of the parameter")
    return [Judgment(goal.context, ReindexA(WPA(mt, w.binder, body), pi))]


# --- lockstep rules (Fig. 6) ----------------------------------------------------


@rule("wp-seq", {"dir": "choice", "binder": "name"})
def _wp_seq(params, goal, cfg):
    d = params.get("dir", "fwd")
    if d == "fwd":
        w = _expect_wpa(goal)
        firsts, seconds = {}, {}
        for i, t in w.mt.items():
            if not isinstance(t, Seq):
                raise ShapeMismatch(f"component {i} is not a sequence")
            firsts[i], seconds[i] = t.first, t.second
        if not firsts:
            raise ShapeMismatch("wp-seq needs a nonempty hyper-term")
        b = params.get("binder", "_s")
        if b == w.binder:
            raise ShapeMismatch("intermediate binder must differ from the goal binder")
        prem = WPA(FinMap(firsts), b, WPA(FinMap(seconds), w.binder, w.body))
        return [Judgment(goal.context, prem)]
    g = goal.goal
    if not (isinstance(g, WPA) and isinstance(g.body, WPA)):
        raise ShapeMismatch("goal is not a nested wp")
    outer, inner = g, g.body
    if outer.mt.supp() != inner.mt.supp() or not outer.mt.supp():
        raise ShapeMismatch("nested wp components must coincide")
    if outer.binder in free_ret_binders(inner.body) or outer.binder == inner.binder:
        raise ShapeMismatch("outer returns must be unused")
    seqs = FinMap({i: Seq(outer.mt.get(i), inner.mt.get(i)) for i in outer.mt.indices()})
    return [Judgment(goal.context, WPA(seqs, inner.binder, inner.body))]


@rule("wp-assign")
def _wp_assign(params, goal, cfg):
    w = _expect_wpa(goal)
    assigns = {}
    for i, t in w.mt.items():
        if not isinstance(t, Assign):
            raise ShapeMismatch(f"component {i} is not an assignment")
        assigns[i] = t
    supp = sorted(assigns)
    if not supp:
        raise ShapeMismatch("wp-assign needs a nonempty hyper-term")
    parts = flatten_and(w.body)
    if len(parts) < 1 + len(supp):
        raise ShapeMismatch("postcondition lacks the return-value equations")
    eqs = parts[-len(supp):]
    want = [Cmp("=", RetAt(w.binder, i), PVarAt(assigns[i].name, i)) for i in supp]
    if eqs != want:
        raise ShapeMismatch(
            "postcondition must end with r@i = x_i@i for each component (ascending)"
        )
    qbody = and_all(parts[: -len(supp)])
    for i in supp:
        if (assigns[i].name, i) in pvar_over(qbody):
            raise SideConditionViolated(
                "(x_i, i) not in pvar(Q)", f"({assigns[i].name}, {i})"
            )
    prem = WPA(FinMap({i: assigns[i].rhs for i in supp}), w.binder, qbody)
    return [Judgment(goal.context, prem)]


def _if_case_split(ifs: dict, binder: str, inner_binder: str, body: HAssertion) -> HAssertion:
    supp = sorted(ifs)
    cases = []
    for mask in range(2 ** len(supp)):
        then_set = {supp[k] for k in range(len(supp)) if mask & (1 << k)}
        atoms = []
        branchmap = {}
        for i in supp:
            if i in then_set:
                atoms.append(neq(RetAt(binder, i), Const(0)))
                branchmap[i] = ifs[i].then
            else:
                atoms.append(Cmp("=", RetAt(binder, i), Const(0)))
                branchmap[i] = ifs[i].orelse
        cases.append(and_all(atoms + [WPA(FinMap(branchmap), inner_binder, body)]))
    return or_all(cases)


@rule("wp-if", {"dir": "choice", "binder": "name", "hyperterm": "hyperterm"})
def _wp_if(params, goal, cfg):
    d = params.get("dir", "fwd")
    if d == "fwd":
        w = _expect_wpa(goal)
        ifs = {}
        for i, t in w.mt.items():
            if not isinstance(t, If):
                raise ShapeMismatch(f"component {i} is not a conditional")
            ifs[i] = t
        if not ifs:
            raise ShapeMismatch("wp-if needs a nonempty hyper-term")
        gb = params.get("binder", "_g")
        if gb == w.binder:
            raise ShapeMismatch("guard binder must differ from the goal binder")
        guards = FinMap({i: t.guard for i, t in ifs.items()})
        prem = WPA(guards, gb, _if_case_split(ifs, gb, w.binder, w.body))
        return [Judgment(goal.context, prem)]
    mt = params.get("hyperterm")
    if mt is None:
        raise ShapeMismatch("bwd direction needs the hyper-term of conditionals")
    ifs = {}
    for i, t in mt.items():
        if not isinstance(t, If):
            raise ShapeMismatch(f"component {i} is not a conditional")
        ifs[i] = t
    g = goal.goal
    if not isinstance(g, WPA):
        raise ShapeMismatch("goal is not a wp")
    inner = _find_inner_wpa(g.body)
    if inner is None:
        raise ShapeMismatch("goal postcondition lacks the case split")
    expected = _if_case_split(ifs, g.binder, inner.binder, inner.body)
    if g.body != expected or g.mt != FinMap({i: t.guard for i, t in ifs.items()}):
        raise ShapeMismatch("goal does not match the guard/case-split form")
    return [Judgment(goal.context, WPA(mt, inner.binder, inner.body))]


def _find_inner_wpa(body):
    # first WPA in the canonical case-split disjunction
    if isinstance(body, WPA):
        return body
    if isinstance(body, (And, Or)):
        return _find_inner_wpa(body.left) or _find_inner_wpa(body.right)
    return None


@rule("wp-while", {"invariant": "assertion", "binder": "name", "body_binder": "name"})
def _wp_while(params, goal, cfg):
    w = _expect_wpa(goal)
    loops = {}
    for i, t in w.mt.items():
        if not isinstance(t, While):
            raise ShapeMismatch(f"component {i} is not a loop")
        loops[i] = t
    if not loops:
        raise ShapeMismatch("wp-while needs a nonempty hyper-term")
    if w.binder in free_ret_binders(w.body):
        raise ShapeMismatch("loop postcondition must not read return values")
    inv = params["invariant"]
    gb = params.get("binder", "_g")
    tb = params.get("body_binder", "_b")
    supp = sorted(loops)
    guards = FinMap({i: loops[i].guard for i in supp})
    bodies = FinMap({i: loops[i].body for i in supp})
    prem_post = Or(
        And(guards_zero(gb, supp), w.body),
        And(guards_nonzero(gb, supp), WPA(bodies, tb, inv)),
    )
    return [
        Judgment(goal.context, inv),
        Judgment((inv,), WPA(guards, gb, prem_post)),
    ]


_UNFOLD_CACHE = {}


def _is_loop_unfolding(t1: Term, t2: Term) -> bool:
    def unfolds_to(w, u):
        return (
            isinstance(w, While)
            and isinstance(u, If)
            and u.guard == w.guard
            and u.then == Seq(w.body, w)
            and u.orelse == Skip()
        )

    return unfolds_to(t1, t2) or unfolds_to(t2, t1)


@rule("wp-refine", {"index": "int", "term": "term", "via": "choice"})
def _wp_refine(params, goal, cfg):
    w = _expect_wpa(goal)
    i = params["index"]
    t2 = params["term"]
    via = params.get("via", "unfold")
    t1 = w.mt.get(i)
    if t1 is None:
        raise ShapeMismatch(f"no component {i} in the hyper-term")
    if via == "unfold":
        if not _is_loop_unfolding(t1, t2):
            raise SideConditionViolated(
                "refinement", "terms are not a loop/unfolding pair"
            )
    elif via == "oracle":
        if cfg is None:
            raise SideConditionViolated("refinement", "oracle discharge needs a config")
        v = check_refinement(t1, t2, cfg)
        if v.status != VALID:
            raise SideConditionViolated("refinement", f"oracle verdict: {v.status}")
    else:
        raise ShapeMismatch(f"unknown refinement discharge {via!r}")
    return [Judgment(goal.context, WPA(w.mt.set(i, t2), w.binder, w.body))]


# --- hyper-structure rules (Fig. 7) ---------------------------------------------


@rule("wp-nest", {"dir": "choice", "left": "indexset", "binders": "names", "binder": "name"})
def _wp_nest(params, goal, cfg):
    d = params.get("dir", "fwd")
    if d == "fwd":
        w = _expect_wpa(goal)
        left = params["left"]
        if not left <= w.mt.supp():
            raise ShapeMismatch("left split is not a subset of the support")
        binders = params.get("binders") or ("_n1", "_n2")
        v, u = binders
        if v == u:
            raise ShapeMismatch("nest binders must be distinct")
        mt1 = w.mt.restrict(left)
        mt2 = w.mt.without(left)
        mapping = {i: (v if i in left else u) for i in w.mt.indices()}
        body = subst_rets(w.body, w.binder, lambda i: RetAt(mapping[i], i))
        if v in free_ret_binders(w.body) or u in free_ret_binders(w.body):
            raise ShapeMismatch("nest binders capture existing return binders")
        prem = WPA(mt1, v, WPA(mt2, u, body))
        return [Judgment(goal.context, prem)]
    g = goal.goal
    if not (isinstance(g, WPA) and isinstance(g.body, WPA)):
        raise ShapeMismatch("goal is not a nested wp")
    inner = g.body
    overlap = g.mt.supp() & inner.mt.supp()
    if overlap:
        raise SideConditionViolated("disjoint union", f"overlap at {sorted(overlap)}")
    b = params.get("binder", "_m")
    free = free_ret_binders(inner.body) - {g.binder, inner.binder}
    if b in free:
        raise ShapeMismatch("merge binder captures an existing return binder")
    body = subst_rets(inner.body, inner.binder, lambda i: RetAt(b, i))
    body = subst_rets(body, g.binder, lambda i: RetAt(b, i))
    prem = WPA(disjoint_union(g.mt, inner.mt), b, body)
    return [Judgment(goal.context, prem)]


@rule("wp-conj", {"left": "indexset", "right": "indexset"})
def _wp_conj(params, goal, cfg):
    w = _expect_wpa(goal)
    left, right = params["left"], params["right"]
    if left | right != w.mt.supp():
        raise ShapeMismatch("split does not cover the support")
    if not isinstance(w.body, And):
        raise ShapeMismatch("postcondition must be a conjunction")
    q1, q2 = w.body.left, w.body.right
    mt1, mt2 = w.mt.restrict(left), w.mt.restrict(right)
    bad1 = idx_over(q1) & mt2.supp() - mt1.supp()
    if bad1:
        raise SideConditionViolated(
            "idx(Q1) inter supp(t2) subset supp(t1)", f"indices {sorted(bad1)}"
        )
    bad2 = idx_over(q2) & mt1.supp() - mt2.supp()
    if bad2:
        raise SideConditionViolated(
            "idx(Q2) inter supp(t1) subset supp(t2)", f"indices {sorted(bad2)}"
        )
    return [
        Judgment(goal.context, WPA(mt1, w.binder, q1)),
        Judgment(goal.context, WPA(mt2, w.binder, q2)),
    ]


@rule("wp-proj", {"hyperterm": "hyperterm"})
def _wp_proj(params, goal, cfg):
    w = _expect_wpa(goal)
    mt1 = params["hyperterm"]
    if not isinstance(w.body, ProjRet):
        raise ShapeMismatch("goal postcondition must be a return projection")
    pr_ = w.body
    if pr_.binder != w.binder:
        raise ShapeMismatch("projection must rebind the goal's return binder")
    if mt1.supp() != pr_.indices:
        raise SideConditionViolated(
            "I = supp(t1)", f"{sorted(mt1.supp())} vs {sorted(pr_.indices)}"
        )
    both = disjoint_union(mt1, w.mt)  # raises NotDisjoint on overlap
    prem = Proj(
        pr_.indices,
        Implies(
            Projectable(w.mt),
            And(Projectable(mt1), WPA(both, w.binder, pr_.body)),
        ),
    )
    return [Judgment(goal.context, prem)]


# --- reindexing rules (Fig. 8) ---------------------------------------------------


@rule("wp-idx-post", {"i": "int", "j": "int", "post": "post"})
def _wp_idx_post(params, goal, cfg):
    w = _expect_wpa(goal)
    i, j = params["i"], params["j"]
    q = _post_of(params)
    if j in w.mt.supp():
        raise SideConditionViolated("j not in supp(t)", str(j))
    for g in goal.context:
        if j in idx_over(g):
            raise SideConditionViolated("j not in idx(Gamma)", str(j))
    body = rename_ret_binder(q.body, q.binder, w.binder)
    if reindex_assertion(body, Reindexing.of({j: i})) != w.body:
        raise ShapeMismatch("goal postcondition is not the [j->i] reindexing of the parameter")
    return [Judgment(goal.context, WPA(w.mt, w.binder, body))]


def _reindexed_wpa_premise(goal, mt_prem, binder, body, pi):
    return Judgment(goal.context, ReindexA(WPA(mt_prem, binder, body), pi))


@rule("wp-idx-swap", {"i": "int", "j": "int", "post": "post"})
def _wp_idx_swap(params, goal, cfg):
    w = _expect_wpa(goal)
    i, j = params["i"], params["j"]
    q = _post_of(params)
    t = w.mt.get(i)
    if t is None:
        raise ShapeMismatch(f"no component {i} in the hyper-term")
    if j in w.mt.supp():
        raise ShapeMismatch(f"index {j} already in the support")
    body = rename_ret_binder(q.body, q.binder, w.binder)
    if i in idx_over(PostAssertion(w.binder, body)):
        raise SideConditionViolated("i not in idx(Q)", str(i))
    if reindex_assertion(body, Reindexing.of({j: i})) != w.body:
        raise ShapeMismatch("goal postcondition is not the [j->i] reindexing of the parameter")
    mt_prem = w.mt.without((i,)).set(j, t)
    return [_reindexed_wpa_premise(goal, mt_prem, w.binder, body, Reindexing.of({j: i}))]


@rule("wp-idx-pass", {"i": "int", "j": "int", "post": "post"})
def _wp_idx_pass(params, goal, cfg):
    w = _expect_wpa(goal)
    i, j = params["i"], params["j"]
    q = _post_of(params)
    if i in w.mt.supp() or j in w.mt.supp():
        raise SideConditionViolated("i, j not in supp(t)", f"{i}, {j}")
    body = rename_ret_binder(q.body, q.binder, w.binder)
    if reindex_assertion(body, Reindexing.of({j: i})) != w.body:
        raise ShapeMismatch("goal postcondition is not the [j->i] reindexing of the parameter")
    return [_reindexed_wpa_premise(goal, w.mt, w.binder, body, Reindexing.of({j: i}))]


@rule("wp-idx-merge", {"i": "int", "j": "int", "post": "post"})
def _wp_idx_merge(params, goal, cfg):
    w = _expect_wpa(goal)
    i, j = params["i"], params["j"]
    q = _post_of(params)
    t = w.mt.get(i)
    if t is None:
        raise ShapeMismatch(f"no component {i} in the hyper-term")
    if j in w.mt.supp():
        raise ShapeMismatch(f"index {j} already in the support")
    body = rename_ret_binder(q.body, q.binder, w.binder)
    if reindex_assertion(body, Reindexing.of({j: i})) != w.body:
        raise ShapeMismatch("goal postcondition is not the [j->i] reindexing of the parameter")
    mt_prem = w.mt.set(j, t)
    return [_reindexed_wpa_premise(goal, mt_prem, w.binder, body, Reindexing.of({j: i}))]


# --- primitive rules (Fig. 9) -----------------------------------------------------


@rule("wp-prim-eval", {"binders": "names"})
def _wp_prim_eval(params, goal, cfg):
    w = _expect_wpa(goal)
    if w.mt.arity() != 1:
        raise ShapeMismatch("wp-prim-eval works on a single component")
    [(i, t)] = w.mt.items()
    if not isinstance(t, BinOp):
        raise ShapeMismatch("component is not a primitive operation")
    binders = params.get("binders") or ("_e1", "_e2")
    v1, v2 = binders
    if len({v1, v2, w.binder}) != 3:
        raise ShapeMismatch("wp-prim-eval binders must be distinct")
    inner = WPA(
        FinMap({i: BinOp(t.op, MetaVal("ret", v1, i), MetaVal("ret", v2, i))}),
        w.binder,
        w.body,
    )
    prem = WPA(FinMap({i: t.left}), v1, WPA(FinMap({i: t.right}), v2, inner))
    return [Judgment(goal.context, prem)]


_OPFUNS = {"+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
           "<": lambda a, b: int(a < b), "<=": lambda a, b: int(a <= b),
           "=": lambda a, b: int(a == b)}


@rule("wp-prim-op")
def _wp_prim_op(params, goal, cfg):
    w = _expect_wpa(goal)
    if w.mt.arity() != 1:
        raise ShapeMismatch("wp-prim-op works on a single component")
    [(i, t)] = w.mt.items()
    if not (isinstance(t, BinOp) and isinstance(t.left, IntLit) and isinstance(t.right, IntLit)):
        raise ShapeMismatch("component must be an operation on literals")
    want = Cmp("=", RetAt(w.binder, i), Const(_OPFUNS[t.op](t.left.value, t.right.value)))
    if w.body != want:
        raise ShapeMismatch("postcondition must state the computed value")
    return []


def _value_leaf_iexpr(t: Term):
    if isinstance(t, IntLit):
        return Const(t.value)
    if isinstance(t, MetaVal):
        return LogicVar(t.name) if t.kind == "var" else RetAt(t.name, t.index)
    return None


@rule("wp-val")
def _wp_val(params, goal, cfg):
    w = _expect_wpa(goal)
    if w.mt.arity() != 1:
        raise ShapeMismatch("wp-val works on a single component")
    [(i, t)] = w.mt.items()
    e = _value_leaf_iexpr(t)
    if e is None:
        raise ShapeMismatch("component is not a value")
    if w.body != Cmp("=", RetAt(w.binder, i), e):
        raise ShapeMismatch("postcondition must equate the return with the value")
    return []


@rule("wp-var")
def _wp_var(params, goal, cfg):
    w = _expect_wpa(goal)
    if w.mt.arity() != 1:
        raise ShapeMismatch("wp-var works on a single component")
    [(i, t)] = w.mt.items()
    if not isinstance(t, Var):
        raise ShapeMismatch("component is not a variable read")
    if w.body != Cmp("=", RetAt(w.binder, i), PVarAt(t.name, i)):
        raise ShapeMismatch("postcondition must equate the return with the variable")
    return []


# --- projectability rules (Fig. 10) -------------------------------------------------


@rule("proj-elim")
def _proj_elim(params, goal, cfg):
    w = _expect_wpa(goal)
    return [Judgment(goal.context, Implies(Projectable(w.mt), goal.goal))]


@rule("wp-elim", {"dir": "choice", "binder": "name"})
def _wp_elim(params, goal, cfg):
    d = params.get("dir", "fwd")
    g = goal.goal
    if d == "fwd":
        if not isinstance(g, WPA):
            raise ShapeMismatch("goal is not a wp")
        if g.binder in free_ret_binders(g.body):
            raise ShapeMismatch("postcondition must ignore the return values")
        p = g.body
        clash = {(x, i) for x, i in pvar_over(p)} & mods_hyper(g.mt)
        if clash:
            raise SideConditionViolated(
                "pvar(P) inter mods(t) = empty", f"{sorted(clash)}"
            )
        return [Judgment(goal.context, Implies(Projectable(g.mt), p))]
    if not (isinstance(g, Implies) and isinstance(g.left, Projectable)):
        raise ShapeMismatch("goal is not projectable => P")
    mt, p = g.left.mt, g.right
    clash = {(x, i) for x, i in pvar_over(p)} & mods_hyper(mt)
    if clash:
        raise SideConditionViolated("pvar(P) inter mods(t) = empty", f"{sorted(clash)}")
    b = params.get("binder", "_r")
    if b in free_ret_binders(p):
        raise ShapeMismatch("binder captures an existing return binder")
    return [Judgment(goal.context, WPA(mt, b, p))]


# --- derived rules (Fig. 11) ---------------------------------------------------------

DERIVED_RULES = ("wp-skip", "wp-empty", "wp-impl-l", "wp-rename", "wp-seq-plus", "wp-indirect")


@rule("wp-skip", {"dir": "choice", "index": "int"})
def _wp_skip(params, goal, cfg):
    d = params.get("dir", "fwd")
    w = _expect_wpa(goal)
    i = params["index"]
    if d == "fwd":
        if w.mt.get(i) != Skip():
            raise ShapeMismatch(f"component {i} is not skip")
        if any(
            b == w.binder and k == i
            for b, k in _ret_atom_indices(w.body, w.binder)
        ):
            raise ShapeMismatch("postcondition reads the skip component's return")
        return [Judgment(goal.context, WPA(w.mt.without((i,)), w.binder, w.body))]
    if i in w.mt.supp():
        raise ShapeMismatch(f"index {i} already in the support")
    return [Judgment(goal.context, WPA(w.mt.set(i, Skip()), w.binder, w.body))]


def _ret_atom_indices(body, binder):
    acc = []

    def f_iexpr(e, shadow):
        if isinstance(e, RetAt) and e.binder == binder and binder not in shadow:
            acc.append((e.binder, e.index))
        return None

    def f_term(t, shadow):
        if isinstance(t, MetaVal) and t.kind == "ret" and t.name == binder and binder not in shadow:
            acc.append((t.name, t.index))
        return None

    transform(body, f_iexpr, f_term)
    return acc


@rule("wp-empty", {"dir": "choice", "binder": "name"})
def _wp_empty(params, goal, cfg):
    d = params.get("dir", "intro")
    g = goal.goal
    if d == "intro":
        if not (isinstance(g, WPA) and g.mt.is_empty()):
            raise ShapeMismatch("goal is not wp [] {P}")
        return [Judgment(goal.context, g.body)]
    b = params.get("binder", "_r")
    if b in free_ret_binders(g):
        raise ShapeMismatch("binder captures an existing return binder")
    return [Judgment(goal.context, WPA(FinMap(), b, g))]


@rule("wp-impl-l", {"post": "post"})
def _wp_impl_l(params, goal, cfg):
    g = goal.goal
    if not (isinstance(g, Implies) and isinstance(g.left, WPA)):
        raise ShapeMismatch("goal is not (wp {Q}) => P")
    w, p = g.left, g.right
    if w.binder in free_ret_binders(p):
        raise ShapeMismatch("conclusion side must not mention the return binder")
    clash = {(x, i) for x, i in pvar_over(p)} & mods_hyper(w.mt)
    if clash:
        raise SideConditionViolated("pvar(P) inter mods(t) = empty", f"{sorted(clash)}")
    return [
        Judgment(goal.context, Projectable(w.mt)),
        Judgment(goal.context, WPA(w.mt, w.binder, Implies(w.body, p))),
    ]


@rule("wp-rename", {"pi": "reindex", "judgment": "judgment"})
def _wp_rename(params, goal, cfg):
    pi = params["pi"]
    prem = params["judgment"]
    if not pi.is_bijective():
        raise SideConditionViolated("pi bijective", pi.pretty())
    if not isinstance(prem.goal, WPA):
        raise ShapeMismatch("premise judgment must conclude a wp")
    pw = prem.goal
    want_goal = WPA(reindex_finmap(pw.mt, pi.inverse()), pw.binder,
                    reindex_assertion(pw.body, pi))
    if tuple(goal.context) != _reindex_ctx(prem.context, pi) or goal.goal != want_goal:
        raise ShapeMismatch("conclusion is not the renaming of the premise judgment")
    return [prem]


@rule("wp-seq-plus", {"seqs": "indexset", "extras": "indexset", "binder": "name"})
def _wp_seq_plus(params, goal, cfg):
    w = _expect_wpa(goal)
    seqs = params["seqs"]
    extras1 = params.get("extras", frozenset())
    b = params.get("binder", "_s")
    if b == w.binder:
        raise ShapeMismatch("intermediate binder must differ from the goal binder")
    if not seqs or not seqs <= w.mt.supp():
        raise ShapeMismatch("seqs must be a nonempty subset of the support")
    firsts, seconds = {}, {}
    for i in sorted(seqs):
        t = w.mt.get(i)
        if not isinstance(t, Seq):
            raise ShapeMismatch(f"component {i} is not a sequence")
        firsts[i], seconds[i] = t.first, t.second
    rest = w.mt.without(seqs)
    if not extras1 <= rest.supp():
        raise ShapeMismatch("extras must name non-sequence components")
    mt1 = rest.restrict(extras1)
    mt2 = rest.without(extras1)
    prem = WPA(
        union(FinMap(firsts), mt1),
        b,
        WPA(union(FinMap(seconds), mt2), w.binder, w.body),
    )
    return [Judgment(goal.context, prem)]


@rule(
    "wp-indirect",
    {"i": "int", "j": "int", "vars": "names", "cond": "assertion", "post": "post"},
)
def _wp_indirect(params, goal, cfg):
    from .assertions import _fill_hole

    w = _expect_wpa(goal)
    i, j = params["i"], params["j"]
    vs = tuple(params["vars"])
    a_hole = params["cond"]
    q = _post_of(params)
    t1 = w.mt.get(i)
    if t1 is None:
        raise ShapeMismatch(f"no component {i} in the hyper-term")
    mt_rest = w.mt.without((i,))
    if j in w.mt.supp():
        raise SideConditionViolated("j not in supp(t)", str(j))
    for g in goal.context:
        if j in idx_over(g):
            raise SideConditionViolated("j not in idx(Gamma)", str(j))
    body = w.body
    if not (isinstance(body, Exists) and body.names == vs and isinstance(body.body, And)):
        raise ShapeMismatch("goal postcondition must be exists vs. A(vs)@i /\\ wp ...")
    a_at_i, inner = body.body.left, body.body.right
    if a_at_i != _fill_hole(a_hole, i):
        raise ShapeMismatch("left conjunct must be the condition at index i")
    if not (isinstance(inner, WPA) and inner.mt.arity() == 1 and inner.mt.get(i) is not None):
        raise ShapeMismatch("right conjunct must be a wp over component i")
    t2 = inner.mt.get(i)
    want_inner_post = reindex_assertion(
        ProjRet(frozenset((i,)), inner.binder,
                rename_ret_binder(q.body, q.binder, inner.binder)),
        Reindexing.of({j: i}),
        normalize=True,
    )
    if inner.body != want_inner_post:
        raise ShapeMismatch("inner postcondition must be (projpost{i}. Q)[j->i]")
    prem1 = Judgment(
        goal.context,
        WPA(FinMap({i: t1}), "_p", Exists(vs, _fill_hole(a_hole, i))),
    )
    big = disjoint_union(FinMap({i: t1, j: t2}), mt_rest)
    prem2 = Judgment(
        goal.context + (_fill_hole(a_hole, j),),
        WPA(big, q.binder, Implies(_fill_hole(a_hole, i), q.body)),
    )
    return [prem1, prem2]


# --- negative catalog (fuzz-only) ------------------------------------------------------


@rule("UNSOUND-proj-no-side-condition", {"hyperterm": "hyperterm"})
def _unsound_proj(params, goal, cfg):
    w = _expect_wpa(goal)
    mt1 = params["hyperterm"]
    if not isinstance(w.body, ProjRet):
        raise ShapeMismatch("goal postcondition must be a return projection")
    pr_ = w.body
    if mt1.supp() != pr_.indices:
        raise SideConditionViolated("I = supp(t1)", "support mismatch")
    both = disjoint_union(mt1, w.mt)
    # the projectability conjunct is deliberately dropped: this rule is unsound
    prem = Proj(pr_.indices, WPA(both, w.binder, pr_.body))
    return [Judgment(goal.context, prem)]


@rule("UNSOUND-idx-pass-overlapping", {"i": "int", "j": "int", "post": "post"})
def _unsound_idx_pass(params, goal, cfg):
    w = _expect_wpa(goal)
    i, j = params["i"], params["j"]
    q = _post_of(params)
    if i not in w.mt.supp() or j in w.mt.supp():
        raise ShapeMismatch("needs i in supp(t), j outside")
    body = rename_ret_binder(q.body, q.binder, w.binder)
    if reindex_assertion(body, Reindexing.of({j: i})) != w.body:
        raise ShapeMismatch("goal postcondition is not the [j->i] reindexing of the parameter")
    return [_reindexed_wpa_premise(goal, w.mt, w.binder, body, Reindexing.of({j: i}))]


# ---------------------------------------------------------------------------
# Derivation checking


def _hypothesis_match(node: Judgment, hyp: Hypothesis, params: dict):
    """Instantiate a hypothesis scheme and match it against a judgment.

    Arguments map scheme parameters to IExprs; then a bijective index
    renaming (given, or searched smallest-lexicographic-first) and
    alpha-renaming of binders / free logic variables must make the hypothesis
    goal equal the node goal, with every hypothesis assumption alpha-matching
    some node assumption.
    """
    args = params.get("args", {})
    extra = set(args) - set(hyp.params)
    if extra:
        return f"unknown hypothesis parameters {sorted(extra)}"
    mapping = {p: args[p] for p in hyp.params if p in args}
    hgoal = subst_params(hyp.judgment.goal, mapping)
    hctx = tuple(subst_params(g, mapping) for g in hyp.judgment.context)

    from .assertions import rename_indices

    def complete(mapping: dict) -> Reindexing:
        # extend an injective partial index map to a permutation of the union
        m = dict(mapping)
        universe = sorted(set(m) | set(m.values()))
        unmapped_src = [i for i in universe if i not in m]
        unhit_dst = [i for i in universe if i not in set(m.values())]
        m.update(zip(unmapped_src, unhit_dst))
        return Reindexing.of(m)

    if params.get("pi") is not None:
        pi0 = params["pi"]
        candidates = [pi0 if pi0.is_bijective() else complete(pi0.mapping())]
    else:
        hyp_idx = sorted(
            idx_over(hgoal) | {i for g in hctx for i in idx_over(g)}
        )
        node_idx = sorted(
            idx_over(node.goal) | {i for g in node.context for i in idx_over(g)}
        )
        candidates = [Reindexing.identity()]
        if len(hyp_idx) <= len(node_idx):
            for perm in itertools.permutations(node_idx, len(hyp_idx)):
                m = dict(zip(hyp_idx, perm))
                if len(set(m.values())) != len(m):
                    continue
                pi = complete(m)
                if pi.is_bijective() and not pi.is_identity():
                    candidates.append(pi)
        candidates.sort(key=lambda pi: pi.swaps)

    for pi in candidates:
        if not pi.is_bijective():
            continue
        tg = rename_indices(hgoal, pi)
        if not alpha_eq(tg, node.goal, match_free_logic=True):
            continue
        ok = True
        for g in hctx:
            tg2 = rename_indices(g, pi)
            if not any(alpha_eq(tg2, c, match_free_logic=True) for c in node.context):
                ok = False
                break
        if ok:
            return None
    return "no instantiation of the hypothesis matches this goal"


def check_derivation(d: Derivation, hypotheses=None, cfg: EnumConfig = None) -> CheckReport:
    """Re-run every rule application and discharge every leaf of the tree."""
    hypotheses = hypotheses or {}
    errors = []
    domain_relative = [False]
    assumptions = set()

    def walk(node: Derivation, path: str):
        goal = node.conclusion
        if node.rule == "hole":
            errors.append((path, "unfilled premise hole"))
            return
        if node.rule == "oracle":
            if cfg is None:
                errors.append((path, "oracle leaf without an enumeration config"))
                return
            v = check_entailment(list(goal.context), goal.goal, cfg)
            domain_relative[0] = True
            if v.status != VALID:
                errors.append((path, f"oracle: entailment is {v.status}: {goal.pretty()}"))
            return
        if node.rule == "hypothesis":
            name = node.params.get("name")
            hyp = hypotheses.get(name)
            if hyp is None:
                errors.append((path, f"unknown hypothesis {name!r}"))
                return
            err = _hypothesis_match(goal, hyp, node.params)
            if err:
                errors.append((path, f"hypothesis {name}: {err}"))
            else:
                assumptions.add(name)
            return
        if node.rule in NEGATIVE_RULES:
            errors.append((path, f"rule {node.rule} is fuzz-only and unsound"))
            return
        try:
            premises = apply_rule(node.rule, node.params, goal, cfg)
        except (ShapeMismatch, SideConditionViolated, OverlapConflict, NotDisjoint) as e:
            errors.append((path, f"{node.rule}: {e}"))
            return
        if node.rule == "wp-refine" and node.params.get("via") == "oracle":
            domain_relative[0] = True
        if len(premises) != len(node.premises):
            errors.append(
                (path, f"{node.rule}: expected {len(premises)} premises, tree has {len(node.premises)}")
            )
            return
        for k, (want, child) in enumerate(zip(premises, node.premises)):
            if child.conclusion != want:
                errors.append(
                    (
                        f"{path}.{k}",
                        f"premise mismatch under {node.rule}: expected {want.pretty()}, "
                        f"found {child.conclusion.pretty()}",
                    )
                )
                continue
            walk(child, f"{path}.{k}")

    walk(d, "0")
    return CheckReport(not errors, errors, domain_relative[0], sorted(assumptions))


def elaborate(goal: Judgment, tree, hypotheses=None, cfg: EnumConfig = None) -> Derivation:
    """Build a Derivation from a script-style tree (rule, params, children).

    Conclusions flow top-down: each node's premises are computed by
    apply_rule, so the script never restates intermediate judgments.
    Structural errors raise immediately with the node path.
    """

    def build(goal, t, path):
        rule_id, params, children = t
        node = Derivation(goal, rule_id, params, [])
        if rule_id in ("axiom", "oracle", "hypothesis"):
            if children:
                raise ShapeMismatch(f"{path}: leaf {rule_id} takes no premises")
            return node
        if rule_id in NEGATIVE_RULES:
            raise SideConditionViolated(
                f"{path}: {rule_id}", "negative-catalog rules cannot be used in proofs"
            )
        try:
            premises = apply_rule(rule_id, params, goal, cfg)
        except (ShapeMismatch, SideConditionViolated, OverlapConflict, NotDisjoint) as e:
            raise type(e)(f"{path}: {rule_id}: {e}") from None
        if len(children) != len(premises):
            got = "\n".join("  " + p.pretty() for p in premises)
            raise ShapeMismatch(
                f"{path}: {rule_id} demands {len(premises)} premises, script has "
                f"{len(children)}; premises are:\n{got}"
            )
        node.premises = [
            build(p, c, f"{path}.{k}") for k, (p, c) in enumerate(zip(premises, children))
        ]
        return node

    return build(goal, tree, "0")


# ---------------------------------------------------------------------------
# Derived-rule expansion into primitive skeletons


def hole(goal: Judgment) -> Derivation:
    return Derivation(goal, "hole")


def _node(rule_id, params, goal, children_or_none=None, cfg=None) -> Derivation:
    premises = apply_rule(rule_id, params, goal, cfg)
    kids = children_or_none
    if kids is None:
        kids = [hole(p) for p in premises]
    assert len(kids) == len(premises), f"{rule_id}: arity mismatch"
    for k, p in zip(kids, premises):
        assert k.conclusion == p, (
            f"{rule_id}: child concludes {k.conclusion.pretty()}, wants {p.pretty()}"
        )
    return Derivation(goal, rule_id, params, list(kids))


def _oracle_leaf(goal: Judgment) -> Derivation:
    return Derivation(goal, "oracle")


def _axiom_leaf(goal: Judgment) -> Derivation:
    return Derivation(goal, "axiom")


def derived_rule_expand(rule_id: str, params: dict, goal: Judgment, cfg=None) -> Derivation:
    """Primitive-rule skeleton for a Fig.-11-style derived rule application.

    The returned tree has `hole` leaves exactly at the derived rule's own
    premises (in apply_rule order); other obligations are closed with
    primitive rules or oracle-discharged entailment leaves.
    """
    if rule_id not in DERIVED_RULES:
        raise ShapeMismatch(f"{rule_id} is not a derived rule")
    premises = apply_rule(rule_id, params, goal, cfg)
    builder = _EXPANSIONS[rule_id]
    return builder(params, goal, premises, cfg)


def _expand_wp_empty(params, goal, premises, cfg):
    d = params.get("dir", "intro")
    [prem] = premises
    n = len(goal.context)
    if d == "intro":
        # wp [] {P} <- projectable [] => P (wp-elim) <- P (impl-intro + weaken)
        imp = Judgment(goal.context, Implies(Projectable(FinMap()), goal.goal.body))
        inner = _node(
            "impl-intro",
            {},
            imp,
            [
                _node(
                    "weaken",
                    {"keep": list(range(n))},
                    Judgment(goal.context + (Projectable(FinMap()),), goal.goal.body),
                    [hole(prem)],
                )
            ],
        )
        return _node("wp-elim", {"dir": "fwd"}, goal, [inner])
    # P from wp [] {P}: cut the wp in; then projectable [] => P by wp-elim,
    # and modus ponens against the oracle-trivial projectable [].
    b = params.get("binder", "_r")
    wp = WPA(FinMap(), b, goal.goal)
    ctx2 = goal.context + (wp,)
    imp_j = Judgment(ctx2, Implies(Projectable(FinMap()), goal.goal))
    elim = _node(
        "wp-elim",
        {"dir": "bwd", "binder": b},
        imp_j,
        [_axiom_leaf(Judgment(ctx2, wp))],
    )
    inner = _node(
        "impl-elim",
        {"hyp": Projectable(FinMap())},
        Judgment(ctx2, goal.goal),
        [elim, _oracle_leaf(Judgment(ctx2, Projectable(FinMap())))],
    )
    return _node("cut", {"lemma": wp}, goal, [hole(prem), inner])


def _expand_wp_skip(params, goal, premises, cfg):
    d = params.get("dir", "fwd")
    if d != "fwd":
        raise ShapeMismatch("wp-skip expansion implemented for dir=fwd")
    i = params["index"]
    [prem] = premises
    w = goal.goal
    b = w.binder
    u = _fresh("_u", free_ret_binders(w.body) | {b})
    rest = w.mt.without((i,))
    # nest: wp (rest + [i: skip]) {Q}  <-  wp rest { wp [i: skip] {Q} }
    nest = _node(
        "wp-nest",
        {"dir": "fwd", "left": rest.supp(), "binders": (b, u)},
        goal,
        None,
        cfg,
    )
    [nested] = apply_rule("wp-nest", nest.params, goal, cfg)
    # wp-cons with Q in place of the inner wp
    supp = sorted(rest.supp())
    names = [f"_sk{k}" for k in supp]
    cons = _node(
        "wp-cons",
        {"post": PostAssertion(b, w.body), "names": names},
        nested,
        None,
        cfg,
    )
    p1, p2 = apply_rule("wp-cons", cons.params, nested, cfg)
    # p2: [Q*] |- wp [i: skip] {Q*}: wp-elim bwd, impl-intro, axiom
    qstar = p2.context[0]
    skips = FinMap({i: Skip()})
    inner_goal = p2
    imp = Judgment(p2.context, Implies(Projectable(skips), _inner_skip_body(p2.goal)))
    inner = _node(
        "wp-elim",
        {"dir": "fwd"},
        inner_goal,
        [
            _node(
                "impl-intro",
                {},
                imp,
                [_axiom_leaf(Judgment(p2.context + (Projectable(skips),), qstar))],
            )
        ],
        cfg,
    )
    cons.premises = [hole(prem) if p1 == prem else hole(p1), inner]
    nest.premises = [cons]
    return nest


def _inner_skip_body(g):
    assert isinstance(g, WPA)
    return g.body


def _expand_wp_impl_l(params, goal, premises, cfg):
    proj_prem, wp_prem = premises
    g = goal.goal
    w, p = g.left, g.right
    b = w.binder
    n = len(goal.context)
    ctx2 = goal.context + (w,)
    keep = {"keep": list(range(n))}
    both_body = And(Implies(w.body, p), w.body)
    conj_goal = Judgment(ctx2, WPA(w.mt, b, both_body))
    conj = _node(
        "wp-conj",
        {"left": w.mt.supp(), "right": w.mt.supp()},
        conj_goal,
        [
            _node("weaken", keep, Judgment(ctx2, WPA(w.mt, b, Implies(w.body, p))),
                  [hole(wp_prem)]),
            _axiom_leaf(Judgment(ctx2, w)),
        ],
        cfg,
    )
    names = [f"_il{k}" for k in sorted(w.mt.supp())]
    cons_goal = Judgment(ctx2, WPA(w.mt, b, p))
    cons = _node(
        "wp-cons",
        {"post": PostAssertion(b, both_body), "names": names},
        cons_goal,
        None,
        cfg,
    )
    c1, c2 = apply_rule("wp-cons", cons.params, cons_goal, cfg)
    cons.premises = [conj, _oracle_leaf(c2)]
    imp_goal = Judgment(ctx2, Implies(Projectable(w.mt), p))
    elim = _node("wp-elim", {"dir": "bwd", "binder": b}, imp_goal, [cons], cfg)
    mp = _node(
        "impl-elim",
        {"hyp": Projectable(w.mt)},
        Judgment(ctx2, p),
        [
            elim,
            _node("weaken", keep, Judgment(ctx2, Projectable(w.mt)), [hole(proj_prem)]),
        ],
        cfg,
    )
    return _node("impl-intro", {}, goal, [mp], cfg)


def _expand_wp_rename(params, goal, premises, cfg):
    [prem] = premises
    pi = params["pi"]
    pw = prem.goal
    reix = ReindexA(WPA(pw.mt, pw.binder, pw.body), pi)
    if reindex_assertion(WPA(pw.mt, pw.binder, pw.body), pi) != reix:
        # pi fixes every relevant index: conclusion equals the premise
        return hole(prem)
    ctx2 = goal.context + (reix,)
    wpidx = _node(
        "wp-idx",
        {"pi": pi, "hyperterm": pw.mt, "post": PostAssertion(pw.binder, pw.body)},
        Judgment(ctx2, goal.goal),
        [_axiom_leaf(Judgment(ctx2, reix))],
        cfg,
    )
    idx_step = _node("idx", {"pi": pi, "judgment": prem},
                     Judgment(goal.context, reix), [hole(prem)], cfg)
    return _node("cut", {"lemma": reix}, goal, [idx_step, wpidx], cfg)


def _expand_wp_seq_plus(params, goal, premises, cfg):
    [prem] = premises
    w = goal.goal
    seqs = params["seqs"]
    n = len(goal.context)
    lemma = prem.goal
    ctx2 = goal.context + (lemma,)
    # inside the cut: peel the goal with nest + seq, close with the oracle
    inner_goal = Judgment(ctx2, w)
    b = w.binder
    bs = _fresh("_n", free_ret_binders(w.body) | {b})
    nest = _node(
        "wp-nest",
        {"dir": "fwd", "left": seqs, "binders": (bs, b)},
        inner_goal,
        None,
        cfg,
    )
    [nested] = apply_rule("wp-nest", nest.params, inner_goal, cfg)
    bm = _fresh("_m", free_ret_binders(nested.goal.body) | {bs, b})
    seq = _node("wp-seq", {"dir": "fwd", "binder": bm}, nested, None, cfg)
    [seqgoal] = apply_rule("wp-seq", seq.params, nested, cfg)
    seq.premises = [_oracle_leaf(seqgoal)]
    nest.premises = [seq]
    return _node("cut", {"lemma": lemma}, goal, [hole(prem), nest], cfg)


def _expand_wp_indirect(params, goal, premises, cfg):
    """Cut in the universal closures of the rule's premises; the final step
    (the appendix chain of nest / impl-r / all / idx-post / idx-swap and
    consequence) is discharged as one bounded entailment."""
    from .assertions import _fill_hole

    prem1, prem2 = premises
    i, j = params["i"], params["j"]
    vs = tuple(params["vars"])
    a_hole = params["cond"]
    q = _post_of(params)
    w = goal.goal
    t1 = w.mt.get(i)
    inner = w.body.body.right
    t2 = inner.mt.get(i)
    mt_rest = w.mt.without((i,))
    a_i = _fill_hole(a_hole, i)
    a_j = _fill_hole(a_hole, j)
    closure = Forall(
        vs,
        Implies(
            a_j,
            WPA(
                disjoint_union(FinMap({i: t1, j: t2}), mt_rest),
                q.binder,
                Implies(a_i, q.body),
            ),
        ),
    )
    lemma1 = prem1.goal
    n = len(goal.context)
    impl = _node(
        "impl-intro",
        {},
        Judgment(goal.context, closure.body),
        [hole(prem2)],
        cfg,
    )
    lift = _node("lift-forall", {}, Judgment(goal.context, closure), [impl], cfg)
    ctx2 = goal.context + (closure,)
    weak = _node(
        "weaken", {"keep": list(range(n))}, Judgment(ctx2, lemma1), [hole(prem1)], cfg
    )
    ctx3 = ctx2 + (lemma1,)
    inner_cut = _node(
        "cut",
        {"lemma": lemma1},
        Judgment(ctx2, w),
        [weak, _oracle_leaf(Judgment(ctx3, w))],
        cfg,
    )
    return _node("cut", {"lemma": closure}, goal, [lift, inner_cut], cfg)


@rule("lift-forall")
def _lift_forall(params, goal, cfg):
    """Judgment-level universal introduction.

    goal: Gamma |- forall vs. B; premise: Gamma |- B with vs free.  Sound
    because judgment validity universally quantifies free logic variables;
    the bound names must not occur free in Gamma.
    """
    g = goal.goal
    if not isinstance(g, Forall):
        raise ShapeMismatch("goal is not a universal")
    for gamma in goal.context:
        clash = set(g.names) & free_logic_vars(gamma)
        if clash:
            raise SideConditionViolated(
                "lift-forall freshness", f"{sorted(clash)} free in the context"
            )
    return [Judgment(goal.context, g.body)]


_EXPANSIONS = {
    "wp-empty": _expand_wp_empty,
    "wp-skip": _expand_wp_skip,
    "wp-impl-l": _expand_wp_impl_l,
    "wp-rename": _expand_wp_rename,
    "wp-seq-plus": _expand_wp_seq_plus,
    "wp-indirect": _expand_wp_indirect,
}


def fill_holes(skeleton: Derivation, subtrees: list) -> Derivation:
    """Replace hole leaves with subtrees, matched by their conclusions."""
    remaining = list(subtrees)

    def walk(node):
        if node.rule == "hole":
            for k, sub in enumerate(remaining):
                if sub.conclusion == node.conclusion:
                    return remaining.pop(k)
            raise ShapeMismatch(
                f"no subtree concludes the hole's judgment {node.conclusion.pretty()}"
            )
        node.premises = [walk(c) for c in node.premises]
        return node

    out = walk(skeleton)
    if remaining:
        raise ShapeMismatch("too many subtrees for the skeleton's holes")
    return out


# ---------------------------------------------------------------------------
# Relative completeness at desk scale (loop-free auto-prover)


def _store_atomic(p: HAssertion) -> bool:
    if isinstance(p, (TrueA, FalseA, Cmp)):
        return not isinstance(p, Cmp) or all(
            not isinstance(e, RetAt) for e in _iexpr_leaves(p)
        )
    if isinstance(p, (And, Or, Implies)):
        return _store_atomic(p.left) and _store_atomic(p.right)
    if isinstance(p, Not):
        return _store_atomic(p.body)
    return False


def _iexpr_leaves(c: Cmp):
    out = []

    def go(e):
        if hasattr(e, "left"):
            go(e.left)
            go(e.right)
        else:
            out.append(e)

    go(c.left)
    go(c.right)
    return out


def _pure_at(p: HAssertion, stores: dict) -> HAssertion:
    """Evaluate the store atoms of a store-atomic assertion at concrete stores."""
    from .assertions import Arith

    def ev(e):
        if isinstance(e, Const):
            return e.value
        if isinstance(e, PVarAt):
            return stores[e.index].get(e.name)
        if isinstance(e, LogicVar):
            raise ShapeMismatch("precondition must be closed for auto-proving")
        if isinstance(e, Arith):
            a, b = ev(e.left), ev(e.right)
            return a + b if e.op == "+" else a - b if e.op == "-" else a * b
        raise ShapeMismatch(f"unsupported atom {e!r}")

    def go(p):
        if isinstance(p, TrueA):
            return True
        if isinstance(p, FalseA):
            return False
        if isinstance(p, Cmp):
            a, b = ev(p.left), ev(p.right)
            return {"=": a == b, "<": a < b, "<=": a <= b}[p.op]
        if isinstance(p, And):
            return go(p.left) and go(p.right)
        if isinstance(p, Or):
            return go(p.left) or go(p.right)
        if isinstance(p, Implies):
            return (not go(p.left)) or go(p.right)
        if isinstance(p, Not):
            return not go(p.body)
        raise ShapeMismatch("precondition is not store-atomic")

    return go(p)


def auto_prove_loopfree(p: HAssertion, mt: FinMap, q: PostAssertion, cfg: EnumConfig) -> Derivation:
    """Derivation for a valid loop-free triple, per the completeness recipe.

    Case-splits on the finitely many footprint stores satisfying P (cut +
    or-elim), derives each component's strongest-post table as an oracle
    leaf, folds them with wp-conj, and closes with wp-cons whose entailment
    premise is the semantic validity of the triple (oracle).  Loops are
    rejected; the triple must be oracle-valid first.
    """
    for i, t in mt.items():
        if not is_loop_free(t):
            raise ShapeMismatch(f"component {i} contains a loop")
    if not _store_atomic(p):
        raise ShapeMismatch("auto-prover needs a store-atomic precondition")
    verdict = check_triple(p, mt, q, cfg)
    if verdict.status == INVALID:
        raise NotValid(verdict)
    if verdict.status != VALID:
        raise NotValid(verdict)

    from .oracle import Footprint, iter_assignments

    wpa = WPA(mt, q.binder, q.body)
    fp = Footprint.of(assertions=[p, wpa])
    goal = Judgment((p,), wpa)
    b = q.binder

    # collect the P-satisfying stores over the footprint
    cases = []
    for ms, _logic in iter_assignments(fp, cfg):
        stores = {i: ms.store_at(i) for i in fp.indices}
        if _pure_at(p, stores):
            cases.append(stores)
    if not cases:
        return _node("cut", {"lemma": FalseA()}, goal,
                     [_oracle_leaf(Judgment((p,), FalseA())),
                      _oracle_leaf(Judgment((p, FalseA()), wpa))], cfg)

    vars_at = {i: sorted({x for k, x in fp.variables if k == i}) for i in fp.indices}

    def case_assertion(stores):
        return and_all(
            [state_assertion(stores[i], vars_at[i], i) for i in sorted(mt.supp())]
        ) if mt.supp() else TrueA()

    def per_case(stores, ctx):
        supp = sorted(mt.supp())
        tables = {
            i: strongest_post_assertion(mt.get(i), stores[i], vars_at[i], i, b, cfg)
            for i in supp
        }
        if not supp:
            return _node("wp-empty", {"dir": "intro"}, Judgment(ctx, wpa),
                         [_oracle_leaf(Judgment(ctx, q.body))], cfg)

        def conj_tree(idxs, ctx, goal_post):
            g = Judgment(ctx, WPA(mt.restrict(frozenset(idxs)), b, goal_post))
            if len(idxs) == 1:
                return _oracle_leaf(g)
            left, rights = idxs[0], idxs[1:]
            node = _node(
                "wp-conj",
                {"left": frozenset((left,)), "right": frozenset(rights)},
                g,
                None,
                cfg,
            )
            p1, p2 = apply_rule("wp-conj", node.params, g, cfg)
            node.premises = [
                _oracle_leaf(p1),
                conj_tree(rights, ctx, p2.goal.body),
            ]
            return node

        def table_post(idxs):
            if len(idxs) == 1:
                return tables[idxs[0]]
            return And(tables[idxs[0]], table_post(idxs[1:]))

        big_post = table_post(supp)
        cons_goal = Judgment(ctx, wpa)
        names = [f"_a{i}" for i in supp]
        cons = _node(
            "wp-cons", {"post": PostAssertion(b, big_post), "names": names},
            cons_goal, None, cfg,
        )
        pr1, pr2 = apply_rule("wp-cons", cons.params, cons_goal, cfg)
        cons.premises = [conj_tree(supp, ctx, big_post), _oracle_leaf(pr2)]
        return cons

    big_or = or_all([case_assertion(st) for st in cases])

    def or_tree(k, ctx):
        # context ends with the (possibly split) disjunction at position -1
        pos = len(ctx) - 1
        if k == len(cases) - 1:
            return per_case(cases[k], ctx)
        node_goal = Judgment(ctx, wpa)
        d = ctx[pos]
        left_ctx = ctx[:pos] + (d.left,)
        right_ctx = ctx[:pos] + (d.right,)
        return _node(
            "or-elim",
            {"pos": pos},
            node_goal,
            [per_case(cases[k], left_ctx), or_tree(k + 1, right_ctx)],
            cfg,
        )

    ctx2 = (p, big_or)
    body = (
        per_case(cases[0], ctx2)
        if len(cases) == 1
        else or_tree(0, ctx2)
    )
    return _node(
        "cut", {"lemma": big_or}, goal,
        [_oracle_leaf(Judgment((p,), big_or)), body], cfg,
    )
