"""Hyper-assertions: syntax, bounded three-valued evaluation, idx/pvar, reindexing.

Assertions predicate over hyper-stores.  Connectives follow strong Kleene
semantics over {True, False, Unknown}; Unknown arises only from enumeration
truncation, never silently.  Quantifiers and projection witnesses range over
the configured finite value domain, so every verdict is domain-relative.

Return-value atoms at an undefined index evaluate their enclosing comparison
to False; the parse-time positive-polarity discipline on return atoms then
guarantees post-assertions are upward-closed under return-value extension.
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
    ParseError,
    Seq,
    Term,
    TermParser,
    TokenStream,
    Var,
    While,
    bigstep_enumerate,
    has_meta,
    meta_leaves,
    pretty_term,
    pvar_term,
    tokenize,
)
from .hyper import (
    FinMap,
    HyperStore,
    Reindexing,
    hyper_bigstep_enumerate,
    pvar_hyper,
    reindex_finmap,
    sorted_hyper_outcomes,
)

# Kleene truth values
TRUE, FALSE, UNKNOWN = 1, 0, 2


class ScopeError(Exception):
    pass


class PolarityError(Exception):
    pass


class UniverseError(Exception):
    pass


# ---------------------------------------------------------------------------
# Index expressions


class IExpr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(IExpr):
    value: int


@dataclass(frozen=True)
class PVarAt(IExpr):
    name: str
    index: int


@dataclass(frozen=True)
class RetAt(IExpr):
    binder: str
    index: int


@dataclass(frozen=True)
class LogicVar(IExpr):
    name: str


@dataclass(frozen=True)
class Arith(IExpr):
    op: str  # + - *
    left: IExpr
    right: IExpr


# ---------------------------------------------------------------------------
# Assertions


class HAssertion:
    __slots__ = ()


@dataclass(frozen=True)
class TrueA(HAssertion):
    pass


@dataclass(frozen=True)
class FalseA(HAssertion):
    pass


@dataclass(frozen=True)
class Cmp(HAssertion):
    op: str  # = < <=
    left: IExpr
    right: IExpr


@dataclass(frozen=True)
class Not(HAssertion):
    body: HAssertion


@dataclass(frozen=True)
class And(HAssertion):
    left: HAssertion
    right: HAssertion


@dataclass(frozen=True)
class Or(HAssertion):
    left: HAssertion
    right: HAssertion


@dataclass(frozen=True)
class Implies(HAssertion):
    left: HAssertion
    right: HAssertion


@dataclass(frozen=True)
class Exists(HAssertion):
    names: tuple
    body: HAssertion


@dataclass(frozen=True)
class Forall(HAssertion):
    names: tuple
    body: HAssertion


@dataclass(frozen=True)
class ReindexA(HAssertion):
    body: HAssertion
    pi: Reindexing


@dataclass(frozen=True)
class Proj(HAssertion):
    indices: frozenset
    body: HAssertion


@dataclass(frozen=True)
class ProjRet(HAssertion):
    """Projection of a post-assertion: also rebinds the named return values at I."""

    indices: frozenset
    binder: str
    body: HAssertion


@dataclass(frozen=True)
class WPA(HAssertion):
    mt: FinMap
    binder: str
    body: HAssertion


@dataclass(frozen=True)
class Projectable(HAssertion):
    mt: FinMap


@dataclass(frozen=True)
class Refines(HAssertion):
    t1: Term
    t2: Term
    index: int


@dataclass(frozen=True)
class PostAssertion:
    binder: str
    body: HAssertion


def and_all(parts) -> HAssertion:
    parts = list(parts)
    if not parts:
        return TrueA()
    acc = parts[-1]
    for p in reversed(parts[:-1]):
        acc = And(p, acc)
    return acc


def or_all(parts) -> HAssertion:
    parts = list(parts)
    if not parts:
        return FalseA()
    acc = parts[-1]
    for p in reversed(parts[:-1]):
        acc = Or(p, acc)
    return acc


def neq(a: IExpr, b: IExpr) -> HAssertion:
    return Or(Cmp("<", a, b), Cmp("<", b, a))


def flatten_and(p: HAssertion) -> list:
    if isinstance(p, And):
        return flatten_and(p.left) + flatten_and(p.right)
    return [p]


# ---------------------------------------------------------------------------
# Environment


class Env:
    """Closes open assertions: logic-variable values and bound hyper-returns."""

    __slots__ = ("logic", "rets")

    def __init__(self, logic=None, rets=None):
        self.logic = logic or {}
        self.rets = rets or {}

    def bind_logic(self, names, values) -> "Env":
        d = dict(self.logic)
        d.update(zip(names, values))
        return Env(d, self.rets)

    def bind_ret(self, binder: str, ret: FinMap) -> "Env":
        d = dict(self.rets)
        d[binder] = ret
        return Env(self.logic, d)

    def reindex_rets(self, pi: Reindexing) -> "Env":
        return Env(self.logic, {b: reindex_finmap(r, pi) for b, r in self.rets.items()})


EMPTY_ENV = Env()


# ---------------------------------------------------------------------------
# Structural measures: indices and indexed program variables (over-approximations)


def idx_iexpr(e: IExpr) -> frozenset:
    if isinstance(e, (PVarAt, RetAt)):
        return frozenset((e.index,))
    if isinstance(e, Arith):
        return idx_iexpr(e.left) | idx_iexpr(e.right)
    return frozenset()


def _meta_ret_indices(mt: FinMap) -> frozenset:
    acc = set()
    for _i, t in mt.items():
        for leaf in meta_leaves(t):
            if leaf.kind == "ret":
                acc.add(leaf.index)
    return frozenset(acc)


def idx_over(p) -> frozenset:
    """Superset of the semantically relevant indices of p."""
    if isinstance(p, PostAssertion):
        return idx_over(p.body)
    if isinstance(p, (TrueA, FalseA)):
        return frozenset()
    if isinstance(p, Cmp):
        return idx_iexpr(p.left) | idx_iexpr(p.right)
    if isinstance(p, Not):
        return idx_over(p.body)
    if isinstance(p, (And, Or, Implies)):
        return idx_over(p.left) | idx_over(p.right)
    if isinstance(p, (Exists, Forall)):
        return idx_over(p.body)
    if isinstance(p, ReindexA):
        return frozenset(p.pi.apply(i) for i in idx_over(p.body))
    if isinstance(p, Proj):
        return idx_over(p.body) - p.indices
    if isinstance(p, ProjRet):
        return idx_over(p.body) - p.indices
    if isinstance(p, WPA):
        return p.mt.supp() | idx_over(p.body) | _meta_ret_indices(p.mt)
    if isinstance(p, Projectable):
        return p.mt.supp() | _meta_ret_indices(p.mt)
    if isinstance(p, Refines):
        return frozenset((p.index,))
    raise TypeError(f"not an assertion: {p!r}")


def all_indices(p) -> frozenset:
    """Every index syntactically mentioned anywhere in p.

    Unlike idx_over, projection does not remove its indices: this is the
    index universe an evaluation of p may touch.
    """
    if isinstance(p, PostAssertion):
        return all_indices(p.body)
    if isinstance(p, (TrueA, FalseA)):
        return frozenset()
    if isinstance(p, Cmp):
        return idx_iexpr(p.left) | idx_iexpr(p.right)
    if isinstance(p, Not):
        return all_indices(p.body)
    if isinstance(p, (And, Or, Implies)):
        return all_indices(p.left) | all_indices(p.right)
    if isinstance(p, (Exists, Forall)):
        return all_indices(p.body)
    if isinstance(p, ReindexA):
        inner = all_indices(p.body)
        return inner | frozenset(p.pi.apply(i) for i in inner) | frozenset(
            k for k, _v in p.pi.swaps
        )
    if isinstance(p, (Proj, ProjRet)):
        return all_indices(p.body) | p.indices
    if isinstance(p, WPA):
        return p.mt.supp() | all_indices(p.body) | _meta_ret_indices(p.mt)
    if isinstance(p, Projectable):
        return p.mt.supp() | _meta_ret_indices(p.mt)
    if isinstance(p, Refines):
        return frozenset((p.index,))
    raise TypeError(f"not an assertion: {p!r}")


def pvar_iexpr(e: IExpr) -> frozenset:
    if isinstance(e, PVarAt):
        return frozenset(((e.name, e.index),))
    if isinstance(e, Arith):
        return pvar_iexpr(e.left) | pvar_iexpr(e.right)
    return frozenset()


def pvar_over(p) -> frozenset:
    """Superset of the (variable, index) slots p can depend on."""
    if isinstance(p, PostAssertion):
        return pvar_over(p.body)
    if isinstance(p, (TrueA, FalseA)):
        return frozenset()
    if isinstance(p, Cmp):
        return pvar_iexpr(p.left) | pvar_iexpr(p.right)
    if isinstance(p, Not):
        return pvar_over(p.body)
    if isinstance(p, (And, Or, Implies)):
        return pvar_over(p.left) | pvar_over(p.right)
    if isinstance(p, (Exists, Forall)):
        return pvar_over(p.body)
    if isinstance(p, ReindexA):
        return frozenset((x, p.pi.apply(i)) for x, i in pvar_over(p.body))
    if isinstance(p, (Proj, ProjRet)):
        return frozenset((x, i) for x, i in pvar_over(p.body) if i not in p.indices)
    if isinstance(p, WPA):
        return pvar_hyper(p.mt) | pvar_over(p.body)
    if isinstance(p, Projectable):
        return pvar_hyper(p.mt)
    if isinstance(p, Refines):
        return frozenset(
            (x, p.index) for x in (pvar_term(p.t1) | pvar_term(p.t2))
        )
    raise TypeError(f"not an assertion: {p!r}")


def free_logic_vars(p) -> frozenset:
    """Logic variables not bound by any enclosing quantifier."""

    def walk_ie(e, bound):
        if isinstance(e, LogicVar):
            return frozenset() if e.name in bound else frozenset((e.name,))
        if isinstance(e, Arith):
            return walk_ie(e.left, bound) | walk_ie(e.right, bound)
        return frozenset()

    def walk_t(t, bound):
        acc = frozenset()
        for leaf in meta_leaves(t):
            if leaf.kind == "var" and leaf.name not in bound:
                acc |= frozenset((leaf.name,))
        return acc

    def walk(p, bound):
        if isinstance(p, PostAssertion):
            return walk(p.body, bound)
        if isinstance(p, (TrueA, FalseA)):
            return frozenset()
        if isinstance(p, Cmp):
            return walk_ie(p.left, bound) | walk_ie(p.right, bound)
        if isinstance(p, Not):
            return walk(p.body, bound)
        if isinstance(p, (And, Or, Implies)):
            return walk(p.left, bound) | walk(p.right, bound)
        if isinstance(p, (Exists, Forall)):
            return walk(p.body, bound | set(p.names))
        if isinstance(p, ReindexA):
            return walk(p.body, bound)
        if isinstance(p, (Proj, ProjRet)):
            return walk(p.body, bound)
        if isinstance(p, WPA):
            acc = walk(p.body, bound)
            for _i, t in p.mt.items():
                acc |= walk_t(t, bound)
            return acc
        if isinstance(p, Projectable):
            acc = frozenset()
            for _i, t in p.mt.items():
                acc |= walk_t(t, bound)
            return acc
        if isinstance(p, Refines):
            return frozenset()
        raise TypeError(f"not an assertion: {p!r}")

    return walk(p, frozenset())


# ---------------------------------------------------------------------------
# Well-formedness: scope and return-atom polarity


def check_wellformed(p, logic_scope=frozenset(), ret_scopes=None):
    """Raise ScopeError/PolarityError on ill-scoped or negative return atoms.

    ret_scopes maps binder name -> allowed index set (None = unrestricted,
    used for a post-assertion binder whose hyper-term is not yet known).
    Polarity is counted per binder from its binding site; a return atom under
    an odd number of negations (counting the left of an implication) is
    rejected.
    """
    ret_scopes = dict(ret_scopes or {})

    def chk_ie(e, logic, rets, depths, negs):
        if isinstance(e, LogicVar):
            if e.name not in logic:
                raise ScopeError(f"unbound logic variable {e.name!r}")
        elif isinstance(e, RetAt):
            if e.binder not in rets:
                raise ScopeError(f"unbound return binder {e.binder!r}")
            allowed = rets[e.binder]
            if allowed is not None and e.index not in allowed:
                raise ScopeError(
                    f"return binder {e.binder!r} has no component {e.index}"
                )
            if (negs - depths[e.binder]) % 2 == 1:
                raise PolarityError(
                    f"negative occurrence of return atom {e.binder}@{e.index}"
                )
        elif isinstance(e, Arith):
            chk_ie(e.left, logic, rets, depths, negs)
            chk_ie(e.right, logic, rets, depths, negs)

    def chk_terms(mt, logic, rets):
        for _i, t in mt.items():
            for leaf in meta_leaves(t):
                if leaf.kind == "var":
                    if leaf.name not in logic:
                        raise ScopeError(f"unbound logic variable {leaf.name!r}")
                else:
                    if leaf.name not in rets:
                        raise ScopeError(f"unbound return binder {leaf.name!r}")
                    allowed = rets[leaf.name]
                    if allowed is not None and leaf.index not in allowed:
                        raise ScopeError(
                            f"return binder {leaf.name!r} has no component {leaf.index}"
                        )

    def chk(p, logic, rets, depths, negs):
        if isinstance(p, (TrueA, FalseA, Refines)):
            return
        if isinstance(p, Cmp):
            chk_ie(p.left, logic, rets, depths, negs)
            chk_ie(p.right, logic, rets, depths, negs)
            return
        if isinstance(p, Not):
            chk(p.body, logic, rets, depths, negs + 1)
            return
        if isinstance(p, Implies):
            chk(p.left, logic, rets, depths, negs + 1)
            chk(p.right, logic, rets, depths, negs)
            return
        if isinstance(p, (And, Or)):
            chk(p.left, logic, rets, depths, negs)
            chk(p.right, logic, rets, depths, negs)
            return
        if isinstance(p, (Exists, Forall)):
            chk(p.body, logic | set(p.names), rets, depths, negs)
            return
        if isinstance(p, ReindexA):
            chk(p.body, logic, rets, depths, negs)
            return
        if isinstance(p, Proj):
            chk(p.body, logic, rets, depths, negs)
            return
        if isinstance(p, ProjRet):
            if p.binder not in rets:
                raise ScopeError(f"unbound return binder {p.binder!r} in projection")
            allowed = rets[p.binder]
            rets2 = dict(rets)
            rets2[p.binder] = None if allowed is None else (allowed | p.indices)
            chk(p.body, logic, rets2, depths, negs)
            return
        if isinstance(p, WPA):
            chk_terms(p.mt, logic, rets)
            rets2 = dict(rets)
            rets2[p.binder] = p.mt.supp()
            depths2 = dict(depths)
            depths2[p.binder] = negs
            chk(p.body, logic, rets2, depths2, negs)
            return
        if isinstance(p, Projectable):
            chk_terms(p.mt, logic, rets)
            return
        raise TypeError(f"not an assertion: {p!r}")

    if isinstance(p, PostAssertion):
        depths = {p.binder: 0}
        chk(p.body, frozenset(logic_scope), {p.binder: ret_scopes.get(p.binder)}, depths, 0)
    else:
        depths = {b: 0 for b in ret_scopes}
        chk(p, frozenset(logic_scope), ret_scopes, depths, 0)


# ---------------------------------------------------------------------------
# Evaluation

_CMP = {
    "=": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
}


def eval_iexpr(e: IExpr, ms: HyperStore, env: Env):
    """Integer value of e, or None if it reads an undefined return component."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, PVarAt):
        return ms.store_at(e.index).get(e.name)
    if isinstance(e, LogicVar):
        if e.name not in env.logic:
            raise ScopeError(f"unbound logic variable {e.name!r} at evaluation")
        return env.logic[e.name]
    if isinstance(e, RetAt):
        ret = env.rets.get(e.binder)
        if ret is None:
            raise ScopeError(f"unbound return binder {e.binder!r} at evaluation")
        return ret.get(e.index)
    if isinstance(e, Arith):
        a = eval_iexpr(e.left, ms, env)
        b = eval_iexpr(e.right, ms, env)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        return a * b
    raise TypeError(f"not an index expression: {e!r}")


def instantiate_hyper_term(mt: FinMap, env: Env) -> FinMap:
    """Resolve symbolic value leaves in terms using env."""

    def resolve(t: Term) -> Term:
        if isinstance(t, MetaVal):
            if t.kind == "var":
                if t.name not in env.logic:
                    raise ScopeError(f"unbound logic variable {t.name!r} in term")
                return IntLit(env.logic[t.name])
            ret = env.rets.get(t.name)
            if ret is None:
                raise ScopeError(f"unbound return binder {t.name!r} in term")
            v = ret.get(t.index)
            if v is None:
                raise ScopeError(
                    f"return binder {t.name!r} undefined at component {t.index}"
                )
            return IntLit(v)
        if not has_meta(t):
            return t
        if isinstance(t, BinOp):
            return BinOp(t.op, resolve(t.left), resolve(t.right))
        if isinstance(t, Assign):
            return Assign(t.name, resolve(t.rhs))
        if isinstance(t, Seq):
            return Seq(resolve(t.first), resolve(t.second))
        if isinstance(t, If):
            return If(resolve(t.guard), resolve(t.then), resolve(t.orelse))
        if isinstance(t, While):
            return While(resolve(t.guard), resolve(t.body))
        return t

    if all(not has_meta(t) for _i, t in mt.items()):
        return mt
    return FinMap({i: resolve(t) for i, t in mt.items()})


def _kleene_not(v):
    if v == UNKNOWN:
        return UNKNOWN
    return TRUE if v == FALSE else FALSE


def eval_assertion(p: HAssertion, ms: HyperStore, env: Env, cfg: EnumConfig) -> int:
    """Three-valued truth of p on ms under env, relative to cfg."""
    if isinstance(p, TrueA):
        return TRUE
    if isinstance(p, FalseA):
        return FALSE
    if isinstance(p, Cmp):
        a = eval_iexpr(p.left, ms, env)
        b = eval_iexpr(p.right, ms, env)
        if a is None or b is None:
            return FALSE  # undefined return component: comparison is false
        return TRUE if _CMP[p.op](a, b) else FALSE
    if isinstance(p, Not):
        return _kleene_not(eval_assertion(p.body, ms, env, cfg))
    if isinstance(p, And):
        a = eval_assertion(p.left, ms, env, cfg)
        if a == FALSE:
            return FALSE
        b = eval_assertion(p.right, ms, env, cfg)
        if b == FALSE:
            return FALSE
        return UNKNOWN if UNKNOWN in (a, b) else TRUE
    if isinstance(p, Or):
        a = eval_assertion(p.left, ms, env, cfg)
        if a == TRUE:
            return TRUE
        b = eval_assertion(p.right, ms, env, cfg)
        if b == TRUE:
            return TRUE
        return UNKNOWN if UNKNOWN in (a, b) else FALSE
    if isinstance(p, Implies):
        a = eval_assertion(p.left, ms, env, cfg)
        if a == FALSE:
            return TRUE
        b = eval_assertion(p.right, ms, env, cfg)
        if b == TRUE:
            return TRUE
        if a == TRUE and b == FALSE:
            return FALSE
        return UNKNOWN
    if isinstance(p, Exists):
        res = FALSE
        for vals in itertools.product(cfg.domain, repeat=len(p.names)):
            v = eval_assertion(p.body, ms, env.bind_logic(p.names, vals), cfg)
            if v == TRUE:
                return TRUE
            if v == UNKNOWN:
                res = UNKNOWN
        return res
    if isinstance(p, Forall):
        res = TRUE
        for vals in itertools.product(cfg.domain, repeat=len(p.names)):
            v = eval_assertion(p.body, ms, env.bind_logic(p.names, vals), cfg)
            if v == FALSE:
                return FALSE
            if v == UNKNOWN:
                res = UNKNOWN
        return res
    if isinstance(p, ReindexA):
        return eval_assertion(
            p.body, ms.reindex(p.pi), env.reindex_rets(p.pi), cfg
        )
    if isinstance(p, Proj):
        slots = sorted((x, i) for x, i in pvar_over(p.body) if i in p.indices)
        return _eval_proj(p.body, ms, env, cfg, slots, None, None)
    if isinstance(p, ProjRet):
        slots = sorted((x, i) for x, i in pvar_over(p.body) if i in p.indices)
        return _eval_proj(p.body, ms, env, cfg, slots, p.binder, sorted(p.indices))
    if isinstance(p, WPA):
        for i in p.mt.indices():
            if i not in ms.universe:
                raise UniverseError(f"index {i} outside the hyper-store universe")
        mt = instantiate_hyper_term(p.mt, env)
        outcomes, truncated = hyper_bigstep_enumerate(mt, ms, cfg)
        res = TRUE
        for ret, ms2 in sorted_hyper_outcomes(outcomes):
            v = eval_assertion(p.body, ms2, env.bind_ret(p.binder, ret), cfg)
            if v == FALSE:
                return FALSE
            if v == UNKNOWN:
                res = UNKNOWN
        if truncated:
            return UNKNOWN
        return res
    if isinstance(p, Projectable):
        for i in p.mt.indices():
            if i not in ms.universe:
                raise UniverseError(f"index {i} outside the hyper-store universe")
        mt = instantiate_hyper_term(p.mt, env)
        outcomes, truncated = hyper_bigstep_enumerate(mt, ms, cfg)
        if outcomes:
            return TRUE
        return UNKNOWN if truncated else FALSE
    if isinstance(p, Refines):
        s = ms.store_at(p.index)
        out1 = bigstep_enumerate(p.t1, s, cfg)
        out2 = bigstep_enumerate(p.t2, s, cfg)
        missing = out1.outcomes - out2.outcomes
        if missing:
            return UNKNOWN if out2.truncated else FALSE
        return UNKNOWN if out1.truncated else TRUE
    raise TypeError(f"not an assertion: {p!r}")


def _eval_proj(body, ms, env, cfg, slots, ret_binder, ret_indices):
    """Existential over replacement stores (and optionally return components)."""
    res = FALSE
    ret_indices = ret_indices or []
    base_ret = env.rets.get(ret_binder) if ret_binder else None
    for vals in itertools.product(cfg.domain, repeat=len(slots)):
        ms2 = ms
        for (x, i), v in zip(slots, vals):
            ms2 = ms2.with_store(i, ms2.store_at(i).set(x, v))
        for rvals in itertools.product(cfg.domain, repeat=len(ret_indices)):
            env2 = env
            if ret_binder is not None:
                r = base_ret if base_ret is not None else FinMap()
                for i, v in zip(ret_indices, rvals):
                    r = r.set(i, v)
                env2 = env.bind_ret(ret_binder, r)
            v = eval_assertion(body, ms2, env2, cfg)
            if v == TRUE:
                return TRUE
            if v == UNKNOWN:
                res = UNKNOWN
    return res


# ---------------------------------------------------------------------------
# Reindexing of assertions


def reindex_assertion(p: HAssertion, pi: Reindexing, normalize: bool = True) -> HAssertion:
    """Assertion equivalent to evaluating p on a pi-reindexed hyper-store.

    With normalize, the reindexing is pushed through connectives and atoms
    (the distribution laws for reindexing); WP, projection, projectability and
    refinement stay wrapped.  A reindexing that fixes every relevant index is
    dropped.
    """
    if pi.is_identity():
        return p
    if not normalize:
        return ReindexA(p, pi)
    return _push_reindex(p, pi)


def _reindex_iexpr(e: IExpr, pi: Reindexing) -> IExpr:
    if isinstance(e, PVarAt):
        return PVarAt(e.name, pi.apply(e.index))
    if isinstance(e, RetAt):
        return RetAt(e.binder, pi.apply(e.index))
    if isinstance(e, Arith):
        return Arith(e.op, _reindex_iexpr(e.left, pi), _reindex_iexpr(e.right, pi))
    return e


def _push_reindex(p: HAssertion, pi: Reindexing) -> HAssertion:
    if all(pi.apply(i) == i for i in idx_over(p)):
        return p
    if isinstance(p, (TrueA, FalseA)):
        return p
    if isinstance(p, Cmp):
        return Cmp(p.op, _reindex_iexpr(p.left, pi), _reindex_iexpr(p.right, pi))
    if isinstance(p, Not):
        return Not(_push_reindex(p.body, pi))
    if isinstance(p, And):
        return And(_push_reindex(p.left, pi), _push_reindex(p.right, pi))
    if isinstance(p, Or):
        return Or(_push_reindex(p.left, pi), _push_reindex(p.right, pi))
    if isinstance(p, Implies):
        return Implies(_push_reindex(p.left, pi), _push_reindex(p.right, pi))
    if isinstance(p, Exists):
        return Exists(p.names, _push_reindex(p.body, pi))
    if isinstance(p, Forall):
        return Forall(p.names, _push_reindex(p.body, pi))
    if isinstance(p, ReindexA):
        # (P[rho])[pi] = P[pi . rho]: assertions pre-compose the store reindexing
        return ReindexA(p.body, pi.compose(p.pi))
    # WP, projection, projectability, refinement: no distribution law
    return ReindexA(p, pi)


def reindex_post_body(body: HAssertion, binder: str, pi: Reindexing) -> HAssertion:
    """Post-assertion reindexing: both the store and the bound return value.

    Return atoms of `binder` are remapped directly; sub-assertions without a
    distribution law are wrapped (their evaluation reindexes env returns too).
    """
    return _push_reindex(body, pi)


def rename_indices(p: HAssertion, sigma: Reindexing) -> HAssertion:
    """Syntactic bijective renaming of indices throughout an assertion.

    Unlike `reindex_assertion` this renames hyper-term components and
    projection sets directly; sigma must be a permutation.  ReindexA wrappers
    are conjugated.
    """
    if not sigma.is_bijective():
        raise ValueError("rename_indices needs a permutation")
    inv = sigma.inverse()

    def ren_term(t: Term) -> Term:
        if isinstance(t, MetaVal):
            if t.kind == "ret":
                return MetaVal("ret", t.name, sigma.apply(t.index))
            return t
        if isinstance(t, BinOp):
            return BinOp(t.op, ren_term(t.left), ren_term(t.right))
        if isinstance(t, Assign):
            return Assign(t.name, ren_term(t.rhs))
        if isinstance(t, Seq):
            return Seq(ren_term(t.first), ren_term(t.second))
        if isinstance(t, If):
            return If(ren_term(t.guard), ren_term(t.then), ren_term(t.orelse))
        if isinstance(t, While):
            return While(ren_term(t.guard), ren_term(t.body))
        return t

    def ren_mt(mt: FinMap) -> FinMap:
        return FinMap({sigma.apply(i): ren_term(t) for i, t in mt.items()})

    def ren_ie(e: IExpr) -> IExpr:
        if isinstance(e, PVarAt):
            return PVarAt(e.name, sigma.apply(e.index))
        if isinstance(e, RetAt):
            return RetAt(e.binder, sigma.apply(e.index))
        if isinstance(e, Arith):
            return Arith(e.op, ren_ie(e.left), ren_ie(e.right))
        return e

    def ren(p):
        if isinstance(p, (TrueA, FalseA)):
            return p
        if isinstance(p, Cmp):
            return Cmp(p.op, ren_ie(p.left), ren_ie(p.right))
        if isinstance(p, Not):
            return Not(ren(p.body))
        if isinstance(p, And):
            return And(ren(p.left), ren(p.right))
        if isinstance(p, Or):
            return Or(ren(p.left), ren(p.right))
        if isinstance(p, Implies):
            return Implies(ren(p.left), ren(p.right))
        if isinstance(p, Exists):
            return Exists(p.names, ren(p.body))
        if isinstance(p, Forall):
            return Forall(p.names, ren(p.body))
        if isinstance(p, ReindexA):
            # (P at renamed indices)[pi'] with pi' = sigma . pi . sigma^-1
            return ReindexA(ren(p.body), sigma.compose(p.pi.compose(inv)))
        if isinstance(p, Proj):
            return Proj(frozenset(sigma.apply(i) for i in p.indices), ren(p.body))
        if isinstance(p, ProjRet):
            return ProjRet(
                frozenset(sigma.apply(i) for i in p.indices), p.binder, ren(p.body)
            )
        if isinstance(p, WPA):
            return WPA(ren_mt(p.mt), p.binder, ren(p.body))
        if isinstance(p, Projectable):
            return Projectable(ren_mt(p.mt))
        if isinstance(p, Refines):
            return Refines(p.t1, p.t2, sigma.apply(p.index))
        raise TypeError(f"not an assertion: {p!r}")

    return ren(p)


# ---------------------------------------------------------------------------
# Structural transforms


def transform(p, f_iexpr=None, f_term=None, shadow=frozenset()):
    """Rebuild p applying f_iexpr to atoms and f_term to embedded terms.

    Binder-introducing nodes pass the set of names they shadow so callers can
    respect scoping.
    """

    def walk_ie(e, shadow):
        if f_iexpr is not None:
            r = f_iexpr(e, shadow)
            if r is not None:
                return r
        if isinstance(e, Arith):
            return Arith(e.op, walk_ie(e.left, shadow), walk_ie(e.right, shadow))
        return e

    def walk_t(t, shadow):
        if f_term is not None:
            r = f_term(t, shadow)
            if r is not None:
                return r
        if isinstance(t, BinOp):
            return BinOp(t.op, walk_t(t.left, shadow), walk_t(t.right, shadow))
        if isinstance(t, Assign):
            return Assign(t.name, walk_t(t.rhs, shadow))
        if isinstance(t, Seq):
            return Seq(walk_t(t.first, shadow), walk_t(t.second, shadow))
        if isinstance(t, If):
            return If(walk_t(t.guard, shadow), walk_t(t.then, shadow), walk_t(t.orelse, shadow))
        if isinstance(t, While):
            return While(walk_t(t.guard, shadow), walk_t(t.body, shadow))
        return t

    def walk_mt(mt, shadow):
        return FinMap({i: walk_t(t, shadow) for i, t in mt.items()})

    def walk(p, shadow):
        if isinstance(p, (TrueA, FalseA)):
            return p
        if isinstance(p, Cmp):
            return Cmp(p.op, walk_ie(p.left, shadow), walk_ie(p.right, shadow))
        if isinstance(p, Not):
            return Not(walk(p.body, shadow))
        if isinstance(p, And):
            return And(walk(p.left, shadow), walk(p.right, shadow))
        if isinstance(p, Or):
            return Or(walk(p.left, shadow), walk(p.right, shadow))
        if isinstance(p, Implies):
            return Implies(walk(p.left, shadow), walk(p.right, shadow))
        if isinstance(p, Exists):
            return Exists(p.names, walk(p.body, shadow | set(p.names)))
        if isinstance(p, Forall):
            return Forall(p.names, walk(p.body, shadow | set(p.names)))
        if isinstance(p, ReindexA):
            return ReindexA(walk(p.body, shadow), p.pi)
        if isinstance(p, Proj):
            return Proj(p.indices, walk(p.body, shadow))
        if isinstance(p, ProjRet):
            return ProjRet(p.indices, p.binder, walk(p.body, shadow | {p.binder}))
        if isinstance(p, WPA):
            return WPA(walk_mt(p.mt, shadow), p.binder, walk(p.body, shadow | {p.binder}))
        if isinstance(p, Projectable):
            return Projectable(walk_mt(p.mt, shadow))
        if isinstance(p, Refines):
            return p
        raise TypeError(f"not an assertion: {p!r}")

    return walk(p, frozenset(shadow))


def subst_rets(p: HAssertion, binder: str, fn) -> HAssertion:
    """Replace RetAt(binder, i) by fn(i) (an IExpr); respects shadowing."""

    def f_iexpr(e, shadow):
        if isinstance(e, RetAt) and e.binder == binder and binder not in shadow:
            return fn(e.index)
        return None

    def f_term(t, shadow):
        if isinstance(t, MetaVal) and t.kind == "ret" and t.name == binder and binder not in shadow:
            return _iexpr_to_term(fn(t.index))
        return None

    return transform(p, f_iexpr, f_term)


def _iexpr_to_term(e: IExpr) -> Term:
    if isinstance(e, Const):
        return IntLit(e.value)
    if isinstance(e, LogicVar):
        return MetaVal("var", e.name)
    if isinstance(e, RetAt):
        return MetaVal("ret", e.binder, e.index)
    if isinstance(e, PVarAt):
        raise ScopeError("cannot embed an indexed store read inside a term")
    raise ScopeError(f"cannot embed {e!r} inside a term")


def rename_ret_binder(p: HAssertion, old: str, new: str) -> HAssertion:
    if old == new:
        return p
    return subst_rets(p, old, lambda i: RetAt(new, i))


def subst_logic_vars(p: HAssertion, mapping: dict) -> HAssertion:
    """Replace free LogicVar occurrences by IExprs (terms get value leaves)."""

    def f_iexpr(e, shadow):
        if isinstance(e, LogicVar) and e.name in mapping and e.name not in shadow:
            return mapping[e.name]
        return None

    def f_term(t, shadow):
        if (
            isinstance(t, MetaVal)
            and t.kind == "var"
            and t.name in mapping
            and t.name not in shadow
        ):
            return _iexpr_to_term(mapping[t.name])
        return None

    return transform(p, f_iexpr, f_term)


def subst_params(p: HAssertion, mapping: dict) -> HAssertion:
    """Hypothesis-scheme instantiation: parameters act as program variables.

    PVarAt(param, i) becomes the argument (index-independent for values);
    Var(param) inside terms becomes the argument as a term.
    """

    def f_iexpr(e, shadow):
        if isinstance(e, PVarAt) and e.name in mapping:
            arg = mapping[e.name]
            if isinstance(arg, PVarAt):
                return PVarAt(arg.name, e.index)
            return arg
        return None

    def f_term(t, shadow):
        if isinstance(t, Var) and t.name in mapping:
            arg = mapping[t.name]
            if isinstance(arg, PVarAt):
                return Var(arg.name)
            return _iexpr_to_term(arg)
        return None

    return transform(p, f_iexpr, f_term)


# ---------------------------------------------------------------------------
# Alpha-equivalence


def alpha_eq(p1, p2, match_free_logic: bool = False) -> bool:
    """Structural equality modulo bound names (binders and quantified variables).

    With match_free_logic, free logic variables match under a consistent
    bijective renaming as well.
    """
    free_map: dict = {}
    free_rev: dict = {}

    def names_eq(n1, n2, env):
        if n1 in env:
            return env[n1] == n2
        if match_free_logic:
            if n1 in free_map:
                return free_map[n1] == n2
            if n2 in free_rev:
                return False
            free_map[n1] = n2
            free_rev[n2] = n1
            return True
        return n1 == n2

    def ie_eq(e1, e2, env):
        if type(e1) is not type(e2):
            return False
        if isinstance(e1, Const):
            return e1.value == e2.value
        if isinstance(e1, PVarAt):
            return e1.name == e2.name and e1.index == e2.index
        if isinstance(e1, RetAt):
            return e1.index == e2.index and env.get(e1.binder, e1.binder) == e2.binder
        if isinstance(e1, LogicVar):
            return names_eq(e1.name, e2.name, env)
        if isinstance(e1, Arith):
            return (
                e1.op == e2.op
                and ie_eq(e1.left, e2.left, env)
                and ie_eq(e1.right, e2.right, env)
            )
        return False

    def term_eq(t1, t2, env):
        if type(t1) is not type(t2):
            return False
        if isinstance(t1, MetaVal):
            if t1.kind != t2.kind or t1.index != t2.index:
                return False
            if t1.kind == "ret":
                return env.get(t1.name, t1.name) == t2.name
            return names_eq(t1.name, t2.name, env)
        from .lang import Assign, BinOp, If, IntLit as IL, Seq, Var as V, While

        if isinstance(t1, IL):
            return t1.value == t2.value
        if isinstance(t1, V):
            return t1.name == t2.name
        if isinstance(t1, BinOp):
            return (
                t1.op == t2.op
                and term_eq(t1.left, t2.left, env)
                and term_eq(t1.right, t2.right, env)
            )
        if isinstance(t1, Assign):
            return t1.name == t2.name and term_eq(t1.rhs, t2.rhs, env)
        if isinstance(t1, Seq):
            return term_eq(t1.first, t2.first, env) and term_eq(t1.second, t2.second, env)
        if isinstance(t1, If):
            return (
                term_eq(t1.guard, t2.guard, env)
                and term_eq(t1.then, t2.then, env)
                and term_eq(t1.orelse, t2.orelse, env)
            )
        if isinstance(t1, While):
            return term_eq(t1.guard, t2.guard, env) and term_eq(t1.body, t2.body, env)
        return t1 == t2

    def mt_eq(m1, m2, env):
        if m1.supp() != m2.supp():
            return False
        return all(term_eq(m1.get(i), m2.get(i), env) for i in m1.indices())

    def eq(p1, p2, env):
        if type(p1) is not type(p2):
            return False
        if isinstance(p1, (TrueA, FalseA)):
            return True
        if isinstance(p1, Cmp):
            return p1.op == p2.op and ie_eq(p1.left, p2.left, env) and ie_eq(
                p1.right, p2.right, env
            )
        if isinstance(p1, Not):
            return eq(p1.body, p2.body, env)
        if isinstance(p1, (And, Or, Implies)):
            return eq(p1.left, p2.left, env) and eq(p1.right, p2.right, env)
        if isinstance(p1, (Exists, Forall)):
            if len(p1.names) != len(p2.names):
                return False
            env2 = dict(env)
            env2.update(zip(p1.names, p2.names))
            return eq(p1.body, p2.body, env2)
        if isinstance(p1, ReindexA):
            return p1.pi == p2.pi and eq(p1.body, p2.body, env)
        if isinstance(p1, Proj):
            return p1.indices == p2.indices and eq(p1.body, p2.body, env)
        if isinstance(p1, ProjRet):
            if p1.indices != p2.indices:
                return False
            if env.get(p1.binder, p1.binder) != p2.binder:
                return False
            return eq(p1.body, p2.body, env)
        if isinstance(p1, WPA):
            if not mt_eq(p1.mt, p2.mt, env):
                return False
            env2 = dict(env)
            env2[p1.binder] = p2.binder
            return eq(p1.body, p2.body, env2)
        if isinstance(p1, Projectable):
            return mt_eq(p1.mt, p2.mt, env)
        if isinstance(p1, Refines):
            return p1 == p2
        return False

    a = p1.body if isinstance(p1, PostAssertion) else p1
    b = p2.body if isinstance(p2, PostAssertion) else p2
    env0 = {}
    if isinstance(p1, PostAssertion) and isinstance(p2, PostAssertion):
        env0[p1.binder] = p2.binder
    return eq(a, b, env0)


# ---------------------------------------------------------------------------
# Parsing

HOLE_INDEX = -1


class AssertionParser:
    """Parser for the assertion surface syntax (shares the term tokenizer).

    Scope tracking: `logic` holds logic-variable names in scope (declared or
    quantifier-bound), `rets` maps return binders to their component supports.
    """

    def __init__(self, ts: TokenStream, macros=None, logic=frozenset(), rets=None,
                 allow_hole=False):
        self.ts = ts
        self.macros = macros or {}
        self.logic = set(logic)
        self.rets = dict(rets or {})
        self.allow_hole = allow_hole

    # entry points ---------------------------------------------------------

    def parse_assertion(self) -> HAssertion:
        return self.parse_quantified()

    def parse_post(self) -> PostAssertion:
        self.ts.expect_word("ret")
        binder = self.ts.expect_ident()
        self.ts.expect_op(".")
        had = binder in self.rets
        old = self.rets.get(binder)
        self.rets[binder] = None  # support fixed when paired with a hyper-term
        body = self.parse_quantified()
        if had:
            self.rets[binder] = old
        else:
            del self.rets[binder]
        return PostAssertion(binder, body)

    # grammar --------------------------------------------------------------

    def parse_quantified(self) -> HAssertion:
        ts = self.ts
        if ts.at_word("exists", "forall"):
            kw = ts.next().value
            names = [ts.expect_ident()]
            while ts.peek().kind == "IDENT" and not ts.at_word("exists", "forall"):
                names.append(ts.expect_ident())
            ts.expect_op(".")
            added = [n for n in names if n not in self.logic]
            self.logic.update(names)
            body = self.parse_quantified()
            for n in added:
                self.logic.discard(n)
            cls = Exists if kw == "exists" else Forall
            return cls(tuple(names), body)
        if ts.at_word("proj"):
            ts.next()
            idxs = self.parse_index_set()
            ts.expect_op(".")
            return Proj(idxs, self.parse_quantified())
        if ts.at_word("projpost"):
            ts.next()
            idxs = self.parse_index_set()
            ts.expect_op(".")
            binders = [b for b in self.rets]
            if not binders:
                ts.error("projpost used outside a post-assertion")
            binder = binders[-1]
            old = self.rets[binder]
            self.rets[binder] = None if old is None else (old | idxs)
            body = self.parse_quantified()
            self.rets[binder] = old
            return ProjRet(idxs, binder, body)
        return self.parse_implies()

    def parse_implies(self) -> HAssertion:
        left = self.parse_or()
        if self.ts.at_op("=>"):
            self.ts.next()
            return Implies(left, self.parse_quantified())
        return left

    def parse_or(self) -> HAssertion:
        t = self.parse_and()
        while self.ts.at_op("\\/"):
            self.ts.next()
            t = Or(t, self.parse_and())
        return t

    def parse_and(self) -> HAssertion:
        t = self.parse_not()
        while self.ts.at_op("/\\"):
            self.ts.next()
            t = And(t, self.parse_not())
        return t

    def parse_not(self) -> HAssertion:
        if self.ts.at_word("not"):
            self.ts.next()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> HAssertion:
        ts = self.ts
        node = None
        if ts.at_op("("):
            ts.next()
            node = self.parse_quantified()
            ts.expect_op(")")
        elif ts.at_word("true"):
            ts.next()
            node = TrueA()
        elif ts.at_word("false"):
            ts.next()
            node = FalseA()
        elif ts.at_word("wp"):
            node = self.parse_wp()
        elif ts.at_word("projectable"):
            ts.next()
            node = Projectable(self.parse_hyper_term())
        elif ts.at_word("refines"):
            ts.next()
            idxs = self.parse_index_set()
            if len(idxs) != 1:
                ts.error("refines takes exactly one index")
            ts.expect_op("(")
            t1 = TermParser(ts, self.macros, self._meta_scope).parse_term()
            ts.expect_op(",")
            t2 = TermParser(ts, self.macros, self._meta_scope).parse_term()
            ts.expect_op(")")
            node = Refines(t1, t2, next(iter(idxs)))
        elif ts.at_word("at"):
            ts.next()
            idxs = self.parse_index_set()
            ts.expect_op("(")
            old = self.allow_hole
            self.allow_hole = True
            body = self.parse_quantified()
            self.allow_hole = old
            ts.expect_op(")")
            node = and_all([_fill_hole(body, i) for i in sorted(idxs)])
        else:
            node = self.parse_cmp()
        while self._at_reindex_suffix():
            pi = self.parse_reindexing()
            node = ReindexA(node, pi)
        return node

    def _at_reindex_suffix(self) -> bool:
        # distinguish `P[2->1]` from an unrelated `[` (e.g. a premise list)
        ts = self.ts
        if not ts.at_op("["):
            return False
        toks = ts.tokens
        j = ts.pos + 1
        if j < len(toks) and toks[j].kind == "OP" and toks[j].value == "-":
            j += 1
        if j >= len(toks) or toks[j].kind != "INT":
            return False
        j += 1
        return j < len(toks) and toks[j].kind == "OP" and toks[j].value == "->"

    def parse_wp(self) -> HAssertion:
        ts = self.ts
        ts.expect_word("wp")
        mt = self.parse_hyper_term()
        if ts.at_word("ret"):
            ts.next()
            binder = ts.expect_ident()
        else:
            binder = "_r"
        ts.expect_op(".")
        had = binder in self.rets
        old = self.rets.get(binder)
        self.rets[binder] = mt.supp()
        body = self.parse_quantified()
        if had:
            self.rets[binder] = old
        else:
            del self.rets[binder]
        return WPA(mt, binder, body)

    def parse_hyper_term(self) -> FinMap:
        ts = self.ts
        ts.expect_op("[")
        entries = {}
        if not ts.at_op("]"):
            while True:
                i = ts.expect_int()
                ts.expect_op(":")
                t = TermParser(ts, self.macros, self._meta_scope).parse_term()
                if i in entries:
                    ts.error(f"duplicate component {i}")
                entries[i] = t
                if ts.at_op(","):
                    ts.next()
                    continue
                break
        ts.expect_op("]")
        return FinMap(entries)

    def parse_index_set(self) -> frozenset:
        ts = self.ts
        ts.expect_op("{")
        idxs = {ts.expect_int()}
        while ts.at_op(","):
            ts.next()
            idxs.add(ts.expect_int())
        ts.expect_op("}")
        return frozenset(idxs)

    def parse_reindexing(self) -> Reindexing:
        ts = self.ts
        ts.expect_op("[")
        mapping = {}
        if not ts.at_op("]"):
            while True:
                src = ts.expect_int()
                ts.expect_op("->")
                dst = ts.expect_int()
                mapping[src] = dst
                if ts.at_op(","):
                    ts.next()
                    continue
                break
        ts.expect_op("]")
        return Reindexing.of(mapping)

    def parse_cmp(self) -> HAssertion:
        left = self.parse_iexpr()
        ts = self.ts
        if ts.at_op("=", "<", "<=", "!="):
            op = ts.next().value
            right = self.parse_iexpr()
            if op == "!=":
                return neq(left, right)
            return Cmp(op, left, right)
        ts.error("expected comparison operator in atomic assertion")

    def parse_iexpr(self) -> IExpr:
        t = self.parse_imul()
        while self.ts.at_op("+", "-"):
            op = self.ts.next().value
            t = Arith(op, t, self.parse_imul())
        return t

    def parse_imul(self) -> IExpr:
        t = self.parse_iatom()
        while self.ts.at_op("*"):
            self.ts.next()
            t = Arith("*", t, self.parse_iatom())
        return t

    def parse_iatom(self) -> IExpr:
        ts = self.ts
        tok = ts.peek()
        if tok.kind == "INT":
            ts.next()
            return Const(int(tok.value))
        if ts.at_op("-"):
            ts.next()
            t2 = ts.peek()
            if t2.kind != "INT":
                ts.error("expected integer after unary minus")
            ts.next()
            return Const(-int(t2.value))
        if ts.at_op("("):
            ts.next()
            e = self.parse_iexpr()
            ts.expect_op(")")
            return e
        if tok.kind == "IDENT":
            name = ts.expect_ident()
            if ts.at_op("@"):
                ts.next()
                if ts.at_op("_") or ts.at_word("_"):
                    if not self.allow_hole:
                        ts.error("index hole @_ outside at{...}(...)")
                    ts.next()
                    idx = HOLE_INDEX
                else:
                    idx = ts.expect_int()
                if name in self.rets:
                    allowed = self.rets[name]
                    if allowed is not None and idx not in allowed and idx != HOLE_INDEX:
                        ts.error(f"return binder {name!r} has no component {idx}")
                    return RetAt(name, idx)
                return PVarAt(name, idx)
            if name in self.logic:
                return LogicVar(name)
            ts.error(
                f"{name!r} is neither a bound logic variable nor indexed (use {name}@i)"
            )
        ts.error(f"unexpected token {tok.value or tok.kind!r} in expression")

    def _meta_scope(self, kind: str, name: str):
        if kind == "var":
            return name in self.logic
        return name in self.rets


def _fill_hole(p: HAssertion, i: int) -> HAssertion:
    def f_iexpr(e, shadow):
        if isinstance(e, PVarAt) and e.index == HOLE_INDEX:
            return PVarAt(e.name, i)
        if isinstance(e, RetAt) and e.index == HOLE_INDEX:
            return RetAt(e.binder, i)
        return None

    return transform(p, f_iexpr)


def parse_assertion(source: str, macros=None, logic=frozenset(), rets=None) -> HAssertion:
    ts = TokenStream(tokenize(source))
    p = AssertionParser(ts, macros, logic, rets).parse_assertion()
    tail = ts.peek()
    if tail.kind != "EOF":
        raise ParseError(f"trailing input {tail.value!r}", tail.line, tail.col)
    check_wellformed(p, logic_scope=frozenset(logic), ret_scopes=rets)
    return p


def parse_post(source: str, macros=None, logic=frozenset()) -> PostAssertion:
    ts = TokenStream(tokenize(source))
    p = AssertionParser(ts, macros, logic).parse_post()
    tail = ts.peek()
    if tail.kind != "EOF":
        raise ParseError(f"trailing input {tail.value!r}", tail.line, tail.col)
    check_wellformed(p, logic_scope=frozenset(logic))
    return p


# ---------------------------------------------------------------------------
# Pretty printing

_P_QUANT, _P_IMPL, _P_OR, _P_AND, _P_NOT, _P_ATOM = range(6)


def pretty_iexpr(e: IExpr, prec=0) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, PVarAt):
        return f"{e.name}@{e.index}"
    if isinstance(e, RetAt):
        return f"{e.binder}@{e.index}"
    if isinstance(e, LogicVar):
        return e.name
    if isinstance(e, Arith):
        if e.op in "+-":
            s = f"{pretty_iexpr(e.left, 0)} {e.op} {pretty_iexpr(e.right, 1)}"
            return f"({s})" if prec > 0 else s
        s = f"{pretty_iexpr(e.left, 1)} * {pretty_iexpr(e.right, 2)}"
        return f"({s})" if prec > 1 else s
    raise TypeError(f"not an index expression: {e!r}")


def pretty_hyper_term(mt: FinMap) -> str:
    return "[" + ", ".join(f"{i}: {pretty_term(t)}" for i, t in mt.items()) + "]"


def pretty_assertion(p, prec=_P_QUANT) -> str:
    if isinstance(p, PostAssertion):
        return f"ret {p.binder}. {pretty_assertion(p.body)}"
    if isinstance(p, TrueA):
        return "true"
    if isinstance(p, FalseA):
        return "false"
    if isinstance(p, Cmp):
        return f"{pretty_iexpr(p.left)} {p.op} {pretty_iexpr(p.right)}"
    if isinstance(p, Not):
        s = f"not {pretty_assertion(p.body, _P_NOT)}"
        return f"({s})" if prec > _P_NOT else s
    if isinstance(p, And):
        s = f"{pretty_assertion(p.left, _P_NOT)} /\\ {pretty_assertion(p.right, _P_AND)}"
        return f"({s})" if prec > _P_AND else s
    if isinstance(p, Or):
        s = f"{pretty_assertion(p.left, _P_AND)} \\/ {pretty_assertion(p.right, _P_OR)}"
        return f"({s})" if prec > _P_OR else s
    if isinstance(p, Implies):
        s = f"{pretty_assertion(p.left, _P_OR)} => {pretty_assertion(p.right, _P_IMPL)}"
        return f"({s})" if prec > _P_IMPL else s
    if isinstance(p, Exists):
        s = f"exists {' '.join(p.names)}. {pretty_assertion(p.body)}"
        return f"({s})" if prec > _P_QUANT else s
    if isinstance(p, Forall):
        s = f"forall {' '.join(p.names)}. {pretty_assertion(p.body)}"
        return f"({s})" if prec > _P_QUANT else s
    if isinstance(p, ReindexA):
        return f"{pretty_assertion(p.body, _P_ATOM)}{p.pi.pretty()}"
    if isinstance(p, Proj):
        inner = ",".join(str(i) for i in sorted(p.indices))
        s = f"proj{{{inner}}}. {pretty_assertion(p.body)}"
        return f"({s})" if prec > _P_QUANT else s
    if isinstance(p, ProjRet):
        inner = ",".join(str(i) for i in sorted(p.indices))
        s = f"projpost{{{inner}}}. {pretty_assertion(p.body)}"
        return f"({s})" if prec > _P_QUANT else s
    if isinstance(p, WPA):
        s = f"wp {pretty_hyper_term(p.mt)} ret {p.binder}. {pretty_assertion(p.body)}"
        return f"({s})" if prec > _P_QUANT else s
    if isinstance(p, Projectable):
        return f"projectable {pretty_hyper_term(p.mt)}"
    if isinstance(p, Refines):
        return f"refines{{{p.index}}}({pretty_term(p.t1)}, {pretty_term(p.t2)})"
    raise TypeError(f"not an assertion: {p!r}")
