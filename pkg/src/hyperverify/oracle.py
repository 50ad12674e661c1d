"""Bounded-domain semantic decision procedures.

Everything here decides validity relative to an EnumConfig: hyper-stores are
enumerated exhaustively over the *footprint* of the task (the (variable,
index) slots the assertions and terms can depend on, plus free logic
variables), every other variable pinned to the default 0.  Verdicts carry the
config they are relative to; `Invalid` comes with the enumeration-order-first
witness, and `Inconclusive` is reported whenever truncation prevented a
conclusive sweep.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .lang import EnumConfig, Store, Term, bigstep_enumerate, pvar_term
from .hyper import FinMap, HyperStore, sorted_hyper_outcomes, hyper_bigstep_enumerate
from .assertions import (
    FALSE,
    TRUE,
    UNKNOWN,
    And,
    Cmp,
    Const,
    EMPTY_ENV,
    Env,
    HAssertion,
    LogicVar,
    PVarAt,
    PostAssertion,
    RetAt,
    ScopeError,
    WPA,
    all_indices,
    and_all,
    check_wellformed,
    eval_assertion,
    flatten_and,
    free_logic_vars,
    idx_over,
    instantiate_hyper_term,
    pvar_over,
)

VALID, INVALID, INCONCLUSIVE = "valid", "invalid", "inconclusive"


class Truncated(Exception):
    pass


class NotValid(Exception):
    def __init__(self, verdict):
        super().__init__("triple is not valid")
        self.verdict = verdict


@dataclass(frozen=True)
class Footprint:
    """Finite enumeration basis: store slots, index universe, free logic vars."""

    variables: tuple  # sorted ((index, name), ...)
    indices: tuple  # sorted index universe
    logic: tuple  # sorted free logic variable names

    @staticmethod
    def of(assertions=(), hyper_terms=(), extra_indices=(), extra_slots=()):
        slots = set(extra_slots)
        idxs = set(extra_indices)
        logic = set()
        for p in assertions:
            body = p.body if isinstance(p, PostAssertion) else p
            slots |= {(i, x) for x, i in pvar_over(body)}
            idxs |= all_indices(body)
            logic |= free_logic_vars(body)
        for mt in hyper_terms:
            idxs |= mt.supp()
            for i, t in mt.items():
                slots |= {(i, x) for x in pvar_term(t)}
        idxs |= {i for i, _x in slots}
        return Footprint(tuple(sorted(slots)), tuple(sorted(idxs)), tuple(sorted(logic)))

    def to_json(self):
        return {
            "variables": [[i, x] for i, x in self.variables],
            "indices": list(self.indices),
            "logicVars": list(self.logic),
        }


@dataclass(frozen=True)
class OracleVerdict:
    status: str
    cfg: EnumConfig
    footprint: Footprint
    witness_store: HyperStore = None
    witness_logic: tuple = ()
    witness_ret: FinMap = None
    witness_out: HyperStore = None

    @property
    def is_valid(self):
        return self.status == VALID

    def to_json(self):
        d = {
            "status": self.status,
            "domain": list(self.cfg.domain),
            "fuel": self.cfg.fuel,
            "footprint": self.footprint.to_json(),
        }
        if self.witness_store is not None:
            d["witness"] = {
                "stores": _hyperstore_json(self.witness_store, self.footprint),
                "logicVars": {n: v for n, v in self.witness_logic},
            }
            if self.witness_ret is not None:
                d["witness"]["returns"] = {str(i): v for i, v in self.witness_ret.items()}
            if self.witness_out is not None:
                d["witness"]["outputStores"] = _hyperstore_json(
                    self.witness_out, self.footprint
                )
        return d


def _hyperstore_json(ms: HyperStore, fp: Footprint):
    out = {}
    names = sorted({x for _i, x in fp.variables})
    for i in fp.indices:
        s = ms.store_at(i)
        out[str(i)] = {x: s.get(x) for x in names}
    return out


# ---------------------------------------------------------------------------
# Store enumeration


def _pinned_slots(context_atoms, slots, logic):
    """Union-find over slots/logic vars from top-level equality conjuncts.

    Detects `x@i = v`, `x@i = y@j`, `x@i = c`, `v = c`, `v = w` pins so the
    sweep only enumerates class representatives.  Purely an optimization: the
    skipped assignments all falsify the context conjunct that pinned them.
    Returns (order, derive) where `order` lists representative keys to
    enumerate and derive maps every key to (rep, const_or_None).
    """
    keys = [("s",) + s for s in slots] + [("l", n) for n in logic]
    keyset = set(keys)
    parent = {k: k for k in keys}
    const: dict = {}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def key_of(e):
        if isinstance(e, PVarAt):
            k = ("s", e.index, e.name)
            return k if k in keyset else None
        if isinstance(e, LogicVar):
            k = ("l", e.name)
            return k if k in keyset else None
        return None

    def unite(a, b):
        ra, rb = find(a), find(b)
        if ra == rb:
            return True
        ca, cb = const.get(ra), const.get(rb)
        if ca is not None and cb is not None and ca != cb:
            return False  # contradictory pins: context unsatisfiable
        parent[rb] = ra
        if cb is not None:
            const[ra] = cb
        return True

    unsat = False
    for atom in context_atoms:
        if not (isinstance(atom, Cmp) and atom.op == "="):
            continue
        a, b = atom.left, atom.right
        ka, kb = key_of(a), key_of(b)
        if ka is not None and kb is not None:
            if not unite(ka, kb):
                unsat = True
        elif ka is not None and isinstance(b, Const):
            ra = find(ka)
            if const.get(ra, b.value) != b.value:
                unsat = True
            const[ra] = b.value
        elif kb is not None and isinstance(a, Const):
            rb = find(kb)
            if const.get(rb, a.value) != a.value:
                unsat = True
            const[rb] = a.value
    # canonical representative = earliest class member in enumeration order,
    # so derived slots always follow their representative and the pruned sweep
    # still visits assignments in lexicographic order.
    canon: dict = {}
    for k in keys:
        r = find(k)
        if r not in canon:
            canon[r] = k
    reps = []
    derive = {}
    for k in keys:
        r = find(k)
        c = canon[r]
        derive[k] = (c, const.get(r))
        if k == c and const.get(r) is None:
            reps.append(k)
    return reps, derive, unsat


def iter_assignments(fp: Footprint, cfg: EnumConfig, context=()):
    """Yield (HyperStore, logic_env) in deterministic enumeration order.

    Order: store slots ascending by (index, variable), then logic variables by
    name, values ascending.  Equality pins from the context only skip
    assignments that falsify the context.
    """
    atoms = []
    for c in context:
        atoms.extend(flatten_and(c))
    slots = fp.variables
    reps, derive, unsat = _pinned_slots(atoms, slots, fp.logic)
    if unsat:
        return
    uni = fp.indices if fp.indices else (1,)

    def value_of(key, rep_vals):
        rep, c = derive[key]
        if c is not None:
            return c
        return rep_vals[rep]

    for combo in itertools.product(cfg.domain, repeat=len(reps)):
        rep_vals = dict(zip(reps, combo))
        stores: dict = {}
        ok = True
        for i, x in slots:
            v = value_of(("s", i, x), rep_vals)
            if v not in cfg.domain:
                ok = False
                break
            stores.setdefault(i, {})[x] = v
        if not ok:
            continue
        logic = {}
        for n in fp.logic:
            v = value_of(("l", n), rep_vals)
            if v not in cfg.domain:
                ok = False
                break
            logic[n] = v
        if not ok:
            continue
        ms = HyperStore(uni, {i: Store(d) for i, d in stores.items()})
        yield ms, logic


# ---------------------------------------------------------------------------
# Entailment and triples


def check_entailment(gamma, p, cfg: EnumConfig, extra_slots=(), extra_indices=()):
    """Bounded validity of (/\\ gamma) => p over the footprint."""
    gamma = list(gamma)
    fp = Footprint.of(
        assertions=gamma + [p], extra_slots=extra_slots, extra_indices=extra_indices
    )
    gaps = False
    for ms, logic in iter_assignments(fp, cfg, context=gamma):
        env = Env(logic, {})
        gv = TRUE
        for g in gamma:
            v = eval_assertion(g, ms, env, cfg)
            if v == FALSE:
                gv = FALSE
                break
            if v == UNKNOWN:
                gv = UNKNOWN
        if gv == FALSE:
            continue
        pv = eval_assertion(p, ms, env, cfg)
        if gv == TRUE and pv == FALSE:
            return OracleVerdict(
                INVALID, cfg, fp, witness_store=ms, witness_logic=tuple(sorted(logic.items()))
            )
        if pv != TRUE:
            gaps = True
    return OracleVerdict(INCONCLUSIVE if gaps else VALID, cfg, fp)


def triple_assertion(p: HAssertion, mt: FinMap, q: PostAssertion) -> WPA:
    for b, i in _post_ret_indices(q):
        if i not in mt.supp():
            raise ScopeError(
                f"postcondition mentions {b}@{i} outside the hyper-term support"
            )
    return WPA(mt, q.binder, q.body)


def _post_ret_indices(q: PostAssertion):
    acc = []

    def walk_ie(e, shadow):
        if isinstance(e, RetAt) and e.binder == q.binder and q.binder not in shadow:
            acc.append((e.binder, e.index))
        return None

    from .assertions import transform

    transform(q.body, walk_ie)
    # ProjRet-extended indices are legal; drop pairs licensed by a projection
    return acc


def check_triple(p: HAssertion, mt: FinMap, q: PostAssertion, cfg: EnumConfig):
    """Valid iff every P-state's joint terminating runs of mt satisfy q."""
    wpa = triple_assertion(p, mt, q)
    verdict = check_entailment([p], wpa, cfg)
    if verdict.status != INVALID:
        return verdict
    # attach the violating hyper-outcome to the witness
    ms = verdict.witness_store
    env = Env(dict(verdict.witness_logic), {})
    mt_inst = instantiate_hyper_term(mt, env)
    outcomes, _trunc = hyper_bigstep_enumerate(mt_inst, ms, cfg)
    for ret, ms2 in sorted_hyper_outcomes(outcomes):
        if eval_assertion(q.body, ms2, env.bind_ret(q.binder, ret), cfg) == FALSE:
            return OracleVerdict(
                INVALID,
                cfg,
                verdict.footprint,
                witness_store=ms,
                witness_logic=verdict.witness_logic,
                witness_ret=ret,
                witness_out=ms2,
            )
    return verdict


def falsify(p: HAssertion, mt: FinMap, q: PostAssertion, cfg: EnumConfig):
    """First violating (input hyper-store, hyper-outcome), or None."""
    verdict = check_triple(p, mt, q, cfg)
    if verdict.status == INVALID:
        return verdict
    return None


def check_refinement(t1: Term, t2: Term, cfg: EnumConfig):
    """Valid iff every outcome of t1 is an outcome of t2, from every footprint store."""
    vs = sorted(pvar_term(t1) | pvar_term(t2))
    fp = Footprint(tuple((1, x) for x in vs), (1,), ())
    gaps = False
    for ms, _logic in iter_assignments(fp, cfg):
        s = ms.store_at(1)
        out1 = bigstep_enumerate(t1, s, cfg)
        out2 = bigstep_enumerate(t2, s, cfg)
        missing = out1.outcomes - out2.outcomes
        if missing and not out2.truncated:
            return OracleVerdict(INVALID, cfg, fp, witness_store=ms)
        if missing or out1.truncated:
            gaps = True
    return OracleVerdict(INCONCLUSIVE if gaps else VALID, cfg, fp)


def check_projectable(mt: FinMap, ms: HyperStore, cfg: EnumConfig) -> int:
    """Three-valued: does some joint terminating outcome of mt exist from ms?"""
    outcomes, truncated = hyper_bigstep_enumerate(mt, ms, cfg)
    if outcomes:
        return TRUE
    return UNKNOWN if truncated else FALSE


def strongest_post(t: Term, s0: Store, cfg: EnumConfig):
    """Exact outcome table of t from s0; raises Truncated if fuel cut a path."""
    out = bigstep_enumerate(t, s0, cfg)
    if out.truncated:
        raise Truncated(f"enumeration of {t!r} truncated at fuel {cfg.fuel}")
    return out.sorted()


def state_assertion(s0: Store, variables, index: int) -> HAssertion:
    """Finite conjunction pinning the footprint variables at one index."""
    return and_all(
        [Cmp("=", PVarAt(x, index), Const(s0.get(x))) for x in sorted(variables)]
    )


def strongest_post_assertion(t: Term, s0: Store, variables, index: int, binder: str,
                             cfg: EnumConfig) -> HAssertion:
    """Table-shaped relational strongest post for one component and one input."""
    rows = []
    for v, s1 in strongest_post(t, s0, cfg):
        eqs = [Cmp("=", RetAt(binder, index), Const(v))]
        eqs += [Cmp("=", PVarAt(x, index), Const(s1.get(x))) for x in sorted(variables)]
        rows.append(and_all(eqs))
    from .assertions import or_all

    return or_all(rows)


def revalidate_witness(verdict: OracleVerdict, gamma, p, cfg: EnumConfig) -> bool:
    """An Invalid witness must conclusively violate the claim in isolation."""
    if verdict.status != INVALID:
        return False
    env = Env(dict(verdict.witness_logic), {})
    ms = verdict.witness_store
    for g in gamma:
        if eval_assertion(g, ms, env, cfg) != TRUE:
            return False
    return eval_assertion(p, ms, env, cfg) == FALSE
