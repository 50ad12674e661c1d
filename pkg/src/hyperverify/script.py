"""Proof scripts (.lhc), oracle task files (.hyp), and their parsing.

A proof script declares programs, hypotheses and a configuration, states one
goal judgment, and gives a nested rule tree.  Intermediate judgments are never
written down: the kernel recomputes every rule's premises top-down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lang import (
    EnumConfig,
    ParseError,
    TermParser,
    TokenStream,
    pvar_term,
    range_domain,
    tokenize,
)
from .hyper import FinMap, Reindexing
from .assertions import (
    AssertionParser,
    Const,
    HAssertion,
    LogicVar,
    PVarAt,
    PostAssertion,
    check_wellformed,
)
from .kernel import Hypothesis, Judgment, PARAM_SCHEMAS, judgment


@dataclass
class ProofScript:
    path: str
    cfg: EnumConfig
    logic_vars: frozenset
    programs: dict
    hypotheses: dict
    goal: Judgment
    tree: tuple  # (rule, params, children)
    expect_ok: bool = True


@dataclass
class OracleTask:
    path: str
    cfg: EnumConfig
    logic_vars: frozenset
    pre: HAssertion
    terms: FinMap
    post: PostAssertion
    expect: str = "valid"
    domain_sensitive: bool = False
    mode: str = "oracle"  # or "autoprove"


class _ScriptParser:
    def __init__(self, source: str, path: str = "<script>"):
        self.ts = TokenStream(tokenize(source))
        self.path = path
        self.domain = range_domain(-2, 2)
        self.fuel = 64
        self.logic = set()
        self.programs = {}
        self.hypotheses = {}
        self.expect = "valid"
        self.domain_sensitive = False
        self.mode = "oracle"

    # shared declaration handling ------------------------------------------

    def asserter(self, extra_rets=None) -> AssertionParser:
        return AssertionParser(
            self.ts, macros=self.programs, logic=frozenset(self.logic), rets=extra_rets
        )

    def parse_decls(self, stop_words):
        ts = self.ts
        while True:
            tok = ts.peek()
            if tok.kind == "EOF" or (tok.kind == "IDENT" and tok.value in stop_words):
                return
            if tok.kind != "IDENT":
                ts.error(f"unexpected token {tok.value!r} at top level")
            word = tok.value
            if word == "domain":
                ts.next()
                lo = ts.expect_int()
                ts.expect_op("..")
                hi = ts.expect_int()
                self.domain = range_domain(lo, hi)
            elif word == "fuel":
                ts.next()
                self.fuel = ts.expect_int()
            elif word == "seed":
                ts.next()
                ts.expect_int()  # reserved; scripts are deterministic anyway
            elif word == "vars":
                ts.next()
                self.logic.add(ts.expect_ident())
                while ts.at_op(","):
                    ts.next()
                    self.logic.add(ts.expect_ident())
            elif word == "expect":
                ts.next()
                val = ts.expect_ident()
                if val not in ("valid", "invalid", "inconclusive", "ok", "fail"):
                    ts.error(f"unknown expectation {val!r}")
                self.expect = val
            elif word == "mode":
                ts.next()
                self.mode = ts.expect_ident()
            elif word == "domain_sensitive":
                ts.next()
                self.domain_sensitive = True
            elif word == "program":
                ts.next()
                name = ts.expect_ident()
                params = []
                if ts.at_op("("):
                    ts.next()
                    params.append(ts.expect_ident())
                    while ts.at_op(","):
                        ts.next()
                        params.append(ts.expect_ident())
                    ts.expect_op(")")
                ts.expect_op(":=")
                scope = set(self.logic)

                def meta(kind, n, scope=scope):
                    return kind == "var" and n in scope

                body = TermParser(ts, self.programs, meta).parse_term()
                self.programs[name] = (tuple(params), body)
            elif word == "hypothesis":
                ts.next()
                name = ts.expect_ident()
                params = []
                if ts.at_op("("):
                    ts.next()
                    params.append(ts.expect_ident())
                    while ts.at_op(","):
                        ts.next()
                        params.append(ts.expect_ident())
                    ts.expect_op(")")
                ts.expect_op(":")
                j = self.parse_judgment()
                self.hypotheses[name] = Hypothesis(name, tuple(params), j)
            else:
                return

    def parse_judgment(self) -> Judgment:
        ts = self.ts
        ap = self.asserter()
        ctx = []
        if not ts.at_op("|-"):
            ctx.append(ap.parse_assertion())
            while ts.at_op(","):
                ts.next()
                ctx.append(ap.parse_assertion())
        ts.expect_op("|-")
        goal = ap.parse_assertion()
        j = judgment(ctx, goal)
        for a in j.context + (j.goal,):
            check_wellformed(a, logic_scope=frozenset(self.logic))
        return j

    # proof trees -------------------------------------------------------------

    def _rule_word(self) -> str:
        tok = self.ts.peek()
        if tok.kind != "IDENT":
            self.ts.error(f"expected a rule name, found {tok.value or tok.kind!r}")
        self.ts.next()
        return tok.value

    def parse_tree(self):
        ts = self.ts
        ts.expect_word("by")
        rule_id = self._rule_word()
        while ts.at_op("-"):
            ts.next()
            rule_id += "-" + self._rule_word()
        if rule_id == "oracle":
            return ("oracle", {}, [])
        if rule_id == "axiom":
            return ("axiom", {}, [])
        if rule_id == "hypothesis":
            name = ts.expect_ident()
            params = {"name": name}
            if ts.at_op("{"):
                params.update(self.parse_hyp_args())
            return ("hypothesis", params, [])
        schema = PARAM_SCHEMAS.get(rule_id)
        if schema is None:
            ts.error(f"unknown rule {rule_id!r}")
        params = {}
        if ts.at_op("{"):
            params = self.parse_params(rule_id, schema)
        children = []
        if ts.at_op("["):
            ts.next()
            if not ts.at_op("]"):
                children.append(self.parse_tree())
                while ts.at_op(","):
                    ts.next()
                    children.append(self.parse_tree())
            ts.expect_op("]")
        return (rule_id, params, children)

    def parse_hyp_args(self):
        ts = self.ts
        ts.expect_op("{")
        out = {"args": {}}
        while not ts.at_op("}"):
            key = ts.expect_ident()
            ts.expect_op("=")
            if key == "pi":
                out["pi"] = self.asserter().parse_reindexing()
            else:
                out["args"][key] = self.parse_arg_value()
            if ts.at_op(","):
                ts.next()
        ts.expect_op("}")
        return out

    def parse_arg_value(self):
        ts = self.ts
        tok = ts.peek()
        if tok.kind == "INT" or (tok.kind == "OP" and tok.value == "-"):
            return Const(ts.expect_int())
        name = ts.expect_ident()
        if name in self.logic:
            return LogicVar(name)
        return PVarAt(name, 0)  # program-variable argument; index is ignored

    def parse_params(self, rule_id, schema):
        ts = self.ts
        ts.expect_op("{")
        params = {}
        while not ts.at_op("}"):
            key = ts.expect_ident()
            kind = schema.get(key)
            if kind is None:
                ts.error(f"rule {rule_id} takes no parameter {key!r}")
            ts.expect_op("=")
            params[key] = self.parse_param_value(kind)
            if ts.at_op(","):
                ts.next()
        ts.expect_op("}")
        return params

    def parse_param_value(self, kind):
        ts = self.ts
        ap = self.asserter()
        if kind == "int":
            return ts.expect_int()
        if kind == "name":
            return ts.expect_ident()
        if kind == "choice":
            return ts.expect_ident()
        if kind == "names":
            if ts.at_op("("):
                ts.next()
                names = [ts.expect_ident()]
                while ts.at_op(","):
                    ts.next()
                    names.append(ts.expect_ident())
                ts.expect_op(")")
                return tuple(names)
            return (ts.expect_ident(),)
        if kind == "intlist":
            ts.expect_op("(")
            vals = []
            if not ts.at_op(")"):
                vals.append(ts.expect_int())
                while ts.at_op(","):
                    ts.next()
                    vals.append(ts.expect_int())
            ts.expect_op(")")
            return vals
        if kind == "indexset":
            return ap.parse_index_set()
        if kind == "reindex":
            return ap.parse_reindexing()
        if kind == "term":
            scope = set(self.logic)
            return TermParser(
                self.ts, self.programs, lambda k, n: k == "var" and n in scope
            ).parse_term()
        if kind == "hyperterm":
            return ap.parse_hyper_term()
        if kind == "assertion":
            return ap.parse_assertion()
        if kind == "post":
            return ap.parse_post()
        if kind == "iexpr":
            return self.parse_arg_value()
        if kind == "judgment":
            ts.expect_op("(")
            j = self.parse_judgment()
            ts.expect_op(")")
            return j
        ts.error(f"unhandled parameter kind {kind!r}")


def parse_script(source: str, path: str = "<script>") -> ProofScript:
    p = _ScriptParser(source, path)
    p.parse_decls(("goal",))
    p.ts.expect_word("goal")
    if p.ts.peek().kind == "IDENT" and not p.ts.at_op(":"):
        p.ts.expect_ident()  # optional goal label
    p.ts.expect_op(":")
    goal = p.parse_judgment()
    p.ts.expect_word("proof")
    tree = p.parse_tree()
    tail = p.ts.peek()
    if tail.kind != "EOF":
        raise ParseError(f"trailing input {tail.value!r}", tail.line, tail.col)
    return ProofScript(
        path=path,
        cfg=EnumConfig(domain=p.domain, fuel=p.fuel),
        logic_vars=frozenset(p.logic),
        programs=p.programs,
        hypotheses=p.hypotheses,
        goal=goal,
        tree=tree,
        expect_ok=p.expect not in ("fail",),
    )


def parse_task(source: str, path: str = "<task>") -> OracleTask:
    p = _ScriptParser(source, path)
    pre = terms = post = None
    while True:
        p.parse_decls(("pre", "terms", "post"))
        tok = p.ts.peek()
        if tok.kind == "EOF":
            break
        word = tok.value
        if word == "pre":
            p.ts.next()
            p.ts.expect_op(":")
            pre = p.asserter().parse_assertion()
        elif word == "terms":
            p.ts.next()
            p.ts.expect_op(":")
            terms = p.asserter().parse_hyper_term()
        elif word == "post":
            p.ts.next()
            p.ts.expect_op(":")
            post = p.asserter().parse_post()
        else:
            p.ts.error(f"unexpected section {word!r}")
    if pre is None or terms is None or post is None:
        raise ParseError(f"{path}: a task needs pre, terms, and post sections")
    check_wellformed(pre, logic_scope=p.logic)
    check_wellformed(post, logic_scope=p.logic)
    return OracleTask(
        path=path,
        cfg=EnumConfig(domain=p.domain, fuel=p.fuel),
        logic_vars=frozenset(p.logic),
        pre=pre,
        terms=terms,
        post=post,
        expect=p.expect,
        domain_sensitive=p.domain_sensitive,
        mode=p.mode,
    )
