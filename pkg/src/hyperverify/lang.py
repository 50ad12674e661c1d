"""Imperative language core: AST, parser, static functions, bounded big-step enumeration.

The language is a minimal untyped imperative language over integer stores.
Booleans are integers (0 is false, anything else is true).  The `*` expression
is a nondeterministic integer choice; enumeration restricts it to a finite
value domain so that the set of big-step outcomes is computable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Optional


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class LangError(Exception):
    pass


# ---------------------------------------------------------------------------
# AST


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class IntLit(Term):
    value: int


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Star(Term):
    pass


BINOPS = ("+", "-", "*", "<", "<=", "=")


@dataclass(frozen=True)
class BinOp(Term):
    op: str
    left: Term
    right: Term

    def __post_init__(self):
        if self.op not in BINOPS:
            raise LangError(f"unknown operator {self.op!r}")


@dataclass(frozen=True)
class Skip(Term):
    pass


@dataclass(frozen=True)
class Assign(Term):
    name: str
    rhs: Term


@dataclass(frozen=True)
class Seq(Term):
    first: Term
    second: Term


@dataclass(frozen=True)
class If(Term):
    guard: Term
    then: Term
    orelse: Term


@dataclass(frozen=True)
class While(Term):
    guard: Term
    body: Term


@dataclass(frozen=True)
class MetaVal(Term):
    """Symbolic value leaf: a logic variable or a bound return value.

    These only appear in terms embedded in assertions (e.g. running a term on
    a value produced by an enclosing WP).  They must be resolved to IntLit
    before big-step enumeration; `bigstep_enumerate` rejects them.
    kind is "var" (logic variable, index unused) or "ret" (return binder at
    an index).
    """

    kind: str
    name: str
    index: int = 0


def term_size(t: Term) -> int:
    if isinstance(t, BinOp):
        return 1 + term_size(t.left) + term_size(t.right)
    if isinstance(t, Assign):
        return 1 + term_size(t.rhs)
    if isinstance(t, Seq):
        return 1 + term_size(t.first) + term_size(t.second)
    if isinstance(t, (If, While)):
        parts = (t.guard, t.then, t.orelse) if isinstance(t, If) else (t.guard, t.body)
        return 1 + sum(term_size(p) for p in parts)
    return 1


# ---------------------------------------------------------------------------
# Stores

_EMPTY_CACHE: dict[int, "Store"] = {}


class Store:
    """Total map from program variables to integers, almost everywhere `default`.

    Canonical form drops bindings equal to the default, so structural equality
    coincides with extensional equality of the total map.
    """

    __slots__ = ("bindings", "default", "_hash")

    def __init__(self, bindings=None, default: int = 0):
        items = {}
        if bindings:
            for k, v in (bindings.items() if isinstance(bindings, dict) else bindings):
                if v != default:
                    items[k] = v
        self.bindings = items
        self.default = default
        self._hash = hash((default, frozenset(items.items())))

    def get(self, name: str) -> int:
        return self.bindings.get(name, self.default)

    def set(self, name: str, value: int) -> "Store":
        if self.bindings.get(name, self.default) == value:
            return self
        items = dict(self.bindings)
        if value == self.default:
            del items[name]
        else:
            items[name] = value
        s = Store.__new__(Store)
        s.bindings = items
        s.default = self.default
        s._hash = hash((self.default, frozenset(items.items())))
        return s

    def __eq__(self, other):
        return (
            isinstance(other, Store)
            and self.default == other.default
            and self.bindings == other.bindings
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.bindings.items()))
        return f"Store({inner}; default={self.default})"

    def sort_key(self):
        return (tuple(sorted(self.bindings.items())), self.default)


def empty_store(default: int = 0) -> Store:
    s = _EMPTY_CACHE.get(default)
    if s is None:
        s = Store({}, default)
        _EMPTY_CACHE[default] = s
    return s


class Outcome(NamedTuple):
    value: int
    store: Store


@dataclass(frozen=True)
class OutcomeSet:
    outcomes: frozenset
    truncated: bool

    def sorted(self) -> list[Outcome]:
        return sorted(self.outcomes, key=lambda o: (o.value, o.store.sort_key()))


@dataclass(frozen=True)
class EnumConfig:
    """Finite enumeration budget: value domain for `*` and quantifiers, plus fuel.

    Fuel bounds the number of big-step rule applications along one execution
    path; loop re-entry with a previously seen store on the same path is
    pruned as divergence without consuming the conclusiveness of the result.
    """

    domain: tuple
    fuel: int = 64

    def __post_init__(self):
        dom = tuple(sorted(set(self.domain)))
        if not dom:
            raise LangError("domain must be nonempty")
        if 0 not in dom:
            raise LangError("domain must contain 0")
        if self.fuel < 1:
            raise LangError("fuel must be >= 1")
        object.__setattr__(self, "domain", dom)


def range_domain(lo: int, hi: int) -> tuple:
    if lo > hi:
        raise LangError("empty domain range")
    return tuple(range(lo, hi + 1))


# ---------------------------------------------------------------------------
# Static functions


def pvar_term(t: Term) -> frozenset:
    """All program variables syntactically occurring in t."""
    acc = set()
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            acc.add(n.name)
        elif isinstance(n, BinOp):
            stack.append(n.left)
            stack.append(n.right)
        elif isinstance(n, Assign):
            acc.add(n.name)
            stack.append(n.rhs)
        elif isinstance(n, Seq):
            stack.append(n.first)
            stack.append(n.second)
        elif isinstance(n, If):
            stack.extend((n.guard, n.then, n.orelse))
        elif isinstance(n, While):
            stack.extend((n.guard, n.body))
    return frozenset(acc)


def mods_term(t: Term) -> frozenset:
    """Variables assigned anywhere inside t."""
    acc = set()
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, Assign):
            acc.add(n.name)
            stack.append(n.rhs)
        elif isinstance(n, BinOp):
            stack.append(n.left)
            stack.append(n.right)
        elif isinstance(n, Seq):
            stack.append(n.first)
            stack.append(n.second)
        elif isinstance(n, If):
            stack.extend((n.guard, n.then, n.orelse))
        elif isinstance(n, While):
            stack.extend((n.guard, n.body))
    return frozenset(acc)


def subst(t: Term, x: str, v: int) -> Term:
    """Replace every occurrence of Var(x) by the literal v."""
    return subst_term_map(t, {x: IntLit(v)})


def subst_term_map(t: Term, mapping: dict) -> Term:
    """Replace Var(name) by mapping[name] (a Term) throughout t.

    Assignment targets are renamed only when the replacement is itself a
    variable; substituting a non-variable into an assignment target is an
    error (used by parse-time macro expansion).
    """
    if isinstance(t, Var):
        return mapping.get(t.name, t)
    if isinstance(t, BinOp):
        return BinOp(t.op, subst_term_map(t.left, mapping), subst_term_map(t.right, mapping))
    if isinstance(t, Assign):
        tgt = t.name
        if tgt in mapping:
            rep = mapping[tgt]
            if not isinstance(rep, Var):
                raise LangError(
                    f"cannot substitute non-variable for assignment target {tgt!r}"
                )
            tgt = rep.name
        return Assign(tgt, subst_term_map(t.rhs, mapping))
    if isinstance(t, Seq):
        return Seq(subst_term_map(t.first, mapping), subst_term_map(t.second, mapping))
    if isinstance(t, If):
        return If(
            subst_term_map(t.guard, mapping),
            subst_term_map(t.then, mapping),
            subst_term_map(t.orelse, mapping),
        )
    if isinstance(t, While):
        return While(subst_term_map(t.guard, mapping), subst_term_map(t.body, mapping))
    return t


def has_meta(t: Term) -> bool:
    if isinstance(t, MetaVal):
        return True
    if isinstance(t, BinOp):
        return has_meta(t.left) or has_meta(t.right)
    if isinstance(t, Assign):
        return has_meta(t.rhs)
    if isinstance(t, Seq):
        return has_meta(t.first) or has_meta(t.second)
    if isinstance(t, If):
        return has_meta(t.guard) or has_meta(t.then) or has_meta(t.orelse)
    if isinstance(t, While):
        return has_meta(t.guard) or has_meta(t.body)
    return False


def meta_leaves(t: Term) -> frozenset:
    acc = set()

    def walk(n):
        if isinstance(n, MetaVal):
            acc.add(n)
        elif isinstance(n, BinOp):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, Assign):
            walk(n.rhs)
        elif isinstance(n, Seq):
            walk(n.first)
            walk(n.second)
        elif isinstance(n, If):
            walk(n.guard)
            walk(n.then)
            walk(n.orelse)
        elif isinstance(n, While):
            walk(n.guard)
            walk(n.body)

    walk(t)
    return frozenset(acc)


def is_loop_free(t: Term) -> bool:
    if isinstance(t, While):
        return False
    if isinstance(t, BinOp):
        return is_loop_free(t.left) and is_loop_free(t.right)
    if isinstance(t, Assign):
        return is_loop_free(t.rhs)
    if isinstance(t, Seq):
        return is_loop_free(t.first) and is_loop_free(t.second)
    if isinstance(t, If):
        return is_loop_free(t.guard) and is_loop_free(t.then) and is_loop_free(t.orelse)
    return True


# ---------------------------------------------------------------------------
# Big-step enumeration

_OPS: dict[str, Callable[[int, int], int]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "<": lambda a, b: 1 if a < b else 0,
    "<=": lambda a, b: 1 if a <= b else 0,
    "=": lambda a, b: 1 if a == b else 0,
}

# Global memo for full enumerations; keyed by structural term identity.
_BIGSTEP_CACHE: dict = {}
_BIGSTEP_CACHE_LIMIT = 200_000


def clear_bigstep_cache():
    _BIGSTEP_CACHE.clear()


def bigstep_enumerate(t: Term, s: Store, cfg: EnumConfig) -> OutcomeSet:
    """All big-step results of t from s, with Star restricted to cfg.domain.

    Each path may apply at most cfg.fuel big-step rules; a path that re-enters
    the same While node with an already-seen store is pruned as divergent
    (no outcome, conclusive).  `truncated` is set only when fuel cuts a path.
    """
    key = (t, s, cfg.domain, cfg.fuel)
    hit = _BIGSTEP_CACHE.get(key)
    if hit is not None:
        return hit

    domain = cfg.domain
    truncated = [False]

    def ev(term: Term, store: Store, fuel: int, chain: frozenset) -> Iterator[tuple]:
        if fuel <= 0:
            truncated[0] = True
            return
        fuel -= 1
        cls = term.__class__
        if cls is IntLit:
            yield (term.value, store, fuel)
        elif cls is Var:
            yield (store.get(term.name), store, fuel)
        elif cls is Star:
            for v in domain:
                yield (v, store, fuel)
        elif cls is Skip:
            yield (0, store, fuel)
        elif cls is BinOp:
            fn = _OPS[term.op]
            for v1, s1, f1 in ev(term.left, store, fuel, chain):
                for v2, s2, f2 in ev(term.right, s1, f1, chain):
                    yield (fn(v1, v2), s2, f2)
        elif cls is Assign:
            for v, s1, f1 in ev(term.rhs, store, fuel, chain):
                yield (v, s1.set(term.name, v), f1)
        elif cls is Seq:
            for _v, s1, f1 in ev(term.first, store, fuel, chain):
                yield from ev(term.second, s1, f1, chain)
        elif cls is If:
            for b, s1, f1 in ev(term.guard, store, fuel, chain):
                branch = term.then if b != 0 else term.orelse
                yield from ev(branch, s1, f1, chain)
        elif cls is While:
            key = (id(term), store)
            if key in chain:
                return  # divergent path: state repeats, prune conclusively
            chain2 = chain | {key}
            for b, s1, f1 in ev(term.guard, store, fuel, chain2):
                if b == 0:
                    yield (0, s1, f1)
                else:
                    for _v, s2, f2 in ev(term.body, s1, f1, chain2):
                        yield from ev(term, s2, f2, chain2)
        elif cls is MetaVal:
            raise LangError(f"unresolved symbolic value {term!r} in big-step")
        else:
            raise LangError(f"unknown term {term!r}")

    acc = set()
    for v, s1, _f in ev(t, s, cfg.fuel, frozenset()):
        acc.add(Outcome(v, s1))
    result = OutcomeSet(frozenset(acc), truncated[0])
    if len(_BIGSTEP_CACHE) < _BIGSTEP_CACHE_LIMIT:
        _BIGSTEP_CACHE[key] = result
    return result


# ---------------------------------------------------------------------------
# Concrete syntax

_KEYWORDS = {"skip", "if", "then", "else", "while", "do"}

_TWO_CHAR = {":=", "<=", "->", "=>", "/\\", "\\/", "!=", ".."}
_ONE_CHAR = set("+-*<=();{}[],.@:|#_")


class Token(NamedTuple):
    kind: str  # INT, IDENT, OP, EOF
    value: str
    line: int
    col: int


def tokenize(src: str) -> list:
    toks = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        two = src[i : i + 2]
        if two in _TWO_CHAR:
            toks.append(Token("OP", two, line, col))
            i += 2
            col += 2
            continue
        if two == "|-":
            toks.append(Token("OP", "|-", line, col))
            i += 2
            col += 2
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("INT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            toks.append(Token("IDENT", word, line, col))
            col += j - i
            i = j
            continue
        if c in _ONE_CHAR:
            toks.append(Token("OP", c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


class TokenStream:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def at_op(self, *vals) -> bool:
        t = self.peek()
        return t.kind == "OP" and t.value in vals

    def at_word(self, *vals) -> bool:
        t = self.peek()
        return t.kind == "IDENT" and t.value in vals

    def expect_op(self, val: str) -> Token:
        t = self.peek()
        if t.kind != "OP" or t.value != val:
            raise ParseError(f"expected {val!r}, found {t.value or t.kind!r}", t.line, t.col)
        return self.next()

    def expect_word(self, val: str) -> Token:
        t = self.peek()
        if t.kind != "IDENT" or t.value != val:
            raise ParseError(f"expected {val!r}, found {t.value or t.kind!r}", t.line, t.col)
        return self.next()

    def expect_ident(self) -> str:
        t = self.peek()
        if t.kind != "IDENT":
            raise ParseError(f"expected identifier, found {t.value or t.kind!r}", t.line, t.col)
        if t.value in _KEYWORDS:
            raise ParseError(f"keyword {t.value!r} cannot be an identifier", t.line, t.col)
        return self.next().value

    def expect_int(self) -> int:
        neg = False
        if self.at_op("-"):
            self.next()
            neg = True
        t = self.peek()
        if t.kind != "INT":
            raise ParseError(f"expected integer, found {t.value or t.kind!r}", t.line, t.col)
        self.next()
        return -int(t.value) if neg else int(t.value)

    def error(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)


class TermParser:
    """Recursive-descent parser for the concrete term grammar.

    Precedence (loose to tight): `;`  statements  comparisons  additive
    multiplicative  atoms.  `*` is Star in atom position and multiplication in
    operator position.  `meta_scope`, when provided, resolves identifiers that
    denote symbolic values inside assertion-level terms.
    """

    def __init__(self, ts: TokenStream, macros=None, meta_scope=None):
        self.ts = ts
        self.macros = macros or {}
        self.meta_scope = meta_scope

    def parse_term(self) -> Term:
        first = self.parse_stmt()
        if self.ts.at_op(";"):
            self.ts.next()
            return Seq(first, self.parse_term())
        return first

    def parse_stmt(self) -> Term:
        ts = self.ts
        if ts.at_word("if"):
            ts.next()
            guard = self.parse_cmp()
            ts.expect_word("then")
            then = self.parse_stmt()
            if ts.at_word("else"):
                ts.next()
                orelse = self.parse_stmt()
            else:
                orelse = Skip()
            return If(guard, then, orelse)
        if ts.at_word("while"):
            ts.next()
            guard = self.parse_cmp()
            ts.expect_word("do")
            return While(guard, self.parse_stmt())
        tok = ts.peek()
        if tok.kind == "IDENT" and tok.value not in _KEYWORDS:
            nxt = ts.tokens[ts.pos + 1]
            if nxt.kind == "OP" and nxt.value == ":=":
                name = ts.expect_ident()
                ts.expect_op(":=")
                return Assign(name, self.parse_cmp())
        return self.parse_cmp()

    def parse_cmp(self) -> Term:
        left = self.parse_add()
        if self.ts.at_op("<", "<=", "="):
            op = self.ts.next().value
            return BinOp(op, left, self.parse_add())
        return left

    def parse_add(self) -> Term:
        t = self.parse_mul()
        while self.ts.at_op("+", "-"):
            op = self.ts.next().value
            t = BinOp(op, t, self.parse_mul())
        return t

    def parse_mul(self) -> Term:
        t = self.parse_atom()
        while self.ts.at_op("*"):
            self.ts.next()
            t = BinOp("*", t, self.parse_atom())
        return t

    def parse_atom(self) -> Term:
        ts = self.ts
        tok = ts.peek()
        if tok.kind == "INT":
            ts.next()
            return IntLit(int(tok.value))
        if ts.at_op("-"):
            ts.next()
            t2 = ts.peek()
            if t2.kind != "INT":
                raise ParseError("expected integer after unary minus", t2.line, t2.col)
            ts.next()
            return IntLit(-int(t2.value))
        if ts.at_op("*"):
            ts.next()
            return Star()
        if ts.at_op("("):
            ts.next()
            t = self.parse_term()
            ts.expect_op(")")
            return t
        if tok.kind == "IDENT":
            if tok.value == "skip":
                ts.next()
                return Skip()
            if tok.value in _KEYWORDS:
                raise ParseError(f"unexpected keyword {tok.value!r}", tok.line, tok.col)
            name = ts.expect_ident()
            if name in self.macros:
                if ts.at_op("("):
                    return self._macro_call(name, tok)
                params, body = self.macros[name]
                if params:
                    raise ParseError(
                        f"macro {name!r} expects {len(params)} arguments", tok.line, tok.col
                    )
                return body
            if ts.at_op("("):
                return self._macro_call(name, tok)
            if ts.at_op("@"):
                # bound return value used as a symbolic operand
                ts.next()
                idx = ts.expect_int()
                if self.meta_scope is None or self.meta_scope("ret", name) is not True:
                    raise ParseError(f"unknown return binder {name!r}", tok.line, tok.col)
                return MetaVal("ret", name, idx)
            if self.meta_scope is not None and self.meta_scope("var", name) is True:
                return MetaVal("var", name)
            return Var(name)
        raise ParseError(f"unexpected token {tok.value or tok.kind!r}", tok.line, tok.col)

    def _macro_call(self, name: str, tok: Token) -> Term:
        macro = self.macros.get(name)
        if macro is None:
            raise ParseError(f"unknown program macro {name!r}", tok.line, tok.col)
        params, body = macro
        self.ts.expect_op("(")
        args = []
        if not self.ts.at_op(")"):
            args.append(self.parse_cmp())
            while self.ts.at_op(","):
                self.ts.next()
                args.append(self.parse_cmp())
        self.ts.expect_op(")")
        if len(args) != len(params):
            raise ParseError(
                f"macro {name!r} expects {len(params)} arguments, got {len(args)}",
                tok.line,
                tok.col,
            )
        return subst_term_map(body, dict(zip(params, args)))


def parse_term(source: str, macros=None, meta_scope=None) -> Term:
    ts = TokenStream(tokenize(source))
    t = TermParser(ts, macros, meta_scope).parse_term()
    tail = ts.peek()
    if tail.kind != "EOF":
        raise ParseError(f"trailing input {tail.value!r}", tail.line, tail.col)
    return t


# ---------------------------------------------------------------------------
# Pretty printing (round-trips through parse_term)

_PREC_SEQ, _PREC_STMT, _PREC_CMP, _PREC_ADD, _PREC_MUL, _PREC_ATOM = range(6)


def pretty_term(t: Term) -> str:
    return _pp(t, _PREC_SEQ)


def _paren(s: str, need: bool) -> str:
    return f"({s})" if need else s


def _pp(t: Term, ctx: int) -> str:
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Star):
        return "*"
    if isinstance(t, Skip):
        return "skip"
    if isinstance(t, MetaVal):
        return t.name if t.kind == "var" else f"{t.name}@{t.index}"
    if isinstance(t, BinOp):
        if t.op in ("<", "<=", "="):
            mine = _PREC_CMP
            s = f"{_pp(t.left, _PREC_ADD)} {t.op} {_pp(t.right, _PREC_ADD)}"
        elif t.op in ("+", "-"):
            mine = _PREC_ADD
            s = f"{_pp(t.left, _PREC_ADD)} {t.op} {_pp(t.right, _PREC_MUL)}"
        else:
            mine = _PREC_MUL
            s = f"{_pp(t.left, _PREC_MUL)} * {_pp(t.right, _PREC_ATOM)}"
        return _paren(s, ctx > mine)
    if isinstance(t, Assign):
        return _paren(f"{t.name} := {_pp(t.rhs, _PREC_CMP)}", ctx > _PREC_STMT)
    if isinstance(t, Seq):
        s = f"{_pp(t.first, _PREC_STMT)}; {_pp(t.second, _PREC_SEQ)}"
        return _paren(s, ctx > _PREC_SEQ)
    if isinstance(t, If):
        s = (
            f"if {_pp(t.guard, _PREC_CMP)} then {_pp(t.then, _PREC_STMT)} "
            f"else {_pp(t.orelse, _PREC_STMT)}"
        )
        return _paren(s, ctx > _PREC_STMT)
    if isinstance(t, While):
        s = f"while {_pp(t.guard, _PREC_CMP)} do {_pp(t.body, _PREC_STMT)}"
        return _paren(s, ctx > _PREC_STMT)
    raise LangError(f"cannot print {t!r}")
