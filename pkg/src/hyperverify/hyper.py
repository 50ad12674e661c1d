"""Finite maps over indices, reindexings, hyper-stores, and the lifted semantics.

A hyper-term maps indices to program terms; running it from a hyper-store runs
each component on the store at its index and leaves every other index's store
untouched.  All types are immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lang import EnumConfig, Store, Term, bigstep_enumerate, empty_store, mods_term, pvar_term


class OverlapConflict(Exception):
    def __init__(self, index):
        super().__init__(f"maps disagree at index {index}")
        self.index = index


class NotDisjoint(Exception):
    def __init__(self, indices):
        super().__init__(f"supports overlap at {sorted(indices)}")
        self.indices = frozenset(indices)


class FinMap:
    """Immutable finite map from indices (small naturals) to values."""

    __slots__ = ("_d", "_hash")

    def __init__(self, entries=None):
        d = dict(entries) if entries else {}
        self._d = d
        self._hash = hash(frozenset(d.items()))

    def supp(self) -> frozenset:
        return frozenset(self._d)

    def indices(self) -> tuple:
        return tuple(sorted(self._d))

    def get(self, i, default=None):
        return self._d.get(i, default)

    def items(self) -> tuple:
        return tuple(sorted(self._d.items()))

    def arity(self) -> int:
        return len(self._d)

    def is_empty(self) -> bool:
        return not self._d

    def restrict(self, indices) -> "FinMap":
        return FinMap({i: v for i, v in self._d.items() if i in indices})

    def without(self, indices) -> "FinMap":
        return FinMap({i: v for i, v in self._d.items() if i not in indices})

    def set(self, i, v) -> "FinMap":
        d = dict(self._d)
        d[i] = v
        return FinMap(d)

    def __contains__(self, i):
        return i in self._d

    def __len__(self):
        return len(self._d)

    def __eq__(self, other):
        return isinstance(other, FinMap) and self._d == other._d

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{i}: {v!r}" for i, v in self.items())
        return f"[{inner}]"


def finmap(*pairs, **_ignored) -> FinMap:
    return FinMap(dict(pairs))


def union(m1: FinMap, m2: FinMap) -> FinMap:
    """Union of maps that agree on their common support."""
    d = dict(m1._d)
    for i, v in m2._d.items():
        if i in d and d[i] != v:
            raise OverlapConflict(i)
        d[i] = v
    return FinMap(d)


def disjoint_union(m1: FinMap, m2: FinMap) -> FinMap:
    overlap = m1.supp() & m2.supp()
    if overlap:
        raise NotDisjoint(overlap)
    return union(m1, m2)


# HyperTerm / HyperRet are FinMaps of Terms / ints.
HyperTerm = FinMap
HyperRet = FinMap


def pvar_hyper(mt: FinMap) -> frozenset:
    """Indexed program variables of a hyper-term: {(x, i)}."""
    acc = set()
    for i, t in mt.items():
        for x in pvar_term(t):
            acc.add((x, i))
    return frozenset(acc)


def mods_hyper(mt: FinMap) -> frozenset:
    acc = set()
    for i, t in mt.items():
        for x in mods_term(t):
            acc.add((x, i))
    return frozenset(acc)


# ---------------------------------------------------------------------------
# Reindexings


@dataclass(frozen=True)
class Reindexing:
    """Total map on indices differing from the identity on finitely many points.

    Stored as the deviation map; `[j -> i]` maps j to i and fixes the rest.
    """

    swaps: tuple = ()

    @staticmethod
    def of(mapping: dict) -> "Reindexing":
        swaps = tuple(sorted((k, v) for k, v in mapping.items() if k != v))
        return Reindexing(swaps)

    @staticmethod
    def identity() -> "Reindexing":
        return Reindexing(())

    def apply(self, i: int) -> int:
        for k, v in self.swaps:
            if k == i:
                return v
        return i

    def mapping(self) -> dict:
        return dict(self.swaps)

    def is_identity(self) -> bool:
        return not self.swaps

    def is_bijective(self) -> bool:
        # A finite-deviation map is a global bijection iff it permutes its keys.
        keys = {k for k, _ in self.swaps}
        vals = [v for _, v in self.swaps]
        return len(set(vals)) == len(vals) and all(v in keys for v in vals)

    def compose(self, inner: "Reindexing") -> "Reindexing":
        """self . inner: i maps to self(inner(i))."""
        keys = {k for k, _ in self.swaps} | {k for k, _ in inner.swaps}
        return Reindexing.of({k: self.apply(inner.apply(k)) for k in keys})

    def inverse(self) -> "Reindexing":
        if not self.is_bijective():
            raise ValueError("only bijective reindexings invert")
        return Reindexing.of({v: k for k, v in self.swaps})

    def pretty(self) -> str:
        return "[" + ", ".join(f"{k}->{v}" for k, v in self.swaps) + "]"


def reindex_finmap(a: FinMap, pi: Reindexing) -> FinMap:
    """Pointwise reindexing: result(i) = a(pi(i))."""
    supp = a.supp()
    candidates = supp | {k for k, _ in pi.swaps}
    return FinMap({i: a.get(pi.apply(i)) for i in candidates if pi.apply(i) in supp})


# ---------------------------------------------------------------------------
# Hyper-stores


class HyperStore:
    """Total assignment of stores to indices; all-default outside the universe.

    Canonical form keeps only the non-default stores, so equality is pointwise
    over every index regardless of the recorded universe.
    """

    __slots__ = ("universe", "_stores", "_hash")

    def __init__(self, universe, stores=None, default: int = 0):
        uni = tuple(sorted(set(universe)))
        base = empty_store(default)
        d = {}
        if stores:
            for i, s in stores.items():
                if s != base:
                    d[i] = s
        self.universe = uni
        self._stores = d
        self._hash = hash((default, frozenset(d.items())))

    @property
    def default_store(self) -> Store:
        return empty_store(0)

    def store_at(self, i: int) -> Store:
        return self._stores.get(i, self.default_store)

    def with_store(self, i: int, s: Store) -> "HyperStore":
        d = dict(self._stores)
        if s == self.default_store:
            d.pop(i, None)
        else:
            d[i] = s
        uni = self.universe if i in self.universe else tuple(sorted(self.universe + (i,)))
        h = HyperStore.__new__(HyperStore)
        h.universe = uni
        h._stores = d
        h._hash = hash((0, frozenset(d.items())))
        return h

    def reindex(self, pi: Reindexing) -> "HyperStore":
        uni = set(self.universe) | {k for k, _ in pi.swaps} | {v for _, v in pi.swaps}
        return HyperStore(uni, {i: self.store_at(pi.apply(i)) for i in uni})

    def __eq__(self, other):
        return isinstance(other, HyperStore) and self._stores == other._stores

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = "; ".join(f"{i}: {s!r}" for i, s in sorted(self._stores.items()))
        return f"HyperStore({inner})"

    def sort_key(self):
        return tuple((i, s.sort_key()) for i, s in sorted(self._stores.items()))


def hyper_bigstep_enumerate(mt: FinMap, ms: HyperStore, cfg: EnumConfig):
    """All joint outcomes of a hyper-term: Cartesian product of the components.

    Returns (set of (HyperRet, HyperStore), truncated).  Stores at indices
    outside supp(mt) are preserved; return values there are undefined.
    """
    truncated = False
    per_index = []
    for i, t in mt.items():
        out = bigstep_enumerate(t, ms.store_at(i), cfg)
        truncated = truncated or out.truncated
        per_index.append((i, out.sorted()))

    results = set()

    def build(k, ret_acc, store_acc):
        if k == len(per_index):
            results.add((FinMap(ret_acc), store_acc))
            return
        i, outs = per_index[k]
        for v, s in outs:
            ret_acc[i] = v
            build(k + 1, ret_acc, store_acc.with_store(i, s))
            del ret_acc[i]

    build(0, {}, ms)
    return results, truncated


def sorted_hyper_outcomes(outcomes) -> list:
    return sorted(outcomes, key=lambda p: (p[0].items(), p[1].sort_key()))
