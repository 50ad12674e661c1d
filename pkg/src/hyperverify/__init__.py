"""Hypersafety verification toolkit: proof kernel, bounded oracle, rule fuzzer.

Hyper-triples relate finitely many runs of (possibly different) programs;
this package checks derivations built from a weakest-precondition calculus
over hyper-terms, decides triples exhaustively over finite value domains,
and validates every inference rule against the semantics by fuzzing.
"""

from .lang import (
    EnumConfig,
    Outcome,
    OutcomeSet,
    Store,
    bigstep_enumerate,
    mods_term,
    parse_term,
    pretty_term,
    pvar_term,
    range_domain,
    subst,
)
from .hyper import (
    FinMap,
    HyperStore,
    Reindexing,
    disjoint_union,
    hyper_bigstep_enumerate,
    reindex_finmap,
    union,
)
from .assertions import (
    Env,
    PostAssertion,
    eval_assertion,
    idx_over,
    parse_assertion,
    parse_post,
    pvar_over,
    reindex_assertion,
)
from .oracle import (
    Footprint,
    OracleVerdict,
    check_entailment,
    check_projectable,
    check_refinement,
    check_triple,
    falsify,
    strongest_post,
)
from .kernel import (
    CheckReport,
    Derivation,
    Hypothesis,
    Judgment,
    apply_rule,
    auto_prove_loopfree,
    check_derivation,
    derived_rule_expand,
    elaborate,
)
from .fuzz import FuzzReport, catalog_rules, fuzz_rule

__version__ = "0.1.0"
