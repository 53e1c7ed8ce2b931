"""Cooperative query relaxation over in-memory relations.

Evaluates positive conjunctive queries against CSV-loaded relations and, when
a query fails (or on demand), generalizes it by dropping conjuncts, replacing
constants or repeated variables with fresh variables, and applying rewrite
rules -- assigning each informative answer a similarity degree in [0, 1] so
candidate relaxations can be ranked, filtered, and compared.
"""

from .algebra import (
    AnswerTable,
    OccAttr,
    Occurrence,
    SPJQuery,
    evaluate,
    evaluate_naive,
    reconstruct_atoms,
    reconstruct_query,
    render_spj,
    translate,
)
from .datastore import (
    AttributeDecl,
    Database,
    Relation,
    Schema,
    load_database,
    load_relation_csv,
    load_schema,
    relation_to_csv,
)
from .errors import (
    DataError,
    QRelaxError,
    QueryParseError,
    SchemaError,
    SimilarityError,
    TranslationError,
)
from .querylang import (
    Atom,
    ConjunctiveQuery,
    Constant,
    Rule,
    RuleBase,
    Variable,
    format_atom,
    format_query,
    format_rule,
    free_variables,
    parse_query,
    parse_rule,
    parse_rules_text,
)
from .relaxation import (
    Candidate,
    MatchSubstitution,
    Operator,
    RelaxationStep,
    describe_step,
    enumerate_ai,
    enumerate_dc,
    enumerate_gr,
    relax_one_step,
)
from .similarity import (
    NumericRange,
    PairTable,
    SimilarityConfig,
    Taxonomy,
    load_pair_table,
    load_similarity_config,
    load_taxonomy,
    sim,
    sim_numeric,
    sim_pairs,
    sim_taxonomy,
)
from .weighting import (
    Agg,
    DcMode,
    WeightingPolicy,
    combine_step_degrees,
    filter_threshold,
    rank_candidates,
    score_table,
    weight_ai_constant,
    weight_ai_equality,
    weight_candidate,
    weight_dc,
    weight_gr,
)

__all__ = [name for name in dir() if not name.startswith("_")]
