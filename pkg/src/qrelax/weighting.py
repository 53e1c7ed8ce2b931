"""Per-tuple similarity degrees, table scores, thresholding, and ranking.

Every weighting rule produces degrees in [0, 1]:

* anti-instantiated constant: each answer tuple is scored by the similarity
  between the removed constant and the value that took its place;
* removed equality: similarity between the fresh column's value and the
  values the rest of the class still holds in the joined row;
* dropped occurrence: a purely syntactic arity ratio, a dropped-conditions
  ratio, or a semantic mode comparing each dropped constant against every
  constant in the answer tuple;
* rule replacement: similarity between the rule's body and head constants,
  uniform over the table.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .algebra import AnswerTable, SPJQuery
from .relaxation import Candidate, Operator, RelaxationStep
from .similarity import NumericRange, SimilarityConfig
from .values import Degree, Value


class Agg(Enum):
    """Aggregation used both within a tuple's degree and across a table."""

    MAX = "max"
    AVG = "avg"

    def combine(self, values: Iterable[Degree]) -> Degree:
        values = list(values)
        if not values:
            raise ValueError("cannot aggregate an empty collection of degrees")
        if self is Agg.MAX:
            return max(values)
        return sum(values, Fraction(0)) / len(values)


class DcMode(Enum):
    SYNTACTIC_ARITY = "syntactic"
    CONDITIONS_RATIO = "conditions"
    SEMANTIC = "semantic"


@dataclass
class WeightingPolicy:
    dc_mode: DcMode = DcMode.SEMANTIC
    tuple_agg: Agg = Agg.AVG
    table_agg: Agg = Agg.AVG
    min_sim: Degree = Fraction(0)
    step_combination: str = "product"


def _sim_or_default(cfg: SimilarityConfig, attr: str, a: Value, b: Value) -> Degree:
    """Similarity that tolerates kind mismatches against numeric providers
    (a dropped numeric condition compared against a text cell is simply
    unrelated, not an error)."""
    provider = cfg.providers.get(attr)
    if isinstance(provider, NumericRange) and not (
        isinstance(a, Fraction) and isinstance(b, Fraction)
    ):
        return Fraction(1) if a == b else cfg.default_sim
    return cfg.sim(attr, a, b)


def weight_ai_constant(
    answers: AnswerTable, step: RelaxationStep, cfg: SimilarityConfig
) -> AnswerTable:
    """Degree of each row: similarity between the anti-instantiated constant
    and the row's value in the fresh column."""
    col = answers.columns.index(step.ai_fresh_column)
    attr = step.ai_attr.attribute_name
    removed = step.ai_constant.value
    degrees = {row: cfg.sim(attr, removed, row[col]) for row in answers.rows}
    return replace(answers, degrees=degrees)


def weight_ai_equality(
    answers: AnswerTable,
    step: RelaxationStep,
    cfg: SimilarityConfig,
    policy: WeightingPolicy,
) -> AnswerTable:
    """Degree of each row: similarity between the fresh column's value and
    the values of the remaining class members, aggregated within the tuple.

    The remaining members need not be projected; their values come from the
    witness tuples attached at evaluation time, and each comparison is looked
    up under that member's own attribute. When several joined rows collapse
    onto one output row, the row keeps the best degree.
    """
    if answers.aux is None:
        raise ValueError(
            "equality-split weighting needs witness values; evaluate the "
            "candidate with aux_attrs=step.ai_remaining"
        )
    col = answers.columns.index(step.ai_fresh_column)
    degrees = {}
    for row in answers.rows:
        fresh_value = row[col]
        per_witness = [
            policy.tuple_agg.combine(
                cfg.sim(member.attribute_name, fresh_value, member_value)
                for member, member_value in zip(step.ai_remaining, witness)
            )
            for witness in answers.aux[row]
        ]
        degrees[row] = max(per_witness)
    return replace(answers, degrees=degrees)


def weight_dc(
    answers: AnswerTable,
    step: RelaxationStep,
    original: SPJQuery,
    cfg: SimilarityConfig,
    policy: WeightingPolicy,
) -> AnswerTable:
    """Weight a dropped-occurrence table according to the policy's mode.

    All ratios are measured against the original query: the arity mode
    divides the dropped relation's arity by the sum of all occurrence
    arities; the conditions mode divides the dropped selection entries and
    equality memberships by the original totals; the semantic mode compares
    each dropped constant with every constant in the answer tuple.
    """
    mode = policy.dc_mode
    if mode is DcMode.SYNTACTIC_ARITY:
        arity = len(original.occurrence(step.dc_occurrence).attrs)
        total = sum(len(occ.attrs) for occ in original.occurrences)
        uniform = 1 - Fraction(arity, total)
        return replace(answers, degrees={row: uniform for row in answers.rows})
    if mode is DcMode.CONDITIONS_RATIO:
        dropped = len(step.dc_dropped_selections) + step.dc_dropped_eq_memberships
        total = step.dc_total_conditions
        uniform = Fraction(1) if total == 0 else 1 - Fraction(dropped, total)
        return replace(answers, degrees={row: uniform for row in answers.rows})
    if not step.dc_dropped_selections:
        return replace(answers, degrees={row: Fraction(1) for row in answers.rows})
    degrees = {}
    for row in answers.rows:
        per_condition = [
            policy.tuple_agg.combine(
                _sim_or_default(cfg, attr.attribute_name, const.value, cell)
                for cell in row
            )
            for attr, const in step.dc_dropped_selections
        ]
        degrees[row] = policy.tuple_agg.combine(per_condition)
    return replace(answers, degrees=degrees)


def weight_gr(
    answers: AnswerTable,
    step: RelaxationStep,
    cfg: SimilarityConfig,
    policy: WeightingPolicy,
) -> AnswerTable:
    """Uniform degree: aggregated similarity over every (body constant, head
    constant) pair of the applied rule; a rule without such pairs keeps
    degree 1."""
    pairs = step.gr_constant_pairs
    if pairs:
        uniform = policy.tuple_agg.combine(
            _sim_or_default(cfg, attr, body_value, head_value)
            for attr, body_value, head_value in pairs
        )
    else:
        uniform = Fraction(1)
    return replace(answers, degrees={row: uniform for row in answers.rows})


def weight_candidate(
    cand: Candidate,
    original: SPJQuery,
    cfg: SimilarityConfig,
    policy: WeightingPolicy,
) -> AnswerTable:
    """Dispatch to the weighting rule for the candidate's operator."""
    if cand.answers is None:
        raise ValueError("candidate must be evaluated before weighting")
    op = cand.step.operator
    if op is Operator.DC:
        return weight_dc(cand.answers, cand.step, original, cfg, policy)
    if op is Operator.AI_CONST:
        return weight_ai_constant(cand.answers, cand.step, cfg)
    if op is Operator.AI_EQ:
        return weight_ai_equality(cand.answers, cand.step, cfg, policy)
    return weight_gr(cand.answers, cand.step, cfg, policy)


def score_table(answers: AnswerTable, table_agg: Agg) -> Degree:
    """Condense a weighted table into one degree; an empty table scores 0."""
    if not answers.rows:
        return Fraction(0)
    if answers.degrees is None:
        raise ValueError("cannot score a table without degrees")
    return table_agg.combine(answers.degrees.values())


def filter_threshold(answers: AnswerTable, min_sim: Degree) -> AnswerTable:
    """Withhold rows whose degree falls below the threshold."""
    if answers.degrees is None or min_sim <= 0:
        return answers
    kept = frozenset(r for r in answers.rows if answers.degrees[r] >= min_sim)
    degrees = {r: answers.degrees[r] for r in kept}
    aux = None
    if answers.aux is not None:
        aux = {r: w for r, w in answers.aux.items() if r in kept}
    return AnswerTable(answers.columns, kept, degrees=degrees, aux=aux)


def rank_candidates(candidates: Sequence[Candidate]) -> list[Candidate]:
    """Descending by table score; ties broken by operator (drop < anti-inst
    < replacement) and then enumeration order, never by input position."""
    for cand in candidates:
        if cand.score is None:
            raise ValueError("candidates must be scored before ranking")
    return sorted(candidates, key=lambda c: (-c.score, c.order_key))


def combine_step_degrees(previous: Degree, current: Degree) -> Degree:
    """Degree of an answer reached through several generalization steps:
    the product of the per-step degrees."""
    return previous * current
