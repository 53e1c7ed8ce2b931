"""The three generalization operators, as transformations of the SPJ form.

Each operator rewrites the component sets of an `SPJQuery` and records a
`RelaxationStep` describing exactly what was removed or replaced, which the
weighting layer later turns into per-tuple similarity degrees:

* drop-occurrence: one relation occurrence leaves the join, along with its
  selections and equality memberships;
* anti-instantiation: one selection constant, or one member of an equality
  class, is replaced by a fresh variable that gets projected;
* rule replacement: the atoms matched by a rule body (under a substitution
  of the rule's variables) are replaced by the rule's head.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping

from .algebra import (
    AnswerTable,
    OccAttr,
    Occurrence,
    SPJQuery,
    evaluate,
    reconstruct_atoms,
)
from .datastore import Database, Schema
from .errors import TranslationError
from .querylang import Atom, Constant, Rule, RuleBase, Term, Variable, format_term
from .values import Value


class Operator(Enum):
    DC = "DC"
    AI_CONST = "AI_CONST"
    AI_EQ = "AI_EQ"
    GR = "GR"


# Tie-break order for ranking: dropping < anti-instantiation < replacement.
OPERATOR_RANK = {Operator.DC: 0, Operator.AI_CONST: 1, Operator.AI_EQ: 1, Operator.GR: 2}


@dataclass(frozen=True)
class MatchSubstitution:
    """Binds each rule variable to the query term it matched."""

    bindings: Mapping[str, Term]

    def apply(self, term: Term) -> Term:
        if isinstance(term, Variable):
            return self.bindings[term.name]
        return term

    def render(self) -> str:
        items = sorted(self.bindings.items())
        return "{" + ", ".join(f"{v}:={format_term(t)}" for v, t in items) + "}"


@dataclass(frozen=True)
class RelaxationStep:
    """Provenance record of a single operator application."""

    operator: Operator
    # drop-occurrence
    dc_occurrence: int | None = None
    dc_relation: str | None = None
    dc_dropped_selections: tuple[tuple[OccAttr, Constant], ...] | None = None
    dc_dropped_eq_memberships: int | None = None
    dc_total_conditions: int | None = None
    # anti-instantiation (both kinds)
    ai_attr: OccAttr | None = None
    ai_fresh_var: str | None = None
    ai_fresh_column: str | None = None
    ai_constant: Constant | None = None            # AI_CONST only
    ai_class: tuple[OccAttr, ...] | None = None    # AI_EQ: the original class
    ai_remaining: tuple[OccAttr, ...] | None = None  # AI_EQ: class minus target
    # rule replacement
    gr_rule_index: int | None = None
    gr_rule: Rule | None = None
    gr_theta: MatchSubstitution | None = None
    gr_replaced: tuple[int, ...] | None = None     # removed occurrence indexes
    gr_replaced_labels: tuple[str, ...] | None = None
    gr_occurrence: int | None = None               # index of the inserted head
    gr_constant_pairs: tuple[tuple[str, Value, Value], ...] | None = None

    def __post_init__(self):
        required = {
            Operator.DC: ("dc_occurrence", "dc_relation", "dc_dropped_selections",
                          "dc_dropped_eq_memberships", "dc_total_conditions"),
            Operator.AI_CONST: ("ai_attr", "ai_fresh_var", "ai_fresh_column", "ai_constant"),
            Operator.AI_EQ: ("ai_attr", "ai_fresh_var", "ai_fresh_column",
                             "ai_class", "ai_remaining"),
            Operator.GR: ("gr_rule_index", "gr_rule", "gr_theta", "gr_replaced",
                          "gr_replaced_labels", "gr_occurrence", "gr_constant_pairs"),
        }[self.operator]
        for name in required:
            if getattr(self, name) is None:
                raise ValueError(f"{self.operator.value} step needs {name}")


def describe_step(step: RelaxationStep) -> str:
    """Stable one-line step description used in reports and golden tests."""
    if step.operator is Operator.DC:
        return f"DC drop {step.dc_relation}#{step.dc_occurrence}"
    if step.operator is Operator.AI_CONST:
        value = format_term(step.ai_constant)
        return f"AI const {step.ai_attr.alias}={value} -> {step.ai_fresh_var}"
    if step.operator is Operator.AI_EQ:
        cls = ",".join(m.alias for m in step.ai_class)
        return f"AI eq split {step.ai_attr.alias} from {{{cls}}} -> {step.ai_fresh_var}"
    labels = ",".join(step.gr_replaced_labels)
    return (
        f"GR rule#{step.gr_rule_index} theta{step.gr_theta.render()} "
        f"replace {{{labels}}}"
    )


@dataclass
class Candidate:
    """A generalized query, how it was produced, and (once evaluated) its
    answers; weighting fills in degrees, a score, and the rank key."""

    query: SPJQuery
    step: RelaxationStep
    answers: AnswerTable | None = None
    weighted: AnswerTable | None = None
    filtered: AnswerTable | None = None
    score: object | None = None
    order_key: tuple = ()


def _fresh_var(spj: SPJQuery) -> str:
    """Next unused `v<k>` name, counting every variable already present."""
    highest = 0
    for term in spj.provenance.values():
        if isinstance(term, Variable):
            m = re.fullmatch(r"v(\d+)", term.name)
            if m:
                highest = max(highest, int(m.group(1)))
    return f"v{highest + 1}"


def _class_of(spj: SPJQuery, attr: OccAttr) -> tuple[OccAttr, ...] | None:
    for cls in spj.eq_classes:
        if attr in cls:
            return cls
    return None


def enumerate_dc(spj: SPJQuery) -> list[Candidate]:
    """One candidate per occurrence that can be dropped.

    Dropping the last remaining occurrence would leave no query at all, so
    single-occurrence queries yield no candidates.
    """
    if len(spj.occurrences) < 2:
        return []
    total_conditions = len(spj.selections) + sum(
        len(cls) for cls in spj.eq_classes if len(cls) >= 2
    )
    out = []
    for occ in spj.occurrences:
        i = occ.index
        new_occs = tuple(o for o in spj.occurrences if o.index != i)
        dropped_sel = tuple(x for x in spj.selections if x[0].occurrence_index == i)
        new_sel = tuple(x for x in spj.selections if x[0].occurrence_index != i)
        dropped_eq = 0
        new_classes = []
        for cls in spj.eq_classes:
            kept = tuple(m for m in cls if m.occurrence_index != i)
            if len(cls) >= 2:
                dropped_eq += len(cls) - len(kept)
            if kept:
                new_classes.append(kept)
        new_proj = []
        for attr, name in spj.projection:
            if attr.occurrence_index != i:
                new_proj.append((attr, name))
                continue
            cls = _class_of(spj, attr) or ()
            repl = next((m for m in cls if m.occurrence_index != i), None)
            if repl is not None:
                new_proj.append((repl, name))
            # else: the variable leaves the output schema with its occurrence
        provenance = {
            a: t for a, t in spj.provenance.items() if a.occurrence_index != i
        }
        query = SPJQuery(new_occs, tuple(new_proj), new_sel, tuple(new_classes), provenance)
        step = RelaxationStep(
            Operator.DC,
            dc_occurrence=i,
            dc_relation=occ.relation_name,
            dc_dropped_selections=dropped_sel,
            dc_dropped_eq_memberships=dropped_eq,
            dc_total_conditions=total_conditions,
        )
        out.append(Candidate(query, step))
    return out


def _ai_candidate(
    spj: SPJQuery,
    attr: OccAttr,
    new_selections: tuple,
    new_classes: tuple,
    step_fields: dict,
) -> Candidate:
    fresh = step_fields["ai_fresh_var"]
    column = step_fields["ai_fresh_column"]
    new_proj = []
    for pa, name in spj.projection:
        if pa == attr:
            # The split member carried a projected variable: re-point that
            # variable to the first remaining member of its class.
            remaining = step_fields["ai_remaining"]
            new_proj.append((remaining[0], name))
        else:
            new_proj.append((pa, name))
    new_proj.append((attr, column))
    provenance = dict(spj.provenance)
    provenance[attr] = Variable(fresh)
    query = SPJQuery(spj.occurrences, tuple(new_proj), new_selections, new_classes, provenance)
    return Candidate(query, RelaxationStep(**step_fields))


def enumerate_ai(spj: SPJQuery) -> list[Candidate]:
    """Anti-instantiation candidates: one per selection constant, then one
    per splittable equality-class member.

    For a class of exactly two members both splits denote the same query (the
    equality simply disappears), so only the later member is split and the
    earlier one keeps the original variable. Larger classes yield one
    genuinely distinct candidate per member, the rest of the class staying
    mutually equal.
    """
    out = []
    for attr, const in spj.selections:
        fresh = _fresh_var(spj)
        out.append(
            _ai_candidate(
                spj,
                attr,
                new_selections=tuple(x for x in spj.selections if x != (attr, const)),
                new_classes=spj.eq_classes + ((attr,),),
                step_fields=dict(
                    operator=Operator.AI_CONST,
                    ai_attr=attr,
                    ai_constant=const,
                    ai_fresh_var=fresh,
                    ai_fresh_column=f"{fresh}/{attr.alias}",
                    ai_remaining=None,
                ),
            )
        )
    for cls in spj.eq_classes:
        if len(cls) < 2:
            continue
        targets = cls[1:] if len(cls) == 2 else cls
        for attr in targets:
            fresh = _fresh_var(spj)
            remaining = tuple(m for m in cls if m != attr)
            new_classes = tuple(
                remaining if c == cls else c for c in spj.eq_classes
            ) + ((attr,),)
            out.append(
                _ai_candidate(
                    spj,
                    attr,
                    new_selections=spj.selections,
                    new_classes=new_classes,
                    step_fields=dict(
                        operator=Operator.AI_EQ,
                        ai_attr=attr,
                        ai_fresh_var=fresh,
                        ai_fresh_column=f"{fresh}/{attr.alias}",
                        ai_class=cls,
                        ai_remaining=remaining,
                    ),
                )
            )
    return out


def _unify_atom(body_atom: Atom, query_atom: Atom, theta: dict[str, Term]) -> dict | None:
    """Extend theta so that theta(body_atom) == query_atom, or fail.

    Only rule variables are bound; constants in the body must match query
    constants verbatim.
    """
    if body_atom.relation_name != query_atom.relation_name:
        return None
    if len(body_atom.args) != len(query_atom.args):
        return None
    theta = dict(theta)
    for bt, qt in zip(body_atom.args, query_atom.args):
        if isinstance(bt, Constant):
            if bt != qt:
                return None
        else:
            bound = theta.get(bt.name)
            if bound is None:
                theta[bt.name] = qt
            elif bound != qt:
                return None
    return theta


def _rule_matches(rule: Rule, atoms: list[Atom]) -> list[tuple[tuple[int, ...], dict]]:
    """All injective assignments of body atoms to distinct query atoms.

    Returns (positions, theta) pairs in discovery order, deduplicated on the
    (matched-atom set, substitution) pair so that permuting identical body
    atoms does not multiply candidates.
    """
    results: list[tuple[tuple[int, ...], dict]] = []

    def extend(bi: int, used: tuple[int, ...], theta: dict) -> None:
        if bi == len(rule.body):
            results.append((used, theta))
            return
        for pos, atom in enumerate(atoms):
            if pos in used:
                continue
            extended = _unify_atom(rule.body[bi], atom, theta)
            if extended is not None:
                extend(bi + 1, used + (pos,), extended)

    extend(0, (), {})
    seen = set()
    unique = []
    for positions, theta in results:
        key = (frozenset(positions), tuple(sorted(theta.items())))
        if key not in seen:
            seen.add(key)
            unique.append((positions, theta))
    return unique


def _rule_constant_pairs(
    rule: Rule, schemas: Mapping[str, Schema]
) -> tuple[tuple[str, Value, Value], ...]:
    """Cross product of the rule's body constants and head constants, each
    tagged with the attribute it selects on (similarity is looked up under
    the body constant's attribute)."""

    def constants(atoms: Iterable[Atom]) -> list[tuple[str, Value]]:
        found: list[tuple[str, Value]] = []
        for atom in atoms:
            schema = schemas.get(atom.relation_name)
            for pos, term in enumerate(atom.args):
                if isinstance(term, Constant):
                    attr = schema.attributes[pos].name if schema else ""
                    entry = (attr, term.value)
                    if entry not in found:
                        found.append(entry)
        return found

    pairs = []
    for attr, body_value in constants(rule.body):
        for _, head_value in constants([rule.head]):
            entry = (attr, body_value, head_value)
            if entry not in pairs:
                pairs.append(entry)
    return tuple(pairs)


def enumerate_gr(
    spj: SPJQuery, rules: RuleBase, schemas: Mapping[str, Schema]
) -> list[Candidate]:
    """One candidate per rule and per match of its body in the query.

    The matched occurrences are removed and a single occurrence of the rule's
    head (with the match substitution applied) takes the position of the
    first of them, inheriting its free index.
    """
    atoms = reconstruct_atoms(spj)
    out = []
    for rule_index, rule in enumerate(rules.rules, start=1):
        head_schema = schemas.get(rule.head.relation_name)
        if head_schema is None:
            raise TranslationError(
                f"rule #{rule_index}: head relation {rule.head.relation_name} "
                "is not in the database schema"
            )
        if head_schema.arity != len(rule.head.args):
            raise TranslationError(
                f"rule #{rule_index}: head arity does not match {rule.head.relation_name}"
            )
        for positions, theta_map in _rule_matches(rule, atoms):
            theta = MatchSubstitution(dict(theta_map))
            out.append(
                _gr_candidate(spj, rule, rule_index, theta, positions, head_schema, schemas)
            )
    return out


def _gr_candidate(
    spj: SPJQuery,
    rule: Rule,
    rule_index: int,
    theta: MatchSubstitution,
    positions: tuple[int, ...],
    head_schema: Schema,
    schemas: Mapping[str, Schema],
) -> Candidate:
    replaced_pos = set(positions)
    first_pos = min(replaced_pos)
    replaced_occs = [spj.occurrences[p] for p in sorted(replaced_pos)]
    replaced_indexes = tuple(o.index for o in replaced_occs)
    removed = set(replaced_indexes)
    head_index = spj.occurrences[first_pos].index

    head_atom = Atom(
        rule.head.relation_name, tuple(theta.apply(t) for t in rule.head.args)
    )
    head_attrs = tuple(OccAttr(head_index, d.name) for d in head_schema.attributes)
    head_occ = Occurrence(head_index, rule.head.relation_name, head_attrs, head_atom)

    occurrences = []
    for pos, occ in enumerate(spj.occurrences):
        if pos == first_pos:
            occurrences.append(head_occ)
        elif pos not in replaced_pos:
            occurrences.append(occ)

    selections = [x for x in spj.selections if x[0].occurrence_index not in removed]
    provenance = {
        a: t for a, t in spj.provenance.items() if a.occurrence_index not in removed
    }
    # Surviving class per variable; classes losing every member vanish and
    # are re-created below if the head still carries their variable.
    kept_classes: list[list[OccAttr]] = []
    class_of_var: dict[str, list[OccAttr]] = {}
    for cls in spj.eq_classes:
        kept = [m for m in cls if m.occurrence_index not in removed]
        var = spj.provenance[cls[0]]
        if kept:
            kept_classes.append(kept)
            if isinstance(var, Variable):
                class_of_var[var.name] = kept

    head_attr_of_var: dict[str, OccAttr] = {}
    for attr, decl, term in zip(head_attrs, head_schema.attributes, head_atom.args):
        provenance[attr] = term
        if isinstance(term, Constant):
            if isinstance(term.value, Fraction) != decl.is_numeric:
                raise TranslationError(
                    f"rule #{rule_index}: constant {term.value!r} does not fit "
                    f"{head_schema.relation_name}.{decl.name}"
                )
            selections.append((attr, term))
        else:
            cls = class_of_var.get(term.name)
            if cls is None:
                cls = []
                class_of_var[term.name] = cls
                kept_classes.append(cls)
            cls.append(attr)
            head_attr_of_var.setdefault(term.name, attr)

    projection = []
    for pa, name in spj.projection:
        if pa.occurrence_index not in removed:
            projection.append((pa, name))
            continue
        term = spj.provenance[pa]
        assert isinstance(term, Variable)
        repl = head_attr_of_var.get(term.name)
        if repl is None:
            survivors = [
                m for m in class_of_var.get(term.name, ())
                if m.occurrence_index not in removed
            ]
            repl = survivors[0] if survivors else None
        if repl is not None:
            projection.append((repl, name))
        # else: the variable was replaced away entirely and leaves the output

    query = SPJQuery(
        tuple(occurrences),
        tuple(projection),
        tuple(selections),
        tuple(tuple(cls) for cls in kept_classes),
        provenance,
    )
    step = RelaxationStep(
        Operator.GR,
        gr_rule_index=rule_index,
        gr_rule=rule,
        gr_theta=theta,
        gr_replaced=replaced_indexes,
        gr_replaced_labels=tuple(
            f"{o.relation_name}#{o.index}" for o in replaced_occs
        ),
        gr_occurrence=head_index,
        gr_constant_pairs=_rule_constant_pairs(rule, schemas),
    )
    return Candidate(query, step)


def _normalize_ops(ops_selected: Iterable[str]) -> set[str]:
    ops = {str(op).upper() for op in ops_selected}
    unknown = ops - {"DC", "AI", "GR"}
    if unknown:
        raise ValueError(f"unknown operator(s): {sorted(unknown)}")
    return ops


def relax_one_step(
    spj: SPJQuery,
    db: Database,
    rules: RuleBase | None = None,
    ops_selected: Iterable[str] = ("DC", "AI", "GR"),
) -> list[Candidate]:
    """Enumerate all selected one-step relaxations and evaluate each one.

    Candidates come out in a fixed order: occurrence drops by occurrence
    index, then anti-instantiations (constants in selection order, equality
    splits in class/member order), then rule replacements in rule/match
    order. Equality-split candidates are evaluated with witness values for
    the rest of their class so they can be weighted afterwards.
    """
    ops = _normalize_ops(ops_selected)
    cands: list[Candidate] = []
    if "DC" in ops:
        cands.extend(enumerate_dc(spj))
    if "AI" in ops:
        cands.extend(enumerate_ai(spj))
    if "GR" in ops:
        cands.extend(enumerate_gr(spj, rules or RuleBase(()), db.schemas))
    for seq, cand in enumerate(cands):
        cand.order_key = (OPERATOR_RANK[cand.step.operator], seq)
        witnesses = cand.step.ai_remaining if cand.step.operator is Operator.AI_EQ else ()
        cand.answers = evaluate(cand.query, db, aux_attrs=witnesses or ())
    return cands
