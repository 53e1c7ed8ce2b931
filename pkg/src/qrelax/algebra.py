"""Select-project-join normal form and its evaluators.

A conjunctive query becomes: one *occurrence* per atom (the base relation with
all attributes renamed to `attr#i`), a projection list mapping occurrence
attributes to output columns, a selection set binding occurrence attributes to
constants, and a partition of occurrence attributes into equality classes (one
class per query variable). Keeping equalities as a partition rather than
pairwise conditions means removing a single membership never disconnects the
rest of the class.

Two evaluators are provided: `evaluate` (per-occurrence selection pushdown,
then hash joins over shared equality classes) and `evaluate_naive` (full
cartesian product, then filtering), the latter kept deliberately simple so it
can serve as a correctness oracle for the former.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .datastore import Database, Schema
from .errors import TranslationError
from .querylang import Atom, ConjunctiveQuery, Constant, Term, Variable
from .values import Degree, Value, format_degree, format_value, row_sort_key


@dataclass(frozen=True)
class OccAttr:
    """An attribute of one relation occurrence, addressed as `attr#i`."""

    occurrence_index: int
    attribute_name: str

    @property
    def alias(self) -> str:
        return f"{self.attribute_name}#{self.occurrence_index}"

    def __repr__(self) -> str:
        return self.alias


@dataclass(frozen=True)
class Occurrence:
    """One use of a base relation inside the join expression."""

    index: int
    relation_name: str
    attrs: tuple[OccAttr, ...]
    source_atom: Atom


@dataclass(frozen=True)
class SPJQuery:
    """Algebraic normal form of a positive conjunctive query.

    `projection` is the ordered output schema (occurrence attribute, output
    name); `selections` binds occurrence attributes to constants; `eq_classes`
    partitions variable positions into equality classes; `provenance` maps
    every occurrence attribute back to the term it carries.
    """

    occurrences: tuple[Occurrence, ...]
    projection: tuple[tuple[OccAttr, str], ...]
    selections: tuple[tuple[OccAttr, Constant], ...]
    eq_classes: tuple[tuple[OccAttr, ...], ...]
    provenance: Mapping[OccAttr, Term]

    def __post_init__(self):
        if not self.occurrences:
            raise TranslationError("a query needs at least one relation occurrence")
        owned = {a for occ in self.occurrences for a in occ.attrs}
        indexes = [occ.index for occ in self.occurrences]
        if len(set(indexes)) != len(indexes):
            raise TranslationError("duplicate occurrence index")
        for a, _ in self.projection:
            if a not in owned:
                raise TranslationError(f"projection attribute {a.alias} has no occurrence")
        for a, _ in self.selections:
            if a not in owned:
                raise TranslationError(f"selection attribute {a.alias} has no occurrence")
        seen: set[OccAttr] = set()
        for cls in self.eq_classes:
            if not cls:
                raise TranslationError("empty equality class")
            for m in cls:
                if m not in owned:
                    raise TranslationError(f"equality member {m.alias} has no occurrence")
                if m in seen:
                    raise TranslationError(f"{m.alias} appears in two equality classes")
                seen.add(m)
        names = [name for _, name in self.projection]
        if len(set(names)) != len(names):
            raise TranslationError("duplicate output column name")
        for a in owned:
            if a not in self.provenance:
                raise TranslationError(f"no provenance for {a.alias}")

    def occurrence(self, index: int) -> Occurrence:
        for occ in self.occurrences:
            if occ.index == index:
                return occ
        raise KeyError(index)

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(name for _, name in self.projection)


@dataclass(frozen=True)
class AnswerTable:
    """Output columns plus a duplicate-free set of rows, optionally weighted."""

    columns: tuple[str, ...]
    rows: frozenset[tuple[Value, ...]]
    degrees: dict[tuple, Degree] | None = None
    score: Degree | None = None
    # Per-row witness values for non-projected attributes, used by the
    # weighting layer; not part of table identity.
    aux: dict[tuple, frozenset[tuple]] | None = field(default=None, compare=False)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise TranslationError("row arity does not match columns")
        if self.degrees is not None:
            for row in self.rows:
                if row not in self.degrees:
                    raise TranslationError("degree missing for a row")
                if not 0 <= self.degrees[row] <= 1:
                    raise TranslationError("degree outside [0,1]")

    @property
    def is_empty(self) -> bool:
        return not self.rows

    def sorted_rows(self) -> list[tuple[Value, ...]]:
        return sorted(self.rows, key=row_sort_key)

    def to_text(self) -> str:
        """Line-oriented rendering; rows in lexicographic order."""
        with_sim = self.degrees is not None
        header = list(self.columns) + (["#sim"] if with_sim else [])
        lines = [" | ".join(header)]
        for row in self.sorted_rows():
            cells = [format_value(v) for v in row]
            if with_sim:
                cells.append(format_degree(self.degrees[row]))
            lines.append(" | ".join(cells))
        return "\n".join(lines)

    def to_csv(self) -> str:
        with_sim = self.degrees is not None
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(list(self.columns) + (["#sim"] if with_sim else []))
        for row in self.sorted_rows():
            cells = [format_value(v) for v in row]
            if with_sim:
                cells.append(format_degree(self.degrees[row]))
            writer.writerow(cells)
        return out.getvalue()


def translate(q: ConjunctiveQuery, schemas: Mapping[str, Schema]) -> SPJQuery:
    """Build the SPJ normal form of a conjunctive query.

    Occurrence i is atom i; constant arguments become selections, each
    variable's positions form one equality class, and each free variable is
    projected from its first occurrence.
    """
    occurrences: list[Occurrence] = []
    selections: list[tuple[OccAttr, Constant]] = []
    classes: dict[str, list[OccAttr]] = {}
    var_order: list[str] = []
    provenance: dict[OccAttr, Term] = {}
    for i, atom in enumerate(q.atoms, start=1):
        schema = schemas.get(atom.relation_name)
        if schema is None:
            raise TranslationError(f"unknown relation {atom.relation_name}")
        if len(atom.args) != schema.arity:
            raise TranslationError(
                f"{atom.relation_name} expects {schema.arity} argument(s), "
                f"got {len(atom.args)}"
            )
        attrs = tuple(OccAttr(i, decl.name) for decl in schema.attributes)
        occurrences.append(Occurrence(i, atom.relation_name, attrs, atom))
        for occattr, decl, term in zip(attrs, schema.attributes, atom.args):
            provenance[occattr] = term
            if isinstance(term, Constant):
                if isinstance(term.value, Fraction) != decl.is_numeric:
                    raise TranslationError(
                        f"constant {term.value!r} does not fit "
                        f"{atom.relation_name}.{decl.name} ({decl.kind})"
                    )
                selections.append((occattr, term))
            else:
                if term.name not in classes:
                    classes[term.name] = []
                    var_order.append(term.name)
                classes[term.name].append(occattr)
    projection = tuple(
        (classes[v][0], v) for v in var_order if v not in q.existential_vars
    )
    eq_classes = tuple(tuple(classes[v]) for v in var_order)
    return SPJQuery(tuple(occurrences), projection, tuple(selections), eq_classes, provenance)


# --- evaluation ---------------------------------------------------------


def _relation_for(occ: Occurrence, db: Database):
    rel = db.relations.get(occ.relation_name)
    if rel is None:
        raise TranslationError(f"relation {occ.relation_name} not in database")
    if rel.schema.attribute_names != tuple(a.attribute_name for a in occ.attrs):
        raise TranslationError(f"schema mismatch for {occ.relation_name}")
    return rel


def _scan(spj: SPJQuery, occ: Occurrence, db: Database) -> list[dict[OccAttr, Value]]:
    """Rows of one occurrence with local selections and intra-occurrence
    equalities already applied."""
    rel = _relation_for(occ, db)
    wanted = {a: c.value for a, c in spj.selections if a.occurrence_index == occ.index}
    local_classes = [
        [m for m in cls if m.occurrence_index == occ.index]
        for cls in spj.eq_classes
    ]
    local_classes = [cls for cls in local_classes if len(cls) >= 2]
    out = []
    for row in rel.tuples:
        env = dict(zip(occ.attrs, row))
        if any(env[a] != v for a, v in wanted.items()):
            continue
        if any(len({env[m] for m in cls}) != 1 for cls in local_classes):
            continue
        out.append(env)
    return out


def _join_assignments(spj: SPJQuery, db: Database) -> list[dict[OccAttr, Value]]:
    """Fold occurrences left to right with hash joins on shared eq classes."""
    acc: list[dict[OccAttr, Value]] | None = None
    acc_attrs: set[OccAttr] = set()
    for occ in spj.occurrences:
        rows = _scan(spj, occ, db)
        if acc is None:
            acc, acc_attrs = rows, set(occ.attrs)
            continue
        occ_attrs = set(occ.attrs)
        join_keys: list[tuple[OccAttr, OccAttr]] = []
        for cls in spj.eq_classes:
            left = next((m for m in cls if m in acc_attrs), None)
            right = next((m for m in cls if m in occ_attrs), None)
            if left is not None and right is not None:
                join_keys.append((left, right))
        index: dict[tuple, list[dict[OccAttr, Value]]] = {}
        for env in rows:
            key = tuple(env[r] for _, r in join_keys)
            index.setdefault(key, []).append(env)
        merged = []
        for left_env in acc:
            key = tuple(left_env[l] for l, _ in join_keys)
            for right_env in index.get(key, ()):
                merged.append({**left_env, **right_env})
        acc = merged
        acc_attrs |= occ_attrs
    return acc if acc is not None else []


def evaluate(
    spj: SPJQuery,
    db: Database,
    aux_attrs: Iterable[OccAttr] = (),
) -> AnswerTable:
    """Evaluate with selection pushdown and hash joins.

    `aux_attrs` requests witness values of non-projected attributes: the
    resulting table maps each output row to the set of value tuples those
    attributes took in the joined rows that produced it.
    """
    aux_attrs = tuple(aux_attrs)
    rows: set[tuple[Value, ...]] = set()
    aux: dict[tuple, set[tuple]] = {}
    for env in _join_assignments(spj, db):
        row = tuple(env[a] for a, _ in spj.projection)
        rows.add(row)
        if aux_attrs:
            aux.setdefault(row, set()).add(tuple(env[a] for a in aux_attrs))
    packed = {row: frozenset(w) for row, w in aux.items()} if aux_attrs else None
    return AnswerTable(spj.columns, frozenset(rows), aux=packed)


def evaluate_naive(spj: SPJQuery, db: Database) -> AnswerTable:
    """Correctness oracle: materialize the cartesian product of all
    occurrences, filter by selections then equality classes, project."""
    relations = [_relation_for(occ, db) for occ in spj.occurrences]
    rows: set[tuple[Value, ...]] = set()
    for combo in itertools.product(*(rel.tuples for rel in relations)):
        env: dict[OccAttr, Value] = {}
        for occ, rel_row in zip(spj.occurrences, combo):
            env.update(zip(occ.attrs, rel_row))
        if any(env[a] != c.value for a, c in spj.selections):
            continue
        if any(len({env[m] for m in cls}) != 1 for cls in spj.eq_classes):
            continue
        rows.add(tuple(env[a] for a, _ in spj.projection))
    return AnswerTable(spj.columns, frozenset(rows))


# --- reconstruction and canonical forms ----------------------------------


def reconstruct_atoms(spj: SPJQuery) -> list[Atom]:
    """Atoms of the logical query this SPJ form denotes, via provenance."""
    return [
        Atom(occ.relation_name, tuple(spj.provenance[a] for a in occ.attrs))
        for occ in spj.occurrences
    ]


def reconstruct_query(spj: SPJQuery) -> ConjunctiveQuery:
    """Logical query with existential prefix for the non-projected variables."""
    atoms = reconstruct_atoms(spj)
    projected = set()
    for occattr, _ in spj.projection:
        term = spj.provenance[occattr]
        if isinstance(term, Variable):
            projected.add(term.name)
    occurring = {v for atom in atoms for v in atom.variables()}
    return ConjunctiveQuery(tuple(atoms), frozenset(occurring - projected))


def canonical_key(spj: SPJQuery):
    """Structural identity up to fresh-variable names, output column order,
    and occurrence renumbering (occurrences are renumbered by position)."""
    remap = {occ.index: pos for pos, occ in enumerate(spj.occurrences, start=1)}

    def norm(a: OccAttr) -> tuple[int, str]:
        return (remap[a.occurrence_index], a.attribute_name)

    return (
        tuple(occ.relation_name for occ in spj.occurrences),
        frozenset((norm(a), c.value) for a, c in spj.selections),
        frozenset(frozenset(norm(m) for m in cls) for cls in spj.eq_classes),
        frozenset(norm(a) for a, _ in spj.projection),
    )


def render_spj(spj: SPJQuery) -> str:
    """Stable one-line rendering used in debugging output and golden tests."""
    project = ", ".join(f"{name}:={a.alias}" for a, name in spj.projection)
    select = ", ".join(f"{a.alias}={format_value(c.value)}" for a, c in spj.selections)
    eq = ", ".join("{" + ",".join(m.alias for m in cls) + "}" for cls in spj.eq_classes)
    src = ", ".join(f"{occ.relation_name}#{occ.index}" for occ in spj.occurrences)
    return f"PROJECT [{project}] SELECT [{select}] EQ [{eq}] FROM {src}"
