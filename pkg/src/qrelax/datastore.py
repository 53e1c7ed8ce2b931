"""Schemas, relations, and CSV ingestion for the in-memory database.

A database is a set of named relations described by a `schema.cfg` file and
populated from one CSV file per relation. Relations are duplicate-free sets
of rows; numeric attributes carry a closed range that every stored value must
respect. Databases are immutable after loading.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import DataError, SchemaError
from .values import Value, format_value, parse_rational

SYMBOLIC = "symbolic"
NUMERIC = "numeric"


@dataclass(frozen=True)
class AttributeDecl:
    """A named attribute: symbolic text, or numeric with a closed range."""

    name: str
    kind: str = SYMBOLIC
    range: tuple[Fraction, Fraction] | None = None

    def __post_init__(self):
        if self.kind not in (SYMBOLIC, NUMERIC):
            raise SchemaError(f"unknown attribute kind {self.kind!r}")
        if (self.kind == NUMERIC) != (self.range is not None):
            raise SchemaError(
                f"attribute {self.name}: a range is required exactly for numeric attributes"
            )
        if self.range is not None and not self.range[0] < self.range[1]:
            raise SchemaError(
                f"attribute {self.name}: empty range [{self.range[0]}, {self.range[1]}]"
            )

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


@dataclass(frozen=True)
class Schema:
    relation_name: str
    attributes: tuple[AttributeDecl, ...]

    def __post_init__(self):
        if not self.attributes:
            raise SchemaError(f"relation {self.relation_name} declares no attributes")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(
                f"relation {self.relation_name}: duplicate attribute name"
            )

    @property
    def arity(self) -> int:
        return len(self.attributes)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def index_of(self, attr_name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == attr_name:
                return i
        raise SchemaError(f"{self.relation_name} has no attribute {attr_name}")


@dataclass(frozen=True)
class Relation:
    """A schema plus a duplicate-free set of rows."""

    schema: Schema
    tuples: frozenset[tuple[Value, ...]]

    def __post_init__(self):
        for row in self.tuples:
            _check_row(self.schema, row)

    def __len__(self) -> int:
        return len(self.tuples)


@dataclass(frozen=True)
class Database:
    relations: dict[str, Relation]

    def __post_init__(self):
        for name, rel in self.relations.items():
            if rel.schema.relation_name != name:
                raise SchemaError(
                    f"relation {rel.schema.relation_name} stored under key {name}"
                )

    @property
    def schemas(self) -> dict[str, Schema]:
        return {name: rel.schema for name, rel in self.relations.items()}


def _check_row(schema: Schema, row: tuple) -> None:
    if len(row) != schema.arity:
        raise DataError(
            f"{schema.relation_name}: row has {len(row)} values, expected {schema.arity}"
        )
    for attr, value in zip(schema.attributes, row):
        if attr.is_numeric:
            if not isinstance(value, Fraction):
                raise DataError(
                    f"{schema.relation_name}.{attr.name}: expected a numeric value, got {value!r}"
                )
            lo, hi = attr.range
            if not lo <= value <= hi:
                raise DataError(
                    f"{schema.relation_name}.{attr.name}: value {format_value(value)} "
                    f"outside range [{format_value(lo)}, {format_value(hi)}]"
                )
        elif not isinstance(value, str):
            raise DataError(
                f"{schema.relation_name}.{attr.name}: expected text, got {value!r}"
            )


def _split_top_level(text: str) -> list[str]:
    """Split on commas that sit outside square brackets."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts if p.strip()]


def _parse_attribute(text: str, relation_name: str) -> AttributeDecl:
    if ":" not in text:
        raise SchemaError(f"relation {relation_name}: malformed attribute {text!r}")
    name, _, kind = text.partition(":")
    name, kind = name.strip(), kind.strip()
    if not name.replace("_", "a").isalnum():
        raise SchemaError(f"relation {relation_name}: bad attribute name {name!r}")
    if kind == "string":
        return AttributeDecl(name, SYMBOLIC)
    if kind.startswith("numeric"):
        bounds = kind[len("numeric"):].strip()
        if not (bounds.startswith("[") and bounds.endswith("]")):
            raise SchemaError(
                f"relation {relation_name}.{name}: numeric attributes need a range [lo,hi]"
            )
        pieces = bounds[1:-1].split(",")
        if len(pieces) != 2:
            raise SchemaError(f"relation {relation_name}.{name}: malformed range {bounds}")
        try:
            lo, hi = (parse_rational(p) for p in pieces)
        except ValueError as exc:
            raise SchemaError(f"relation {relation_name}.{name}: {exc}") from exc
        return AttributeDecl(name, NUMERIC, (lo, hi))
    raise SchemaError(f"relation {relation_name}.{name}: unknown type {kind!r}")


def load_schema(schema_text: str) -> list[Schema]:
    """Parse `schema.cfg` text: one `relation Name(...)` declaration per line."""
    schemas: list[Schema] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(schema_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("relation "):
            raise SchemaError(f"line {lineno}: expected a relation declaration")
        rest = line[len("relation "):].strip()
        if "(" not in rest or not rest.endswith(")"):
            raise SchemaError(f"line {lineno}: malformed declaration {line!r}")
        name, _, attr_text = rest[:-1].partition("(")
        name = name.strip()
        if name in seen:
            raise SchemaError(f"line {lineno}: duplicate relation {name}")
        seen.add(name)
        attrs = tuple(_parse_attribute(a, name) for a in _split_top_level(attr_text))
        schemas.append(Schema(name, attrs))
    return schemas


def load_relation_csv(schema: Schema, csv_text: str) -> Relation:
    """Load one relation from CSV text with a mandatory header row."""
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{schema.relation_name}: empty CSV, header row required")
    if tuple(header) != schema.attribute_names:
        raise DataError(
            f"{schema.relation_name}: header {header} does not match schema "
            f"attributes {list(schema.attribute_names)}"
        )
    rows: set[tuple[Value, ...]] = set()
    for cells in reader:
        if not cells:
            continue
        if len(cells) != schema.arity:
            raise DataError(
                f"{schema.relation_name}: row {cells} has {len(cells)} cells, "
                f"expected {schema.arity}"
            )
        row = []
        for attr, cell in zip(schema.attributes, cells):
            if attr.is_numeric:
                try:
                    row.append(parse_rational(cell))
                except ValueError as exc:
                    raise DataError(f"{schema.relation_name}.{attr.name}: {exc}") from exc
            else:
                row.append(cell)
        rows.add(tuple(row))
    return Relation(schema, frozenset(rows))


def relation_to_csv(rel: Relation) -> str:
    """Export a relation back to CSV; rows sorted for reproducible output."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(rel.schema.attribute_names)
    for row in sorted(rel.tuples, key=lambda r: tuple(format_value(v) for v in r)):
        writer.writerow([format_value(v) for v in row])
    return out.getvalue()


def load_database(data_dir: str | Path) -> Database:
    """Load `schema.cfg` plus `<relation>.csv` per declared relation."""
    root = Path(data_dir)
    schema_path = root / "schema.cfg"
    if not schema_path.is_file():
        raise DataError(f"no schema.cfg in {root}")
    schemas = load_schema(schema_path.read_text())
    relations: dict[str, Relation] = {}
    for schema in schemas:
        csv_path = root / f"{schema.relation_name}.csv"
        if not csv_path.is_file():
            raise DataError(
                f"missing data file for relation {schema.relation_name}: {csv_path}"
            )
        relations[schema.relation_name] = load_relation_csv(schema, csv_path.read_text())
    return Database(relations)
