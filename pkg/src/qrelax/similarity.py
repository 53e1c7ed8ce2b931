"""Similarity degrees between constants.

Three providers cover the usual cases: explicit pair tables, rooted
taxonomies with a choice of tree measures, and linear scaling over a numeric
range. A `SimilarityConfig` binds at most one provider per attribute and
supplies a global default degree for everything it does not know.

All providers guarantee degrees in [0, 1], reflexivity (`sim(a, a) = 1`), and
symmetry.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .datastore import Schema
from .errors import SimilarityError
from .values import Degree, Value, parse_rational

MEASURES = ("wupalmer", "path", "lch")


def _check_degree(d: Degree, context: str) -> Degree:
    if not 0 <= d <= 1:
        raise SimilarityError(f"{context}: degree {d} outside [0,1]")
    return d


@dataclass(frozen=True)
class PairTable:
    """Explicit symmetric degrees for pairs of constants."""

    entries: Mapping[tuple[str, str], Degree]
    default_sim: Degree = Fraction(0)

    def sim(self, a: Value, b: Value) -> Degree:
        if a == b:
            return Fraction(1)
        return self.entries.get(_pair_key(a, b), self.default_sim)


def _pair_key(a: Value, b: Value) -> tuple:
    ka, kb = str(a), str(b)
    return (a, b) if ka <= kb else (b, a)


def sim_pairs(table: PairTable, a: Value, b: Value) -> Degree:
    return table.sim(a, b)


def load_pair_table(csv_text: str, default_sim: Degree = Fraction(0)) -> PairTable:
    """Load `a,b,sim` rows; the table is symmetrically closed, and the same
    pair listed twice with different degrees is an error."""
    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader, None)
    if header != ["a", "b", "sim"]:
        raise SimilarityError(f"pair table must start with header a,b,sim, got {header}")
    entries: dict[tuple, Degree] = {}
    for cells in reader:
        if not cells:
            continue
        if len(cells) != 3:
            raise SimilarityError(f"pair table row {cells} needs exactly 3 cells")
        a, b, text = cells
        try:
            degree = _check_degree(parse_rational(text), f"pair ({a},{b})")
        except ValueError as exc:
            raise SimilarityError(f"pair ({a},{b}): {exc}") from exc
        key = _pair_key(a, b)
        if key in entries and entries[key] != degree:
            raise SimilarityError(
                f"conflicting degrees for pair ({a},{b}): {entries[key]} vs {degree}"
            )
        entries[key] = degree
    return PairTable(entries, default_sim)


class Taxonomy:
    """A rooted tree of symbolic values; depth of the root is 1.

    Depths and ancestor chains are precomputed at load so lookups are pure
    and cheap.
    """

    def __init__(self, parent: Mapping[str, str]):
        self.parent = dict(parent)
        children = set(self.parent)
        everyone = children | set(self.parent.values())
        roots = everyone - children
        if len(roots) != 1:
            raise SimilarityError(
                f"taxonomy must have exactly one root, found {sorted(roots)}"
            )
        (self.root,) = roots
        self.depth: dict[str, int] = {self.root: 1}
        for node in everyone:
            self._resolve_depth(node)
        self.max_depth = max(self.depth.values())

    def _resolve_depth(self, node: str) -> int:
        chain = []
        cur = node
        while cur not in self.depth:
            if cur in chain:
                raise SimilarityError(f"taxonomy cycle through {cur}")
            chain.append(cur)
            cur = self.parent[cur]
        d = self.depth[cur]
        for n in reversed(chain):
            d += 1
            self.depth[n] = d
        return self.depth[node]

    def __contains__(self, node: str) -> bool:
        return node in self.depth

    def lca(self, a: str, b: str) -> str:
        da, db = self.depth[a], self.depth[b]
        while da > db:
            a, da = self.parent[a], da - 1
        while db > da:
            b, db = self.parent[b], db - 1
        while a != b:
            a, b = self.parent[a], self.parent[b]
        return a

    def distance(self, a: str, b: str) -> int:
        """Shortest path length in edges, via the lowest common ancestor."""
        lca_depth = self.depth[self.lca(a, b)]
        return (self.depth[a] - lca_depth) + (self.depth[b] - lca_depth)

    def sim(self, measure: str, a: str, b: str) -> Degree:
        """Similarity of two nodes; callers must check membership first."""
        if a == b:
            return Fraction(1)
        if measure == "wupalmer":
            return Fraction(2 * self.depth[self.lca(a, b)], self.depth[a] + self.depth[b])
        if measure == "path":
            return Fraction(1, 1 + self.distance(a, b))
        if measure == "lch":
            # -log(d/(2D)) normalized by its maximum -log(1/(2D)); distance 0
            # is excluded by the reflexivity pre-check above.
            span = 2 * self.max_depth
            d = max(self.distance(a, b), 1)
            return math.log(span / d) / math.log(span)
        raise SimilarityError(f"unknown taxonomy measure {measure!r}")


def sim_taxonomy(
    t: Taxonomy, measure: str, a: Value, b: Value, default: Degree = Fraction(0)
) -> Degree:
    if measure not in MEASURES:
        raise SimilarityError(f"unknown taxonomy measure {measure!r}")
    if a == b:
        return Fraction(1)
    if not (isinstance(a, str) and a in t and isinstance(b, str) and b in t):
        return default
    return t.sim(measure, a, b)


def load_taxonomy(csv_text: str) -> Taxonomy:
    """Load `child,parent` rows; the single node that is never a child is
    the root."""
    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader, None)
    if header != ["child", "parent"]:
        raise SimilarityError(f"taxonomy must start with header child,parent, got {header}")
    parent: dict[str, str] = {}
    for cells in reader:
        if not cells:
            continue
        if len(cells) != 2:
            raise SimilarityError(f"taxonomy row {cells} needs exactly 2 cells")
        child, par = cells
        if child in parent and parent[child] != par:
            raise SimilarityError(f"node {child} has two parents")
        parent[child] = par
    if not parent:
        raise SimilarityError("empty taxonomy")
    return Taxonomy(parent)


@dataclass(frozen=True)
class NumericRange:
    """Linear similarity over a closed numeric range: 1 - |a-b| / (hi-lo)."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SimilarityError(f"empty numeric range [{self.lo}, {self.hi}]")

    def sim(self, a: Value, b: Value) -> Degree:
        if not isinstance(a, Fraction) or not isinstance(b, Fraction):
            raise SimilarityError(
                f"numeric similarity needs numeric values, got {a!r} and {b!r}"
            )
        scaled = 1 - abs(a - b) / (self.hi - self.lo)
        return max(Fraction(0), min(Fraction(1), scaled))


def sim_numeric(r: NumericRange, a: Value, b: Value) -> Degree:
    return r.sim(a, b)


@dataclass(frozen=True)
class TaxonomyBinding:
    taxonomy: Taxonomy
    measure: str


Provider = PairTable | TaxonomyBinding | NumericRange


@dataclass(frozen=True)
class SimilarityConfig:
    """Per-attribute provider bindings plus a global fallback degree."""

    providers: Mapping[str, Provider] = field(default_factory=dict)
    default_sim: Degree = Fraction(0)

    def sim(self, attribute: str, a: Value, b: Value) -> Degree:
        provider = self.providers.get(attribute)
        if provider is None:
            return Fraction(1) if a == b else self.default_sim
        if isinstance(provider, PairTable):
            return provider.sim(a, b)
        if isinstance(provider, TaxonomyBinding):
            return sim_taxonomy(provider.taxonomy, provider.measure, a, b, self.default_sim)
        return provider.sim(a, b)


def sim(cfg: SimilarityConfig, attribute: str, a: Value, b: Value) -> Degree:
    return cfg.sim(attribute, a, b)


def _numeric_range_from_schemas(attr: str, schemas: Mapping[str, Schema]) -> NumericRange:
    ranges = {
        decl.range
        for schema in schemas.values()
        for decl in schema.attributes
        if decl.name == attr and decl.is_numeric
    }
    if not ranges:
        raise SimilarityError(f"no numeric attribute {attr} in any schema")
    if len(ranges) > 1:
        raise SimilarityError(f"attribute {attr} has conflicting ranges across relations")
    lo, hi = ranges.pop()
    return NumericRange(lo, hi)


def load_similarity_config(
    path: str | Path, schemas: Mapping[str, Schema] | None = None
) -> SimilarityConfig:
    """Load a bindings file.

    Lines: `bind <Attr> pairs <file.csv>`, `bind <Attr> taxonomy <file.csv>
    <measure>`, `bind <Attr> numeric` (range taken from the schema), and
    `default_sim <degree>`. Paths are relative to the bindings file.
    """
    path = Path(path)
    base = path.parent
    default_sim: Degree = Fraction(0)
    binds: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if words[0] == "default_sim" and len(words) == 2:
            try:
                default_sim = _check_degree(parse_rational(words[1]), "default_sim")
            except ValueError as exc:
                raise SimilarityError(f"line {lineno}: {exc}") from exc
        elif words[0] == "bind":
            binds.append((lineno, words))
        else:
            raise SimilarityError(f"line {lineno}: cannot parse {line!r}")
    providers: dict[str, Provider] = {}
    for lineno, words in binds:
        if len(words) < 3:
            raise SimilarityError(f"line {lineno}: incomplete bind")
        _, attr, kind, *rest = words
        if attr in providers:
            raise SimilarityError(f"line {lineno}: attribute {attr} bound twice")
        if kind == "pairs" and len(rest) == 1:
            providers[attr] = load_pair_table((base / rest[0]).read_text(), default_sim)
        elif kind == "taxonomy" and len(rest) == 2:
            if rest[1] not in MEASURES:
                raise SimilarityError(f"line {lineno}: unknown measure {rest[1]!r}")
            providers[attr] = TaxonomyBinding(load_taxonomy((base / rest[0]).read_text()), rest[1])
        elif kind == "numeric" and not rest:
            providers[attr] = _numeric_range_from_schemas(attr, schemas or {})
        else:
            raise SimilarityError(f"line {lineno}: cannot parse bind {words}")
    return SimilarityConfig(providers, default_sim)
